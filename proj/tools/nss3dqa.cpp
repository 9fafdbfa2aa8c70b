// nss3dqa command-line front end.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nss3dqa/csv.hpp"
#include "nss3dqa/evaluation.hpp"
#include "nss3dqa/features.hpp"
#include "nss3dqa/model_io.hpp"
#include "nss3dqa/parallel.hpp"
#include "nss3dqa/svr.hpp"
#include "nss3dqa/synth.hpp"

namespace fs = std::filesystem;
using namespace nss3dqa;

namespace {

struct RunConfig {
  std::size_t knn = 10;
  bool include_self = false;
  std::size_t bins = kDefaultEntropyBins;
  double curvature_radius_frac = 0.01;
  double C = 1.0;
  double epsilon = 0.1;
  std::optional<double> gamma;
  std::size_t max_iterations = 1'000'000;
  double mos_scale = 10.0;
  std::optional<unsigned> threads;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_groups;

  ExtractConfig extract(unsigned per_model_threads) const {
    ExtractConfig c;
    c.knn = knn;
    c.include_self = include_self;
    c.entropy_bins = bins;
    c.curvature_radius_frac = curvature_radius_frac;
    c.threads = per_model_threads;
    return c;
  }

  SvrParams svr() const {
    SvrParams p;
    p.C = C;
    p.epsilon = epsilon;
    p.gamma = gamma;
    p.max_iterations = max_iterations;
    return p;
  }

  unsigned thread_count() const {
    if (threads) return std::max(1u, *threads);
    if (const char* env = std::getenv("NSS3DQA_THREADS")) {
      unsigned v = 0;
      const std::string_view s(env);
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || v == 0)
        throw Error("NSS3DQA_THREADS must be a positive integer, got '" + std::string(s) + "'");
      return v;
    }
    return default_thread_count();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["knn"] = knn;
    j["include_self"] = include_self;
    j["entropy_bins"] = bins;
    j["curvature_radius_frac"] = curvature_radius_frac;
    j["C"] = C;
    j["epsilon"] = epsilon;
    j["gamma"] = gamma ? nlohmann::json(*gamma) : nlohmann::json("scale");
    j["mos_scale"] = mos_scale;
    j["seed"] = seed;
    j["feature_groups"] = feature_groups;
    return j;
  }
};

void add_extract_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--knn", cfg.knn, "Neighbors per point for eigenfeatures")->check(CLI::Range(1, 100000));
  app->add_flag("--include-self", cfg.include_self, "Count the query point as one of its k neighbors");
  app->add_option("--bins", cfg.bins, "Entropy histogram bins")->check(CLI::Range(2, 1 << 20));
  app->add_option("--curvature-radius-frac", cfg.curvature_radius_frac,
                  "Mesh curvature ball radius as a fraction of the bounding-box diagonal")
      ->check(CLI::PositiveNumber);
}

void add_thread_option(CLI::App* app, RunConfig& cfg) {
  app->add_option("--threads", cfg.threads, "Worker threads (default: NSS3DQA_THREADS, then all cores)")
      ->check(CLI::Range(1, 4096));
}

void add_svr_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--C", cfg.C, "SVR penalty")->check(CLI::PositiveNumber);
  app->add_option("--epsilon", cfg.epsilon, "SVR tube half-width on the scaled target")->check(CLI::NonNegativeNumber);
  app->add_option("--gamma", cfg.gamma, "RBF width (default: 1 / (d * var(X)))")->check(CLI::PositiveNumber);
  app->add_option("--max-iterations", cfg.max_iterations, "SMO iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--mos-scale", cfg.mos_scale, "Divide MOS by this value during training")
      ->check(CLI::IsMember({1.0, 10.0, 100.0}));
  app->add_option("--feature-groups", cfg.feature_groups, "Feature groups F1..F8 to use (default: all)")
      ->delimiter(',');
}

// ---------------------------------------------------------------------------
// Extraction

struct Extracted {
  std::string id;
  std::optional<QualityFeatureVector> features;
  std::size_t elements = 0;
  double milliseconds = 0;
  std::string error;
  ErrorKind error_kind = ErrorKind::input;
};

std::vector<Extracted> extract_all(const std::vector<std::string>& ids, const std::vector<fs::path>& paths,
                                   const RunConfig& cfg) {
  const unsigned threads = cfg.thread_count();
  const unsigned per_model = ids.size() >= threads ? 1u : threads;
  const auto ecfg = cfg.extract(per_model);
  std::vector<Extracted> out(ids.size());
  parallel_for(ids.size(), std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(ids.size(), 1))),
               [&](std::size_t i) {
                 auto& r = out[i];
                 r.id = ids[i];
                 const auto t0 = std::chrono::steady_clock::now();
                 try {
                   const auto model = read_model(paths[i]);
                   r.elements = positions_of(model).size();
                   r.features = assemble_features(model, ecfg);
                 } catch (const Error& e) {
                   r.error = e.what();
                   r.error_kind = e.kind();
                 } catch (const std::exception& e) {
                   r.error = paths[i].string() + ": " + e.what();
                 }
                 r.milliseconds =
                     std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
               });
  return out;
}

/// Lists failures on stderr and throws if any model failed.
void check_extraction(const std::vector<Extracted>& results) {
  std::size_t failed = 0;
  bool numerical_only = true;
  for (const auto& r : results)
    if (!r.features) {
      ++failed;
      if (r.error_kind != ErrorKind::numerical) numerical_only = false;
      std::cerr << "error: " << r.error << "\n";
    }
  if (failed > 0)
    throw Error(numerical_only ? ErrorKind::numerical : ErrorKind::input,
                std::to_string(failed) + " of " + std::to_string(results.size()) + " models failed");
}

void log_timing(const std::vector<Extracted>& results, const std::optional<fs::path>& timing_out) {
  double total = 0;
  std::string csv = "model_id,kind,elements,milliseconds\n";
  for (const auto& r : results) {
    if (!r.features) continue;
    std::cerr << "extracted " << r.id << " (" << r.elements << " elements) in " << std::fixed << std::setprecision(1)
              << r.milliseconds << " ms\n";
    total += r.milliseconds;
    csv += detail::csv::quote(r.id) + "," + to_string(r.features->kind) + "," + std::to_string(r.elements) + "," +
           format_double(r.milliseconds) + "\n";
  }
  if (!results.empty())
    std::cerr << "average extraction time: " << std::fixed << std::setprecision(1)
              << total / static_cast<double>(results.size()) << " ms per model\n";
  std::cerr.unsetf(std::ios::floatfield);
  if (timing_out) detail::csv::write_text(*timing_out, csv);
}

void emit(const std::optional<fs::path>& out, const std::string& text) {
  if (out) detail::csv::write_text(*out, text);
  else std::cout << text << std::flush;
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

// ---------------------------------------------------------------------------
// Labeled data

struct Dataset {
  LabeledFeatures data;
  ModelKind kind = ModelKind::point_cloud;
  std::vector<std::size_t> columns;  // empty: all
};

Dataset load_dataset(const fs::path& manifest_path, const std::optional<fs::path>& features_path,
                     const RunConfig& cfg) {
  const auto entries = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<FeatureRow> rows;
  if (features_path) {
    const auto table = read_feature_csv(*features_path);
    std::map<std::string, const FeatureRow*> by_id;
    for (const auto& r : table) by_id.emplace(r.model_id, &r);
    for (const auto& e : entries) {
      auto it = by_id.find(e.path);
      if (it == by_id.end()) it = by_id.find(resolve(base, e.path).string());
      if (it == by_id.end()) throw Error("no features for manifest entry '" + e.path + "' in " + features_path->string());
      rows.push_back(*it->second);
    }
  } else {
    std::vector<std::string> ids;
    std::vector<fs::path> paths;
    for (const auto& e : entries) {
      ids.push_back(e.path);
      paths.push_back(resolve(base, e.path));
    }
    const auto results = extract_all(ids, paths, cfg);
    check_extraction(results);
    log_timing(results, std::nullopt);
    for (const auto& r : results) rows.push_back({r.id, r.features->kind, r.features->values});
  }

  Dataset ds;
  ds.kind = rows.front().kind;
  for (const auto& r : rows)
    if (r.kind != ds.kind) throw Error("manifest mixes point clouds and meshes; train one kind at a time");
  if (!cfg.feature_groups.empty()) ds.columns = feature_group_indices(ds.kind, cfg.feature_groups);

  const std::size_t width = ds.columns.empty() ? feature_count(ds.kind) : ds.columns.size();
  ds.data.x = Matrix(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto dst = ds.data.x.row(i);
    for (std::size_t j = 0; j < width; ++j) dst[j] = rows[i].values[ds.columns.empty() ? j : ds.columns[j]];
    ds.data.mos.push_back(entries[i].mos);
    ds.data.groups.push_back(entries[i].group);
    ds.data.ids.push_back(entries[i].path);
  }
  ds.data.mos_scale = cfg.mos_scale;
  ds.data.kind = to_string(ds.kind);
  return ds;
}

std::vector<double> model_inputs(const SvrModel& m, const FeatureRow& r) {
  if (m.kind != to_string(r.kind))
    throw Error("model was trained on " + m.kind + " features but '" + r.model_id + "' is a " + to_string(r.kind));
  if (m.feature_columns.empty()) return r.values;
  std::vector<double> x;
  for (auto c : m.feature_columns) {
    if (c >= r.values.size()) throw Error("model references feature column " + std::to_string(c) + " out of range");
    x.push_back(r.values[c]);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Text tables

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << *v;
  return s.str();
}

std::string fmt(double v) { return fmt_opt(v); }

std::string table(const std::vector<std::string>& head, const std::vector<std::vector<std::string>>& body) {
  std::vector<std::size_t> w(head.size());
  for (std::size_t j = 0; j < head.size(); ++j) w[j] = head[j].size();
  for (const auto& r : body)
    for (std::size_t j = 0; j < r.size(); ++j) w[j] = std::max(w[j], r[j].size());
  std::ostringstream s;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t j = 0; j < r.size(); ++j) s << (j ? "  " : "") << std::setw(static_cast<int>(w[j])) << r[j];
    s << "\n";
  };
  line(head);
  for (const auto& r : body) line(r);
  return s.str();
}

std::vector<std::string> metric_cells(const Metrics& m) {
  return {fmt_opt(m.plcc), fmt_opt(m.srcc), fmt_opt(m.krcc), fmt(m.rmse), std::to_string(m.n)};
}

std::vector<std::string> metric_cells(const AverageMetrics& m) {
  return {fmt_opt(m.plcc), fmt_opt(m.srcc), fmt_opt(m.krcc), fmt(m.rmse),
          std::to_string(m.defined_splits) + "/" + std::to_string(m.splits)};
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "+") + x;
  return s;
}

/// JSON to --out (table to stdout) or JSON to stdout (table to stderr).
void emit_report(const std::optional<fs::path>& out, const nlohmann::json& j, const std::string& tbl) {
  emit(out, j.dump(2) + "\n");
  (out ? std::cout : std::cerr) << tbl << std::flush;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Args {
  RunConfig cfg;
  std::vector<std::string> inputs;
  std::optional<fs::path> out, manifest, features, model, flags_out, timing_out, out_dir;
  std::vector<double> fractions{0.2, 0.4, 0.6, 0.8};
  std::size_t repeats = 1;
  std::size_t groups = 5, points = 3000, levels = 4;
  bool mesh = false, ascii = false;
};

void cmd_extract(const Args& a) {
  std::vector<std::string> ids = a.inputs;
  std::vector<fs::path> paths(a.inputs.begin(), a.inputs.end());
  if (a.manifest) {
    for (const auto& e : read_manifest(*a.manifest)) {
      ids.push_back(e.path);
      paths.push_back(resolve(a.manifest->parent_path(), e.path));
    }
  }
  if (ids.empty()) throw Error("extract: no input models (give paths or --manifest)");
  const auto results = extract_all(ids, paths, a.cfg);
  check_extraction(results);
  log_timing(results, a.timing_out);

  std::vector<FeatureRow> rows;
  std::string flags = "model_id,domain,flags,ggd_degenerate,aggd_degenerate,gamma_degenerate,aggd_one_sided\n";
  for (const auto& r : results) {
    rows.push_back({r.id, r.features->kind, r.features->values});
    const auto layout = domain_layout(r.features->kind);
    for (std::size_t d = 0; d < layout.size(); ++d) {
      const auto f = r.features->domain_flags[d];
      flags += detail::csv::quote(r.id) + "," + to_string(layout[d]) + "," + std::to_string(f) + "," +
               std::to_string((f & kGgdDegenerate) != 0) + "," + std::to_string((f & kAggdDegenerate) != 0) + "," +
               std::to_string((f & kGammaDegenerate) != 0) + "," + std::to_string((f & kAggdOneSided) != 0) + "\n";
    }
  }
  emit(a.out, format_feature_csv(rows));
  if (a.flags_out) detail::csv::write_text(*a.flags_out, flags);
}

void cmd_train(const Args& a) {
  const auto ds = load_dataset(*a.manifest, a.features, a.cfg);
  std::vector<double> y(ds.data.mos.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ds.data.mos[i] / ds.data.mos_scale;
  auto model = train_svr(ds.data.x, y, a.cfg.svr(), ds.data.mos_scale);
  model.kind = to_string(ds.kind);
  model.feature_columns = ds.columns;
  save_model(model, *a.out);
  std::cerr << "trained on " << ds.data.x.rows << " models, " << model.support_vectors.rows << " support vectors, "
            << model.iterations << " iterations\n";
}

std::vector<FeatureRow> rows_for_prediction(const Args& a) {
  if (a.features) return read_feature_csv(*a.features);
  if (a.inputs.empty()) throw Error("predict: no input models (give paths or --features)");
  const std::vector<fs::path> paths(a.inputs.begin(), a.inputs.end());
  const auto results = extract_all(a.inputs, paths, a.cfg);
  check_extraction(results);
  log_timing(results, a.timing_out);
  std::vector<FeatureRow> rows;
  for (const auto& r : results) rows.push_back({r.id, r.features->kind, r.features->values});
  return rows;
}

void cmd_predict(const Args& a) {
  const auto model = load_model(*a.model);
  std::string csv = "model_id,score\n";
  for (const auto& r : rows_for_prediction(a))
    csv += detail::csv::quote(r.model_id) + "," + format_double(predict(model, model_inputs(model, r))) + "\n";
  emit(a.out, csv);
}

void cmd_evaluate(const Args& a) {
  const auto model = load_model(*a.model);
  RunConfig cfg = a.cfg;
  cfg.feature_groups.clear();
  const auto ds = load_dataset(*a.manifest, a.features, cfg);
  std::vector<double> pred;
  for (std::size_t i = 0; i < ds.data.x.rows; ++i) {
    const auto row = ds.data.x.row(i);
    pred.push_back(predict(model, model_inputs(model, {ds.data.ids[i], ds.kind, {row.begin(), row.end()}})));
  }
  const auto m = correlations(pred, ds.data.mos);
  nlohmann::json j;
  j["command"] = "evaluate";
  j["metrics"] = to_json(m);
  auto preds = nlohmann::json::array();
  for (std::size_t i = 0; i < pred.size(); ++i)
    preds.push_back({{"model_id", ds.data.ids[i]}, {"mos", ds.data.mos[i]}, {"prediction", pred[i]}});
  j["predictions"] = preds;
  emit_report(a.out, j, table({"PLCC", "SRCC", "KRCC", "RMSE", "n"}, {metric_cells(m)}));
}

void cmd_cv(const Args& a) {
  const auto ds = load_dataset(*a.manifest, a.features, a.cfg);
  const auto rep = run_cv(ds.data, a.cfg.svr(), a.cfg.thread_count());
  nlohmann::json j = to_json(rep);
  j["command"] = "cv";
  j["config"] = a.cfg.to_json();
  std::vector<std::vector<std::string>> body;
  for (const auto& f : rep.folds) {
    auto cells = metric_cells(f.metrics);
    cells.insert(cells.begin(), join(f.test_groups));
    body.push_back(cells);
  }
  auto avg = metric_cells(rep.average);
  avg.insert(avg.begin(), "average");
  body.push_back(avg);
  emit_report(a.out, j, table({"test group", "PLCC", "SRCC", "KRCC", "RMSE", "n"}, body));
}

void cmd_sweep(const Args& a) {
  const auto ds = load_dataset(*a.manifest, a.features, a.cfg);
  const auto entries =
      data_sensitivity_sweep(ds.data, a.fractions, a.cfg.seed, a.repeats, a.cfg.svr(), a.cfg.thread_count());
  nlohmann::json j = to_json(entries);
  j["command"] = "sweep";
  j["config"] = a.cfg.to_json();
  j["config"]["repeats"] = a.repeats;
  std::vector<std::vector<std::string>> body;
  for (const auto& e : entries) {
    auto cells = metric_cells(e.average);
    std::ostringstream f;
    f << e.fraction;
    cells.insert(cells.begin(), f.str());
    body.push_back(cells);
  }
  emit_report(a.out, j, table({"fraction", "PLCC", "SRCC", "KRCC", "RMSE", "splits"}, body));
}

void cmd_synth(const Args& a) {
  SynthDatasetSpec spec;
  spec.groups = a.groups;
  spec.points = a.points;
  spec.levels = a.levels;
  spec.meshes = a.mesh;
  spec.seed = a.cfg.seed;
  const auto items = synth_dataset(spec);
  fs::create_directories(*a.out_dir);
  std::vector<ManifestEntry> entries;
  for (const auto& it : items) {
    const std::string file = it.name + ".ply";
    write_model(it.model, *a.out_dir / file, a.ascii ? PlyEncoding::ascii : PlyEncoding::binary_le);
    entries.push_back({file, it.mos, it.group});
  }
  const std::string comment = "synthetic dataset, seed " + std::to_string(spec.seed) + "\n" +
                              synthetic_mos_formula(spec);
  detail::csv::write_text(*a.out_dir / "manifest.csv", format_manifest(entries, comment));
  std::cerr << "wrote " << items.size() << " models and manifest.csv to " << a.out_dir->string() << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"No-reference quality assessment of colored point clouds and meshes"};
  app.require_subcommand(1);
  Args a;

  auto* ex = app.add_subcommand("extract", "Write the feature CSV of each model");
  ex->add_option("inputs", a.inputs, "PLY or OBJ files");
  ex->add_option("--manifest", a.manifest, "Also extract every model listed in a manifest");
  ex->add_option("--out", a.out, "Feature CSV path (default: stdout)");
  ex->add_option("--flags-out", a.flags_out, "Per-domain degeneracy flags CSV");
  ex->add_option("--timing-out", a.timing_out, "Per-model timing CSV");
  add_extract_options(ex, a.cfg);
  add_thread_option(ex, a.cfg);

  auto* tr = app.add_subcommand("train", "Train an SVR model on a manifest");
  tr->add_option("--manifest", a.manifest, "Manifest CSV (path,mos,group)")->required();
  tr->add_option("--features", a.features, "Precomputed feature CSV (default: extract from the manifest)");
  tr->add_option("--out", a.out, "Model JSON path")->required();
  add_extract_options(tr, a.cfg);
  add_svr_options(tr, a.cfg);
  add_thread_option(tr, a.cfg);

  auto* pr = app.add_subcommand("predict", "Score models with a trained model");
  pr->add_option("--model", a.model, "Model JSON")->required();
  pr->add_option("inputs", a.inputs, "PLY or OBJ files");
  pr->add_option("--features", a.features, "Feature CSV instead of model files");
  pr->add_option("--out", a.out, "Score CSV path (default: stdout)");
  pr->add_option("--timing-out", a.timing_out, "Per-model timing CSV");
  add_extract_options(pr, a.cfg);
  add_thread_option(pr, a.cfg);

  auto* ev = app.add_subcommand("evaluate", "Score a manifest with a trained model and report correlations");
  ev->add_option("--model", a.model, "Model JSON")->required();
  ev->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  ev->add_option("--features", a.features, "Precomputed feature CSV");
  ev->add_option("--out", a.out, "Report JSON path (default: stdout)");
  add_extract_options(ev, a.cfg);
  add_thread_option(ev, a.cfg);

  auto* cv = app.add_subcommand("cv", "Leave-one-group-out cross-validation");
  cv->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  cv->add_option("--features", a.features, "Precomputed feature CSV");
  cv->add_option("--out", a.out, "Report JSON path (default: stdout)");
  add_extract_options(cv, a.cfg);
  add_svr_options(cv, a.cfg);
  add_thread_option(cv, a.cfg);

  auto* sw = app.add_subcommand("sweep", "Training-fraction sensitivity sweep");
  sw->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  sw->add_option("--features", a.features, "Precomputed feature CSV");
  sw->add_option("--out", a.out, "Report JSON path (default: stdout)");
  sw->add_option("--fractions", a.fractions, "Training fractions")->delimiter(',');
  sw->add_option("--repeats", a.repeats, "Random splits per fraction")->check(CLI::Range(1, 100000));
  sw->add_option("--seed", a.cfg.seed, "Split seed");
  add_extract_options(sw, a.cfg);
  add_svr_options(sw, a.cfg);
  add_thread_option(sw, a.cfg);

  auto* sy = app.add_subcommand("synth", "Write a synthetic scored dataset");
  sy->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sy->add_option("--groups", a.groups, "Content groups")->check(CLI::Range(2, 1000));
  sy->add_option("--points", a.points, "Points (or minimum vertices) per model")->check(CLI::Range(10, 10000000));
  sy->add_option("--levels", a.levels, "Distortion levels per type")->check(CLI::Range(1, 4));
  sy->add_flag("--mesh", a.mesh, "Generate icosphere meshes instead of point clouds");
  sy->add_flag("--ascii", a.ascii, "Write ASCII PLY");
  sy->add_option("--seed", a.cfg.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ex->parsed()) cmd_extract(a);
    else if (tr->parsed()) cmd_train(a);
    else if (pr->parsed()) cmd_predict(a);
    else if (ev->parsed()) cmd_evaluate(a);
    else if (cv->parsed()) cmd_cv(a);
    else if (sw->parsed()) cmd_sweep(a);
    else if (sy->parsed()) cmd_synth(a);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::numerical ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
