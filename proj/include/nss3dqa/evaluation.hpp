#pragma once

// Correlation criteria, leave-one-group-out cross-validation, ablation
// feature-group selection and training-fraction sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "svr.hpp"

namespace nss3dqa {

// ---------------------------------------------------------------------------
// Correlations

/// Average ranks (1-based); tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  const auto n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Pearson correlation; nullopt when either input has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0) || !(sbb > 0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

namespace detail::eval {

inline std::uint64_t tie_pairs_sorted(const std::vector<double>& sorted) {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const std::uint64_t run = j - i;
    t += run * (run - 1) / 2;
    i = j;
  }
  return t;
}

/// Sorts v ascending and returns the number of strict inversions.
inline std::uint64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t inv = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size()), hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          inv += mid - i;
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return inv;
}

}  // namespace detail::eval

/// Kendall tau-b in O(n log n); nullopt when either input is constant.
inline std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  const auto n = a.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  std::uint64_t ties_a = 0, ties_joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && a[idx[j]] == a[idx[i]]) ++j;
    const std::uint64_t run = j - i;
    ties_a += run * (run - 1) / 2;
    for (std::size_t k = i; k < j;) {
      std::size_t m = k;
      while (m < j && b[idx[m]] == b[idx[k]]) ++m;
      const std::uint64_t jr = m - k;
      ties_joint += jr * (jr - 1) / 2;
      k = m;
    }
    i = j;
  }
  std::vector<double> yb(n);
  for (std::size_t i = 0; i < n; ++i) yb[i] = b[idx[i]];
  const std::uint64_t discordant = detail::eval::count_inversions(yb);
  const std::uint64_t ties_b = detail::eval::tie_pairs_sorted(yb);
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const double den = std::sqrt(static_cast<double>(total - ties_a) * static_cast<double>(total - ties_b));
  if (!(den > 0)) return std::nullopt;
  const double num = static_cast<double>(total) - static_cast<double>(ties_a) - static_cast<double>(ties_b) +
                     static_cast<double>(ties_joint) - 2.0 * static_cast<double>(discordant);
  return std::clamp(num / den, -1.0, 1.0);
}

struct Metrics {
  std::optional<double> plcc, srcc, krcc;
  double rmse = 0;
  std::size_t n = 0;

  bool correlations_defined() const { return plcc && srcc && krcc; }
};

/// PLCC on raw values, SRCC on average ranks, KRCC as tau-b, RMSE in MOS units.
/// Correlations are nullopt when either vector has zero variance.
inline Metrics correlations(std::span<const double> pred, std::span<const double> mos) {
  if (pred.size() != mos.size())
    throw Error("correlations: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(mos.size()) +
                " scores");
  if (pred.size() < 3) throw Error("correlations need at least 3 pairs");
  Metrics m;
  m.n = pred.size();
  double se = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - mos[i]) * (pred[i] - mos[i]);
  m.rmse = std::sqrt(se / static_cast<double>(pred.size()));
  m.plcc = pearson(pred, mos);
  if (m.plcc) {
    m.srcc = spearman(pred, mos);
    m.krcc = kendall_tau_b(pred, mos);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Datasets and folds

/// Feature rows with their scores and content groups.
struct LabeledFeatures {
  Matrix x;
  std::vector<double> mos;
  std::vector<std::string> groups;
  std::vector<std::string> ids;
  double mos_scale = 1.0;
  std::string kind = "generic";
};

/// Distinct groups in order of first appearance.
inline std::vector<std::string> distinct_groups(std::span<const std::string> groups) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& g : groups)
    if (seen.insert(g).second) out.push_back(g);
  return out;
}

struct Fold {
  std::vector<std::string> train_groups;
  std::string test_group;
};

/// One fold per group, each group held out exactly once.
inline std::vector<Fold> loocv_folds(std::span<const std::string> groups) {
  const auto g = distinct_groups(groups);
  if (g.size() < 2) throw Error("cross-validation needs at least 2 content groups, got " + std::to_string(g.size()));
  std::vector<Fold> folds;
  for (const auto& test : g) {
    Fold f;
    f.test_group = test;
    for (const auto& other : g)
      if (other != test) f.train_groups.push_back(other);
    folds.push_back(std::move(f));
  }
  return folds;
}

struct SplitResult {
  std::vector<std::string> train_groups, test_groups;
  std::size_t n_train = 0, n_test = 0;
  Metrics metrics;
};

struct AverageMetrics {
  std::optional<double> plcc, srcc, krcc;
  double rmse = 0;
  std::size_t defined_splits = 0;  // splits with defined correlations
  std::size_t splits = 0;
};

struct CvReport {
  std::vector<SplitResult> folds;
  AverageMetrics average;
};

inline AverageMetrics average_metrics(std::span<const SplitResult> splits) {
  AverageMetrics a;
  a.splits = splits.size();
  double p = 0, s = 0, k = 0, r = 0;
  for (const auto& sp : splits) {
    r += sp.metrics.rmse;
    if (!sp.metrics.correlations_defined()) continue;
    ++a.defined_splits;
    p += *sp.metrics.plcc;
    s += *sp.metrics.srcc;
    k += *sp.metrics.krcc;
  }
  if (!splits.empty()) a.rmse = r / static_cast<double>(splits.size());
  if (a.defined_splits > 0) {
    const auto d = static_cast<double>(a.defined_splits);
    a.plcc = p / d;
    a.srcc = s / d;
    a.krcc = k / d;
  }
  return a;
}

/// Trains on rows of `train_groups`, predicts rows of `test_groups`.
inline SplitResult evaluate_split(const LabeledFeatures& data, const std::vector<std::string>& train_groups,
                                  const std::vector<std::string>& test_groups, const SvrParams& params) {
  const std::set<std::string> tr(train_groups.begin(), train_groups.end());
  const std::set<std::string> te(test_groups.begin(), test_groups.end());
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < data.x.rows; ++i) {
    if (tr.count(data.groups[i])) train_rows.push_back(i);
    else if (te.count(data.groups[i])) test_rows.push_back(i);
  }
  SplitResult res;
  res.train_groups = train_groups;
  res.test_groups = test_groups;
  res.n_train = train_rows.size();
  res.n_test = test_rows.size();

  Matrix xtr(train_rows.size(), data.x.cols);
  std::vector<double> ytr(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    const auto r = data.x.row(train_rows[i]);
    std::copy(r.begin(), r.end(), xtr.row(i).begin());
    ytr[i] = data.mos[train_rows[i]] / data.mos_scale;
  }
  const auto model = train_svr(xtr, ytr, params, data.mos_scale);
  std::vector<double> pred(test_rows.size()), truth(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    pred[i] = predict(model, data.x.row(test_rows[i]));
    truth[i] = data.mos[test_rows[i]];
  }
  res.metrics = correlations(pred, truth);
  return res;
}

inline void check_dataset(const LabeledFeatures& data) {
  if (data.mos.size() != data.x.rows || data.groups.size() != data.x.rows)
    throw Error("dataset: feature rows, scores and groups differ in length");
  if (!(data.mos_scale > 0)) throw Error("dataset: MOS scale must be positive");
  for (double v : data.mos)
    if (!std::isfinite(v)) throw Error("dataset: non-finite MOS");
}

/// Leave-one-group-out cross-validation; folds are evaluated independently and
/// averaged without weights.
inline CvReport run_cv(const LabeledFeatures& data, const SvrParams& params = {}, unsigned threads = 1) {
  check_dataset(data);
  const auto folds = loocv_folds(data.groups);
  CvReport rep;
  rep.folds.resize(folds.size());
  parallel_for(folds.size(), threads, [&](std::size_t i) {
    rep.folds[i] = evaluate_split(data, folds[i].train_groups, {folds[i].test_group}, params);
  });
  rep.average = average_metrics(rep.folds);
  return rep;
}

// ---------------------------------------------------------------------------
// Feature groups F1..F8

/// F1/F5: mean, std, entropy; F2/F6: GGD; F3/F7: AGGD; F4/F8: Gamma.
/// F1-F4 cover geometry domains, F5-F8 color domains.
inline std::vector<std::size_t> feature_group_indices(ModelKind kind, std::span<const std::string> labels) {
  if (labels.empty()) throw Error("no feature groups selected");
  const auto layout = domain_layout(kind);
  const std::size_t d = layout.size();
  const std::size_t ng = geometry_domain_count(kind);
  std::set<std::size_t> chosen;
  for (const auto& lab : labels) {
    if (lab.size() != 2 || (lab[0] != 'F' && lab[0] != 'f') || lab[1] < '1' || lab[1] > '8')
      throw Error("unknown feature group '" + lab + "' (expected F1..F8)");
    const int g = lab[1] - '1';
    const bool color = g >= 4;
    const std::size_t dom_lo = color ? ng : 0, dom_hi = color ? d : ng;
    std::vector<ParamBlock> blocks;
    switch (g % 4) {
      case 0: blocks = {ParamBlock::mean_std, ParamBlock::entropy}; break;
      case 1: blocks = {ParamBlock::ggd}; break;
      case 2: blocks = {ParamBlock::aggd}; break;
      default: blocks = {ParamBlock::gamma}; break;
    }
    for (auto b : blocks) {
      const auto sp = block_span(b, d);
      for (std::size_t dom = dom_lo; dom < dom_hi; ++dom)
        for (std::size_t w = 0; w < sp.width; ++w) chosen.insert(sp.offset + dom * sp.width + w);
    }
  }
  return {chosen.begin(), chosen.end()};
}

inline std::vector<double> select_feature_groups(const QualityFeatureVector& v, std::span<const std::string> labels) {
  if (v.values.size() != feature_count(v.kind)) throw Error("feature vector has unexpected length");
  std::vector<double> out;
  for (auto i : feature_group_indices(v.kind, labels)) out.push_back(v.values[i]);
  return out;
}

inline Matrix select_columns(const Matrix& x, std::span<const std::size_t> cols) {
  Matrix out(x.rows, cols.size());
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j] >= x.cols) throw Error("feature column out of range");
      out(i, j) = x(i, cols[j]);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Training-fraction sweep

/// Number of training groups for a fraction: nearest integer to fraction * groups.
inline std::size_t training_group_count(double fraction, std::size_t groups) {
  if (!(fraction > 0 && fraction < 1)) throw Error("training fraction must lie in (0, 1)");
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(groups)));
  if (k == 0) throw Error("training fraction " + std::to_string(fraction) + " leaves no training group");
  if (k >= groups) throw Error("training fraction " + std::to_string(fraction) + " leaves no test group");
  return k;
}

struct SweepEntry {
  double fraction = 0;
  std::vector<SplitResult> repeats;
  AverageMetrics average;
};

/// For each fraction, draws whole groups (seeded) into the training set and
/// tests on the pooled remaining groups.
inline std::vector<SweepEntry> data_sensitivity_sweep(const LabeledFeatures& data, std::span<const double> fractions,
                                                      std::uint64_t seed = 0, std::size_t repeats = 1,
                                                      const SvrParams& params = {}, unsigned threads = 1) {
  check_dataset(data);
  if (repeats == 0) throw Error("sweep needs at least one repeat");
  const auto groups = distinct_groups(data.groups);
  std::vector<SweepEntry> out(fractions.size());
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    out[f].fraction = fractions[f];
    out[f].repeats.resize(repeats);
    const auto k = training_group_count(fractions[f], groups.size());
    std::vector<std::vector<std::string>> train(repeats), test(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      std::mt19937_64 rng(seed + 1000003ull * f + r);
      auto order = groups;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
      train[r].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      test[r].assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    }
    parallel_for(repeats, threads,
                 [&](std::size_t r) { out[f].repeats[r] = evaluate_split(data, train[r], test[r], params); });
    out[f].average = average_metrics(out[f].repeats);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json to_json(const Metrics& m) {
  return {{"plcc", opt_json(m.plcc)}, {"srcc", opt_json(m.srcc)}, {"krcc", opt_json(m.krcc)},
          {"rmse", m.rmse},           {"n", m.n}};
}

inline nlohmann::json to_json(const AverageMetrics& m) {
  return {{"plcc", opt_json(m.plcc)}, {"srcc", opt_json(m.srcc)}, {"krcc", opt_json(m.krcc)},
          {"rmse", m.rmse},           {"defined_splits", m.defined_splits}, {"splits", m.splits}};
}

inline nlohmann::json to_json(const SplitResult& s) {
  return {{"train_groups", s.train_groups}, {"test_groups", s.test_groups}, {"n_train", s.n_train},
          {"n_test", s.n_test},             {"metrics", to_json(s.metrics)}};
}

inline nlohmann::json to_json(const CvReport& r) {
  auto folds = nlohmann::json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  return {{"folds", folds}, {"average", to_json(r.average)}};
}

inline nlohmann::json to_json(const std::vector<SweepEntry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) {
    auto reps = nlohmann::json::array();
    for (const auto& r : e.repeats) reps.push_back(to_json(r));
    arr.push_back({{"fraction", e.fraction}, {"repeats", reps}, {"average", to_json(e.average)}});
  }
  return {{"entries", arr}};
}

}  // namespace nss3dqa
