#pragma once

// Feature standardization and epsilon-SVR with an RBF kernel, trained by SMO
// with maximal-violating-pair working-set selection.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace nss3dqa {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rs) {
    Matrix m(rs.size(), rs.empty() ? 0 : rs.front().size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (rs[i].size() != m.cols) throw Error("ragged matrix rows");
      std::copy(rs[i].begin(), rs[i].end(), m.data.begin() + i * m.cols);
    }
    return m;
  }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Per-feature standardization with training-set mean and population std.
/// Zero-variance features map to 0.
struct FeatureScaler {
  std::vector<double> means, stds;

  static FeatureScaler fit(const Matrix& x) {
    if (x.rows < 2) throw Error("scaler needs at least 2 rows");
    FeatureScaler s;
    s.means.assign(x.cols, 0.0);
    s.stds.assign(x.cols, 0.0);
    for (std::size_t j = 0; j < x.cols; ++j) {
      double m = 0;
      for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
      m /= static_cast<double>(x.rows);
      double v = 0;
      for (std::size_t i = 0; i < x.rows; ++i) v += (x(i, j) - m) * (x(i, j) - m);
      s.means[j] = m;
      s.stds[j] = std::sqrt(v / static_cast<double>(x.rows));
    }
    return s;
  }

  std::size_t dim() const { return means.size(); }

  void transform_into(std::span<const double> in, std::span<double> out) const {
    if (in.size() != dim())
      throw Error("feature dimension mismatch: expected " + std::to_string(dim()) + ", got " + std::to_string(in.size()));
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = stds[j] > 0 ? (in[j] - means[j]) / stds[j] : 0.0;
  }

  std::vector<double> transform(std::span<const double> in) const {
    std::vector<double> out(in.size());
    transform_into(in, out);
    return out;
  }

  Matrix transform(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) transform_into(x.row(i), out.row(i));
    return out;
  }
};

inline FeatureScaler fit_scaler(const Matrix& x) { return FeatureScaler::fit(x); }

struct SvrParams {
  double C = 1.0;
  double epsilon = 0.1;
  /// RBF width; nullopt means 1 / (n_features * variance of the scaled data).
  std::optional<double> gamma;
  double tolerance = 1e-3;
  std::size_t max_iterations = 1'000'000;
};

struct SvrModel {
  Matrix support_vectors;  // in scaled feature space
  std::vector<double> dual_coefs;
  double bias = 0;
  double gamma = 1;
  double C = 1;
  double epsilon = 0.1;
  FeatureScaler scaler;
  double mos_scale = 1;
  /// Free-form label of the feature layout the model was trained on.
  std::string kind = "generic";
  /// Columns of the full feature vector the model consumes; empty means all.
  std::vector<std::size_t> feature_columns;
  /// SMO iterations used in training (not serialized).
  std::size_t iterations = 0;

  std::size_t dim() const { return scaler.dim(); }

  /// Decision value on the scaled target range (before mos_scale).
  double decision(std::span<const double> x) const {
    const auto xs = scaler.transform(x);
    double f = bias;
    for (std::size_t s = 0; s < support_vectors.rows; ++s) {
      const auto sv = support_vectors.row(s);
      double d2 = 0;
      for (std::size_t j = 0; j < xs.size(); ++j) d2 += (xs[j] - sv[j]) * (xs[j] - sv[j]);
      f += dual_coefs[s] * std::exp(-gamma * d2);
    }
    return f;
  }
};

/// Predicted score in the database's native MOS units.
inline double predict(const SvrModel& m, std::span<const double> x) { return m.decision(x) * m.mos_scale; }

inline std::vector<double> predict(const SvrModel& m, const Matrix& x) {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(m, x.row(i));
  return out;
}

namespace detail::svr {

inline double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0;
  for (std::size_t j = 0; j < a.size(); ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
  return std::exp(-gamma * d2);
}

}  // namespace detail::svr

/// Trains on targets already divided by mos_scale; the model multiplies its
/// output back by mos_scale.
inline SvrModel train_svr(const Matrix& x, std::span<const double> y, const SvrParams& p = {},
                          double mos_scale = 1.0) {
  const std::size_t n = x.rows;
  if (n < 2) throw Error("SVR training needs at least 2 rows");
  if (y.size() != n)
    throw Error("SVR training: " + std::to_string(n) + " rows but " + std::to_string(y.size()) + " targets");
  if (!(p.C > 0)) throw Error("SVR C must be positive");
  if (!(p.epsilon >= 0)) throw Error("SVR epsilon must be non-negative");
  if (p.gamma && !(*p.gamma > 0)) throw Error("SVR gamma must be positive");
  if (!(mos_scale > 0) || !std::isfinite(mos_scale)) throw Error("MOS scale must be positive");
  for (double v : x.data)
    if (!std::isfinite(v)) throw Error("SVR training features contain a non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) throw Error("SVR training targets contain a non-finite value");

  SvrModel model;
  model.C = p.C;
  model.epsilon = p.epsilon;
  model.mos_scale = mos_scale;
  model.scaler = FeatureScaler::fit(x);
  const Matrix xs = model.scaler.transform(x);

  if (p.gamma) {
    model.gamma = *p.gamma;
  } else {
    double m = 0, v = 0;
    for (double e : xs.data) m += e;
    m /= static_cast<double>(xs.data.size());
    for (double e : xs.data) v += (e - m) * (e - m);
    v /= static_cast<double>(xs.data.size());
    model.gamma = v > 0 ? 1.0 / (static_cast<double>(xs.cols) * v) : 1.0;
  }

  // Gram matrix of the n training rows.
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    K[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) K[i * n + j] = K[j * n + i] = detail::svr::rbf(xs.row(i), xs.row(j), model.gamma);
  }

  // 2n dual variables: alpha_t for t < n (sign +1), alpha*_t for t >= n (sign -1).
  const std::size_t l = 2 * n;
  const double C = p.C;
  std::vector<double> alpha(l, 0.0), grad(l);
  std::vector<signed char> sign(l);
  for (std::size_t t = 0; t < n; ++t) {
    sign[t] = 1;
    sign[t + n] = -1;
    grad[t] = p.epsilon - y[t];
    grad[t + n] = p.epsilon + y[t];
  }
  auto q = [&](std::size_t a, std::size_t b) { return sign[a] * sign[b] * K[(a % n) * n + (b % n)]; };
  auto at_upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto at_lower = [&](std::size_t t) { return alpha[t] <= 0; };
  constexpr double tau = 1e-12;

  std::size_t iter = 0;
  for (;; ++iter) {
    double gmax = -HUGE_VAL, gmax2 = -HUGE_VAL;
    std::size_t i = l, j = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (sign[t] == 1) {
        if (!at_upper(t) && -grad[t] > gmax) gmax = -grad[t], i = t;
        if (!at_lower(t) && grad[t] > gmax2) gmax2 = grad[t], j = t;
      } else {
        if (!at_upper(t) && -grad[t] > gmax2) gmax2 = -grad[t], j = t;
        if (!at_lower(t) && grad[t] > gmax) gmax = grad[t], i = t;
      }
    }
    if (i == l || j == l || gmax + gmax2 < p.tolerance) break;
    if (iter >= p.max_iterations)
      throw ConvergenceError("SMO did not converge within " + std::to_string(p.max_iterations) + " iterations");

    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qij = q(i, j);
    if (sign[i] != sign[j]) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < l; ++t) grad[t] += q(i, t) * dai + q(j, t) * daj;
  }
  model.iterations = iter;

  // Offset: mean of sign*grad over free variables, else midpoint of the bounds.
  double ub = HUGE_VAL, lb = -HUGE_VAL, free_sum = 0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yg = sign[t] * grad[t];
    if (at_upper(t)) {
      if (sign[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (sign[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  model.bias = -rho;

  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] - alpha[t + n] != 0) sv.push_back(t);
  model.support_vectors = Matrix(sv.size(), xs.cols);
  model.dual_coefs.resize(sv.size());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    std::copy(xs.row(sv[s]).begin(), xs.row(sv[s]).end(), model.support_vectors.row(s).begin());
    model.dual_coefs[s] = alpha[sv[s]] - alpha[sv[s] + n];
  }
  return model;
}

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json to_json(const SvrModel& m) {
  nlohmann::json j;
  j["version"] = kModelSchemaVersion;
  j["kind"] = m.kind;
  j["C"] = m.C;
  j["epsilon"] = m.epsilon;
  j["gamma"] = m.gamma;
  j["bias"] = m.bias;
  j["mos_scale"] = m.mos_scale;
  j["feature_columns"] = m.feature_columns;
  j["scaler"] = {{"means", m.scaler.means}, {"stds", m.scaler.stds}};
  auto svs = nlohmann::json::array();
  for (std::size_t s = 0; s < m.support_vectors.rows; ++s) {
    const auto r = m.support_vectors.row(s);
    svs.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["support_vectors"] = std::move(svs);
  j["dual_coefs"] = m.dual_coefs;
  return j;
}

inline SvrModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("version")) throw Error("model file: missing version field");
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion)
      throw Error("model file: unsupported schema version " + std::to_string(version) + " (expected " +
                  std::to_string(kModelSchemaVersion) + ")");
    SvrModel m;
    m.kind = j.at("kind").get<std::string>();
    m.C = j.at("C").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.bias = j.at("bias").get<double>();
    m.mos_scale = j.at("mos_scale").get<double>();
    if (j.contains("feature_columns")) m.feature_columns = j.at("feature_columns").get<std::vector<std::size_t>>();
    m.scaler.means = j.at("scaler").at("means").get<std::vector<double>>();
    m.scaler.stds = j.at("scaler").at("stds").get<std::vector<double>>();
    m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
    const auto svs = j.at("support_vectors").get<std::vector<std::vector<double>>>();
    if (m.scaler.means.size() != m.scaler.stds.size()) throw Error("model file: scaler size mismatch");
    if (svs.size() != m.dual_coefs.size()) throw Error("model file: support vector / coefficient count mismatch");
    m.support_vectors = Matrix(svs.size(), m.scaler.dim());
    for (std::size_t s = 0; s < svs.size(); ++s) {
      if (svs[s].size() != m.scaler.dim()) throw Error("model file: support vector dimension mismatch");
      std::copy(svs[s].begin(), svs[s].end(), m.support_vectors.row(s).begin());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model file: ") + e.what());
  }
}

inline void save_model(const SvrModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << to_json(m).dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline SvrModel load_model_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("model file: corrupt JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline SvrModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model_json(ss.str());
}

}  // namespace nss3dqa
