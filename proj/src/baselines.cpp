#include "stressnp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "stressnp/errors.hpp"

namespace stressnp {

using Eigen::Index;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

void require_finite(const RowMatrix& x, const VectorXd& y) {
  if (!x.allFinite()) throw ValidationError("X", "non-finite feature value");
  if (!y.allFinite()) throw ValidationError("y", "non-finite label");
  if (x.rows() != y.size())
    throw ValidationError("y", "length does not match number of rows");
  for (Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw ValidationError("y", "labels must be 0 or 1");
}

VectorXd to_signed(const VectorXd& y) {
  return (2.0 * y.array() - 1.0).matrix();
}

// log(1 + exp(v)) without overflow.
double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

ScalerParams scaler_fit(const RowMatrix& x_train) {
  if (x_train.rows() == 0) throw ParameterError("cannot fit scaler on no rows");
  return {x_train.colwise().minCoeff().transpose(),
          x_train.colwise().maxCoeff().transpose()};
}

RowMatrix scaler_apply(const ScalerParams& p, const RowMatrix& x) {
  if (x.cols() != p.min.size())
    throw ParameterError("scaler width does not match matrix");
  RowMatrix out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double range = p.max(j) - p.min(j);
    for (Index i = 0; i < x.rows(); ++i)
      out(i, j) = range > 0.0 ? 2.0 * (x(i, j) - p.min(j)) / range - 1.0 : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

double lasso_objective(const VectorXd& w, double b, const RowMatrix& x,
                       const VectorXd& y, double C) {
  const VectorXd yt = to_signed(y);
  const VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  for (Index i = 0; i < z.size(); ++i) loss += softplus(-yt(i) * z(i));
  return w.lpNorm<1>() + C * loss;
}

LassoModel lasso_train(const RowMatrix& x, const VectorXd& y,
                       const LassoOptions& opts) {
  require_finite(x, y);
  const Index d = x.cols();
  const VectorXd yt = to_signed(y);
  const double C = opts.C;

  auto smooth = [&](const VectorXd& w, double b, VectorXd* gw, double* gb) {
    const VectorXd z = (x * w).array() + b;
    double f = 0.0;
    VectorXd g(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      f += softplus(-yt(i) * z(i));
      g(i) = -C * yt(i) * sigmoid(-yt(i) * z(i));
    }
    if (gw) {
      *gw = x.transpose() * g;
      *gb = g.sum();
    }
    return C * f;
  };
  auto soft = [](const VectorXd& v, double t) {
    return (v.array().sign() * (v.array().abs() - t).max(0.0)).matrix();
  };

  VectorXd w = VectorXd::Zero(d), yw = w;
  double b = 0.0, yb = 0.0;
  double t = 1.0, L = 1.0;
  double f_prev = smooth(w, b, nullptr, nullptr) + w.lpNorm<1>();
  LassoModel m;
  m.C = C;

  VectorXd gw;
  double gb = 0.0;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double fy = smooth(yw, yb, &gw, &gb);
    VectorXd w_new;
    double b_new = 0.0, f_smooth_new = 0.0;
    while (true) {
      w_new = soft(yw - gw / L, 1.0 / L);
      b_new = yb - gb / L;
      f_smooth_new = smooth(w_new, b_new, nullptr, nullptr);
      const VectorXd dw = w_new - yw;
      const double db = b_new - yb;
      const double model = fy + gw.dot(dw) + gb * db +
                           0.5 * L * (dw.squaredNorm() + db * db);
      if (f_smooth_new <= model + 1e-12 * std::abs(model)) break;
      L *= 2.0;
      if (!std::isfinite(L)) throw TrainingError("lasso line search diverged");
    }
    const double f_new = f_smooth_new + w_new.lpNorm<1>();
    if (f_new > f_prev && t > 1.0) {
      // Momentum overshoot: restart from the last accepted iterate.
      yw = w;
      yb = b;
      t = 1.0;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_new;
    yw = w_new + beta * (w_new - w);
    yb = b_new + beta * (b_new - b);
    w = std::move(w_new);
    b = b_new;
    t = t_new;
    const double rel = std::abs(f_prev - f_new) / std::max(std::abs(f_prev), 1e-300);
    f_prev = f_new;
    if (rel < opts.rel_tol) {
      ++it;
      break;
    }
  }
  m.w = w;
  m.b = b;
  m.iterations = it;
  return m;
}

VectorXd lasso_proba(const LassoModel& m, const RowMatrix& x) {
  VectorXd z = (x * m.w).array() + m.b;
  for (Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
  return z;
}

// ---------------------------------------------------------------------------

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

namespace {

Eigen::MatrixXd kernel_matrix(const RowMatrix& a, const RowMatrix& b, double gamma) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j)
      k(i, j) = std::exp(-gamma * (a.row(i) - b.row(j)).squaredNorm());
  return k;
}

}  // namespace

SmoResult smo_solve(const Eigen::MatrixXd& K, const VectorXd& yt, double C,
                    double tol) {
  const Index n = yt.size();
  constexpr double kTau = 1e-12;
  VectorXd alpha = VectorXd::Zero(n);
  VectorXd G = VectorXd::Constant(n, -1.0);  // gradient of 1/2 a'Qa - e'a

  auto q = [&](Index i, Index j) { return yt(i) * yt(j) * K(i, j); };
  auto is_up = [&](Index t) {
    return (yt(t) > 0 && alpha(t) < C) || (yt(t) < 0 && alpha(t) > 0);
  };
  auto is_low = [&](Index t) {
    return (yt(t) > 0 && alpha(t) > 0) || (yt(t) < 0 && alpha(t) < C);
  };

  const int max_iter = static_cast<int>(std::max<Index>(10000000, 100 * n));
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    Index i = -1;
    for (Index t = 0; t < n; ++t)
      if (is_up(t) && -yt(t) * G(t) > gmax) {
        gmax = -yt(t) * G(t);
        i = t;
      }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Index j = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (!is_low(t)) continue;
      gmax2 = std::max(gmax2, yt(t) * G(t));
      if (i < 0) continue;
      const double grad_diff = gmax + yt(t) * G(t);
      if (grad_diff > 0.0) {
        double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj < obj_min) {
          obj_min = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol) break;

    const double ai_old = alpha(i), aj_old = alpha(j);
    if (yt(i) != yt(j)) {
      double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = -diff; }
      }
      if (diff > 0.0) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = C - diff; }
      } else {
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = C + diff; }
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (G(i) - G(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = sum - C; }
      } else {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = sum; }
      }
      if (sum > C) {
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = sum - C; }
      } else {
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = sum; }
      }
    }
    const double dai = alpha(i) - ai_old, daj = alpha(j) - aj_old;
    for (Index t = 0; t < n; ++t) G(t) += q(t, i) * dai + q(t, j) * daj;
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  int n_free = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = yt(t) * G(t);
    if (alpha(t) >= C) {
      if (yt(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0.0) {
      if (yt(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  return {alpha, -rho, iter};
}

std::pair<double, double> platt_fit(const VectorXd& dec, const VectorXd& y) {
  const Index n = dec.size();
  double prior1 = y.sum(), prior0 = static_cast<double>(n) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  VectorXd t(n);
  for (Index i = 0; i < n; ++i) t(i) = y(i) > 0.5 ? hi : lo;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double v = dec(i) * a + b;
      f += v >= 0.0 ? t(i) * v + std::log1p(std::exp(-v))
                    : (t(i) - 1.0) * v + std::log1p(std::exp(v));
    }
    return f;
  };

  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(A, B);
  constexpr double kSigma = 1e-12, kMinStep = 1e-10, kEps = 1e-5;
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double v = dec(i) * A + B;
      double p, q;
      if (v >= 0.0) {
        p = std::exp(-v) / (1.0 + std::exp(-v));
        q = 1.0 / (1.0 + std::exp(-v));
      } else {
        p = 1.0 / (1.0 + std::exp(v));
        q = std::exp(v) / (1.0 + std::exp(v));
      }
      const double d2 = p * q;
      h11 += dec(i) * dec(i) * d2;
      h22 += d2;
      h21 += dec(i) * d2;
      const double d1 = t(i) - p;
      g1 += dec(i) * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = A + step * dA, nb = B + step * dB;
      const double nf = objective(na, nb);
      if (nf < fval + 0.0001 * step * gd) {
        A = na;
        B = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {A, B};
}

namespace {

double platt_proba(double f, double a, double b) {
  const double v = f * a + b;
  return v >= 0.0 ? std::exp(-v) / (1.0 + std::exp(-v)) : 1.0 / (1.0 + std::exp(v));
}

SvmModel fit_svm_core(const RowMatrix& x, const VectorXd& y, double C,
                      double gamma, double tol) {
  const VectorXd yt = to_signed(y);
  const auto K = kernel_matrix(x, x, gamma);
  const auto sol = smo_solve(K, yt, C, tol);
  SvmModel m;
  m.C = C;
  m.gamma = gamma;
  m.bias = sol.bias;
  std::vector<Index> sv;
  for (Index i = 0; i < yt.size(); ++i)
    if (sol.alpha(i) > 0.0) sv.push_back(i);
  m.support_vectors.resize(static_cast<Index>(sv.size()), x.cols());
  m.dual_coef.resize(static_cast<Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    m.support_vectors.row(static_cast<Index>(k)) = x.row(sv[k]);
    m.dual_coef(static_cast<Index>(k)) = sol.alpha(sv[k]) * yt(sv[k]);
  }
  return m;
}

}  // namespace

SvmModel svm_train(const RowMatrix& x, const VectorXd& y, const SvmOptions& opts) {
  require_finite(x, y);
  const double pos = y.sum();
  if (pos == 0.0 || pos == static_cast<double>(y.size()))
    throw ParameterError("SVM training data contains a single class");
  const double gamma = opts.gamma > 0.0 ? opts.gamma : 1.0 / static_cast<double>(x.cols());

  SvmModel model = fit_svm_core(x, y, opts.C, gamma, opts.tol);
  if (!opts.probability) return model;

  // Out-of-fold decision values for the Platt fit.
  const Index n = x.rows();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(opts.seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const int folds = std::max(2, opts.platt_folds);
  VectorXd dec(n);
  for (int f = 0; f < folds; ++f) {
    const Index begin = f * n / folds, end = (f + 1) * n / folds;
    std::vector<Index> train, test;
    for (Index k = 0; k < n; ++k)
      (k >= begin && k < end ? test : train).push_back(perm[static_cast<std::size_t>(k)]);
    if (test.empty()) continue;
    RowMatrix xtr(static_cast<Index>(train.size()), x.cols());
    VectorXd ytr(static_cast<Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) {
      xtr.row(static_cast<Index>(k)) = x.row(train[k]);
      ytr(static_cast<Index>(k)) = y(train[k]);
    }
    const double p = ytr.sum();
    RowMatrix xte(static_cast<Index>(test.size()), x.cols());
    for (std::size_t k = 0; k < test.size(); ++k) xte.row(static_cast<Index>(k)) = x.row(test[k]);
    VectorXd d;
    if (train.empty() || p == 0.0 || p == static_cast<double>(train.size())) {
      d = VectorXd::Constant(static_cast<Index>(test.size()), p > 0.0 ? 1.0 : -1.0);
    } else {
      d = svm_decision(fit_svm_core(xtr, ytr, opts.C, gamma, opts.tol), xte);
    }
    for (std::size_t k = 0; k < test.size(); ++k) dec(test[k]) = d(static_cast<Index>(k));
  }
  std::tie(model.platt_a, model.platt_b) = platt_fit(dec, y);
  return model;
}

VectorXd svm_decision(const SvmModel& m, const RowMatrix& x) {
  const auto K = kernel_matrix(x, m.support_vectors, m.gamma);
  return (K * m.dual_coef).array() + m.bias;
}

VectorXd svm_proba(const SvmModel& m, const RowMatrix& x) {
  VectorXd f = svm_decision(m, x);
  for (Index i = 0; i < f.size(); ++i) f(i) = platt_proba(f(i), m.platt_a, m.platt_b);
  return f;
}

// ---------------------------------------------------------------------------

KnnModel knn_fit(const RowMatrix& x, const VectorXd& y, int k) {
  if (x.rows() == 0) throw ParameterError("k-NN needs a non-empty training set");
  if (k < 1 || k > x.rows())
    throw ParameterError("k = " + std::to_string(k) + " must lie in [1, " +
                         std::to_string(x.rows()) + "]");
  require_finite(x, y);
  return {x, y, k};
}

VectorXd knn_proba(const KnnModel& m, const RowMatrix& x) {
  if (m.x.rows() == 0) throw ParameterError("k-NN model has no training rows");
  const Index n = m.x.rows();
  const auto k = static_cast<std::size_t>(m.k);
  VectorXd out(x.rows());
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index q = 0; q < x.rows(); ++q) {
    for (Index i = 0; i < n; ++i)
      dist[static_cast<std::size_t>(i)] = {(m.x.row(i) - x.row(q)).squaredNorm(), i};
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
    double pos = 0.0;
    for (std::size_t r = 0; r < k; ++r) pos += m.y(dist[r].second);
    out(q) = pos / static_cast<double>(k);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json mat_json(const RowMatrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

RowMatrix json_mat(const json& j) {
  auto rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols)
    throw ValidationError("data", "matrix size mismatch");
  return Eigen::Map<RowMatrix>(data.data(), rows, cols);
}

}  // namespace

json to_json(const GeneralModel& model, const ScalerParams* scaler) {
  json j = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LassoModel>) {
          return {{"kind", "lasso"}, {"C", m.C}, {"w", vec_json(m.w)}, {"b", m.b},
                  {"iterations", m.iterations}};
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          return {{"kind", "svm"},           {"C", m.C},
                  {"gamma", m.gamma},        {"bias", m.bias},
                  {"platt_a", m.platt_a},    {"platt_b", m.platt_b},
                  {"dual_coef", vec_json(m.dual_coef)},
                  {"support_vectors", mat_json(m.support_vectors)}};
        } else {
          return {{"kind", "knn"}, {"k", m.k}, {"x", mat_json(m.x)}, {"y", vec_json(m.y)}};
        }
      },
      model);
  if (scaler) j["scaler"] = {{"min", vec_json(scaler->min)}, {"max", vec_json(scaler->max)}};
  return j;
}

GeneralModel general_model_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "lasso") {
    LassoModel m;
    m.C = j.at("C").get<double>();
    m.w = json_vec(j.at("w"));
    m.b = j.at("b").get<double>();
    m.iterations = j.value("iterations", 0);
    return m;
  }
  if (kind == "svm") {
    SvmModel m;
    m.C = j.at("C").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.bias = j.at("bias").get<double>();
    m.platt_a = j.at("platt_a").get<double>();
    m.platt_b = j.at("platt_b").get<double>();
    m.dual_coef = json_vec(j.at("dual_coef"));
    m.support_vectors = json_mat(j.at("support_vectors"));
    return m;
  }
  if (kind == "knn") {
    KnnModel m;
    m.k = j.at("k").get<int>();
    m.x = json_mat(j.at("x"));
    m.y = json_vec(j.at("y"));
    return m;
  }
  throw ValidationError("kind", "unknown model kind '" + kind + "'");
}

VectorXd predict_proba(const GeneralModel& model, const RowMatrix& x) {
  return std::visit(
      [&](const auto& m) -> VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LassoModel>) return lasso_proba(m, x);
        else if constexpr (std::is_same_v<T, SvmModel>) return svm_proba(m, x);
        else return knn_proba(m, x);
      },
      model);
}

}  // namespace stressnp
