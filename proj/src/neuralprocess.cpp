#include "stressnp/neuralprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stressnp/errors.hpp"

namespace stressnp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::array<LayerShape, kNpNumLayers> kShapes{{
    {kNpInputDim + 1, kNpHiddenDim},
    {kNpHiddenDim, kNpHiddenDim},
    {kNpHiddenDim, kNpHiddenDim},
    {kNpHiddenDim, kNpLatentDim},
    {kNpHiddenDim, kNpLatentDim},
    {kNpInputDim + kNpLatentDim, kNpHiddenDim},
    {kNpHiddenDim, kNpHiddenDim},
    {kNpHiddenDim, kNpHiddenDim},
    {kNpHiddenDim, 1},
}};

constexpr std::array<std::size_t, kNpNumLayers + 1> offsets() {
  std::array<std::size_t, kNpNumLayers + 1> off{};
  for (std::size_t l = 0; l < kNpNumLayers; ++l)
    off[l + 1] = off[l] + static_cast<std::size_t>(kShapes[l].out * (kShapes[l].in + 1));
  return off;
}
constexpr auto kOffsets = offsets();

std::size_t idx(NpLayer l) { return static_cast<std::size_t>(l); }

MatrixXd relu(const MatrixXd& z) { return z.cwiseMax(0.0); }

// Encoder activations for one set.
struct EncoderTrace {
  MatrixXd a0, z1, a1, z2, a2, z3, a3;
  VectorXd r, lv_raw;
  LatentGaussian out;
};

// Column means summed in sorted order, so the result does not depend on
// the order of the set's rows.
VectorXd set_mean(const MatrixXd& a) {
  VectorXd r(a.cols());
  std::vector<double> col(static_cast<std::size_t>(a.rows()));
  for (Index k = 0; k < a.cols(); ++k) {
    for (Index i = 0; i < a.rows(); ++i) col[static_cast<std::size_t>(i)] = a(i, k);
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (double v : col) s += v;
    r(k) = s / static_cast<double>(a.rows());
  }
  return r;
}

MatrixXd affine(const NpParams& p, NpLayer l, const MatrixXd& a) {
  return (a * p.weight(l).transpose()).rowwise() + p.bias(l).transpose();
}

EncoderTrace encoder_forward(const NpParams& p, const ContextSet& s) {
  if (s.size() == 0) throw ParameterError("encoder needs at least one pair");
  if (s.x.cols() != kNpInputDim)
    throw ParameterError("encoder expects " + std::to_string(kNpInputDim) + " features");
  EncoderTrace t;
  t.a0.resize(s.size(), kNpInputDim + 1);
  t.a0.leftCols(kNpInputDim) = s.x;
  t.a0.col(kNpInputDim) = s.y;
  t.z1 = affine(p, NpLayer::enc1, t.a0);
  t.a1 = relu(t.z1);
  t.z2 = affine(p, NpLayer::enc2, t.a1);
  t.a2 = relu(t.z2);
  t.z3 = affine(p, NpLayer::enc3, t.a2);
  t.a3 = relu(t.z3);
  t.r = set_mean(t.a3);
  t.out.mu = p.weight(NpLayer::enc_mu) * t.r + p.bias(NpLayer::enc_mu);
  t.lv_raw = p.weight(NpLayer::enc_log_var) * t.r + p.bias(NpLayer::enc_log_var);
  t.out.log_var = t.lv_raw.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
  return t;
}

// Accumulates dL/dtheta for the dense layer l given dL/dz and its input a;
// returns dL/da.
MatrixXd dense_backward(const NpParams& p, NpLayer l, const MatrixXd& dz,
                        const MatrixXd& a, NpParams& g) {
  g.weight(l) += dz.transpose() * a;
  g.bias(l) += dz.colwise().sum().transpose();
  return dz * p.weight(l);
}

void encoder_backward(const NpParams& p, const EncoderTrace& t, const VectorXd& dmu,
                      const VectorXd& dlv, NpParams& g) {
  VectorXd dlv_raw = dlv;
  for (Index k = 0; k < dlv_raw.size(); ++k)
    if (!(t.lv_raw(k) > -kLogVarClamp && t.lv_raw(k) < kLogVarClamp)) dlv_raw(k) = 0.0;
  g.weight(NpLayer::enc_mu) += dmu * t.r.transpose();
  g.bias(NpLayer::enc_mu) += dmu;
  g.weight(NpLayer::enc_log_var) += dlv_raw * t.r.transpose();
  g.bias(NpLayer::enc_log_var) += dlv_raw;
  const VectorXd dr = p.weight(NpLayer::enc_mu).transpose() * dmu +
                      p.weight(NpLayer::enc_log_var).transpose() * dlv_raw;
  const auto n = static_cast<double>(t.a0.rows());
  MatrixXd da3 = (dr / n).transpose().replicate(t.a0.rows(), 1);
  MatrixXd dz3 = da3.array() * (t.z3.array() > 0.0).cast<double>();
  MatrixXd da2 = dense_backward(p, NpLayer::enc3, dz3, t.a2, g);
  MatrixXd dz2 = da2.array() * (t.z2.array() > 0.0).cast<double>();
  MatrixXd da1 = dense_backward(p, NpLayer::enc2, dz2, t.a1, g);
  MatrixXd dz1 = da1.array() * (t.z1.array() > 0.0).cast<double>();
  dense_backward(p, NpLayer::enc1, dz1, t.a0, g);
}

struct DecoderTrace {
  MatrixXd d0, z1, h1, z2, h2, z3, h3;
  MatrixXd m1, m2, m3;  // dropout multipliers (0 or 1/(1-p)); empty if off
  VectorXd logit, prob;
};

MatrixXd dropout_mask(Index rows, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  MatrixXd m(rows, kNpHiddenDim);
  const double scale = 1.0 / (1.0 - rate);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = keep(rng) ? scale : 0.0;
  return m;
}

DecoderTrace decoder_forward(const NpParams& p, const VectorXd& z, const RowMatrix& x,
                             bool train_mode, double rate, Rng& rng) {
  if (x.cols() != kNpInputDim)
    throw ParameterError("decoder expects " + std::to_string(kNpInputDim) + " features");
  DecoderTrace t;
  const Index m = x.rows();
  t.d0.resize(m, kNpInputDim + kNpLatentDim);
  t.d0.leftCols(kNpInputDim) = x;
  t.d0.rightCols(kNpLatentDim) = z.transpose().replicate(m, 1);
  const bool drop = train_mode && rate > 0.0;
  if (drop) {
    t.m1 = dropout_mask(m, rate, rng);
    t.m2 = dropout_mask(m, rate, rng);
    t.m3 = dropout_mask(m, rate, rng);
  }
  t.z1 = affine(p, NpLayer::dec1, t.d0);
  t.h1 = relu(t.z1);
  if (drop) t.h1.array() *= t.m1.array();
  t.z2 = affine(p, NpLayer::dec2, t.h1);
  t.h2 = relu(t.z2);
  if (drop) t.h2.array() *= t.m2.array();
  t.z3 = affine(p, NpLayer::dec3, t.h2);
  t.h3 = relu(t.z3);
  if (drop) t.h3.array() *= t.m3.array();
  t.logit = affine(p, NpLayer::dec_out, t.h3).col(0);
  t.prob = t.logit.unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  return t;
}

// Returns dL/dz.
VectorXd decoder_backward(const NpParams& p, const DecoderTrace& t, const VectorXd& dlogit,
                          NpParams& g) {
  const MatrixXd dl = dlogit;  // m x 1
  MatrixXd dh3 = dense_backward(p, NpLayer::dec_out, dl, t.h3, g);
  auto gate = [](const MatrixXd& dh, const MatrixXd& z, const MatrixXd& mask) {
    MatrixXd dz = dh.array() * (z.array() > 0.0).cast<double>();
    if (mask.size() > 0) dz.array() *= mask.array();
    return dz;
  };
  MatrixXd dz3 = gate(dh3, t.z3, t.m3);
  MatrixXd dh2 = dense_backward(p, NpLayer::dec3, dz3, t.h2, g);
  MatrixXd dz2 = gate(dh2, t.z2, t.m2);
  MatrixXd dh1 = dense_backward(p, NpLayer::dec2, dz2, t.h1, g);
  MatrixXd dz1 = gate(dh1, t.z1, t.m1);
  MatrixXd dd0 = dense_backward(p, NpLayer::dec1, dz1, t.d0, g);
  return dd0.rightCols(kNpLatentDim).colwise().sum().transpose();
}

}  // namespace

LayerShape layer_shape(NpLayer layer) { return kShapes[idx(layer)]; }

std::size_t NpParams::size() { return kOffsets.back(); }

NpParams NpParams::zeros() { return {VectorXd::Zero(static_cast<Index>(size()))}; }

NpParams NpParams::init(std::uint64_t seed) {
  NpParams p = zeros();
  Rng rng(seed);
  for (std::size_t l = 0; l < kNpNumLayers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kShapes[l].in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = kOffsets[l]; k < kOffsets[l + 1]; ++k)
      p.theta(static_cast<Index>(k)) = u(rng);
  }
  return p;
}

Eigen::Map<const MatrixXd> NpParams::weight(NpLayer l) const {
  const auto& s = kShapes[idx(l)];
  return {theta.data() + kOffsets[idx(l)], s.out, s.in};
}
Eigen::Map<MatrixXd> NpParams::weight(NpLayer l) {
  const auto& s = kShapes[idx(l)];
  return {theta.data() + kOffsets[idx(l)], s.out, s.in};
}
Eigen::Map<const VectorXd> NpParams::bias(NpLayer l) const {
  const auto& s = kShapes[idx(l)];
  return {theta.data() + kOffsets[idx(l)] + static_cast<std::size_t>(s.out * s.in), s.out};
}
Eigen::Map<VectorXd> NpParams::bias(NpLayer l) {
  const auto& s = kShapes[idx(l)];
  return {theta.data() + kOffsets[idx(l)] + static_cast<std::size_t>(s.out * s.in), s.out};
}

LatentGaussian encode(const NpParams& params, const ContextSet& pairs) {
  return encoder_forward(params, pairs).out;
}

VectorXd sample_z(const LatentGaussian& dist, Rng& rng) {
  std::normal_distribution<double> normal;
  VectorXd z(dist.mu.size());
  for (Index k = 0; k < z.size(); ++k)
    z(k) = dist.mu(k) + std::exp(0.5 * dist.log_var(k)) * normal(rng);
  return z;
}

VectorXd decode(const NpParams& params, const VectorXd& z, const RowMatrix& x_t,
                bool train_mode, Rng& rng, double dropout) {
  return decoder_forward(params, z, x_t, train_mode, dropout, rng).prob;
}

double kl_diag_gauss(const LatentGaussian& p, const LatentGaussian& q) {
  double kl = 0.0;
  for (Index d = 0; d < p.mu.size(); ++d) {
    const double diff = p.mu(d) - q.mu(d);
    kl += 0.5 * (q.log_var(d) - p.log_var(d)) +
          (std::exp(p.log_var(d)) + diff * diff) / (2.0 * std::exp(q.log_var(d))) - 0.5;
  }
  return kl;
}

NpLoss np_loss(const NpParams& params, const ContextSet& context, const ContextSet& targets,
               Rng& rng, const NpLossOptions& opts, bool with_grad) {
  const auto enc_c = encoder_forward(params, context);
  const auto enc_t = encoder_forward(params, targets);
  const auto& zt = enc_t.out;
  const auto& zc = enc_c.out;

  std::normal_distribution<double> normal;
  VectorXd eps(kNpLatentDim);
  for (Index k = 0; k < eps.size(); ++k) eps(k) = normal(rng);
  const VectorXd sigma_t = (0.5 * zt.log_var.array()).exp();
  const VectorXd z = zt.mu + sigma_t.cwiseProduct(eps);

  const auto dec = decoder_forward(params, z, targets.x, opts.train_mode, opts.dropout, rng);
  const Index m = targets.size();
  double bce = 0.0;
  const double scale = opts.reduction == BceReduction::mean ? 1.0 / static_cast<double>(m) : 1.0;
  VectorXd dlogit(m);
  for (Index i = 0; i < m; ++i) {
    const double p = dec.prob(i);
    const double pc = std::clamp(p, kBceClip, 1.0 - kBceClip);
    const double y = targets.y(i);
    bce -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    dlogit(i) = (p == pc) ? (p - y) * scale : 0.0;
  }
  bce *= scale;

  const bool t_to_c = opts.kl == KlDirection::target_to_context;
  const LatentGaussian& kp = t_to_c ? zt : zc;
  const LatentGaussian& kq = t_to_c ? zc : zt;
  const double kl = kl_diag_gauss(kp, kq);

  NpLoss out;
  out.bce = bce;
  out.kl = kl;
  out.loss = bce + kl;
  if (!with_grad) return out;

  NpParams g = NpParams::zeros();
  const VectorXd dz = decoder_backward(params, dec, dlogit, g);

  // KL partials w.r.t. the (p, q) arguments.
  const VectorXd var_p = kp.log_var.array().exp(), var_q = kq.log_var.array().exp();
  const VectorXd diff = kp.mu - kq.mu;
  const VectorXd dmu_p = diff.cwiseQuotient(var_q);
  const VectorXd dmu_q = -dmu_p;
  const VectorXd dlv_p = (-0.5 + 0.5 * var_p.array() / var_q.array()).matrix();
  const VectorXd dlv_q =
      (0.5 - (var_p.array() + diff.array().square()) / (2.0 * var_q.array())).matrix();

  VectorXd dmu_t = dz, dlv_t = dz.cwiseProduct(eps).cwiseProduct(sigma_t) * 0.5;
  VectorXd dmu_c = VectorXd::Zero(kNpLatentDim), dlv_c = VectorXd::Zero(kNpLatentDim);
  if (t_to_c) {
    dmu_t += dmu_p; dlv_t += dlv_p;
    dmu_c += dmu_q; dlv_c += dlv_q;
  } else {
    dmu_c += dmu_p; dlv_c += dlv_p;
    dmu_t += dmu_q; dlv_t += dlv_q;
  }
  encoder_backward(params, enc_t, dmu_t, dlv_t, g);
  encoder_backward(params, enc_c, dmu_c, dlv_c, g);
  out.grad = std::move(g.theta);
  return out;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::random: return "random";
    case Strategy::tasks: return "tasks";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (auto v : {Strategy::baseline, Strategy::random, Strategy::tasks})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

namespace {

std::vector<std::size_t> rows_with(const FeatureMatrix& fm, TaskLabel label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fm.rows.size(); ++i)
    if (fm.rows[i].source_label == label) out.push_back(i);
  return out;
}

std::vector<std::size_t> draw(const std::vector<std::size_t>& pool, std::size_t k, Rng& rng,
                              std::string_view what) {
  if (pool.size() < k)
    throw ParameterError("need " + std::to_string(k) + " " + std::string(what) +
                         " windows, only " + std::to_string(pool.size()) + " available");
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out),
              static_cast<std::ptrdiff_t>(k), rng);
  return out;
}

}  // namespace

ContextSelection select_context(const FeatureMatrix& fm, Strategy strategy, int n_context,
                                Rng& rng) {
  if (n_context < 1) throw ParameterError("context size must be >= 1");
  const auto k = static_cast<std::size_t>(n_context);
  ContextSelection sel;
  switch (strategy) {
    case Strategy::baseline: {
      auto pool = rows_with(fm, TaskLabel::baseline);
      sel.context = draw(pool, k, rng, "baseline");
      sel.excluded = pool;
      break;
    }
    case Strategy::random: {
      std::vector<std::size_t> pool(fm.rows.size());
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      sel.context = draw(pool, k, rng, "recording");
      sel.excluded = sel.context;
      break;
    }
    case Strategy::tasks: {
      const std::array segments{TaskLabel::baseline, TaskLabel::city1, TaskLabel::highway1};
      for (std::size_t s = 0; s < segments.size(); ++s) {
        auto pool = rows_with(fm, segments[s]);
        if (pool.empty())
          throw ParameterError("tasks strategy needs " +
                               std::string(to_string(segments[s])) + " windows");
        const std::size_t share = k / 3 + (s < k % 3 ? 1 : 0);
        auto picked = draw(pool, share, rng, to_string(segments[s]));
        sel.context.insert(sel.context.end(), picked.begin(), picked.end());
        sel.excluded.insert(sel.excluded.end(), pool.begin(), pool.end());
      }
      break;
    }
  }
  std::sort(sel.excluded.begin(), sel.excluded.end());
  return sel;
}

ContextSet make_context(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  ContextSet c;
  c.x.resize(static_cast<Index>(rows.size()), kNpInputDim);
  c.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = fm.rows.at(rows[i]);
    for (int j = 0; j < kNpInputDim; ++j)
      c.x(static_cast<Index>(i), j) = r.features.values[static_cast<std::size_t>(j)];
    c.y(static_cast<Index>(i)) = r.label;
  }
  return c;
}

std::vector<std::size_t> remaining_rows(std::size_t n, std::span<const std::size_t> excluded) {
  std::vector<bool> drop(n, false);
  for (auto e : excluded)
    if (e < n) drop[e] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) out.push_back(i);
  return out;
}

namespace {

// Largest context the strategy can supply for this participant.
int context_capacity(const FeatureMatrix& fm, Strategy s) {
  auto count = [&](TaskLabel l) {
    return static_cast<int>(std::count_if(fm.rows.begin(), fm.rows.end(),
                                          [&](const auto& r) { return r.source_label == l; }));
  };
  switch (s) {
    case Strategy::baseline: return count(TaskLabel::baseline);
    case Strategy::random: return static_cast<int>(fm.rows.size());
    case Strategy::tasks:
      return 3 * std::min({count(TaskLabel::baseline), count(TaskLabel::city1),
                           count(TaskLabel::highway1)});
  }
  return 0;
}

}  // namespace

TrainResult train_np(std::span<const FeatureMatrix> participants, const TrainConfig& cfg) {
  if (participants.size() < 2)
    throw ParameterError("neural process training needs at least two participants");
  if (cfg.context_min < 1 || cfg.context_max < cfg.context_min)
    throw ParameterError("invalid context size range");

  std::vector<ContextSet> targets;
  for (const auto& fm : participants) {
    std::vector<std::size_t> all(fm.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    targets.push_back(make_context(fm, all));
  }

  Rng rng(cfg.seed);
  TrainResult out{NpParams::init(rng()), {}};
  auto& theta = out.params.theta;
  VectorXd m1 = VectorXd::Zero(theta.size()), m2 = m1;
  long step = 0;
  NpLossOptions lopts{cfg.dropout, true, cfg.kl, cfg.reduction};

  std::vector<std::size_t> order(participants.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uniform_int_distribution<int> size_dist(cfg.context_min, cfg.context_max);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int steps = 0;
    for (auto p : order) {
      const auto& fm = participants[p];
      if (fm.empty()) continue;
      const int n_c = std::min(size_dist(rng), context_capacity(fm, cfg.strategy));
      if (n_c < 1) continue;
      const auto sel = select_context(fm, cfg.strategy, n_c, rng);
      const auto ctx = make_context(fm, sel.context);
      auto res = np_loss(out.params, ctx, targets[p], rng, lopts, true);
      if (!std::isfinite(res.loss) || !res.grad.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", participant "
            << (fm.rows.empty() ? std::string("?") : fm.rows.front().participant_id)
            << " (bce=" << res.bce << ", kl=" << res.kl << ")";
        throw TrainingError(msg.str());
      }
      ++step;
      m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * res.grad;
      m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * res.grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) /
                       ((m2.array() / c2).sqrt() + cfg.adam_eps);
      total += res.loss;
      ++steps;
    }
    out.epoch_loss.push_back(steps > 0 ? total / steps : 0.0);
  }
  return out;
}

VectorXd np_predict(const NpParams& params, const ContextSet& context, const RowMatrix& x_t,
                    TestLatent latent, Rng* rng) {
  const auto zc = encode(params, context);
  Rng local(0);
  Rng& r = rng ? *rng : local;
  const VectorXd z = latent == TestLatent::mean ? zc.mu : sample_z(zc, r);
  return decoder_forward(params, z, x_t, false, 0.0, r).prob;
}

nlohmann::json np_to_json(const NpParams& params, const TrainConfig& cfg) {
  nlohmann::json j;
  j["kind"] = "neural_process";
  j["architecture"] = {{"input_dim", kNpInputDim},
                       {"hidden_dim", kNpHiddenDim},
                       {"latent_dim", kNpLatentDim},
                       {"hidden_layers", 3},
                       {"dropout", cfg.dropout}};
  j["seed"] = cfg.seed;
  j["strategy"] = std::string(to_string(cfg.strategy));
  j["bce_reduction"] = cfg.reduction == BceReduction::sum ? "sum" : "mean";
  static constexpr std::array<const char*, kNpNumLayers> names{
      "enc1", "enc2", "enc3", "enc_mu", "enc_log_var", "dec1", "dec2", "dec3", "dec_out"};
  for (std::size_t l = 0; l < kNpNumLayers; ++l) {
    const auto layer = static_cast<NpLayer>(l);
    auto w = params.weight(layer);
    auto b = params.bias(layer);
    j["layers"][names[l]] = {{"in", kShapes[l].in},
                             {"out", kShapes[l].out},
                             {"weight", std::vector<double>(w.data(), w.data() + w.size())},
                             {"bias", std::vector<double>(b.data(), b.data() + b.size())}};
  }
  return j;
}

NpParams np_from_json(const nlohmann::json& j) {
  static constexpr std::array<const char*, kNpNumLayers> names{
      "enc1", "enc2", "enc3", "enc_mu", "enc_log_var", "dec1", "dec2", "dec3", "dec_out"};
  const auto& arch = j.at("architecture");
  if (arch.at("input_dim").get<int>() != kNpInputDim ||
      arch.at("hidden_dim").get<int>() != kNpHiddenDim ||
      arch.at("latent_dim").get<int>() != kNpLatentDim)
    throw ValidationError("architecture", "does not match the compiled network");
  NpParams p = NpParams::zeros();
  for (std::size_t l = 0; l < kNpNumLayers; ++l) {
    const auto layer = static_cast<NpLayer>(l);
    const auto& jl = j.at("layers").at(names[l]);
    auto w = jl.at("weight").get<std::vector<double>>();
    auto b = jl.at("bias").get<std::vector<double>>();
    auto pw = p.weight(layer);
    auto pb = p.bias(layer);
    if (static_cast<Index>(w.size()) != pw.size() || static_cast<Index>(b.size()) != pb.size())
      throw ValidationError(std::string("layers.") + names[l], "shape mismatch");
    std::copy(w.begin(), w.end(), pw.data());
    std::copy(b.begin(), b.end(), pb.data());
  }
  return p;
}

}  // namespace stressnp
