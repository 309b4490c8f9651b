#pragma once

// Latent neural process personalised by a handful of labelled windows.
//
// Encoder h: (x || y) in R^22 -> three 30-unit ReLU layers -> mean over the
// set -> linear heads for mu and log-variance of a 15-dim diagonal Gaussian.
// Decoder g: (x || z) in R^36 -> three 30-unit ReLU layers with dropout ->
// one logit. Training minimises mean BCE on the targets plus the KL between
// the target- and context-conditioned latents.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "stressnp/features.hpp"

namespace stressnp {

inline constexpr int kNpInputDim = static_cast<int>(kNumFeatures);
inline constexpr int kNpHiddenDim = 30;
inline constexpr int kNpLatentDim = 15;
inline constexpr double kLogVarClamp = 10.0;
inline constexpr double kBceClip = 1e-7;
inline constexpr int kTestContextSize = 6;

using Rng = std::mt19937_64;

enum class NpLayer : std::size_t {
  enc1, enc2, enc3, enc_mu, enc_log_var, dec1, dec2, dec3, dec_out,
};
inline constexpr std::size_t kNpNumLayers = 9;

struct LayerShape {
  int in;
  int out;
};
LayerShape layer_shape(NpLayer layer);

/// All weights live in one flat vector so optimisers and gradient checks can
/// treat the network as a point in R^P. Each layer stores an out x in
/// column-major weight block followed by its bias.
struct NpParams {
  Eigen::VectorXd theta;

  static std::size_t size();
  static NpParams zeros();
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static NpParams init(std::uint64_t seed);

  Eigen::Map<const Eigen::MatrixXd> weight(NpLayer l) const;
  Eigen::Map<Eigen::MatrixXd> weight(NpLayer l);
  Eigen::Map<const Eigen::VectorXd> bias(NpLayer l) const;
  Eigen::Map<Eigen::VectorXd> bias(NpLayer l);
};

struct LatentGaussian {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_var;
};

/// Labelled (x, y) pairs; features are used unscaled.
struct ContextSet {
  RowMatrix x;
  Eigen::VectorXd y;

  Eigen::Index size() const { return x.rows(); }
};

/// Throws ParameterError for an empty set.
LatentGaussian encode(const NpParams& params, const ContextSet& pairs);

/// mu + exp(log_var / 2) * eps, eps ~ N(0, I).
Eigen::VectorXd sample_z(const LatentGaussian& dist, Rng& rng);

/// Sigmoid outputs for every row of `x_t`. Dropout is applied only when
/// `train_mode`.
Eigen::VectorXd decode(const NpParams& params, const Eigen::VectorXd& z,
                       const RowMatrix& x_t, bool train_mode, Rng& rng,
                       double dropout = 0.2);

/// KL(p || q) for diagonal Gaussians.
double kl_diag_gauss(const LatentGaussian& p, const LatentGaussian& q);

enum class KlDirection { target_to_context, context_to_target };

/// How the per-window cross-entropies are combined before the KL is added.
/// `sum` is the target-set log-likelihood of the usual latent NP bound;
/// `mean` divides it by the number of targets.
enum class BceReduction { sum, mean };

struct NpLossOptions {
  double dropout = 0.2;
  bool train_mode = true;
  KlDirection kl = KlDirection::target_to_context;
  BceReduction reduction = BceReduction::sum;
};

struct NpLoss {
  double loss = 0.0;
  double bce = 0.0;  // after reduction
  double kl = 0.0;
  Eigen::VectorXd grad;  // empty unless requested
};

/// loss = BCE(decode(z ~ Z_t, x_t), y_t) + KL(Z_t || Z_c), BCE summed or
/// averaged over the targets.
/// The random draws (latent noise, then dropout masks) come from `rng`.
NpLoss np_loss(const NpParams& params, const ContextSet& context,
               const ContextSet& targets, Rng& rng,
               const NpLossOptions& opts = {}, bool with_grad = false);

enum class Strategy { baseline, random, tasks };
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

struct ContextSelection {
  std::vector<std::size_t> context;   // row indices into the participant matrix
  std::vector<std::size_t> excluded;  // rows never scored as targets
};

/// Selects `n_context` rows of one participant's matrix:
///   baseline - from baseline windows; every baseline window is excluded.
///   random   - uniformly from all windows; only the chosen rows are excluded.
///   tasks    - evenly from baseline, city1 and highway1 (any remainder goes
///              to the earlier segments); all windows of those three are
///              excluded.
/// Throws ParameterError when the required segments or enough windows are
/// missing.
ContextSelection select_context(const FeatureMatrix& participant, Strategy strategy,
                                int n_context, Rng& rng);

ContextSet make_context(const FeatureMatrix& fm, std::span<const std::size_t> rows);
/// Complement of `excluded` in [0, n), ascending.
std::vector<std::size_t> remaining_rows(std::size_t n, std::span<const std::size_t> excluded);

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  int context_min = 5;
  int context_max = 10;
  Strategy strategy = Strategy::random;
  std::uint64_t seed = 0;
  double dropout = 0.2;
  KlDirection kl = KlDirection::target_to_context;
  BceReduction reduction = BceReduction::sum;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainResult {
  NpParams params;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

/// One Adam step per participant per epoch, participants visited in a seeded
/// shuffled order. Context size is drawn from [context_min, context_max] and
/// capped by what the strategy can supply; targets are all of the
/// participant's windows. Throws ParameterError with fewer than two
/// participants and TrainingError on a non-finite loss.
TrainResult train_np(std::span<const FeatureMatrix> participants, const TrainConfig& cfg);

enum class TestLatent { mean, sample };

/// Decodes `x_t` with z = mean of the context latent (or a sample from it),
/// dropout off.
Eigen::VectorXd np_predict(const NpParams& params, const ContextSet& context,
                           const RowMatrix& x_t, TestLatent latent = TestLatent::mean,
                           Rng* rng = nullptr);

nlohmann::json np_to_json(const NpParams& params, const TrainConfig& cfg);
NpParams np_from_json(const nlohmann::json& j);

}  // namespace stressnp
