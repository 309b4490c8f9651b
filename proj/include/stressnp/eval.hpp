#pragma once

// Classification metrics and the leave-one-participant-out harness.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stressnp/baselines.hpp"
#include "stressnp/dataio.hpp"
#include "stressnp/features.hpp"
#include "stressnp/neuralprocess.hpp"

namespace stressnp {

/// P(score+ > score-) + P(tie) / 2 via midranks. Throws MetricError unless
/// both classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

/// Sum over descending distinct thresholds of (R_n - R_{n-1}) P_n. Throws
/// MetricError without positives.
double average_precision(std::span<const int> labels, std::span<const double> scores);

/// Mean binary cross-entropy with p clipped to [1e-15, 1 - 1e-15].
double log_loss(std::span<const int> labels, std::span<const double> probs);

/// Fraction of windows where (score >= threshold) equals the label.
double accuracy(std::span<const int> labels, std::span<const double> scores,
                double threshold = 0.5);

struct CurvePoint {
  double x;
  double y;
};

/// (fpr, tpr) at every distinct threshold, starting at (0, 0).
std::vector<CurvePoint> roc_curve(std::span<const int> labels, std::span<const double> scores);
/// (recall, precision) at every distinct threshold in descending order,
/// preceded by (0, 1).
std::vector<CurvePoint> pr_curve(std::span<const int> labels, std::span<const double> scores);

enum class GeneralKind { lasso, svm, knn };
std::string_view to_string(GeneralKind k);
std::optional<GeneralKind> parse_general_kind(std::string_view s);

struct ExperimentConfig {
  Dataset dataset = Dataset::synthetic;
  std::vector<GeneralKind> models{GeneralKind::lasso, GeneralKind::svm, GeneralKind::knn};
  std::vector<Strategy> strategies{Strategy::baseline, Strategy::random};
  TrainConfig train;  // strategy and seed are set per fold
  int test_context_size = kTestContextSize;
  TestLatent test_latent = TestLatent::mean;
  std::uint64_t seed = 0;
  bool other_participant = true;
  Strategy other_strategy = Strategy::random;
  LassoOptions lasso;
  SvmOptions svm;
  int knn_k = 20;
  int jobs = 0;  // 0 = all cores
  /// When set, fold models are written to <model_dir>/<participant>/.
  std::optional<std::filesystem::path> model_dir;
};

/// Validates the strategy/dataset combination and ranges; throws ConfigError.
void check_experiment_config(const ExperimentConfig& cfg);

/// Seed for the fold that holds out `participant_id`.
std::uint64_t fold_seed(std::uint64_t base_seed, std::string_view participant_id);

struct Prediction {
  std::string model;
  std::string strategy;  // "none" for general models
  std::string participant_id;
  double window_start_s = 0.0;
  int label = 0;
  double score = 0.0;
};

struct MetricRow {
  std::string model;
  std::string strategy;
  std::string scope;           // "fold" or "pooled"
  std::string participant_id;  // empty for pooled rows
  std::optional<double> auc;
  std::optional<double> average_precision;
  std::optional<double> log_loss;
  std::optional<double> accuracy;
};

struct CurveRow {
  std::string model;
  std::string strategy;
  std::string curve;  // "roc" or "pr"
  CurvePoint point;
};

struct Report {
  std::vector<Prediction> predictions;
  std::vector<MetricRow> metrics;
  std::vector<CurveRow> curves;

  /// Pooled row for (model, strategy), if any.
  const MetricRow* pooled(std::string_view model, std::string_view strategy) const;
};

/// Metric rows (per fold, then pooled) and pooled curves for a prediction
/// list, grouped by (model, strategy) in first-appearance order.
void score_predictions(Report& report);

/// Leave-one-participant-out evaluation of the general models and one
/// neural process per strategy. The other-participant condition, when
/// enabled, is reported as strategy "<other_strategy>_other". Folds run on
/// up to `cfg.jobs` threads; output order does not depend on scheduling.
Report run_experiment(const FeatureMatrix& data, const ExperimentConfig& cfg);

void write_metrics_csv(const Report& r, const std::filesystem::path& file);
void write_curves_csv(const Report& r, const std::filesystem::path& file);
void write_predictions_csv(const Report& r, const std::filesystem::path& file);
/// metrics.csv, curves.csv and predictions.csv in `dir` (created if needed).
void write_report(const Report& r, const std::filesystem::path& dir);

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& file);

}  // namespace stressnp
