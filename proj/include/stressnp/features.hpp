#pragma once

// Heart-rate, HRV and GSR window features and feature-matrix assembly.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stressnp/dataio.hpp"

namespace stressnp {

inline constexpr std::size_t kNumFeatures = 21;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{
    "hr_range",      "hr_mean",    "sdnn",         "rmssd",       "csi",
    "sampen",        "rqa_det",    "rqa_len_entropy", "lf_abs",   "lf_rel",
    "lf_peak",       "hf_abs",     "hf_rel",       "hf_peak",     "hf_lf_ratio",
    "tonic_mean",    "tonic_sd",   "tonic_d1_mean", "tonic_d1_sd", "phasic_sd",
    "phasic_mav"};

enum class Feature : std::size_t {
  hr_range, hr_mean, sdnn, rmssd, csi, sampen, rqa_det, rqa_len_entropy,
  lf_abs, lf_rel, lf_peak, hf_abs, hf_rel, hf_peak, hf_lf_ratio,
  tonic_mean, tonic_sd, tonic_d1_mean, tonic_d1_sd, phasic_sd, phasic_mav,
};

struct FeatureVector {
  std::array<double, kNumFeatures> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const {
    return values[static_cast<std::size_t>(f)];
  }
};

/// A value computed under a degenerate-input convention is flagged.
struct Flagged {
  double value = 0.0;
  bool degenerate = false;
};

struct HrFeatures {
  double hr_mean = 0.0;
  double hr_range = 0.0;
};
struct HrvTime {
  double sdnn = 0.0;
  double rmssd = 0.0;
};
struct RqaResult {
  double det = 0.0;
  double len_entropy = 0.0;
  bool degenerate = false;
};
struct HrvFrequency {
  double lf_abs = 0.0, lf_rel = 0.0, lf_peak = 0.0;
  double hf_abs = 0.0, hf_rel = 0.0, hf_peak = 0.0;
  double hf_lf_ratio = 0.0;
  bool degenerate = false;
};
struct TonicFeatures {
  double mean = 0.0, sd = 0.0, d1_mean = 0.0, d1_sd = 0.0;
};
struct PhasicFeatures {
  double sd = 0.0, mav = 0.0;
};

// Sample standard deviation (N-1); 0 for fewer than two values.
double sample_sd(std::span<const double> x);

/// Beatwise HR (60000/rr). Throws ParameterError on empty input.
HrFeatures hr_features(std::span<const double> rr_ms);

/// Requires at least two intervals.
HrvTime hrv_time(std::span<const double> rr_ms);

/// SD2/SD1 of the Poincare scatter (rr_i, rr_{i+1}); 0 and flagged when
/// SD1 is 0. Requires at least three intervals.
Flagged csi(std::span<const double> rr_ms);

/// -ln(A/B) with Chebyshev tolerance r = r_factor * SD(rr), self-matches
/// excluded; 0 and flagged when A or B is 0. Requires m + 2 intervals.
Flagged sample_entropy(std::span<const double> rr_ms, int m = 2,
                       double r_factor = 0.2);

/// Recurrence quantification with embedding dimension 1 and
/// eps = eps_factor * SD(rr); lines shorter than 2 are not counted.
/// Requires at least four intervals.
RqaResult rqa(std::span<const double> rr_ms, double eps_factor = 0.2);

inline constexpr double kTachogramHz = 4.0;
inline constexpr double kLfLowHz = 0.04;
inline constexpr double kLfHighHz = 0.15;
inline constexpr double kHfHighHz = 0.40;

/// Spectral HRV from a 4 Hz cubic-spline tachogram and a Hann periodogram
/// zero-padded to `window_len_s`. Requires at least four intervals.
HrvFrequency hrv_freq(std::span<const double> rr_ms, double window_len_s = 40.0);

TonicFeatures gsr_tonic_features(std::span<const double> tonic, double fs);
PhasicFeatures gsr_phasic_features(std::span<const double> phasic);

struct FeatureWindow {
  std::string participant_id;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  TaskLabel source_label = TaskLabel::unlabeled;
  int label = 0;
  FeatureVector features;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureMatrix {
  std::vector<FeatureWindow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  /// Participant ids in first-appearance order.
  std::vector<std::string> participants() const;
  FeatureMatrix for_participant(const std::string& id) const;
  FeatureMatrix excluding_participant(const std::string& id) const;
  FeatureMatrix subset(std::span<const std::size_t> indices) const;
  RowMatrix X() const;
  Eigen::VectorXd y() const;
};

struct ExtractionStats {
  std::size_t windows = 0;          // produced by make_windows
  std::size_t emitted = 0;
  std::size_t dropped_rr = 0;       // too few usable RR intervals
  std::size_t dropped_nonfinite = 0;
  std::size_t flagged = 0;          // emitted rows with a degenerate value

  ExtractionStats& operator+=(const ExtractionStats& o);
};

struct Extraction {
  FeatureMatrix matrix;
  ExtractionStats stats;
};

/// Runs R-peak detection and GSR decomposition over the whole recording,
/// then computes every feature per window. Windows with fewer than two
/// usable RR intervals or a non-finite feature are dropped and counted.
/// Features whose minimum RR count is not met take the degenerate value 0
/// and flag the row.
Extraction extract_features(const Recording& rec, const WindowSpec& spec,
                            const BinaryLabelMap& map);

/// Feature CSV: participant_id,window_start_s,window_end_s,source_label,label,
/// followed by the 21 feature columns. Rows are written in the given order.
void write_feature_csv(const FeatureMatrix& fm, const std::filesystem::path& file);
FeatureMatrix read_feature_csv(const std::filesystem::path& file);

/// Stable sort by (participant_id, window_start_s).
void sort_rows(FeatureMatrix& fm);

}  // namespace stressnp
