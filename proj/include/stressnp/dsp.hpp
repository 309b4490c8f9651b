#pragma once

// Butterworth filtering, GSR decomposition and ECG R-peak detection.

#include <span>
#include <vector>

namespace stressnp {

enum class FilterKind { lowpass, bandpass };

struct FilterSpec {
  FilterKind kind = FilterKind::lowpass;
  int order = 5;
  double low_hz = 0.0;   // lowpass cutoff, or lower bandpass edge
  double high_hz = 0.0;  // upper bandpass edge (unused for lowpass)
  double sample_rate_hz = 0.0;

  static FilterSpec lowpass(double cutoff_hz, double fs, int order = 5) {
    return {FilterKind::lowpass, order, cutoff_hz, 0.0, fs};
  }
  static FilterSpec bandpass(double low_hz, double high_hz, double fs,
                             int order = 5) {
    return {FilterKind::bandpass, order, low_hz, high_hz, fs};
  }

  /// Number of poles of the digital filter (2*order for bandpass).
  int poles() const { return kind == FilterKind::bandpass ? 2 * order : order; }
};

/// One second-order section, a0 normalised to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Throws ParameterError when cutoffs are not inside (0, Nyquist) or the
/// bandpass edges are not increasing.
void check_filter_spec(const FilterSpec& spec);

/// Digital Butterworth design via the bilinear transform with pre-warped
/// edge frequencies. Lowpass gain is 1 at DC, bandpass gain is 1 at the
/// geometric centre frequency.
std::vector<Biquad> design_butterworth(const FilterSpec& spec);

/// Complex frequency response magnitude of the cascade at `freq_hz`.
double sos_magnitude(std::span<const Biquad> sos, double freq_hz, double fs);

/// Causal cascade filtering (transposed direct form II) from rest, or from
/// steady-state initial conditions scaled by `x[0]` when `steady_start`.
std::vector<double> sos_filter(std::span<const Biquad> sos,
                               std::span<const double> x,
                               bool steady_start = false);

/// Zero-phase (forward-backward) filtering with odd reflection padding of
/// 3 * poles samples and steady-state initial conditions. Output has the
/// input's length. Requires x.size() >= 3 * spec.order.
std::vector<double> butterworth_filter(std::span<const double> x,
                                       const FilterSpec& spec);

struct GsrComponents {
  std::vector<double> tonic;
  std::vector<double> phasic;
};

inline constexpr double kTonicCutoffHz = 0.2;
inline constexpr double kPhasicLowHz = 0.5;
inline constexpr double kPhasicHighHz = 2.0;

/// tonic = 0.2 Hz lowpass, phasic = 0.5-2 Hz bandpass (5th order each).
/// Requires fs > 4 Hz.
GsrComponents decompose_gsr(std::span<const double> gsr, double fs);

struct RPeakSeries {
  std::vector<double> peak_times_s;
};

/// Hamilton-Tompkins tuning. Defaults are the fixed production values.
struct QrsParams {
  double band_low_hz = 8.0;
  double band_high_hz = 16.0;
  double integration_s = 0.080;
  double refractory_s = 0.200;
  double searchback_factor = 1.5;
  double threshold_coeff = 0.3125;
  double refine_halfwidth_s = 0.040;
  int estimate_history = 8;
};

/// Offline Hamilton-Tompkins QRS detector. Requires fs >= 100 Hz and at least
/// 5 s of signal (ParameterError otherwise). A flat signal yields no peaks.
RPeakSeries detect_r_peaks(std::span<const double> ecg, double fs,
                           const QrsParams& params = {});

inline constexpr double kMinRrMs = 300.0;
inline constexpr double kMaxRrMs = 2000.0;

/// Successive peak differences in ms with implausible intervals (outside
/// [300, 2000] ms) removed. Fewer than two peaks gives an empty series.
std::vector<double> rr_intervals(const RPeakSeries& peaks);

}  // namespace stressnp
