#pragma once

// Seeded synthetic ECG/GSR recordings with known R-peak times.

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "stressnp/dataio.hpp"
#include "stressnp/dsp.hpp"

namespace stressnp {

struct ParticipantProfile {
  double base_hr = 70.0;          // bpm, in [50, 90]
  double hr_stress_delta = 12.0;  // bpm added at full arousal
  double hrv_scale = 1.0;         // scales respiratory and random RR variation
  double resp_rate_hz = 0.25;     // breathing frequency
  double mayer_ratio = 0.4;       // 0.1 Hz RR modulation relative to respiratory
  double rsa_stress_damping = 0.6;  // fraction of respiratory modulation lost at full arousal
  double tonic_base = 5.0;        // uS
  double tonic_stress_rise = 1.0; // uS added at full arousal
  double scr_rate_rest = 2.0;     // responses per minute
  double scr_rate_stress = 6.0;
  double scr_amplitude = 0.3;     // uS, mean response height
  double ecg_snr_db = 20.0;       // +inf for a noise-free trace
  std::uint64_t seed = 0;
};

/// Throws ParameterError when a field is outside its documented range.
void check_profile(const ParticipantProfile& p);

struct SynthRecording {
  Recording recording;
  RPeakSeries truth;
};

inline constexpr double kSynthEcgHz = 256.0;
inline constexpr double kSynthGsrHz = 32.0;

/// Arousal in [-0.2, 1] that drives HR, HRV and GSR for each task.
double task_arousal(TaskLabel label);

/// Interval layout for one participant. WESAD-shaped protocols alternate
/// between two condition orders by `variant`; drivedb-shaped protocols have
/// short unlabeled gaps between drive segments.
std::vector<TaskInterval> synth_protocol(Dataset shape, int variant = 0);

/// Renders one recording. The protocol must be sorted and non-overlapping;
/// the recording ends 10 s after the last interval.
SynthRecording gen_recording(const std::string& participant_id, Dataset shape,
                             const ParticipantProfile& profile,
                             const std::vector<TaskInterval>& protocol);

/// ECG built from the template beat at the given times, plus white noise at
/// `snr_db` relative to the clean signal power.
std::vector<double> render_ecg(const std::vector<double>& beat_times_s, double duration_s,
                               double fs, double snr_db, std::mt19937_64& rng);

/// Equally spaced beats at `hr_bpm`, the first at 0.5 s.
std::vector<double> constant_rate_beats(double hr_bpm, double duration_s);

/// Profile drawn from the cohort distributions.
ParticipantProfile draw_profile(std::mt19937_64& rng);

/// `n` participants named s01, s02, ... with independent seeded profiles.
/// Throws ParameterError for n < 2 or a shape other than wesad/drivedb.
std::vector<SynthRecording> gen_cohort(int n, Dataset shape, std::uint64_t base_seed);

}  // namespace stressnp
