#include "stressnp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "stressnp/errors.hpp"

namespace stressnp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGridHz = 4.0;  // arousal trajectory resolution
constexpr double kTailS = 10.0;

struct Wave {
  double offset_s;
  double amplitude;
  double width_s;
};

// P, Q, R, S, T
constexpr Wave kTemplate[] = {
    {-0.20, 0.15, 0.025}, {-0.03, -0.12, 0.010}, {0.0, 1.0, 0.011},
    {0.03, -0.25, 0.010}, {0.26, 0.30, 0.045},
};

// First-order lag of the per-task arousal, sampled at kGridHz.
std::vector<double> arousal_trace(const std::vector<TaskInterval>& protocol, double duration_s,
                                  double tau_s) {
  const auto n = static_cast<std::size_t>(std::ceil(duration_s * kGridHz)) + 1;
  std::vector<double> out(n);
  const double alpha = 1.0 - std::exp(-1.0 / (kGridHz * tau_s));
  double level = 0.0, target = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kGridHz;
    while (k < protocol.size() && protocol[k].end_s <= t) ++k;
    if (k < protocol.size() && protocol[k].start_s <= t &&
        protocol[k].label != TaskLabel::unlabeled)
      target = task_arousal(protocol[k].label);
    level += alpha * (target - level);
    out[i] = level;
  }
  return out;
}

double at(const std::vector<double>& trace, double t) {
  const double pos = std::clamp(t * kGridHz, 0.0, static_cast<double>(trace.size() - 1));
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= trace.size()) return trace.back();
  const double f = pos - static_cast<double>(i);
  return trace[i] * (1.0 - f) + trace[i + 1] * f;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

void check_profile(const ParticipantProfile& p) {
  if (!(p.base_hr >= 50.0 && p.base_hr <= 90.0))
    throw ParameterError("base_hr must lie in [50, 90]");
  if (!(p.hr_stress_delta > 0.0)) throw ParameterError("hr_stress_delta must be > 0");
  if (!(p.hrv_scale > 0.0)) throw ParameterError("hrv_scale must be > 0");
  if (!(p.resp_rate_hz > 0.0)) throw ParameterError("resp_rate_hz must be > 0");
  if (!(p.mayer_ratio >= 0.0)) throw ParameterError("mayer_ratio must be >= 0");
  if (!(p.rsa_stress_damping >= 0.0 && p.rsa_stress_damping <= 1.0))
    throw ParameterError("rsa_stress_damping must lie in [0, 1]");
  if (!(p.tonic_base > 0.0)) throw ParameterError("tonic_base must be > 0");
  if (!(p.tonic_stress_rise >= 0.0)) throw ParameterError("tonic_stress_rise must be >= 0");
  if (!(p.scr_rate_rest > 0.0 && p.scr_rate_stress > 0.0))
    throw ParameterError("SCR rates must be > 0");
  if (!(p.scr_amplitude > 0.0)) throw ParameterError("scr_amplitude must be > 0");
}

double task_arousal(TaskLabel label) {
  switch (label) {
    case TaskLabel::stress:
    case TaskLabel::city1:
    case TaskLabel::city2:
    case TaskLabel::city3: return 1.0;
    case TaskLabel::highway1:
    case TaskLabel::highway2: return 0.3;
    case TaskLabel::amusement: return 0.15;
    case TaskLabel::meditation: return -0.2;
    case TaskLabel::baseline:
    case TaskLabel::rest:
    case TaskLabel::unlabeled: return 0.0;
  }
  return 0.0;
}

std::vector<TaskInterval> synth_protocol(Dataset shape, int variant) {
  struct Seg {
    TaskLabel label;
    double minutes;
  };
  std::vector<Seg> segs;
  double gap_s = 0.0;
  if (shape == Dataset::drivedb) {
    segs = {{TaskLabel::baseline, 6.0}, {TaskLabel::city1, 5.0},   {TaskLabel::highway1, 4.0},
            {TaskLabel::city2, 5.0},    {TaskLabel::highway2, 4.0}, {TaskLabel::city3, 5.0},
            {TaskLabel::rest, 6.0}};
    gap_s = 30.0;
  } else if (shape == Dataset::wesad) {
    if (variant % 2 == 0)
      segs = {{TaskLabel::baseline, 8.0}, {TaskLabel::amusement, 6.5},
              {TaskLabel::meditation, 7.0}, {TaskLabel::stress, 10.0},
              {TaskLabel::meditation, 7.0}};
    else
      segs = {{TaskLabel::baseline, 8.0}, {TaskLabel::stress, 10.0},
              {TaskLabel::meditation, 7.0}, {TaskLabel::amusement, 6.5},
              {TaskLabel::meditation, 7.0}};
    gap_s = 60.0;
  } else {
    throw ParameterError("synthetic protocols exist for wesad and drivedb shapes only");
  }
  std::vector<TaskInterval> out;
  double t = 20.0;
  for (const auto& s : segs) {
    out.push_back({s.label, t, t + 60.0 * s.minutes});
    t += 60.0 * s.minutes + gap_s;
  }
  return out;
}

std::vector<double> constant_rate_beats(double hr_bpm, double duration_s) {
  if (!(hr_bpm > 0.0)) throw ParameterError("heart rate must be > 0");
  std::vector<double> beats;
  for (double t = 0.5; t < duration_s - 0.5; t += 60.0 / hr_bpm) beats.push_back(t);
  return beats;
}

std::vector<double> render_ecg(const std::vector<double>& beat_times_s, double duration_s,
                               double fs, double snr_db, std::mt19937_64& rng) {
  if (!(fs > 0.0) || !(duration_s > 0.0)) throw ParameterError("invalid ECG geometry");
  const auto n = static_cast<std::size_t>(std::floor(duration_s * fs));
  std::vector<double> x(n, 0.0);
  for (double beat : beat_times_s) {
    const auto lo = static_cast<std::ptrdiff_t>(std::floor((beat - 0.45) * fs));
    const auto hi = static_cast<std::ptrdiff_t>(std::ceil((beat + 0.45) * fs));
    for (auto i = std::max<std::ptrdiff_t>(lo, 0);
         i <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n) - 1); ++i) {
      const double dt = static_cast<double>(i) / fs - beat;
      for (const auto& w : kTemplate) {
        const double u = (dt - w.offset_s) / w.width_s;
        x[static_cast<std::size_t>(i)] += w.amplitude * std::exp(-0.5 * u * u);
      }
    }
  }
  if (std::isfinite(snr_db) && n > 0) {
    double power = 0.0;
    for (double v : x) power += v * v;
    power /= static_cast<double>(n);
    std::normal_distribution<double> noise(0.0, std::sqrt(power / std::pow(10.0, snr_db / 10.0)));
    for (double& v : x) v += noise(rng);
  }
  return x;
}

SynthRecording gen_recording(const std::string& participant_id, Dataset shape,
                             const ParticipantProfile& p,
                             const std::vector<TaskInterval>& protocol) {
  check_profile(p);
  if (protocol.empty()) throw ParameterError("empty protocol");
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    if (!(protocol[i].end_s > protocol[i].start_s) || protocol[i].start_s < 0.0)
      throw ParameterError("protocol interval " + std::to_string(i) + " is empty or negative");
    if (i > 0 && protocol[i].start_s < protocol[i - 1].end_s)
      throw ParameterError("protocol intervals overlap or are unsorted");
  }
  const double duration = protocol.back().end_s + kTailS;
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal;

  const auto fast = arousal_trace(protocol, duration, 15.0);
  const auto slow = arousal_trace(protocol, duration, 60.0);

  // Beat times: respiratory sinus arrhythmia at 0.25 Hz, a 0.1 Hz Mayer
  // wave, and white jitter. Stress damps the respiratory component.
  SynthRecording out;
  const double resp_phase = uniform(rng, 0.0, kTwoPi);
  const double mayer_phase = uniform(rng, 0.0, kTwoPi);
  for (double t = 0.5; t < duration - 0.5;) {
    out.truth.peak_times_s.push_back(t);
    const double a = at(fast, t);
    const double hr = p.base_hr + p.hr_stress_delta * a;
    const double stress = std::max(a, 0.0);
    const double rsa = 0.02 * p.hrv_scale * (1.0 - p.rsa_stress_damping * stress);
    const double mayer = 0.02 * p.hrv_scale * p.mayer_ratio * (1.0 + 0.3 * stress);
    const double rr = 60.0 / hr *
                      (1.0 + rsa * std::sin(kTwoPi * p.resp_rate_hz * t + resp_phase) +
                       mayer * std::sin(kTwoPi * 0.1 * t + mayer_phase)) +
                      0.008 * p.hrv_scale * (1.0 - 0.5 * stress) * normal(rng);
    t += std::max(rr, 0.3);
  }

  Recording& rec = out.recording;
  rec.participant_id = participant_id;
  rec.dataset = shape;
  rec.intervals = protocol;
  rec.channels.push_back({ChannelName::ecg, kSynthEcgHz,
                          render_ecg(out.truth.peak_times_s, duration, kSynthEcgHz,
                                     p.ecg_snr_db, rng)});

  // GSR: tonic level with slow drift plus SCRs from an inhomogeneous
  // Poisson process (thinning at the stress rate).
  const auto n_gsr = static_cast<std::size_t>(std::floor(duration * kSynthGsrHz));
  std::vector<double> gsr(n_gsr);
  const double d1 = uniform(rng, 0.0, kTwoPi), d2 = uniform(rng, 0.0, kTwoPi);
  for (std::size_t i = 0; i < n_gsr; ++i) {
    const double t = static_cast<double>(i) / kSynthGsrHz;
    gsr[i] = p.tonic_base + p.tonic_stress_rise * at(slow, t) +
             0.15 * std::sin(kTwoPi * t / 400.0 + d1) + 0.08 * std::sin(kTwoPi * t / 170.0 + d2);
  }
  constexpr double rise = 0.75, decay = 2.0;
  const double t_peak = rise * decay / (decay - rise) * std::log(decay / rise);
  const double kernel_peak = std::exp(-t_peak / decay) - std::exp(-t_peak / rise);
  const double max_rate = std::max(p.scr_rate_rest, p.scr_rate_stress) / 60.0;
  std::exponential_distribution<double> gap(max_rate);
  for (double t = gap(rng); t < duration; t += gap(rng)) {
    const double a = std::max(at(fast, t), 0.0);
    const double rate = (p.scr_rate_rest + (p.scr_rate_stress - p.scr_rate_rest) * a) / 60.0;
    const double keep = uniform(rng, 0.0, 1.0);
    const double amp = p.scr_amplitude * uniform(rng, 0.5, 1.5);
    if (keep * max_rate > rate) continue;
    for (auto i = static_cast<std::size_t>(std::ceil(t * kSynthGsrHz));
         i < n_gsr && static_cast<double>(i) / kSynthGsrHz < t + 12.0 * decay; ++i) {
      const double dt = static_cast<double>(i) / kSynthGsrHz - t;
      gsr[i] += amp * (std::exp(-dt / decay) - std::exp(-dt / rise)) / kernel_peak;
    }
  }
  for (double& v : gsr) v += 0.003 * normal(rng);
  rec.channels.push_back({ChannelName::gsr_hand, kSynthGsrHz, std::move(gsr)});
  return out;
}

ParticipantProfile draw_profile(std::mt19937_64& rng) {
  ParticipantProfile p;
  p.base_hr = uniform(rng, 55.0, 85.0);
  p.hr_stress_delta = uniform(rng, 6.0, 14.0);
  p.hrv_scale = std::exp(uniform(rng, std::log(0.4), std::log(2.0)));
  p.resp_rate_hz = uniform(rng, 0.12, 0.35);
  p.mayer_ratio = uniform(rng, 0.2, 1.2);
  p.rsa_stress_damping = uniform(rng, 0.1, 0.6);
  p.tonic_base = uniform(rng, 1.0, 15.0);
  p.tonic_stress_rise = uniform(rng, 0.3, 1.5);
  p.scr_rate_rest = uniform(rng, 1.0, 5.0);
  p.scr_rate_stress = p.scr_rate_rest + uniform(rng, 1.0, 4.0);
  p.scr_amplitude = uniform(rng, 0.1, 0.8);
  p.ecg_snr_db = uniform(rng, 15.0, 25.0);
  p.seed = rng();
  return p;
}

std::vector<SynthRecording> gen_cohort(int n, Dataset shape, std::uint64_t base_seed) {
  if (n < 2) throw ParameterError("a cohort needs at least two participants");
  if (shape != Dataset::wesad && shape != Dataset::drivedb)
    throw ParameterError("cohort shape must be wesad or drivedb");
  std::mt19937_64 rng(base_seed);
  std::vector<SynthRecording> out;
  for (int i = 0; i < n; ++i) {
    const auto profile = draw_profile(rng);
    char id[16];
    std::snprintf(id, sizeof(id), "s%02d", i + 1);
    out.push_back(gen_recording(id, shape, profile, synth_protocol(shape, i)));
  }
  return out;
}

}  // namespace stressnp
