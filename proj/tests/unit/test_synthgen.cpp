#include <cmath>

#include "doctest.h"
#include "stressnp/dsp.hpp"
#include "stressnp/errors.hpp"
#include "stressnp/synthgen.hpp"

using namespace stressnp;

TEST_CASE("protocols") {
  for (auto shape : {Dataset::wesad, Dataset::drivedb})
    for (int v : {0, 1}) {
      const auto p = synth_protocol(shape, v);
      REQUIRE_FALSE(p.empty());
      for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i].start_s >= p[i - 1].end_s);
    }
  const auto d = synth_protocol(Dataset::drivedb);
  CHECK(d.front().label == TaskLabel::baseline);
  int cities = 0;
  for (const auto& iv : d) cities += iv.label == TaskLabel::city1 || iv.label == TaskLabel::city2 ||
                                     iv.label == TaskLabel::city3;
  CHECK(cities == 3);
  CHECK(synth_protocol(Dataset::wesad, 0)[1].label != synth_protocol(Dataset::wesad, 1)[1].label);
}

TEST_CASE("recording is valid and seeded") {
  ParticipantProfile p;
  p.seed = 9;
  const auto proto = synth_protocol(Dataset::wesad);
  const auto a = gen_recording("x", Dataset::wesad, p, proto);
  const auto b = gen_recording("x", Dataset::wesad, p, proto);
  CHECK_NOTHROW(validate_recording(a.recording));
  CHECK(a.recording.ecg().samples == b.recording.ecg().samples);
  CHECK(a.recording.gsr().samples == b.recording.gsr().samples);
  CHECK(a.recording.ecg().sample_rate_hz == kSynthEcgHz);
  CHECK(a.recording.gsr().sample_rate_hz == kSynthGsrHz);
  const double dur = static_cast<double>(a.recording.ecg().samples.size()) / kSynthEcgHz;
  CHECK(dur == doctest::Approx(proto.back().end_s + 10.0).epsilon(1e-3));

  p.seed = 10;
  const auto c = gen_recording("x", Dataset::wesad, p, proto);
  CHECK(c.recording.ecg().samples != a.recording.ecg().samples);
}

TEST_CASE("arousal raises heart rate and conductance") {
  ParticipantProfile p;
  p.seed = 3;
  p.ecg_snr_db = std::numeric_limits<double>::infinity();
  const std::vector<TaskInterval> proto{{TaskLabel::baseline, 0, 300}, {TaskLabel::stress, 300, 600}};
  const auto r = gen_recording("x", Dataset::wesad, p, proto);
  double rest_beats = 0, stress_beats = 0;
  for (double t : r.truth.peak_times_s) {
    if (t > 100 && t < 300) ++rest_beats;
    if (t > 400 && t < 600) ++stress_beats;
  }
  CHECK(stress_beats > rest_beats * 1.05);
  const auto& g = r.recording.gsr().samples;
  auto mean = [&](double lo, double hi) {
    double s = 0;
    int n = 0;
    for (auto i = static_cast<std::size_t>(lo * kSynthGsrHz); i < static_cast<std::size_t>(hi * kSynthGsrHz); ++i, ++n)
      s += g[i];
    return s / n;
  };
  CHECK(mean(400, 600) > mean(100, 300));
  CHECK(task_arousal(TaskLabel::stress) == 1.0);
  CHECK(task_arousal(TaskLabel::baseline) == 0.0);
  CHECK(task_arousal(TaskLabel::meditation) < 0.0);
}

TEST_CASE("noise-free ECG gives exact peaks") {
  const auto beats = constant_rate_beats(75.0, 60.0);
  CHECK(beats.front() == 0.5);
  CHECK(beats[1] - beats[0] == doctest::Approx(0.8));
  std::mt19937_64 rng(0);
  const auto ecg = render_ecg(beats, 60.0, 256.0, std::numeric_limits<double>::infinity(), rng);
  const auto found = detect_r_peaks(ecg, 256.0);
  REQUIRE(found.peak_times_s.size() >= beats.size() - 1);
  for (double t : found.peak_times_s) {
    double best = 1e9;
    for (double b : beats) best = std::min(best, std::abs(b - t));
    CHECK(best <= 1.0 / 256.0 + 1e-9);
  }
}

TEST_CASE("profiles and cohorts") {
  ParticipantProfile p;
  p.base_hr = 20.0;
  CHECK_THROWS_AS(check_profile(p), ParameterError);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) CHECK_NOTHROW(check_profile(draw_profile(rng)));
  CHECK_THROWS_AS(gen_cohort(1, Dataset::wesad, 0), ParameterError);
  CHECK_THROWS_AS(gen_cohort(3, Dataset::synthetic, 0), ParameterError);
  const auto c = gen_cohort(2, Dataset::drivedb, 4);
  CHECK(c[0].recording.participant_id == "s01");
  CHECK(c[1].recording.participant_id == "s02");
  CHECK(c[0].recording.dataset == Dataset::drivedb);
}
