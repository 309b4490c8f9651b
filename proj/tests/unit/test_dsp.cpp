#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "stressnp/dsp.hpp"
#include "stressnp/errors.hpp"
#include "stressnp/synthgen.hpp"

using namespace stressnp;
using std::numbers::pi;

namespace {

// |H|^2 of the prewarped analog prototype, which the bilinear transform maps
// exactly onto the digital axis.
double butter_mag(const FilterSpec& s, double f) {
  const double w = std::tan(pi * f / s.sample_rate_hz);
  const double w1 = std::tan(pi * s.low_hz / s.sample_rate_hz);
  double ratio;
  if (s.kind == FilterKind::lowpass) {
    ratio = w / w1;
  } else {
    const double w2 = std::tan(pi * s.high_hz / s.sample_rate_hz);
    ratio = (w * w - w1 * w2) / (w * (w2 - w1));
  }
  return 1.0 / std::sqrt(1.0 + std::pow(ratio * ratio, s.order));
}

// Direct-form evaluation of the cascade transfer function.
double cascade_mag(const std::vector<Biquad>& sos, double f, double fs) {
  const auto z1 = std::polar(1.0, -2.0 * pi * f / fs);
  std::complex<double> h = 1.0;
  for (const auto& q : sos)
    h *= (q.b0 + q.b1 * z1 + q.b2 * z1 * z1) / (1.0 + q.a1 * z1 + q.a2 * z1 * z1);
  return std::abs(h);
}

std::vector<double> sine(double f, double fs, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * pi * f * static_cast<double>(i) / fs + phase);
  return x;
}

struct Match {
  std::size_t tp = 0, fp = 0, fn = 0;
  double max_err = 0.0;
};

Match match_peaks(const std::vector<double>& truth, const std::vector<double>& found,
                  double tol_s) {
  Match m;
  std::size_t j = 0;
  for (double t : truth) {
    while (j < found.size() && found[j] < t - tol_s) {
      ++m.fp;
      ++j;
    }
    if (j < found.size() && std::abs(found[j] - t) <= tol_s) {
      ++m.tp;
      m.max_err = std::max(m.max_err, std::abs(found[j] - t));
      ++j;
    } else {
      ++m.fn;
    }
  }
  m.fp += found.size() - j;
  return m;
}

}  // namespace

TEST_CASE("filter spec checks") {
  CHECK_THROWS_AS(check_filter_spec(FilterSpec::lowpass(0.0, 4.0)), ParameterError);
  CHECK_THROWS_AS(check_filter_spec(FilterSpec::lowpass(2.0, 4.0)), ParameterError);
  CHECK_THROWS_AS(check_filter_spec(FilterSpec::bandpass(2.0, 1.0, 10.0)), ParameterError);
  CHECK_NOTHROW(check_filter_spec(FilterSpec::bandpass(0.5, 2.0, 8.0)));
}

TEST_CASE("butterworth matches the analytic magnitude") {
  const std::vector specs{
      FilterSpec::lowpass(0.2, 4.0), FilterSpec::lowpass(0.2, 32.0),
      FilterSpec::lowpass(40.0, 256.0, 3), FilterSpec::bandpass(0.5, 2.0, 8.0),
      FilterSpec::bandpass(0.5, 2.0, 32.0), FilterSpec::bandpass(8.0, 16.0, 256.0, 2)};
  for (const auto& s : specs) {
    const auto sos = design_butterworth(s);
    CHECK(sos.size() == static_cast<std::size_t>((s.poles() + 1) / 2));
    for (int k = 1; k < 200; ++k) {
      const double f = s.sample_rate_hz / 2.0 * k / 200.0;
      CAPTURE(f);
      CHECK(sos_magnitude(sos, f, s.sample_rate_hz) ==
            doctest::Approx(butter_mag(s, f)).epsilon(1e-9).scale(1.0));
      CHECK(cascade_mag(sos, f, s.sample_rate_hz) ==
            doctest::Approx(butter_mag(s, f)).epsilon(1e-9).scale(1.0));
    }
  }
  const auto lp = design_butterworth(FilterSpec::lowpass(0.2, 32.0));
  CHECK(std::abs(sos_magnitude(lp, 0.0, 32.0) - 1.0) < 1e-6);
  CHECK(20.0 * std::log10(sos_magnitude(lp, 2.0, 32.0)) <= -60.0);
  CHECK(sos_magnitude(lp, 0.2, 32.0) == doctest::Approx(std::sqrt(0.5)));
  const auto bp = design_butterworth(FilterSpec::bandpass(0.5, 2.0, 32.0));
  const double w0 = std::sqrt(std::tan(pi * 0.5 / 32.0) * std::tan(pi * 2.0 / 32.0));
  CHECK(sos_magnitude(bp, std::atan(w0) * 32.0 / pi, 32.0) == doctest::Approx(1.0));
}

TEST_CASE("sos_filter equals the difference equation") {
  const auto sos = design_butterworth(FilterSpec::bandpass(0.5, 2.0, 16.0, 2));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> x(300);
  for (double& v : x) v = n(rng);
  auto y = x;
  for (const auto& q : sos) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      double v = q.b0 * y[i];
      if (i >= 1) v += q.b1 * y[i - 1] - q.a1 * out[i - 1];
      if (i >= 2) v += q.b2 * y[i - 2] - q.a2 * out[i - 2];
      out[i] = v;
    }
    y = out;
  }
  const auto got = sos_filter(sos, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(got[i] == doctest::Approx(y[i]).epsilon(1e-12).scale(1.0));

  const auto steady = sos_filter(design_butterworth(FilterSpec::lowpass(1.0, 16.0)),
                                 std::vector(50, 3.0), true);
  for (double v : steady) CHECK(v == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("zero-phase filtering") {
  const double fs = 32.0;
  const auto spec = FilterSpec::bandpass(0.5, 2.0, fs);
  SUBCASE("no lag in the passband") {
    const auto x = sine(1.0, fs, 1024, 0.3);
    const auto y = butterworth_filter(x, spec);
    REQUIRE(y.size() == x.size());
    int best = 0;
    double best_v = -1e300;
    for (int lag = -10; lag <= 10; ++lag) {
      double s = 0.0;
      for (int i = 100; i < 900; ++i) s += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i + lag)];
      if (s > best_v) {
        best_v = s;
        best = lag;
      }
    }
    CHECK(std::abs(best) <= 1);
  }
  SUBCASE("linearity") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    std::vector<double> a(500), b(500), c(500);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
      c[i] = 2.5 * a[i] - 0.7 * b[i];
    }
    const auto fa = butterworth_filter(a, spec), fb = butterworth_filter(b, spec),
               fc = butterworth_filter(c, spec);
    for (std::size_t i = 0; i < c.size(); ++i)
      CHECK(std::abs(fc[i] - (2.5 * fa[i] - 0.7 * fb[i])) < 1e-9);
  }
  SUBCASE("too short") {
    CHECK_THROWS_AS(butterworth_filter(std::vector<double>(10, 1.0), spec), ParameterError);
  }
}

TEST_CASE("gsr decomposition") {
  const double fs = 32.0;
  std::vector<double> x(static_cast<std::size_t>(fs * 120));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = 5.0 + 0.01 * t + 0.2 * std::sin(2.0 * pi * 1.0 * t);
  }
  const auto d = decompose_gsr(x, fs);
  REQUIRE(d.tonic.size() == x.size());
  for (std::size_t i = 320; i + 320 < x.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    CHECK(d.tonic[i] == doctest::Approx(5.0 + 0.01 * t).epsilon(1e-2));
    CHECK(std::abs(d.phasic[i] - 0.2 * std::sin(2.0 * pi * t)) < 0.02);
  }
  CHECK_THROWS_AS(decompose_gsr(x, 4.0), ParameterError);
}

TEST_CASE("QRS detection on synthetic ECG") {
  std::mt19937_64 rng(11);
  ParticipantProfile prof;
  prof.ecg_snr_db = 10.0;
  prof.seed = 5;
  auto rec = gen_recording("q", Dataset::wesad, prof, {{TaskLabel::baseline, 0.0, 180.0},
                                                       {TaskLabel::stress, 200.0, 320.0}});
  const auto& ecg = rec.recording.ecg();
  const auto found = detect_r_peaks(ecg.samples, ecg.sample_rate_hz);
  const auto m = match_peaks(rec.truth.peak_times_s, found.peak_times_s, 0.050);
  CHECK(rec.truth.peak_times_s.size() > 300);
  CHECK(static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) >= 0.99);
  CHECK(static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) >= 0.99);
  CHECK(m.max_err <= 0.020);

  SUBCASE("shift equivariance") {
    const std::size_t k = 37;
    std::vector<double> shifted(k, ecg.samples.front());
    shifted.insert(shifted.end(), ecg.samples.begin(), ecg.samples.end());
    const auto g = detect_r_peaks(shifted, ecg.sample_rate_hz);
    const double dt = static_cast<double>(k) / ecg.sample_rate_hz;
    std::vector<double> back;
    for (double t : g.peak_times_s) back.push_back(t - dt);
    const auto mm = match_peaks(found.peak_times_s, back, 1.01 / ecg.sample_rate_hz);
    CHECK(mm.fn <= 2);
    CHECK(mm.fp <= 2);
  }
  SUBCASE("flat signal and bad input") {
    CHECK(detect_r_peaks(std::vector(2560, 0.0), 256.0).peak_times_s.empty());
    CHECK_THROWS_AS(detect_r_peaks(std::vector(2560, 0.0), 50.0), ParameterError);
    CHECK_THROWS_AS(detect_r_peaks(std::vector(256, 0.0), 256.0), ParameterError);
  }
}

TEST_CASE("rr intervals") {
  RPeakSeries p{{1.0, 1.8, 1.9, 2.7, 5.0, 5.6}};
  const auto rr = rr_intervals(p);
  // 100 ms and 2300 ms gaps are dropped
  REQUIRE(rr.size() == 3);
  CHECK(rr[0] == doctest::Approx(800.0));
  CHECK(rr[1] == doctest::Approx(800.0));
  CHECK(rr[2] == doctest::Approx(600.0));
  CHECK(rr_intervals(RPeakSeries{{1.0}}).empty());

  // silence before the first beat changes nothing
  const auto beats = constant_rate_beats(72.0, 30.0);
  std::mt19937_64 rng(1);
  const auto ecg = render_ecg(beats, 30.0, 256.0, 30.0, rng);
  std::vector<double> padded(512, 0.0);
  padded.insert(padded.end(), ecg.begin(), ecg.end());
  const auto a = rr_intervals(detect_r_peaks(ecg, 256.0));
  const auto b = rr_intervals(detect_r_peaks(padded, 256.0));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1000.0 / 256.0 + 1e-9);
}
