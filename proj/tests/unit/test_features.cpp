#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "feature_oracles.hpp"
#include "stressnp/errors.hpp"
#include "stressnp/features.hpp"
#include "synthetic_data.hpp"

using namespace stressnp;

namespace {

std::vector<double> random_rr(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(20, 60);
  std::uniform_real_distribution<double> u(600.0, 1000.0);
  std::vector<double> rr(static_cast<std::size_t>(len(rng)));
  for (double& v : rr) v = u(rng);
  return rr;
}

// Quantised values force many exact recurrences and template matches.
std::vector<double> coarse_rr(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(20, 60), level(0, 4);
  std::vector<double> rr(static_cast<std::size_t>(len(rng)));
  for (double& v : rr) v = 700.0 + 25.0 * level(rng);
  return rr;
}

}  // namespace

TEST_CASE("hr and time-domain examples") {
  auto hr = hr_features(std::vector{800.0, 750.0});
  CHECK(hr.hr_mean == doctest::Approx(77.5));
  CHECK(hr.hr_range == doctest::Approx(5.0));
  CHECK(hr_features(std::vector{600.0}).hr_mean == doctest::Approx(100.0));
  CHECK_THROWS_AS(hr_features(std::vector<double>{}), ParameterError);

  const std::vector rr{800.0, 810.0, 790.0, 805.0};
  auto t = hrv_time(rr);
  CHECK(t.rmssd == doctest::Approx(std::sqrt((100.0 + 400.0 + 225.0) / 3.0)));
  CHECK(t.rmssd == doctest::Approx(15.546).epsilon(1e-4));
  CHECK(t.sdnn == doctest::Approx(8.539).epsilon(1e-3));
  auto c = hrv_time(std::vector(5, 900.0));
  CHECK(c.sdnn == 0.0);
  CHECK(c.rmssd == 0.0);
}

TEST_CASE("nonlinear features on degenerate input") {
  const std::vector flat(30, 800.0);
  CHECK(csi(flat).degenerate);
  CHECK(csi(flat).value == 0.0);
  CHECK(sample_entropy(flat).value == 0.0);
  auto r = rqa(flat);
  // the two corner diagonals hold one point each, too short for a line
  CHECK(r.det == doctest::Approx(1.0 - 2.0 / (30.0 * 29.0)).epsilon(1e-15));

  std::vector<double> inc;
  for (int i = 0; i < 10; ++i) inc.push_back(600.0 + 50.0 * i);  // eps ~ 30 ms
  auto ri = rqa(inc);
  CHECK(ri.det == 0.0);
  CHECK(ri.len_entropy == 0.0);
  CHECK(ri.degenerate);

  std::vector<double> alt;
  for (int i = 0; i < 40; ++i) alt.push_back(i % 2 ? 600.0 : 800.0);
  CHECK(sample_entropy(alt).value == oracle::sampen(alt));
  CHECK(csi(alt).value == doctest::Approx(oracle::csi(alt)).epsilon(1e-12));
}

TEST_CASE("features agree with brute-force oracles") {
  std::mt19937_64 rng(7);
  for (int draw = 0; draw < 200; ++draw) {
    const auto rr = draw % 2 ? random_rr(rng) : coarse_rr(rng);
    CAPTURE(draw);
    auto t = hrv_time(rr);
    CHECK(t.sdnn == doctest::Approx(oracle::sdnn(rr)).epsilon(1e-12));
    CHECK(t.rmssd == doctest::Approx(oracle::rmssd(rr)).epsilon(1e-12));
    CHECK(std::abs(csi(rr).value - oracle::csi(rr)) <= 1e-9 * std::max(1.0, oracle::csi(rr)));
    CHECK(std::abs(sample_entropy(rr).value - oracle::sampen(rr)) <= 1e-9);
    auto r = rqa(rr);
    auto o = oracle::rqa(rr);
    CHECK(std::abs(r.det - o.det) <= 1e-12);
    CHECK(std::abs(r.len_entropy - o.ent) <= 1e-12);
    CHECK(r.det >= 0.0);
    CHECK(r.det <= 1.0);
  }
}

TEST_CASE("scale invariance of sampen and rqa") {
  std::mt19937_64 rng(8);
  for (int draw = 0; draw < 20; ++draw) {
    auto rr = random_rr(rng);
    auto rr2 = rr;
    for (double& v : rr2) v *= 2.0;
    CHECK(sample_entropy(rr2).value == doctest::Approx(sample_entropy(rr).value));
    CHECK(rqa(rr2).det == doctest::Approx(rqa(rr).det));
  }
}

TEST_CASE("frequency domain") {
  SUBCASE("respiratory modulation lands in HF") {
    std::vector<double> rr;
    double t = 0.0;
    while (t < 40.0) {
      const double v = 800.0 + 50.0 * std::sin(2.0 * std::numbers::pi * 0.25 * t);
      rr.push_back(v);
      t += v / 1000.0;
    }
    auto f = hrv_freq(rr);
    CHECK(std::abs(f.hf_peak - 0.25) <= kTachogramHz / 160.0 + 1e-12);
    CHECK(f.hf_rel >= 0.95);
    CHECK(f.lf_rel + f.hf_rel == doctest::Approx(1.0));
    CHECK(f.hf_lf_ratio == doctest::Approx(f.hf_abs / f.lf_abs));
  }
  SUBCASE("0.1 Hz modulation lands in LF") {
    std::vector<double> rr;
    double t = 0.0;
    while (t < 40.0) {
      const double v = 900.0 + 40.0 * std::sin(2.0 * std::numbers::pi * 0.1 * t);
      rr.push_back(v);
      t += v / 1000.0;
    }
    auto f = hrv_freq(rr);
    CHECK(f.lf_rel > 0.8);
    CHECK(std::abs(f.lf_peak - 0.1) <= 0.025 + 1e-12);
  }
  SUBCASE("constant") {
    auto f = hrv_freq(std::vector(50, 800.0));
    CHECK(f.degenerate);
    CHECK(f.lf_abs == 0.0);
    CHECK(f.hf_peak == 0.0);
    CHECK(f.hf_lf_ratio == 0.0);
  }
}

TEST_CASE("gsr features") {
  auto c = gsr_tonic_features(std::vector(10, 5.0), 4.0);
  CHECK(c.mean == 5.0);
  CHECK(c.sd == 0.0);
  CHECK(c.d1_mean == 0.0);
  CHECK(c.d1_sd == 0.0);

  std::vector<double> ramp;
  for (int i = 0; i < 160; ++i) ramp.push_back(2.0 + 0.1 * i / 4.0);
  auto r = gsr_tonic_features(ramp, 4.0);
  CHECK(r.d1_mean == doctest::Approx(0.1));
  CHECK(r.d1_sd == doctest::Approx(0.0).epsilon(1e-9));

  auto h = gsr_tonic_features(std::vector{1.0, 2.0, 4.0}, 1.0);
  CHECK(h.mean == doctest::Approx(7.0 / 3.0));
  CHECK(h.d1_mean == doctest::Approx(1.5));

  CHECK(gsr_phasic_features(std::vector{-1.0, 2.0, -3.0}).mav == doctest::Approx(2.0));
  auto p = gsr_phasic_features(std::vector{1.0, -1.0, 1.0, -1.0});
  CHECK(p.sd == doctest::Approx(1.1547).epsilon(1e-4));
  CHECK(p.mav == 1.0);
  auto z = gsr_phasic_features(std::vector(8, 0.0));
  CHECK(z.sd == 0.0);
  CHECK(z.mav == 0.0);
}

TEST_CASE("extraction on synthetic recordings") {
  const auto& cohort = test_data::wesad_cohort();
  const auto& rec = cohort[0].recording;
  const auto map = BinaryLabelMap::defaults(rec.dataset);
  const auto a = extract_features(rec, WindowSpec{}, map);
  const auto b = extract_features(rec, WindowSpec{}, map);
  REQUIRE(a.matrix.size() > 10);
  CHECK(a.stats.windows == make_windows(rec, WindowSpec{}, map).size());
  CHECK(a.stats.emitted == a.matrix.size());
  CHECK(a.stats.emitted + a.stats.dropped_rr + a.stats.dropped_nonfinite == a.stats.windows);

  for (std::size_t i = 0; i < a.matrix.size(); ++i) {
    CHECK(a.matrix.rows[i].features.values == b.matrix.rows[i].features.values);
    const auto& f = a.matrix.rows[i].features;
    for (double v : f.values) CHECK(std::isfinite(v));
    CHECK(f[Feature::rqa_det] >= 0.0);
    CHECK(f[Feature::rqa_det] <= 1.0);
    CHECK(f[Feature::sdnn] >= 0.0);
    CHECK(f[Feature::phasic_sd] >= 0.0);
    CHECK(f[Feature::lf_rel] >= 0.0);
    CHECK(f[Feature::hf_rel] <= 1.0);
    CHECK(a.matrix.rows[i].window_end_s - a.matrix.rows[i].window_start_s == 40.0);
    if (i > 0) CHECK(a.matrix.rows[i].window_start_s > a.matrix.rows[i - 1].window_start_s);
  }

  SUBCASE("channels are independent") {
    auto perturbed = rec;
    for (auto& ch : perturbed.channels)
      if (ch.name != ChannelName::ecg)
        for (double& s : ch.samples) s = 1.5 * s + 0.7;
    const auto c = extract_features(perturbed, WindowSpec{}, map);
    REQUIRE(c.matrix.size() == a.matrix.size());
    for (std::size_t i = 0; i < c.matrix.size(); ++i)
      for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const bool gsr = k >= static_cast<std::size_t>(Feature::tonic_mean);
        if (!gsr) CHECK(c.matrix.rows[i].features.values[k] == a.matrix.rows[i].features.values[k]);
      }
  }
  SUBCASE("flat ECG segment drops its windows") {
    auto flat = rec;
    for (auto& ch : flat.channels)
      if (ch.name == ChannelName::ecg) {
        const auto lo = static_cast<std::size_t>(200.0 * ch.sample_rate_hz);
        const auto hi = static_cast<std::size_t>(300.0 * ch.sample_rate_hz);
        std::fill(ch.samples.begin() + lo, ch.samples.begin() + hi, 0.0);
      }
    const auto c = extract_features(flat, WindowSpec{}, map);
    CHECK(c.stats.dropped_rr > a.stats.dropped_rr);
    for (const auto& row : c.matrix.rows)
      CHECK_FALSE((row.window_start_s >= 200.0 && row.window_end_s <= 300.0));
  }
}

TEST_CASE("feature csv round trip") {
  auto fm = test_data::drivedb_features();
  const auto file = std::filesystem::temp_directory_path() / "stressnp_test_features.csv";
  write_feature_csv(fm, file);
  const auto back = read_feature_csv(file);
  REQUIRE(back.size() == fm.size());
  for (std::size_t i = 0; i < fm.size(); ++i) {
    CHECK(back.rows[i].participant_id == fm.rows[i].participant_id);
    CHECK(back.rows[i].label == fm.rows[i].label);
    CHECK(back.rows[i].source_label == fm.rows[i].source_label);
    CHECK(back.rows[i].features.values == fm.rows[i].features.values);
  }
  CHECK(fm.participants().size() == 4);
  const auto p = fm.participants()[1];
  CHECK(fm.for_participant(p).size() + fm.excluding_participant(p).size() == fm.size());
  CHECK(fm.X().rows() == static_cast<Eigen::Index>(fm.size()));
  CHECK(fm.X().cols() == static_cast<Eigen::Index>(kNumFeatures));
}
