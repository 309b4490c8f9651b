#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "np_oracle.hpp"
#include "stressnp/errors.hpp"
#include "stressnp/neuralprocess.hpp"
#include "synthetic_data.hpp"

using namespace stressnp;

namespace {

ContextSet random_set(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::bernoulli_distribution coin(0.5);
  ContextSet s;
  s.x.resize(n, kNpInputDim);
  s.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kNpInputDim; ++j) s.x(i, j) = normal(rng);
    s.y(i) = coin(rng) ? 1.0 : 0.0;
  }
  return s;
}

// Participant matrix with `per_label` windows of each listed task.
FeatureMatrix participant(const std::string& id, std::initializer_list<TaskLabel> labels,
                          int per_label) {
  FeatureMatrix fm;
  double t = 0.0;
  for (auto l : labels)
    for (int i = 0; i < per_label; ++i, t += 20.0) {
      FeatureWindow w;
      w.participant_id = id;
      w.window_start_s = t;
      w.window_end_s = t + 40.0;
      w.source_label = l;
      w.label = (l == TaskLabel::city1 || l == TaskLabel::stress) ? 1 : 0;
      for (std::size_t j = 0; j < kNumFeatures; ++j)
        w.features.values[j] = std::sin(0.1 * t + static_cast<double>(j));
      fm.rows.push_back(w);
    }
  return fm;
}

}  // namespace

TEST_CASE("zero weights give probability one half and ln 2 per target") {
  const auto p = NpParams::zeros();
  Rng rng(1);
  const auto c = random_set(5, rng), t = random_set(7, rng);
  const auto probs = np_predict(p, c, t.x);
  for (Eigen::Index i = 0; i < probs.size(); ++i) CHECK(probs(i) == 0.5);
  const auto loss = np_loss(p, c, t, rng);
  CHECK(loss.kl == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loss.bce == doctest::Approx(7.0 * std::log(2.0)).epsilon(1e-12));
  NpLossOptions mean;
  mean.reduction = BceReduction::mean;
  const auto lm = np_loss(p, c, t, rng, mean);
  CHECK(lm.bce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(lm.loss == doctest::Approx(0.6931).epsilon(1e-4));
}

TEST_CASE("parameter layout") {
  std::size_t total = 0;
  for (std::size_t l = 0; l < kNpNumLayers; ++l) {
    auto s = layer_shape(static_cast<NpLayer>(l));
    total += static_cast<std::size_t>(s.out * (s.in + 1));
  }
  CHECK(NpParams::size() == total);
  CHECK(layer_shape(NpLayer::enc1).in == kNpInputDim + 1);
  CHECK(layer_shape(NpLayer::dec1).in == kNpInputDim + kNpLatentDim);
  CHECK(layer_shape(NpLayer::enc_mu).out == kNpLatentDim);

  const auto p = NpParams::init(3);
  for (std::size_t l = 0; l < kNpNumLayers; ++l) {
    const auto layer = static_cast<NpLayer>(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_shape(layer).in));
    CHECK(p.weight(layer).cwiseAbs().maxCoeff() <= bound);
    CHECK(p.bias(layer).cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(NpParams::init(3).theta == p.theta);
  CHECK(NpParams::init(4).theta != p.theta);
}

TEST_CASE("forward pass matches the loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = NpParams::init(100 + trial);
    const auto c = random_set(6, rng, 2.0), t = random_set(9, rng, 2.0);
    const auto net = oracle::unpack(p.theta);
    const auto ref = oracle::encode(net, oracle::rows(c.x),
                                    oracle::Vec(c.y.data(), c.y.data() + c.y.size()));
    const auto z = encode(p, c);
    for (int d = 0; d < kNpLatentDim; ++d) {
      CHECK(z.mu(d) == doctest::Approx(ref.mu[d]).epsilon(1e-12));
      CHECK(z.log_var(d) == doctest::Approx(ref.log_var[d]).epsilon(1e-12));
    }
    Rng unused(0);
    const auto probs = decode(p, z.mu, t.x, false, unused);
    const auto tx = oracle::rows(t.x);
    for (int i = 0; i < t.size(); ++i)
      CHECK(probs(i) == doctest::Approx(oracle::decode(net, ref.mu, tx[i])).epsilon(1e-12));
  }
}

TEST_CASE("loss without dropout matches the oracle") {
  Rng data_rng(5);
  const auto p = NpParams::init(8);
  const auto c = random_set(5, data_rng), t = random_set(8, data_rng);
  const auto net = oracle::unpack(p.theta);
  const auto zc = oracle::encode(net, oracle::rows(c.x),
                                 oracle::Vec(c.y.data(), c.y.data() + c.y.size()));
  const auto zt = oracle::encode(net, oracle::rows(t.x),
                                 oracle::Vec(t.y.data(), t.y.data() + t.y.size()));
  // The library draws the latent noise first from the generator it is given.
  Rng eps_rng(42);
  std::normal_distribution<double> normal;
  oracle::Vec z(kNpLatentDim);
  for (int d = 0; d < kNpLatentDim; ++d)
    z[d] = zt.mu[d] + std::exp(0.5 * zt.log_var[d]) * normal(eps_rng);
  double bce = 0.0;
  const auto tx = oracle::rows(t.x);
  for (int i = 0; i < t.size(); ++i) {
    const double q = std::clamp(oracle::decode(net, z, tx[i]), kBceClip, 1.0 - kBceClip);
    bce -= t.y(i) * std::log(q) + (1.0 - t.y(i)) * std::log(1.0 - q);
  }

  Rng rng(42);
  const auto loss = np_loss(p, c, t, rng, {0.2, false, KlDirection::target_to_context});
  CHECK(loss.bce == doctest::Approx(bce).epsilon(1e-12));
  Rng rng_mean(42);
  const auto lm = np_loss(p, c, t, rng_mean,
                          {0.2, false, KlDirection::target_to_context, BceReduction::mean});
  CHECK(lm.bce == doctest::Approx(bce / static_cast<double>(t.size())).epsilon(1e-12));
  CHECK(lm.kl == loss.kl);
  CHECK(loss.kl == doctest::Approx(oracle::kl(zt, zc)).epsilon(1e-12));
  Rng rng2(42);
  const auto rev = np_loss(p, c, t, rng2, {0.2, false, KlDirection::context_to_target});
  CHECK(rev.kl == doctest::Approx(oracle::kl(zc, zt)).epsilon(1e-12));
}

TEST_CASE("kl_diag_gauss closed forms") {
  LatentGaussian p{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
  LatentGaussian q{Eigen::VectorXd::Ones(4), Eigen::VectorXd::Zero(4)};
  CHECK(kl_diag_gauss(p, p) == 0.0);
  CHECK(kl_diag_gauss(p, q) == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(9);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    LatentGaussian a{Eigen::VectorXd(6), Eigen::VectorXd(6)}, b = a;
    for (int d = 0; d < 6; ++d) {
      a.mu(d) = normal(rng);
      a.log_var(d) = normal(rng);
      b.mu(d) = normal(rng);
      b.log_var(d) = normal(rng);
    }
    CHECK(kl_diag_gauss(a, b) >= 0.0);
    CHECK(std::abs(kl_diag_gauss(a, a)) <= 1e-12);
  }
}

TEST_CASE("context equal to targets has zero KL") {
  Rng rng(2);
  const auto p = NpParams::init(2);
  const auto s = random_set(7, rng);
  CHECK(np_loss(p, s, s, rng).kl == 0.0);
}

TEST_CASE("encoder is exactly permutation invariant") {
  Rng rng(4);
  const auto p = NpParams::init(6);
  const auto s = random_set(9, rng, 3.0);
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    ContextSet q = s;
    for (int i = 0; i < 9; ++i) {
      q.x.row(i) = s.x.row(perm[i]);
      q.y(i) = s.y(perm[i]);
    }
    const auto a = encode(p, s), b = encode(p, q);
    CHECK(a.mu == b.mu);
    CHECK(a.log_var == b.log_var);
    const auto t = random_set(4, rng);
    CHECK(np_predict(p, s, t.x) == np_predict(p, q, t.x));
  }
}

TEST_CASE("duplicate pair enters only through the mean") {
  Rng rng(12);
  const auto p = NpParams::init(13);
  const auto s = random_set(5, rng);
  ContextSet single;
  single.x = s.x.row(2);
  single.y = s.y.segment(2, 1);
  ContextSet dup;
  dup.x.resize(6, kNpInputDim);
  dup.x.topRows(5) = s.x;
  dup.x.row(5) = s.x.row(2);
  dup.y.resize(6);
  dup.y << s.y, s.y(2);
  // The heads are affine in the set mean, so mu(S + x_k) = (5 mu(S) + mu(x_k)) / 6.
  const Eigen::VectorXd expect = (5.0 * encode(p, s).mu + encode(p, single).mu) / 6.0;
  CHECK((encode(p, dup).mu - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample_z reparameterisation") {
  LatentGaussian g{Eigen::VectorXd::Constant(3, 2.0), Eigen::VectorXd::Constant(3, std::log(4.0))};
  Rng a(7), b(7);
  const auto z = sample_z(g, a);
  std::normal_distribution<double> normal;
  for (int d = 0; d < 3; ++d) CHECK(z(d) == doctest::Approx(2.0 + 2.0 * normal(b)));

  LatentGaussian tight{Eigen::VectorXd::Constant(3, -1.5), Eigen::VectorXd::Constant(3, -kLogVarClamp)};
  const auto zt = sample_z(tight, a);
  for (int d = 0; d < 3; ++d) CHECK(std::abs(zt(d) + 1.5) < 0.05);

  LatentGaussian std_normal{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = sample_z(std_normal, a)(0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("zero weights encode to the standard normal") {
  Rng rng(12);
  const auto g = encode(NpParams::zeros(), random_set(4, rng));
  CHECK(g.mu.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.log_var.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(encode(NpParams::zeros(), ContextSet{RowMatrix(0, kNpInputDim), Eigen::VectorXd(0)}),
                  ParameterError);
}

TEST_CASE("decoder dropout only in training mode") {
  Rng rng(3);
  const auto p = NpParams::init(3);
  const auto t = random_set(6, rng);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(kNpLatentDim);
  Rng r1(1), r2(2);
  CHECK(decode(p, z, t.x, false, r1) == decode(p, z, t.x, false, r2));
  Rng r3(1), r4(2);
  CHECK(decode(p, z, t.x, true, r3, 0.5) != decode(p, z, t.x, true, r4, 0.5));
}

TEST_CASE("analytic gradient matches central differences") {
  Rng data_rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    NpParams p = NpParams::init(500 + trial);
    const auto c = random_set(4, data_rng), t = random_set(6, data_rng);
    const NpLossOptions opts{0.0, false,
                             trial % 2 ? KlDirection::context_to_target
                                       : KlDirection::target_to_context,
                             trial < 2 ? BceReduction::sum : BceReduction::mean};
    Rng rng(trial);
    const auto g = np_loss(p, c, t, rng, opts, true).grad;
    Eigen::VectorXd fd(g.size());
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const double keep = p.theta(k);
      p.theta(k) = keep + h;
      Rng r1(trial);
      const double up = np_loss(p, c, t, r1, opts).loss;
      p.theta(k) = keep - h;
      Rng r2(trial);
      const double down = np_loss(p, c, t, r2, opts).loss;
      p.theta(k) = keep;
      fd(k) = (up - down) / (2.0 * h);
    }
    const double rel = (g - fd).norm() / std::max(g.norm(), fd.norm());
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("select_context strategies") {
  Rng rng(1);
  const auto drive = participant("d", {TaskLabel::baseline, TaskLabel::city1, TaskLabel::highway1,
                                       TaskLabel::city2, TaskLabel::rest},
                                 6);
  SUBCASE("baseline") {
    const auto sel = select_context(drive, Strategy::baseline, 6, rng);
    CHECK(sel.context.size() == 6);
    for (auto i : sel.context) CHECK(drive.rows[i].source_label == TaskLabel::baseline);
    CHECK(sel.excluded.size() == 6);
  }
  SUBCASE("tasks takes two per segment") {
    const auto sel = select_context(drive, Strategy::tasks, 6, rng);
    int counts[3] = {0, 0, 0};
    for (auto i : sel.context) {
      const auto l = drive.rows[i].source_label;
      counts[l == TaskLabel::baseline ? 0 : l == TaskLabel::city1 ? 1 : 2]++;
      CHECK((l == TaskLabel::baseline || l == TaskLabel::city1 || l == TaskLabel::highway1));
    }
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 2);
    CHECK(counts[2] == 2);
    CHECK(sel.excluded.size() == 18);
    CHECK(remaining_rows(drive.size(), sel.excluded).size() == 12);
  }
  SUBCASE("random excludes only the chosen windows") {
    FeatureMatrix fm = participant("r", {TaskLabel::baseline}, 29);
    const auto sel = select_context(fm, Strategy::random, 6, rng);
    CHECK(sel.excluded.size() == 6);
    const auto rest = remaining_rows(fm.size(), sel.excluded);
    CHECK(rest.size() == 23);
    for (auto i : sel.context) CHECK(std::find(rest.begin(), rest.end(), i) == rest.end());
  }
  SUBCASE("errors") {
    const auto wesad = participant("w", {TaskLabel::baseline, TaskLabel::stress}, 5);
    CHECK_THROWS_AS(select_context(wesad, Strategy::tasks, 6, rng), ParameterError);
    CHECK_THROWS_AS(select_context(wesad, Strategy::baseline, 6, rng), ParameterError);
    CHECK_THROWS_AS(select_context(wesad, Strategy::random, 0, rng), ParameterError);
  }
  CHECK(parse_strategy("tasks") == Strategy::tasks);
  CHECK_FALSE(parse_strategy("all").has_value());
}

TEST_CASE("training") {
  const auto& cohort = test_data::drivedb_features();
  std::vector<FeatureMatrix> parts;
  for (const auto& id : cohort.participants()) parts.push_back(cohort.for_participant(id));

  CHECK_THROWS_AS(train_np(std::span(parts.data(), 1), TrainConfig{}), ParameterError);

  TrainConfig cfg;
  cfg.seed = 5;
  const auto a = train_np(parts, cfg);
  const auto b = train_np(parts, cfg);
  CHECK(a.params.theta == b.params.theta);
  REQUIRE(a.epoch_loss.size() == 50);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());

  SUBCASE("json round trip keeps predictions bit-exact") {
    const auto restored = np_from_json(nlohmann::json::parse(np_to_json(a.params, cfg).dump()));
    CHECK(restored.theta == a.params.theta);
    Rng rng(0);
    const auto sel = select_context(parts[0], Strategy::random, 6, rng);
    const auto ctx = make_context(parts[0], sel.context);
    const RowMatrix x = parts[0].X();
    CHECK(np_predict(a.params, ctx, x) == np_predict(restored, ctx, x));
    CHECK(np_predict(a.params, ctx, x) == np_predict(a.params, ctx, x));
  }
}
