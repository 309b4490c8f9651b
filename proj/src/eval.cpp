#include "stressnp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "stressnp/errors.hpp"
#include "text_util.hpp"

namespace stressnp {

namespace {

void check_sizes(std::span<const int> labels, std::size_t n) {
  if (labels.size() != n) throw ParameterError("labels and scores differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw ParameterError("labels must be 0 or 1");
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

struct SweepPoint {
  double tp;
  double fp;
};

// Cumulative (tp, fp) after each distinct threshold, highest first.
std::vector<SweepPoint> sweep(std::span<const int> labels, std::span<const double> scores) {
  const auto idx = order_desc(scores);
  std::vector<SweepPoint> out;
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (labels[idx[k]] ? tp : fp) += 1.0;
    if (k + 1 == idx.size() || scores[idx[k + 1]] != scores[idx[k]]) out.push_back({tp, fp});
  }
  return out;
}

}  // namespace

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_sizes(labels, scores.size());
  const auto n = scores.size();
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw MetricError("AUC needs both classes");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) pos_rank_sum += midrank;
    i = j;
  }
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double average_precision(std::span<const int> labels, std::span<const double> scores) {
  check_sizes(labels, scores.size());
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0.0) throw MetricError("average precision needs a positive label");
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& p : sweep(labels, scores)) {
    const double recall = p.tp / n_pos;
    ap += (recall - prev_recall) * (p.tp / (p.tp + p.fp));
    prev_recall = recall;
  }
  return ap;
}

double log_loss(std::span<const int> labels, std::span<const double> probs) {
  check_sizes(labels, probs.size());
  if (probs.empty()) throw MetricError("log loss of an empty set");
  constexpr double eps = 1e-15;
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0))
      throw ParameterError("probabilities must lie in [0, 1]");
    const double p = std::clamp(probs[i], eps, 1.0 - eps);
    sum -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(probs.size());
}

double accuracy(std::span<const int> labels, std::span<const double> scores, double threshold) {
  check_sizes(labels, scores.size());
  if (scores.empty()) throw MetricError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if ((scores[i] >= threshold ? 1 : 0) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

std::vector<CurvePoint> roc_curve(std::span<const int> labels, std::span<const double> scores) {
  check_sizes(labels, scores.size());
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw MetricError("ROC curve needs both classes");
  std::vector<CurvePoint> out{{0.0, 0.0}};
  for (const auto& p : sweep(labels, scores)) out.push_back({p.fp / n_neg, p.tp / n_pos});
  return out;
}

std::vector<CurvePoint> pr_curve(std::span<const int> labels, std::span<const double> scores) {
  check_sizes(labels, scores.size());
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0.0) throw MetricError("PR curve needs a positive label");
  std::vector<CurvePoint> out{{0.0, 1.0}};
  for (const auto& p : sweep(labels, scores)) out.push_back({p.tp / n_pos, p.tp / (p.tp + p.fp)});
  return out;
}

std::string_view to_string(GeneralKind k) {
  switch (k) {
    case GeneralKind::lasso: return "lasso";
    case GeneralKind::svm: return "svm";
    case GeneralKind::knn: return "knn";
  }
  return "?";
}

std::optional<GeneralKind> parse_general_kind(std::string_view s) {
  for (auto k : {GeneralKind::lasso, GeneralKind::svm, GeneralKind::knn})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void check_experiment_config(const ExperimentConfig& cfg) {
  auto uses_tasks = [&] {
    return std::find(cfg.strategies.begin(), cfg.strategies.end(), Strategy::tasks) !=
               cfg.strategies.end() ||
           (cfg.other_participant && cfg.other_strategy == Strategy::tasks);
  };
  if (cfg.dataset == Dataset::wesad && uses_tasks())
    throw ConfigError("strategies", "the tasks strategy needs drivedb-shaped recordings");
  if (cfg.models.empty() && cfg.strategies.empty())
    throw ConfigError("models", "nothing to evaluate");
  if (cfg.test_context_size < 1) throw ConfigError("test_context_size", "must be >= 1");
  if (cfg.train.epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (!(cfg.train.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
  if (cfg.train.context_min < 1) throw ConfigError("context_min", "must be >= 1");
  if (cfg.train.context_max < cfg.train.context_min)
    throw ConfigError("context_max", "must be >= context_min");
  if (!(cfg.train.dropout >= 0.0 && cfg.train.dropout < 1.0))
    throw ConfigError("dropout", "must lie in [0, 1)");
  if (cfg.knn_k < 1) throw ConfigError("knn_k", "must be >= 1");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

}  // namespace

std::uint64_t fold_seed(std::uint64_t base_seed, std::string_view participant_id) {
  return splitmix64(base_seed ^ fnv1a(participant_id));
}

const MetricRow* Report::pooled(std::string_view model, std::string_view strategy) const {
  for (const auto& m : metrics)
    if (m.scope == "pooled" && m.model == model && m.strategy == strategy) return &m;
  return nullptr;
}

namespace {

template <class F>
std::optional<double> try_metric(F&& f) {
  try {
    return f();
  } catch (const MetricError&) {
    return std::nullopt;
  }
}

MetricRow metric_row(std::string model, std::string strategy, std::string scope,
                     std::string participant, const std::vector<int>& y,
                     const std::vector<double>& s) {
  MetricRow r{std::move(model), std::move(strategy), std::move(scope), std::move(participant),
              {}, {}, {}, {}};
  r.auc = try_metric([&] { return roc_auc(y, s); });
  r.average_precision = try_metric([&] { return average_precision(y, s); });
  r.log_loss = try_metric([&] { return log_loss(y, s); });
  r.accuracy = try_metric([&] { return accuracy(y, s); });
  return r;
}

}  // namespace

void score_predictions(Report& report) {
  report.metrics.clear();
  report.curves.clear();
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& p : report.predictions) {
    std::pair key{p.model, p.strategy};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [model, strategy] : keys) {
    std::vector<std::string> participants;
    std::map<std::string, std::pair<std::vector<int>, std::vector<double>>> by_participant;
    std::vector<int> y;
    std::vector<double> s;
    for (const auto& p : report.predictions) {
      if (p.model != model || p.strategy != strategy) continue;
      auto [it, fresh] = by_participant.try_emplace(p.participant_id);
      if (fresh) participants.push_back(p.participant_id);
      it->second.first.push_back(p.label);
      it->second.second.push_back(p.score);
      y.push_back(p.label);
      s.push_back(p.score);
    }
    for (const auto& id : participants) {
      const auto& [fy, fs] = by_participant[id];
      report.metrics.push_back(metric_row(model, strategy, "fold", id, fy, fs));
    }
    report.metrics.push_back(metric_row(model, strategy, "pooled", "", y, s));
    try {
      for (const auto& pt : roc_curve(y, s)) report.curves.push_back({model, strategy, "roc", pt});
    } catch (const MetricError&) {
    }
    try {
      for (const auto& pt : pr_curve(y, s)) report.curves.push_back({model, strategy, "pr", pt});
    } catch (const MetricError&) {
    }
  }
}

namespace {

constexpr std::string_view kNoStrategy = "none";

struct Key {
  std::string model;
  std::string strategy;
};

std::vector<Key> report_keys(const ExperimentConfig& cfg) {
  std::vector<Key> keys;
  for (auto m : cfg.models) keys.push_back({std::string(to_string(m)), std::string(kNoStrategy)});
  for (auto s : cfg.strategies) keys.push_back({"np", std::string(to_string(s))});
  if (cfg.other_participant)
    keys.push_back({"np", std::string(to_string(cfg.other_strategy)) + "_other"});
  return keys;
}

std::vector<Strategy> strategies_to_train(const ExperimentConfig& cfg) {
  std::vector<Strategy> out = cfg.strategies;
  if (cfg.other_participant &&
      std::find(out.begin(), out.end(), cfg.other_strategy) == out.end())
    out.push_back(cfg.other_strategy);
  return out;
}

void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
}

void append(std::vector<Prediction>& out, const std::string& model, const std::string& strategy,
            const FeatureMatrix& test, std::span<const std::size_t> rows,
            const Eigen::VectorXd& scores) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = test.rows[rows[i]];
    out.push_back({model, strategy, r.participant_id, r.window_start_s, r.label,
                   scores(static_cast<Eigen::Index>(i))});
  }
}

// Predictions of one fold, one vector per report key.
std::vector<std::vector<Prediction>> run_fold(const FeatureMatrix& data,
                                              const std::vector<std::string>& participants,
                                              std::size_t held_out, const ExperimentConfig& cfg) {
  const std::string& pid = participants[held_out];
  const std::uint64_t seed = fold_seed(cfg.seed, pid);
  const FeatureMatrix test = data.for_participant(pid);
  const FeatureMatrix train = data.excluding_participant(pid);
  for (const auto& r : train.rows)
    if (r.participant_id == pid) throw Error("fold " + pid + ": test participant in training set");

  const auto keys = report_keys(cfg);
  std::vector<std::vector<Prediction>> out(keys.size());
  std::vector<std::size_t> all(test.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::optional<std::filesystem::path> model_dir;
  if (cfg.model_dir) {
    model_dir = *cfg.model_dir / pid;
    std::filesystem::create_directories(*model_dir);
  }

  std::size_t k = 0;
  if (!cfg.models.empty()) {
    const RowMatrix x_train = train.X();
    const Eigen::VectorXd y_train = train.y();
    const ScalerParams scaler = scaler_fit(x_train);
    const RowMatrix xs_train = scaler_apply(scaler, x_train);
    const RowMatrix xs_test = scaler_apply(scaler, test.X());
    for (auto kind : cfg.models) {
      GeneralModel model;
      switch (kind) {
        case GeneralKind::lasso: model = lasso_train(xs_train, y_train, cfg.lasso); break;
        case GeneralKind::svm: {
          SvmOptions o = cfg.svm;
          o.seed = derive(seed, 1);
          model = svm_train(xs_train, y_train, o);
          break;
        }
        case GeneralKind::knn: model = knn_fit(xs_train, y_train, cfg.knn_k); break;
      }
      append(out[k], keys[k].model, keys[k].strategy, test, all, predict_proba(model, xs_test));
      if (model_dir) write_json(*model_dir / (keys[k].model + ".json"), to_json(model, &scaler));
      ++k;
    }
  }

  const auto strategies = strategies_to_train(cfg);
  if (strategies.empty()) return out;

  std::vector<FeatureMatrix> train_parts;
  std::vector<std::string> others;
  for (const auto& id : participants) {
    if (id == pid) continue;
    train_parts.push_back(data.for_participant(id));
    others.push_back(id);
  }
  for (std::size_t si = 0; si < strategies.size(); ++si) {
    const Strategy strategy = strategies[si];
    TrainConfig tc = cfg.train;
    tc.strategy = strategy;
    tc.seed = derive(seed, 100 + static_cast<std::uint64_t>(strategy));
    const TrainResult trained = train_np(train_parts, tc);
    if (model_dir)
      write_json(*model_dir / ("np_" + std::string(to_string(strategy)) + ".json"),
                 np_to_json(trained.params, tc));

    Rng rng(derive(seed, 200 + static_cast<std::uint64_t>(strategy)));
    const auto sel = select_context(test, strategy, cfg.test_context_size, rng);
    const auto targets = remaining_rows(test.size(), sel.excluded);
    const RowMatrix x_t = test.subset(targets).X();

    auto slot = [&](const std::string& strategy_name) {
      for (std::size_t i = 0; i < keys.size(); ++i)
        if (keys[i].model == "np" && keys[i].strategy == strategy_name) return i;
      return keys.size();
    };
    const std::string name(to_string(strategy));
    if (const auto i = slot(name); i < keys.size()) {
      const auto p = np_predict(trained.params, make_context(test, sel.context), x_t,
                                cfg.test_latent, &rng);
      append(out[i], "np", name, test, targets, p);
    }
    if (cfg.other_participant && strategy == cfg.other_strategy) {
      Rng donor_rng(derive(seed, 300));
      std::vector<std::size_t> eligible;
      for (std::size_t j = 0; j < train_parts.size(); ++j) {
        try {
          Rng probe(0);
          select_context(train_parts[j], strategy, cfg.test_context_size, probe);
          eligible.push_back(j);
        } catch (const ParameterError&) {
        }
      }
      if (eligible.empty()) throw Error("fold " + pid + ": no participant can donate context");
      std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
      const auto& donor = train_parts[eligible[pick(donor_rng)]];
      const auto dsel = select_context(donor, strategy, cfg.test_context_size, donor_rng);
      const auto p = np_predict(trained.params, make_context(donor, dsel.context), x_t,
                                cfg.test_latent, &donor_rng);
      append(out[slot(name + "_other")], "np", name + "_other", test, targets, p);
    }
  }
  return out;
}

}  // namespace

Report run_experiment(const FeatureMatrix& data, const ExperimentConfig& cfg) {
  check_experiment_config(cfg);
  const auto participants = data.participants();
  if (participants.size() < 2) throw ParameterError("LOPO evaluation needs >= 2 participants");

  std::vector<std::vector<std::vector<Prediction>>> folds(participants.size());
  std::vector<std::exception_ptr> errors(participants.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f; (f = next.fetch_add(1)) < participants.size();) {
      try {
        folds[f] = run_fold(data, participants, f, cfg);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  std::size_t jobs = cfg.jobs > 0 ? static_cast<std::size_t>(cfg.jobs)
                                  : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, participants.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Report report;
  const auto keys = report_keys(cfg);
  for (std::size_t k = 0; k < keys.size(); ++k)
    for (const auto& fold : folds)
      report.predictions.insert(report.predictions.end(), fold[k].begin(), fold[k].end());
  score_predictions(report);
  return report;
}

namespace {

std::string cell(const std::optional<double>& v) {
  return v ? detail::format_double(*v) : std::string();
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw LoadError(file.string(), "cannot open for writing");
  return out;
}

}  // namespace

void write_metrics_csv(const Report& r, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "model,strategy,scope,participant_id,auc,average_precision,log_loss,accuracy\n";
  for (const auto& m : r.metrics)
    out << m.model << ',' << m.strategy << ',' << m.scope << ',' << m.participant_id << ','
        << cell(m.auc) << ',' << cell(m.average_precision) << ',' << cell(m.log_loss) << ','
        << cell(m.accuracy) << '\n';
}

void write_curves_csv(const Report& r, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "model,strategy,curve,x,y\n";
  for (const auto& c : r.curves)
    out << c.model << ',' << c.strategy << ',' << c.curve << ','
        << detail::format_double(c.point.x) << ',' << detail::format_double(c.point.y) << '\n';
}

void write_predictions_csv(const Report& r, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "model,strategy,participant_id,window_start_s,label,score\n";
  for (const auto& p : r.predictions)
    out << p.model << ',' << p.strategy << ',' << p.participant_id << ','
        << detail::format_double(p.window_start_s) << ',' << p.label << ','
        << detail::format_double(p.score) << '\n';
}

void write_report(const Report& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_metrics_csv(r, dir / "metrics.csv");
  write_curves_csv(r, dir / "curves.csv");
  write_predictions_csv(r, dir / "predictions.csv");
}

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string(), "cannot open");
  std::string line;
  if (!std::getline(in, line) ||
      detail::trim(line) != "model,strategy,participant_id,window_start_s,label,score")
    throw ValidationError("header", "unexpected predictions header in " + file.string());
  std::vector<Prediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(detail::trim(line), ',');
    const auto where = "line " + std::to_string(line_no);
    if (f.size() != 6) throw ValidationError(where, "expected 6 columns");
    const auto start = detail::parse_double(f[3]);
    const auto score = detail::parse_double(f[5]);
    if (!start || !score || (f[4] != "0" && f[4] != "1"))
      throw ValidationError(where, "malformed value");
    out.push_back({f[0], f[1], f[2], *start, f[4] == "1" ? 1 : 0, *score});
  }
  return out;
}

}  // namespace stressnp
