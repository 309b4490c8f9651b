#include "stressnp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "stressnp/errors.hpp"
#include "text_util.hpp"

namespace stressnp {

namespace {

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  auto d = detail::parse_double(v);
  if (!d) throw ConfigError(key, "expected a number, got '" + v + "'");
  return *d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& item : detail::split(v, ',')) {
    auto t = detail::trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

Strategy strategy_value(const std::string& key, const std::string& v) {
  auto s = parse_strategy(v);
  if (!s) throw ConfigError(key, "unknown strategy '" + v + "'");
  return *s;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  auto& ex = cfg.experiment;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() ? base_dir / p : p;
  };

  const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
      setters{
          {"features", [&](auto&, auto& v) { cfg.features = path(v); }},
          {"out_dir", [&](auto&, auto& v) { cfg.out_dir = path(v); }},
          {"save_models", [&](auto& k, auto& v) { cfg.save_models = parse_bool(k, v); }},
          {"dataset",
           [&](auto& k, auto& v) {
             auto d = parse_dataset(v);
             if (!d) throw ConfigError(k, "unknown dataset '" + v + "'");
             ex.dataset = *d;
           }},
          {"models",
           [&](auto& k, auto& v) {
             ex.models.clear();
             for (const auto& m : parse_list(v)) {
               auto g = parse_general_kind(m);
               if (!g) throw ConfigError(k, "unknown model '" + m + "'");
               ex.models.push_back(*g);
             }
           }},
          {"strategies",
           [&](auto& k, auto& v) {
             ex.strategies.clear();
             for (const auto& s : parse_list(v)) ex.strategies.push_back(strategy_value(k, s));
           }},
          {"epochs", [&](auto& k, auto& v) { ex.train.epochs = parse_int<int>(k, v); }},
          {"learning_rate", [&](auto& k, auto& v) { ex.train.learning_rate = parse_real(k, v); }},
          {"context_min", [&](auto& k, auto& v) { ex.train.context_min = parse_int<int>(k, v); }},
          {"context_max", [&](auto& k, auto& v) { ex.train.context_max = parse_int<int>(k, v); }},
          {"dropout", [&](auto& k, auto& v) { ex.train.dropout = parse_real(k, v); }},
          {"adam_beta1", [&](auto& k, auto& v) { ex.train.adam_beta1 = parse_real(k, v); }},
          {"adam_beta2", [&](auto& k, auto& v) { ex.train.adam_beta2 = parse_real(k, v); }},
          {"adam_eps", [&](auto& k, auto& v) { ex.train.adam_eps = parse_real(k, v); }},
          {"kl_direction",
           [&](auto& k, auto& v) {
             if (v == "target_to_context") ex.train.kl = KlDirection::target_to_context;
             else if (v == "context_to_target") ex.train.kl = KlDirection::context_to_target;
             else throw ConfigError(k, "expected target_to_context or context_to_target");
           }},
          {"bce_reduction",
           [&](auto& k, auto& v) {
             if (v == "sum") ex.train.reduction = BceReduction::sum;
             else if (v == "mean") ex.train.reduction = BceReduction::mean;
             else throw ConfigError(k, "expected sum or mean");
           }},
          {"test_latent",
           [&](auto& k, auto& v) {
             if (v == "mean") ex.test_latent = TestLatent::mean;
             else if (v == "sample") ex.test_latent = TestLatent::sample;
             else throw ConfigError(k, "expected mean or sample");
           }},
          {"test_context_size",
           [&](auto& k, auto& v) { ex.test_context_size = parse_int<int>(k, v); }},
          {"seed", [&](auto& k, auto& v) { ex.seed = parse_int<std::uint64_t>(k, v); }},
          {"jobs", [&](auto& k, auto& v) { ex.jobs = parse_int<int>(k, v); }},
          {"other_participant",
           [&](auto& k, auto& v) { ex.other_participant = parse_bool(k, v); }},
          {"other_strategy", [&](auto& k, auto& v) { ex.other_strategy = strategy_value(k, v); }},
          {"lasso_c", [&](auto& k, auto& v) { ex.lasso.C = parse_real(k, v); }},
          {"svm_c", [&](auto& k, auto& v) { ex.svm.C = parse_real(k, v); }},
          {"svm_gamma", [&](auto& k, auto& v) { ex.svm.gamma = parse_real(k, v); }},
          {"knn_k", [&](auto& k, auto& v) { ex.knn_k = parse_int<int>(k, v); }},
      };

  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
    it->second(key, value);
  }

  if (!seen.count("features")) throw ConfigError("features", "required");
  if (!seen.count("seed")) throw ConfigError("seed", "required");
  if (!std::filesystem::is_regular_file(cfg.features))
    throw ConfigError("features", "no such file: " + cfg.features.string());
  check_experiment_config(ex);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string(), "cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), file.parent_path());
}

}  // namespace stressnp
