// stressnp command line: synth, extract, run, validate.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stressnp/config.hpp"
#include "stressnp/dataio.hpp"
#include "stressnp/errors.hpp"
#include "stressnp/eval.hpp"
#include "stressnp/features.hpp"
#include "stressnp/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stressnp;

namespace {

// One JSON object per line so failures can be parsed by scripts.
void report_error(const std::exception& e) {
  json j{{"status", "error"}, {"message", e.what()}};
  if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
    j["kind"] = "validation";
    j["field"] = v->field();
  } else if (auto* l = dynamic_cast<const LoadError*>(&e)) {
    j["kind"] = "load";
    j["path"] = l->path();
  } else if (auto* c = dynamic_cast<const ConfigError*>(&e)) {
    j["kind"] = "config";
    j["key"] = c->key();
  } else if (dynamic_cast<const TrainingError*>(&e)) {
    j["kind"] = "training";
  } else {
    j["kind"] = "error";
  }
  std::cerr << j.dump() << '\n';
}

int cmd_synth(int n, const std::string& shape_name, std::uint64_t seed, const fs::path& out) {
  auto shape = parse_dataset(shape_name);
  if (!shape) throw ConfigError("shape", "expected wesad or drivedb");
  const auto cohort = gen_cohort(n, *shape, seed);
  for (const auto& s : cohort) {
    write_recording(s.recording, out / s.recording.participant_id);
    std::cout << (out / s.recording.participant_id).string() << '\n';
  }
  return 0;
}

int cmd_extract(const fs::path& in_dir, const fs::path& out_csv, bool score_rest_meditation) {
  const auto dirs = find_recording_dirs(in_dir);
  if (dirs.empty()) throw LoadError(in_dir.string(), "no recording directories found");
  FeatureMatrix all;
  ExtractionStats total;
  for (const auto& dir : dirs) {
    const auto rec = load_recording(dir);
    const auto ex = extract_features(rec, WindowSpec{},
                                     BinaryLabelMap::defaults(rec.dataset, score_rest_meditation));
    all.rows.insert(all.rows.end(), ex.matrix.rows.begin(), ex.matrix.rows.end());
    total += ex.stats;
    std::cout << rec.participant_id << ": windows=" << ex.stats.windows
              << " emitted=" << ex.stats.emitted << " dropped_rr=" << ex.stats.dropped_rr
              << " dropped_nonfinite=" << ex.stats.dropped_nonfinite
              << " flagged=" << ex.stats.flagged << '\n';
  }
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_feature_csv(all, out_csv);
  std::cout << "total: windows=" << total.windows << " emitted=" << total.emitted
            << " dropped_rr=" << total.dropped_rr
            << " dropped_nonfinite=" << total.dropped_nonfinite << " flagged=" << total.flagged
            << '\n';
  return 0;
}

int cmd_run(const fs::path& config, std::optional<int> jobs, std::optional<fs::path> out,
            std::optional<std::uint64_t> seed) {
  auto cfg = load_run_config(config);
  if (jobs) cfg.experiment.jobs = *jobs;
  if (out) cfg.out_dir = *out;
  if (seed) cfg.experiment.seed = *seed;
  if (cfg.save_models) cfg.experiment.model_dir = cfg.out_dir / "models";
  const auto data = read_feature_csv(cfg.features);
  const auto report = run_experiment(data, cfg.experiment);
  write_report(report, cfg.out_dir);
  std::printf("%-6s %-16s %8s %8s %8s\n", "model", "strategy", "auc", "ap", "logloss");
  for (const auto& m : report.metrics) {
    if (m.scope != "pooled") continue;
    std::printf("%-6s %-16s %8.4f %8.4f %8.4f\n", m.model.c_str(), m.strategy.c_str(),
                m.auc.value_or(NAN), m.average_precision.value_or(NAN), m.log_loss.value_or(NAN));
  }
  return 0;
}

int cmd_validate(const fs::path& dir) {
  const auto dirs = find_recording_dirs(dir);
  if (dirs.empty()) {
    report_error(LoadError((dir / "manifest.json").string(), "no recording directories found"));
    return 1;
  }
  int failures = 0;
  for (const auto& d : dirs) {
    try {
      load_recording(d);
      std::cout << json{{"status", "ok"}, {"dir", d.string()}}.dump() << '\n';
    } catch (const Error& e) {
      ++failures;
      report_error(e);
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalised stress classification from ECG and GSR"};
  app.require_subcommand(1);

  int n = 10;
  std::string shape = "drivedb";
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--n", n, "Number of participants")->check(CLI::Range(2, 1000));
  synth->add_option("--shape", shape, "Protocol shape (wesad|drivedb)");
  synth->add_option("--seed", synth_seed, "Base seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  fs::path extract_in, extract_out;
  bool score_rest = false;
  auto* extract = app.add_subcommand("extract", "Compute window features");
  extract->add_option("in_dir", extract_in, "Recording directory or parent")->required();
  extract->add_option("--out", extract_out, "Feature CSV")->required();
  extract->add_flag("--score-rest-meditation", score_rest,
                    "Score WESAD rest/meditation windows as non-stress");

  fs::path config;
  std::optional<int> jobs;
  std::optional<fs::path> run_out;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Leave-one-participant-out evaluation");
  run->add_option("config", config, "Run configuration file")->required();
  run->add_option("--jobs", jobs, "Parallel folds (default: all cores)");
  run->add_option("--out", run_out, "Override out_dir");
  run->add_option("--seed", run_seed, "Override seed");

  fs::path validate_dir;
  auto* validate = app.add_subcommand("validate", "Check recording directories");
  validate->add_option("dir", validate_dir, "Recording directory or parent")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(n, shape, synth_seed, synth_out);
    if (*extract) return cmd_extract(extract_in, extract_out, score_rest);
    if (*run) return cmd_run(config, jobs, run_out, run_seed);
    if (*validate) return cmd_validate(validate_dir);
  } catch (const std::exception& e) {
    report_error(e);
    return dynamic_cast<const ConfigError*>(&e) ? 2 : 1;
  }
  return 0;
}
