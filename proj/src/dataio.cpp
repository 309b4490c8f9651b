#include "stressnp/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "stressnp/errors.hpp"
#include "text_util.hpp"

namespace stressnp {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::format_double;
using detail::parse_double;
using detail::trim;

namespace {

constexpr std::array<std::string_view, 3> kChannelNames{"ecg", "gsr_hand",
                                                        "gsr_foot"};
constexpr std::array<std::string_view, kNumTaskLabels> kTaskLabelNames{
    "baseline", "stress", "amusement", "meditation", "rest",     "city1",
    "city2",    "city3",  "highway1",  "highway2",   "unlabeled"};
constexpr std::array<std::string_view, 3> kDatasetNames{"wesad", "drivedb",
                                                        "synthetic"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names,
                        std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  return std::nullopt;
}

std::vector<double> read_samples(const fs::path& file,
                                 const std::string& field) {
  std::ifstream in(file);
  if (!in) throw ValidationError(field, "cannot open " + file.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty()) continue;
    auto v = parse_double(t);
    if (!v)
      throw ValidationError(field, file.string() + ":" +
                                       std::to_string(lineno) +
                                       ": not a number: '" + t + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<TaskInterval> read_intervals(const fs::path& file) {
  std::ifstream in(file);
  if (!in)
    throw ValidationError("intervals_file", "cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "label,start_s,end_s")
    throw ValidationError("intervals_file",
                          file.string() + ": header must be label,start_s,end_s");
  std::vector<TaskInterval> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty()) continue;
    std::string where = file.string() + ":" + std::to_string(lineno);
    std::array<std::string, 3> cols;
    std::stringstream ss(t);
    for (auto& c : cols)
      if (!std::getline(ss, c, ','))
        throw ValidationError("intervals_file", where + ": expected 3 columns");
    auto label = parse_task_label(trim(cols[0]));
    if (!label)
      throw ValidationError("intervals_file",
                            where + ": unknown label '" + cols[0] + "'");
    auto start = parse_double(trim(cols[1]));
    auto end = parse_double(trim(cols[2]));
    if (!start || !end)
      throw ValidationError("intervals_file", where + ": bad bounds");
    out.push_back({*label, *start, *end});
  }
  return out;
}

}  // namespace

std::string_view to_string(ChannelName c) {
  return kChannelNames[static_cast<std::size_t>(c)];
}
std::string_view to_string(TaskLabel l) {
  return kTaskLabelNames[static_cast<std::size_t>(l)];
}
std::string_view to_string(Dataset d) {
  return kDatasetNames[static_cast<std::size_t>(d)];
}
std::optional<ChannelName> parse_channel_name(std::string_view s) {
  return lookup<ChannelName>(kChannelNames, s);
}
std::optional<TaskLabel> parse_task_label(std::string_view s) {
  return lookup<TaskLabel>(kTaskLabelNames, s);
}
std::optional<Dataset> parse_dataset(std::string_view s) {
  return lookup<Dataset>(kDatasetNames, s);
}

const SignalChannel& Recording::ecg() const {
  for (const auto& c : channels)
    if (c.name == ChannelName::ecg) return c;
  throw ValidationError("channels", "recording has no ecg channel");
}

const SignalChannel& Recording::gsr() const {
  const SignalChannel* foot = nullptr;
  for (const auto& c : channels) {
    if (c.name == ChannelName::gsr_hand) return c;
    if (c.name == ChannelName::gsr_foot) foot = &c;
  }
  if (!foot) throw ValidationError("channels", "recording has no gsr channel");
  return *foot;
}

bool Recording::has_channel(ChannelName name) const {
  return std::any_of(channels.begin(), channels.end(),
                     [&](const auto& c) { return c.name == name; });
}

double Recording::duration_s() const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& c : channels) d = std::min(d, c.duration_s());
  return channels.empty() ? 0.0 : d;
}

BinaryLabelMap BinaryLabelMap::defaults(Dataset dataset,
                                        bool score_rest_meditation) {
  BinaryLabelMap m;
  for (auto l : {TaskLabel::stress, TaskLabel::city1, TaskLabel::city2,
                 TaskLabel::city3})
    m.set(l, LabelClass::positive);
  for (auto l : {TaskLabel::baseline, TaskLabel::amusement,
                 TaskLabel::highway1, TaskLabel::highway2})
    m.set(l, LabelClass::negative);
  auto quiet = score_rest_meditation ? LabelClass::negative
                                     : LabelClass::excluded;
  m.set(TaskLabel::meditation, quiet);
  m.set(TaskLabel::rest,
        dataset == Dataset::drivedb ? LabelClass::negative : quiet);
  m.set(TaskLabel::unlabeled, LabelClass::excluded);
  return m;
}

void validate_recording(const Recording& rec) {
  if (rec.participant_id.empty())
    throw ValidationError("participant_id", "must be non-empty");
  int n_ecg = 0, n_gsr = 0;
  std::array<int, 3> seen{};
  for (std::size_t i = 0; i < rec.channels.size(); ++i) {
    const auto& c = rec.channels[i];
    std::string field = "channels[" + std::to_string(i) + "]";
    if (++seen[static_cast<std::size_t>(c.name)] > 1)
      throw ValidationError(field + ".name", "duplicate channel " +
                                                 std::string(to_string(c.name)));
    if (!(c.sample_rate_hz > 0.0) || !std::isfinite(c.sample_rate_hz))
      throw ValidationError(field + ".sample_rate_hz", "must be positive");
    if (c.samples.empty())
      throw ValidationError(field + ".samples", "must be non-empty");
    for (std::size_t k = 0; k < c.samples.size(); ++k)
      if (!std::isfinite(c.samples[k]))
        throw ValidationError(field + ".samples",
                              "non-finite sample at index " + std::to_string(k));
    if (c.name == ChannelName::ecg)
      ++n_ecg;
    else
      ++n_gsr;
  }
  if (n_ecg != 1)
    throw ValidationError("channels", "exactly one ecg channel required");
  if (n_gsr < 1)
    throw ValidationError("channels", "at least one gsr channel required");

  const double duration = rec.duration_s();
  constexpr double kSlack = 1e-9;
  for (std::size_t i = 0; i < rec.intervals.size(); ++i) {
    const auto& iv = rec.intervals[i];
    std::string field = "intervals[" + std::to_string(i) + "]";
    if (!(iv.start_s >= 0.0) || !(iv.start_s < iv.end_s))
      throw ValidationError(field, "require 0 <= start_s < end_s");
    if (iv.end_s > duration + kSlack)
      throw ValidationError(field + ".end_s",
                            "exceeds signal duration " + format_double(duration));
    if (i > 0 && iv.start_s < rec.intervals[i - 1].end_s - kSlack)
      throw ValidationError(field, "overlaps previous interval");
  }
}

Recording load_recording(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw LoadError(manifest_path.string(), "cannot open manifest");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw LoadError(manifest_path.string(), e.what());
  }

  auto require = [&](const json& obj, const char* key,
                     const std::string& field) -> const json& {
    if (!obj.is_object() || !obj.contains(key))
      throw ValidationError(field, "missing field");
    return obj.at(key);
  };

  Recording rec;
  try {
    rec.participant_id = require(m, "participant_id", "participant_id").get<std::string>();
    auto ds = parse_dataset(require(m, "dataset", "dataset").get<std::string>());
    if (!ds) throw ValidationError("dataset", "must be wesad|drivedb|synthetic");
    rec.dataset = *ds;

    const auto& chans = require(m, "channels", "channels");
    if (!chans.is_array()) throw ValidationError("channels", "must be an array");
    for (std::size_t i = 0; i < chans.size(); ++i) {
      std::string field = "channels[" + std::to_string(i) + "]";
      const auto& c = chans[i];
      SignalChannel ch;
      auto name = parse_channel_name(
          require(c, "name", field + ".name").get<std::string>());
      if (!name)
        throw ValidationError(field + ".name", "must be ecg|gsr_hand|gsr_foot");
      ch.name = *name;
      ch.sample_rate_hz =
          require(c, "sample_rate_hz", field + ".sample_rate_hz").get<double>();
      auto file = require(c, "file", field + ".file").get<std::string>();
      ch.samples = read_samples(dir / file, field + ".file");
      rec.channels.push_back(std::move(ch));
    }
    auto ivfile = require(m, "intervals_file", "intervals_file").get<std::string>();
    rec.intervals = read_intervals(dir / ivfile);
  } catch (const json::exception& e) {
    throw ValidationError("manifest", e.what());
  }

  std::stable_sort(rec.intervals.begin(), rec.intervals.end(),
                   [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  validate_recording(rec);
  return rec;
}

void write_recording(const Recording& rec, const fs::path& dir) {
  fs::create_directories(dir);
  json m;
  m["participant_id"] = rec.participant_id;
  m["dataset"] = std::string(to_string(rec.dataset));
  m["channels"] = json::array();
  for (const auto& c : rec.channels) {
    std::string file = std::string(to_string(c.name)) + ".txt";
    m["channels"].push_back({{"name", std::string(to_string(c.name))},
                             {"file", file},
                             {"sample_rate_hz", c.sample_rate_hz}});
    std::ofstream out(dir / file);
    if (!out) throw LoadError((dir / file).string(), "cannot write");
    std::string buf;
    buf.reserve(c.samples.size() * 12);
    for (double v : c.samples) {
      buf += format_double(v);
      buf += '\n';
    }
    out << buf;
  }
  m["intervals_file"] = "intervals.csv";
  {
    std::ofstream out(dir / "intervals.csv");
    out << "label,start_s,end_s\n";
    for (const auto& iv : rec.intervals)
      out << to_string(iv.label) << ',' << format_double(iv.start_s) << ','
          << format_double(iv.end_s) << '\n';
  }
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

std::vector<fs::path> find_recording_dirs(const fs::path& root) {
  if (fs::exists(root / "manifest.json")) return {root};
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root)) throw LoadError(root.string(), "not a directory");
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<Window> make_windows(const Recording& rec, const WindowSpec& spec,
                                 const BinaryLabelMap& map) {
  std::vector<Window> out;
  const double duration = rec.duration_s();
  if (!(spec.length_s > 0.0) || !(spec.step_s > 0.0)) return out;

  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * spec.step_s;
    const double end = start + spec.length_s;
    if (end > duration + 1e-9) break;

    std::array<double, kNumTaskLabels> share{};
    for (const auto& iv : rec.intervals) {
      double ov = std::min(end, iv.end_s) - std::max(start, iv.start_s);
      if (ov > 0.0) share[static_cast<std::size_t>(iv.label)] += ov;
    }
    double pos = 0.0, neg = 0.0, excl = 0.0;
    for (std::size_t l = 0; l < kNumTaskLabels; ++l) {
      auto label = static_cast<TaskLabel>(l);
      if (label == TaskLabel::unlabeled) continue;
      switch (map[label]) {
        case LabelClass::positive: pos += share[l]; break;
        case LabelClass::negative: neg += share[l]; break;
        case LabelClass::excluded: excl += share[l]; break;
      }
    }
    if (pos + neg <= 0.0 || pos == neg) continue;
    const auto winner = pos > neg ? LabelClass::positive : LabelClass::negative;
    if (excl > std::max(pos, neg)) continue;

    Window w{start, end, winner == LabelClass::positive ? 1 : 0,
             TaskLabel::unlabeled};
    double best = 0.0;
    for (std::size_t l = 0; l < kNumTaskLabels; ++l) {
      auto label = static_cast<TaskLabel>(l);
      if (label != TaskLabel::unlabeled && map[label] == winner &&
          share[l] > best) {
        best = share[l];
        w.source_label = label;
      }
    }
    out.push_back(w);
  }
  return out;
}

}  // namespace stressnp
