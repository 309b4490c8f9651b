#pragma once

// Canonical recording format, validation and window segmentation.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stressnp {

enum class ChannelName { ecg, gsr_hand, gsr_foot };

enum class TaskLabel {
  baseline,
  stress,
  amusement,
  meditation,
  rest,
  city1,
  city2,
  city3,
  highway1,
  highway2,
  unlabeled,
};
inline constexpr std::size_t kNumTaskLabels = 11;

enum class Dataset { wesad, drivedb, synthetic };

enum class LabelClass { positive, negative, excluded };

std::string_view to_string(ChannelName c);
std::string_view to_string(TaskLabel l);
std::string_view to_string(Dataset d);
std::optional<ChannelName> parse_channel_name(std::string_view s);
std::optional<TaskLabel> parse_task_label(std::string_view s);
std::optional<Dataset> parse_dataset(std::string_view s);

struct SignalChannel {
  ChannelName name = ChannelName::ecg;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;  // ecg in mV, gsr in uS

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

struct TaskInterval {
  TaskLabel label = TaskLabel::unlabeled;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Recording {
  std::string participant_id;
  Dataset dataset = Dataset::synthetic;
  std::vector<SignalChannel> channels;
  std::vector<TaskInterval> intervals;  // sorted by start_s after loading

  const SignalChannel& ecg() const;
  /// Hand GSR when present, otherwise foot GSR.
  const SignalChannel& gsr() const;
  bool has_channel(ChannelName name) const;
  /// Shortest channel duration; windows never run past it.
  double duration_s() const;
};

struct WindowSpec {
  double length_s = 40.0;
  double step_s = 20.0;
};

/// Maps task labels onto the binary stress problem.
class BinaryLabelMap {
 public:
  /// stress/city* positive; baseline/amusement/highway* negative;
  /// meditation excluded; rest excluded for WESAD-shaped data unless
  /// `score_rest_meditation`, negative for drivedb (the final relaxation
  /// segment is scored there). `unlabeled` never counts as labeled time.
  static BinaryLabelMap defaults(Dataset dataset,
                                 bool score_rest_meditation = false);

  LabelClass operator[](TaskLabel l) const {
    return classes_[static_cast<std::size_t>(l)];
  }
  void set(TaskLabel l, LabelClass c) {
    classes_[static_cast<std::size_t>(l)] = c;
  }

 private:
  std::array<LabelClass, kNumTaskLabels> classes_{};
};

struct Window {
  double start_s = 0.0;
  double end_s = 0.0;
  int label = 0;  // 1 = stress
  TaskLabel source_label = TaskLabel::unlabeled;
};

/// Throws ValidationError naming the first offending field.
void validate_recording(const Recording& rec);

/// Reads a canonical recording directory (manifest.json, channel files,
/// intervals CSV). Throws LoadError for missing/unreadable files and
/// ValidationError for invariant violations.
Recording load_recording(const std::filesystem::path& dir);

/// Writes `rec` in the canonical format. Channel files are named
/// `<channel>.txt`, intervals `intervals.csv`.
void write_recording(const Recording& rec, const std::filesystem::path& dir);

/// Sorted list of recording directories below `root` (or `root` itself when
/// it contains a manifest).
std::vector<std::filesystem::path> find_recording_dirs(
    const std::filesystem::path& root);

/// Segments `rec` into overlapping windows and labels each one by the
/// majority of its labeled time. Windows with no labeled time, a
/// positive/negative tie, or a majority of excluded time are dropped.
std::vector<Window> make_windows(const Recording& rec, const WindowSpec& spec,
                                 const BinaryLabelMap& map);

}  // namespace stressnp
