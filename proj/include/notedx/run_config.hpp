#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "notedx/cnn.hpp"
#include "notedx/experiment.hpp"
#include "notedx/skipgram.hpp"
#include "notedx/textprep.hpp"

namespace notedx {

inline constexpr std::string_view kVersion = "1.0.0";

/// Every tunable of a run. Defaults follow the reference setup where it
/// states a value (E=128, 3 x 64 filters of heights 3/4/5, keep 0.5,
/// Adam 1e-4, 70/15/15 split, 5 seeds, min count 2, top 10 labels).
struct RunConfig {
  std::string corpus;
  std::string aliases;
  std::vector<std::string> sections = default_admission_sections();
  std::size_t top_k = 10;
  bool truncate = true;

  SplitRatios ratios{};
  std::size_t seeds = 5;
  std::uint64_t first_seed = 1;
  bool deterministic = true;
  std::size_t workers = 1;

  bool pretrain = true;
  SkipgramConfig skipgram{};
  cnn::CnnConfig cnn{};

  std::vector<std::string> baselines{"logreg", "mlp"};
  experiment::BaselineOptions baseline{};

  std::string compare_metric = "wf1";
  std::size_t visualize_per_size = 2;
  std::size_t visualize_top = 10;
  std::uint64_t visualize_seed = 1;

  /// `key=value` lines; `#` starts a comment line. Unknown keys, duplicate
  /// keys and malformed values are Config errors naming the line.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Applies one `key=value` assignment.
  void set(const std::string& key, const std::string& value);

  /// Every key in sorted order, one `key=value` per line.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;

  /// Propagates the shared fields (seed mode, workers, dimensions) into the
  /// per-module configs and checks the combination.
  void validate() const;
  SkipgramConfig skipgram_config() const;
  cnn::CnnConfig cnn_config() const;
  experiment::ExperimentOptions experiment_options() const;

  static const std::vector<std::string>& keys();
};

std::uint64_t fnv1a64(std::string_view s);

}  // namespace notedx
