#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "notedx/experiment.hpp"
#include "notedx/interpret.hpp"
#include "notedx/run_config.hpp"

namespace notedx::pipeline {

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

struct PreprocessResult {
  std::vector<Document> corpus;
  std::vector<std::string> labels;  // most frequent first
  std::vector<std::size_t> counts;
  std::size_t notes = 0;
  std::size_t unlabeled = 0;
  std::size_t max_length = 0;  // 0 when truncation is off
};

/// Reads config.corpus (raw notes or an already tokenized corpus), resolves
/// aliases, keeps the top_k labels and truncates at the 90th percentile.
PreprocessResult preprocess(const RunConfig& config);
nlohmann::json to_json(const PreprocessResult& result);

/// Writes seed-<n>/{predictions.jsonl,report.json} and aggregate.json under
/// `dir`; with models, also seed-<n>/{model.ckpt,history.csv}.
void write_results(const std::filesystem::path& dir, const std::vector<experiment::SeedResult>& results,
                   const std::vector<const cnn::CnnModel*>& models = {});

/// Model name -> per-seed reports, read back from a results directory.
std::vector<metrics::MetricsReport> read_reports(const std::filesystem::path& dir);

/// Mean and standard error per model in the table layout (percent values).
std::string summary_tsv(const std::map<std::string, metrics::AggregateReport>& models);

struct Comparison {
  std::string a, b, metric;
  std::vector<double> a_values, b_values;
  metrics::WelchResult test;
};
Comparison compare(const std::string& a_name, const std::vector<metrics::MetricsReport>& a,
                   const std::string& b_name, const std::vector<metrics::MetricsReport>& b,
                   const std::string& metric);
nlohmann::json to_json(const Comparison& c);

/// Runs every stage into `out`, writing manifest.json last. A failing stage
/// raises a Stage error naming it; files from earlier stages stay in place.
/// `log` receives one line per stage when set.
void run(const RunConfig& config, const std::filesystem::path& out,
         const std::function<void(const std::string&)>& log = {});

/// 64-bit FNV-1a of a file's bytes, as hex.
std::string file_hash(const std::filesystem::path& path);

}  // namespace notedx::pipeline
