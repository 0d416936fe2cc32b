#include "notedx/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "notedx/corpus_io.hpp"
#include "notedx/error.hpp"

namespace notedx::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"preprocess", "embed-train", "train",   "baseline",
                                              "evaluate",   "compare",     "visualize"};
  return names;
}

PreprocessResult preprocess(const RunConfig& config) {
  require(!config.corpus.empty(), ErrorCode::Config, "no corpus path configured");
  if (!fs::exists(config.corpus)) fail(ErrorCode::Io, "corpus not found: " + config.corpus);
  const AliasMap aliases = config.aliases.empty() ? AliasMap{} : AliasMap::load(config.aliases);
  std::vector<Document> docs = read_corpus(config.corpus, aliases, config.sections);

  PreprocessResult r;
  r.notes = docs.size();
  std::vector<Document> labeled;
  for (auto& d : docs) {
    if (d.label) {
      labeled.push_back(std::move(d));
    } else {
      ++r.unlabeled;
    }
  }
  require(!labeled.empty(), ErrorCode::EmptyInput, "no document carries a diagnosis label");
  LabelFilterResult filtered = filter_top_k_labels(labeled, config.top_k);
  r.labels = std::move(filtered.labels);
  r.counts = std::move(filtered.counts);
  r.corpus = std::move(filtered.corpus);
  if (config.truncate) {
    r.max_length = compute_truncation_length(r.corpus);
    for (auto& d : r.corpus) d = truncate(std::move(d), r.max_length);
  }
  return r;
}

json to_json(const PreprocessResult& r) {
  json labels = json::array();
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    labels.push_back({{"label", r.labels[i]}, {"count", r.counts[i]}});
  }
  return {{"notes", r.notes},
          {"unlabeled", r.unlabeled},
          {"documents", r.corpus.size()},
          {"max_length", r.max_length},
          {"labels", labels}};
}

namespace {

std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

void write_results(const fs::path& dir, const std::vector<experiment::SeedResult>& results,
                   const std::vector<const cnn::CnnModel*>& models) {
  std::vector<metrics::MetricsReport> reports;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const fs::path sub = dir / seed_dir(r.seed);
    write_text_file(sub / "predictions.jsonl", experiment::predictions_jsonl(r.predictions));
    write_text_file(sub / "report.json", dump(metrics::to_json(r.report)));
    if (i < models.size() && models[i]) {
      cnn::save_checkpoint(*models[i], sub / "model.ckpt");
      write_text_file(sub / "history.csv", experiment::history_csv(*models[i]));
    }
    reports.push_back(r.report);
  }
  write_text_file(dir / "aggregate.json", dump(metrics::to_json(metrics::aggregate_seeds(reports))));
}

std::vector<metrics::MetricsReport> read_reports(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, "not a results directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path report = entry.path() / "report.json";
    if (entry.is_directory() && fs::exists(report)) files.push_back(report);
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::EmptyInput, "no seed reports under " + dir.string());
  std::vector<metrics::MetricsReport> out;
  for (const auto& f : files) {
    try {
      out.push_back(metrics::report_from_json(json::parse(read_text_file(f))));
    } catch (const json::exception& e) {
      fail(ErrorCode::CorruptFile, f.string() + ": " + e.what());
    }
  }
  return out;
}

std::string summary_tsv(const std::map<std::string, metrics::AggregateReport>& models) {
  std::vector<std::string> columns;
  for (const auto& m : metrics::metric_names()) columns.push_back(m);
  for (const auto& m : metrics::metric_names()) columns.push_back("W" + m);
  std::string out = "Model";
  for (const auto& c : columns) out += "\t" + c;
  out += "\n";
  for (const auto& [name, agg] : models) {
    out += name;
    for (const auto& c : columns) {
      const auto it = agg.summary.find(c);
      char buf[64] = "";
      if (it != agg.summary.end()) {
        if (it->second.stderr_) {
          std::snprintf(buf, sizeof buf, "%.2f±%.2f", 100 * it->second.mean, 100 * *it->second.stderr_);
        } else {
          std::snprintf(buf, sizeof buf, "%.2f", 100 * it->second.mean);
        }
      }
      out += "\t";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

Comparison compare(const std::string& a_name, const std::vector<metrics::MetricsReport>& a,
                   const std::string& b_name, const std::vector<metrics::MetricsReport>& b,
                   const std::string& metric) {
  Comparison c;
  c.a = a_name;
  c.b = b_name;
  c.metric = metric;
  for (const auto& r : a) c.a_values.push_back(metrics::summary_metric(r, metric));
  for (const auto& r : b) c.b_values.push_back(metrics::summary_metric(r, metric));
  c.test = metrics::welch_t_test(c.a_values, c.b_values);
  return c;
}

json to_json(const Comparison& c) {
  auto finite_or_string = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); };
  return {{"a", c.a},
          {"b", c.b},
          {"metric", c.metric},
          {"a_values", c.a_values},
          {"b_values", c.b_values},
          {"t", finite_or_string(c.test.t)},
          {"df", finite_or_string(c.test.df)},
          {"p", c.test.p}};
}

std::string file_hash(const fs::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_text_file(path))));
  return buf;
}

namespace {

json manifest(const RunConfig& config, const fs::path& out, const std::vector<std::string>& done,
              const std::string& failed, const std::string& error) {
  json cfg = json::object();
  std::istringstream lines(config.canonical());
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  json files = json::object();
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) files[fs::relative(p, out).generic_string()] = file_hash(p);
  json j{{"version", std::string(kVersion)},
         {"config_hash", config.hash()},
         {"config", cfg},
         {"seeds", config.experiment_options().seed_list()},
         {"deterministic", config.deterministic},
         {"stages_completed", done},
         {"files", files}};
  if (!failed.empty()) {
    j["failed_stage"] = failed;
    j["error"] = error;
  }
  return j;
}

}  // namespace

void run(const RunConfig& config, const fs::path& out,
         const std::function<void(const std::string&)>& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  try {
    config.validate();
  } catch (const Error& e) {
    fail(ErrorCode::Stage, "stage config: " + std::string(error_code_name(e.code())) + ": " + e.what());
  }
  // Nothing is written when the input is missing.
  if (config.corpus.empty() || !fs::exists(config.corpus)) {
    fail(ErrorCode::Stage, "stage preprocess: IO_ERROR: corpus not found: " + config.corpus);
  }
  fs::create_directories(out);

  std::vector<std::string> done;
  PreprocessResult prep;
  EmbeddingStore store;
  std::vector<experiment::CnnRun> cnn_runs;
  std::map<std::string, std::vector<metrics::MetricsReport>> reports;
  const auto options = config.experiment_options();

  auto stage = [&](const std::string& name, const std::function<void()>& body) {
    say("stage " + name);
    try {
      body();
    } catch (const Error& e) {
      const std::string msg = std::string(error_code_name(e.code())) + ": " + e.what();
      write_text_file(out / "manifest.json", dump(manifest(config, out, done, name, msg)));
      fail(ErrorCode::Stage, "stage " + name + ": " + msg);
    } catch (const std::exception& e) {
      write_text_file(out / "manifest.json", dump(manifest(config, out, done, name, e.what())));
      fail(ErrorCode::Stage, "stage " + name + ": " + e.what());
    }
    done.push_back(name);
  };

  stage("preprocess", [&] {
    prep = preprocess(config);
    write_documents(out / "corpus.jsonl", prep.corpus);
    write_text_file(out / "preprocess.json", dump(to_json(prep)));
  });

  stage("embed-train", [&] {
    if (!config.pretrain) return;
    SkipgramReport report;
    store = train_skipgram(experiment::token_lists(prep.corpus), config.skipgram_config(), &report);
    store.save(out / "embeddings.bin");
    write_text_file(out / "embeddings.json",
                    dump({{"epoch_loss", report.epoch_loss}, {"pairs", report.pairs},
                          {"vocabulary", store.vocabulary().size()}, {"dim", store.dim()}}));
  });

  auto opts = options;
  opts.classes = prep.labels;
  stage("train", [&] {
    cnn_runs = experiment::run_cnn(prep.corpus, config.cnn_config(), opts,
                                   config.pretrain ? &store : nullptr,
                                   [&](const experiment::CnnRun& r) {
                                     say("  cnn seed " + std::to_string(r.result.seed) + " wf1 " +
                                         experiment::format_double(r.result.report.averages.weighted.f1));
                                   });
    std::vector<experiment::SeedResult> results;
    std::vector<const cnn::CnnModel*> models;
    for (const auto& r : cnn_runs) {
      results.push_back(r.result);
      models.push_back(&r.model);
      reports["cnn"].push_back(r.result.report);
    }
    write_results(out / "cnn", results, models);
  });

  stage("baseline", [&] {
    std::vector<experiment::BaselineKind> kinds;
    for (const auto& name : config.baselines) kinds.push_back(experiment::parse_baseline(name));
    if (kinds.empty()) return;
    const auto results = experiment::run_baselines(prep.corpus, kinds, config.baseline, opts);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const std::string name = experiment::baseline_name(kinds[k]);
      write_results(out / name, results[k]);
      for (const auto& r : results[k]) reports[name].push_back(r.report);
    }
  });

  stage("evaluate", [&] {
    std::map<std::string, metrics::AggregateReport> aggregates;
    json summary = json::object();
    for (const auto& [name, list] : reports) {
      aggregates[name] = metrics::aggregate_seeds(list);
      summary[name] = metrics::to_json(aggregates[name]);
    }
    write_text_file(out / "summary.json", dump(summary));
    write_text_file(out / "summary.tsv", summary_tsv(aggregates));
  });

  stage("compare", [&] {
    json list = json::array();
    if (config.seeds >= 2) {
      for (const auto& [name, list_b] : reports) {
        if (name == "cnn") continue;
        list.push_back(to_json(compare("cnn", reports["cnn"], name, list_b, config.compare_metric)));
      }
    }
    write_text_file(out / "compare.json", dump(list));
  });

  stage("visualize", [&] {
    require(!cnn_runs.empty(), ErrorCode::Stage, "no trained model to visualize");
    const auto& first = cnn_runs.front();
    const auto filters = interpret::select_filters(first.model, config.visualize_per_size, config.visualize_seed);
    const auto rankings = interpret::rank_ngrams(first.model, first.test, config.visualize_top, filters);
    write_text_file(out / "filters.tsv", interpret::render_tsv(rankings));
    write_text_file(out / "filters.json", dump(interpret::to_json(rankings)));
  });

  write_text_file(out / "manifest.json", dump(manifest(config, out, done, "", "")));
  say("done");
}

}  // namespace notedx::pipeline
