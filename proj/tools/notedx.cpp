// Command-line entry point: one subcommand per pipeline stage plus `pipeline`
// to run them all.

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "notedx/corpus_io.hpp"
#include "notedx/error.hpp"
#include "notedx/experiment.hpp"
#include "notedx/interpret.hpp"
#include "notedx/pipeline.hpp"
#include "notedx/run_config.hpp"
#include "notedx/synthetic.hpp"

namespace fs = std::filesystem;
using namespace notedx;

namespace {

std::size_t env_workers() {
  const char* v = std::getenv("NOTEDX_WORKERS");
  if (!v || !*v) return 1;
  try {
    return std::max<std::size_t>(1, std::stoul(v));
  } catch (const std::exception&) {
    fail(ErrorCode::Config, std::string("NOTEDX_WORKERS must be a positive integer, got '") + v + "'");
  }
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

RunConfig load_config(const std::string& path, bool deterministic) {
  RunConfig config = path.empty() ? RunConfig{} : RunConfig::load(path);
  config.workers = env_workers();
  if (deterministic) config.deterministic = true;
  return config;
}

std::vector<Document> labeled_corpus(const std::string& path) {
  auto docs = read_corpus(path);
  for (const auto& d : docs) {
    if (!d.label) fail(ErrorCode::InvalidArgument, "document " + d.id + " has no label");
  }
  require(!docs.empty(), ErrorCode::EmptyInput, path + " holds no documents");
  return docs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clinical-note diagnosis classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled note corpus");
  synth::SyntheticSpec spec;
  std::string synth_out;
  std::string synth_mode = "keyword";
  std::size_t synth_classes = 0;
  synth_cmd->add_option("--out", synth_out, "Output JSON-lines file")->required();
  synth_cmd->add_option("--docs", spec.documents, "Number of documents")->capture_default_str();
  synth_cmd->add_option("--classes", synth_classes, "Use the first N reference classes (default all)");
  synth_cmd->add_option("--mode", synth_mode, "keyword or order")->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed)->capture_default_str();
  synth_cmd->add_option("--min-length", spec.min_length)->capture_default_str();
  synth_cmd->add_option("--max-length", spec.max_length)->capture_default_str();
  synth_cmd->add_option("--noise", spec.noise_vocabulary, "Noise vocabulary size")->capture_default_str();
  synth_cmd->add_option("--phrases", spec.phrases_per_class, "Signature phrases per class")->capture_default_str();
  synth_cmd->add_option("--phrase-length", spec.phrase_length)->capture_default_str();
  bool synth_balanced = false;
  synth_cmd->add_flag("--balanced", synth_balanced, "Equal class sizes instead of the reference skew");

  // preprocess
  auto* prep_cmd = app.add_subcommand("preprocess", "Clean notes, resolve labels, truncate");
  std::string prep_config, prep_out;
  std::string prep_corpus, prep_aliases;
  std::optional<std::size_t> prep_top_k;
  bool prep_no_truncate = false;
  prep_cmd->add_option("--corpus", prep_corpus, "Raw notes (JSON lines)")->required();
  prep_cmd->add_option("--aliases", prep_aliases, "Alias map (TSV)");
  prep_cmd->add_option("--config", prep_config, "Run configuration file");
  prep_cmd->add_option("--top-k", prep_top_k, "Number of labels to keep");
  prep_cmd->add_flag("--no-truncate", prep_no_truncate);
  prep_cmd->add_option("--out", prep_out, "Tokenized corpus output")->required();

  // embed-train
  auto* embed_cmd = app.add_subcommand("embed-train", "Pretrain skip-gram embeddings");
  SkipgramConfig sg;
  std::string embed_corpus, embed_out, embed_text;
  bool embed_det = false;
  embed_cmd->add_option("--corpus", embed_corpus)->required();
  embed_cmd->add_option("--dim", sg.dim)->capture_default_str();
  embed_cmd->add_option("--window", sg.window)->capture_default_str();
  embed_cmd->add_option("--negatives", sg.negatives)->capture_default_str();
  embed_cmd->add_option("--epochs", sg.epochs)->capture_default_str();
  embed_cmd->add_option("--min-count", sg.min_count)->capture_default_str();
  embed_cmd->add_option("--lr", sg.learning_rate)->capture_default_str();
  embed_cmd->add_option("--subsample", sg.subsample)->capture_default_str();
  embed_cmd->add_option("--seed", sg.seed)->capture_default_str();
  embed_cmd->add_option("--out", embed_out, "Binary embedding file")->required();
  embed_cmd->add_option("--text", embed_text, "Also write the text format here");
  embed_cmd->add_flag("--deterministic", embed_det);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the CNN over several seeds");
  std::string train_corpus, train_embeddings, train_config, train_out;
  std::optional<std::size_t> train_seeds;
  bool train_det = false;
  train_cmd->add_option("--corpus", train_corpus)->required();
  train_cmd->add_option("--embeddings", train_embeddings, "Pretrained embedding file");
  train_cmd->add_option("--config", train_config);
  train_cmd->add_option("--seeds", train_seeds);
  train_cmd->add_option("--out", train_out)->required();
  train_cmd->add_flag("--deterministic", train_det);

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "Train a tf-idf + PCA baseline over several seeds");
  std::string base_model, base_corpus, base_config, base_out;
  std::optional<std::size_t> base_pca, base_seeds;
  bool base_det = false;
  base_cmd->add_option("--model", base_model, "logreg or mlp")->required();
  base_cmd->add_option("--corpus", base_corpus)->required();
  base_cmd->add_option("--config", base_config);
  base_cmd->add_option("--pca-dim", base_pca);
  base_cmd->add_option("--seeds", base_seeds);
  base_cmd->add_option("--out", base_out)->required();
  base_cmd->add_flag("--deterministic", base_det);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Metrics report from prediction files");
  std::vector<std::string> eval_preds;
  std::string eval_out;
  eval_cmd->add_option("--pred", eval_preds, "Prediction files (JSON lines)")->required();
  eval_cmd->add_option("--out", eval_out, "Report JSON")->required();

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Welch t-test between two result directories");
  std::string cmp_a, cmp_b, cmp_metric = "wf1";
  cmp_cmd->add_option("--a", cmp_a)->required();
  cmp_cmd->add_option("--b", cmp_b)->required();
  cmp_cmd->add_option("--metric", cmp_metric)->capture_default_str();

  // visualize-filters
  auto* vis_cmd = app.add_subcommand("visualize-filters", "Top n-grams per convolution filter");
  std::string vis_model, vis_corpus, vis_out;
  std::size_t vis_per_size = 2, vis_top = 10;
  std::uint64_t vis_seed = 1;
  vis_cmd->add_option("--model", vis_model, "Checkpoint")->required();
  vis_cmd->add_option("--corpus", vis_corpus)->required();
  vis_cmd->add_option("--per-size", vis_per_size)->capture_default_str();
  vis_cmd->add_option("--top", vis_top)->capture_default_str();
  vis_cmd->add_option("--seed", vis_seed)->capture_default_str();
  vis_cmd->add_option("--out", vis_out, "Write <out>.tsv and <out>.json instead of printing");

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage into one directory");
  std::string pipe_config, pipe_out, pipe_corpus;
  bool pipe_det = false;
  pipe_cmd->add_option("--config", pipe_config);
  pipe_cmd->add_option("--corpus", pipe_corpus, "Overrides the configured corpus");
  pipe_cmd->add_option("--out", pipe_out)->required();
  pipe_cmd->add_flag("--deterministic", pipe_det);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: USAGE: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*synth_cmd) {
      if (synth_mode == "keyword") {
        spec.mode = synth::SignalMode::Keyword;
      } else if (synth_mode == "order") {
        spec.mode = synth::SignalMode::Order;
      } else {
        fail(ErrorCode::InvalidArgument, "--mode must be keyword or order");
      }
      if (synth_classes) {
        require(synth_classes <= spec.classes.size(), ErrorCode::InvalidArgument,
                "at most " + std::to_string(spec.classes.size()) + " classes are available");
        spec.classes.resize(synth_classes);
        spec.weights.resize(synth_classes);
      }
      if (synth_balanced) spec.weights.clear();
      write_text_file(synth_out, synth::to_jsonl(synth::generate(spec)));
    } else if (*prep_cmd) {
      RunConfig config = load_config(prep_config, false);
      config.corpus = prep_corpus;
      if (!prep_aliases.empty()) config.aliases = prep_aliases;
      if (prep_top_k) config.top_k = *prep_top_k;
      if (prep_no_truncate) config.truncate = false;
      const auto result = pipeline::preprocess(config);
      write_documents(prep_out, result.corpus);
      std::cout << pipeline::to_json(result).dump(2) << '\n';
    } else if (*embed_cmd) {
      sg.deterministic = embed_det;
      sg.threads = embed_det ? 1 : env_workers();
      SkipgramReport report;
      const auto docs = read_corpus(embed_corpus);
      const auto store = train_skipgram(experiment::token_lists(docs), sg, &report);
      store.save(embed_out);
      if (!embed_text.empty()) store.save_text(embed_text);
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
        std::cout << "epoch " << e + 1 << " loss " << experiment::format_double(report.epoch_loss[e]) << '\n';
      }
    } else if (*train_cmd) {
      RunConfig config = load_config(train_config, train_det);
      if (train_seeds) config.seeds = *train_seeds;
      config.validate();
      const auto docs = labeled_corpus(train_corpus);
      std::optional<EmbeddingStore> store;
      if (!train_embeddings.empty()) store = EmbeddingStore::load(train_embeddings);
      auto cnn_config = config.cnn_config();
      if (store) cnn_config.embed_dim = store->dim();
      const auto runs = experiment::run_cnn(docs, cnn_config, config.experiment_options(),
                                            store ? &*store : nullptr, [](const experiment::CnnRun& r) {
                                              std::cout << "seed " << r.result.seed << " test wf1 "
                                                        << experiment::format_double(
                                                               r.result.report.averages.weighted.f1)
                                                        << '\n';
                                            });
      std::vector<experiment::SeedResult> results;
      std::vector<const cnn::CnnModel*> models;
      for (const auto& r : runs) {
        results.push_back(r.result);
        models.push_back(&r.model);
      }
      pipeline::write_results(train_out, results, models);
    } else if (*base_cmd) {
      RunConfig config = load_config(base_config, base_det);
      if (base_pca) config.baseline.pca_dim = *base_pca;
      if (base_seeds) config.seeds = *base_seeds;
      config.validate();
      const auto kind = experiment::parse_baseline(base_model);
      const auto docs = labeled_corpus(base_corpus);
      const auto results = experiment::run_baselines(docs, {kind}, config.baseline, config.experiment_options());
      for (const auto& r : results[0]) {
        std::cout << "seed " << r.seed << " test wf1 "
                  << experiment::format_double(r.report.averages.weighted.f1) << '\n';
      }
      pipeline::write_results(base_out, results[0]);
    } else if (*eval_cmd) {
      nlohmann::json out;
      std::vector<metrics::MetricsReport> reports;
      // One class order across all files so the reports can be aggregated.
      std::vector<std::vector<cnn::Prediction>> files;
      std::vector<cnn::Prediction> pooled;
      for (const auto& path : eval_preds) {
        files.push_back(experiment::read_predictions(path));
        pooled.insert(pooled.end(), files.back().begin(), files.back().end());
      }
      const auto classes = experiment::prediction_classes(pooled);
      for (const auto& preds : files) {
        auto result = experiment::make_result(0, preds, classes);
        result.report.seed.reset();
        reports.push_back(result.report);
      }
      if (reports.size() == 1) {
        out = metrics::to_json(reports[0]);
      } else {
        out["reports"] = nlohmann::json::array();
        for (const auto& r : reports) out["reports"].push_back(metrics::to_json(r));
        out["aggregate"] = metrics::to_json(metrics::aggregate_seeds(reports));
      }
      write_text_file(eval_out, out.dump(2) + "\n");
    } else if (*cmp_cmd) {
      const auto c = pipeline::compare(cmp_a, pipeline::read_reports(cmp_a), cmp_b,
                                       pipeline::read_reports(cmp_b), cmp_metric);
      std::cout << "t " << experiment::format_double(c.test.t) << "\n"
                << "df " << experiment::format_double(c.test.df) << "\n"
                << "p " << experiment::format_double(c.test.p) << "\n";
    } else if (*vis_cmd) {
      const auto model = cnn::load_checkpoint(vis_model);
      const auto docs = read_corpus(vis_corpus);
      const auto filters = interpret::select_filters(model, vis_per_size, vis_seed);
      const auto rankings = interpret::rank_ngrams(model, docs, vis_top, filters);
      if (vis_out.empty()) {
        std::cout << interpret::render_tsv(rankings);
      } else {
        write_text_file(vis_out + ".tsv", interpret::render_tsv(rankings));
        write_text_file(vis_out + ".json", interpret::to_json(rankings).dump(2) + "\n");
      }
    } else if (*pipe_cmd) {
      RunConfig config = load_config(pipe_config, pipe_det);
      if (!pipe_corpus.empty()) config.corpus = pipe_corpus;
      pipeline::run(config, pipe_out, log_line);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: INTERNAL: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
