#include "notedx/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "notedx/corpus_io.hpp"
#include "notedx/error.hpp"

namespace notedx::experiment {

using nlohmann::json;

std::vector<std::string> label_order(const std::vector<Document>& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    if (doc.label) ++counts[*doc.label];
  }
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (auto& [label, n] : entries) out.push_back(label);
  return out;
}

std::vector<std::vector<std::string>> token_lists(const std::vector<Document>& docs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) out.push_back(doc.tokens);
  return out;
}

std::vector<std::uint64_t> ExperimentOptions::seed_list() const {
  require(seeds >= 1, ErrorCode::InvalidArgument, "at least one seed is required");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < seeds; ++i) out.push_back(first_seed + i);
  return out;
}

SeedResult make_result(std::uint64_t seed, std::vector<cnn::Prediction> predictions,
                       const std::vector<std::string>& classes) {
  std::vector<std::string> gold;
  std::vector<std::string> pred;
  for (const auto& p : predictions) {
    gold.push_back(p.gold);
    pred.push_back(p.pred);
  }
  SeedResult r;
  r.seed = seed;
  r.report = metrics::evaluate(metrics::confusion(gold, pred, classes), seed);
  r.predictions = std::move(predictions);
  return r;
}

namespace {

std::vector<std::string> resolve_classes(const std::vector<Document>& corpus,
                                         const ExperimentOptions& options) {
  auto classes = options.classes.empty() ? label_order(corpus) : options.classes;
  require(classes.size() >= 2, ErrorCode::InvalidArgument, "at least two classes are required");
  for (const auto& doc : corpus) {
    if (!doc.label) fail(ErrorCode::InvalidArgument, "document " + doc.id + " has no label");
  }
  return classes;
}

}  // namespace

std::vector<CnnRun> run_cnn(const std::vector<Document>& corpus, const cnn::CnnConfig& config,
                            const ExperimentOptions& options, const EmbeddingStore* pretrained,
                            const std::function<void(const CnnRun&)>& on_seed) {
  const auto classes = resolve_classes(corpus, options);
  std::vector<CnnRun> runs;
  for (std::uint64_t seed : options.seed_list()) {
    const CorpusSplit split = split_dataset(corpus, seed, options.ratios);
    cnn::CnnConfig cfg = config;
    cfg.seed = seed;
    Vocabulary vocab = Vocabulary::build(token_lists(split.train), cfg.min_count);
    CnnRun run;
    run.model = cnn::build_model(cfg, std::move(vocab), classes, pretrained);
    cnn::train(run.model, split);
    run.result = make_result(seed, cnn::predict(run.model, split.test), classes);
    run.test = split.test;
    if (on_seed) on_seed(run);
    runs.push_back(std::move(run));
  }
  return runs;
}

std::string baseline_name(BaselineKind kind) {
  return kind == BaselineKind::LogReg ? "logreg" : "mlp";
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "logreg" || name == "lr") return BaselineKind::LogReg;
  if (name == "mlp") return BaselineKind::Mlp;
  fail(ErrorCode::InvalidArgument, "unknown baseline model '" + name + "' (expected logreg or mlp)");
}

FeatureSet baseline_features(const CorpusSplit& split, const std::vector<std::string>& classes,
                             const BaselineOptions& options) {
  Vocabulary vocab = Vocabulary::build(token_lists(split.train), options.min_count);
  const baselines::TfidfModel tfidf = baselines::fit_tfidf(split.train, std::move(vocab));
  const baselines::SparseMatrix train = baselines::transform(tfidf, split.train);
  const baselines::SparseMatrix test = baselines::transform(tfidf, split.test);
  const std::size_t dim = std::min({options.pca_dim, train.rows, train.cols});
  const baselines::PcaModel pca = baselines::fit_pca(train, dim);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;
  auto labels = [&](const std::vector<Document>& docs) {
    std::vector<std::size_t> out;
    for (const auto& doc : docs) {
      auto it = doc.label ? index.find(*doc.label) : index.end();
      if (it == index.end()) fail(ErrorCode::UnknownLabel, "document " + doc.id + " has an unknown label");
      out.push_back(it->second);
    }
    return out;
  };
  return {baselines::transform(pca, train), baselines::transform(pca, test), labels(split.train),
          labels(split.test)};
}

std::vector<std::vector<SeedResult>> run_baselines(const std::vector<Document>& corpus,
                                                   const std::vector<BaselineKind>& kinds,
                                                   const BaselineOptions& baseline,
                                                   const ExperimentOptions& options) {
  const auto classes = resolve_classes(corpus, options);
  std::vector<std::vector<SeedResult>> results(kinds.size());
  for (std::uint64_t seed : options.seed_list()) {
    const CorpusSplit split = split_dataset(corpus, seed, options.ratios);
    const FeatureSet features = baseline_features(split, classes, baseline);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      Tensor probs;
      if (kinds[k] == BaselineKind::LogReg) {
        const auto model =
            baselines::train_logreg(features.train, features.train_labels, classes.size(), baseline.logreg);
        probs = baselines::predict_proba(model, features.test);
      } else {
        baselines::MlpOptions mlp = baseline.mlp;
        mlp.seed = seed;
        const auto model = baselines::train_mlp(features.train, features.train_labels, classes.size(), mlp);
        probs = baselines::predict_proba(model, features.test);
      }
      const auto pred = baselines::argmax_rows(probs);
      std::vector<cnn::Prediction> predictions;
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        cnn::Prediction p;
        p.id = split.test[i].id;
        p.gold = *split.test[i].label;
        p.pred = classes[pred[i]];
        auto row = probs.row(i);
        p.probs.assign(row.begin(), row.end());
        predictions.push_back(std::move(p));
      }
      results[k].push_back(make_result(seed, std::move(predictions), classes));
    }
  }
  return results;
}

// ---------------------------------------------------------------- files

std::string predictions_jsonl(const std::vector<cnn::Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    json j;
    j["id"] = p.id;
    j["gold"] = p.gold;
    j["pred"] = p.pred;
    j["probs"] = p.probs;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<cnn::Prediction> read_predictions(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<cnn::Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      cnn::Prediction p;
      p.id = j.at("id").get<std::string>();
      p.gold = j.at("gold").get<std::string>();
      p.pred = j.at("pred").get<std::string>();
      if (j.contains("probs")) p.probs = j["probs"].get<std::vector<double>>();
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      fail(ErrorCode::CorruptFile,
           path.string() + ":" + std::to_string(number) + ": bad prediction record: " + e.what());
    }
  }
  require(!out.empty(), ErrorCode::EmptyInput, path.string() + " holds no predictions");
  return out;
}

std::vector<std::string> prediction_classes(const std::vector<cnn::Prediction>& predictions) {
  std::vector<Document> gold;
  for (const auto& p : predictions) gold.push_back({p.id, {}, p.gold});
  auto classes = label_order(gold);
  std::set<std::string> known(classes.begin(), classes.end());
  std::set<std::string> extra;
  for (const auto& p : predictions) {
    if (!known.count(p.pred)) extra.insert(p.pred);
  }
  classes.insert(classes.end(), extra.begin(), extra.end());
  return classes;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string history_csv(const cnn::CnnModel& model) {
  std::string out = "epoch,train_loss,validation_wf1,validation_accuracy\n";
  out += "0," + format_double(model.initial_train_loss) + ",,\n";
  for (const auto& h : model.history) {
    out += std::to_string(h.epoch) + "," + format_double(h.train_loss) + "," +
           format_double(h.validation_wf1) + "," + format_double(h.validation_accuracy) + "\n";
  }
  return out;
}

}  // namespace notedx::experiment
