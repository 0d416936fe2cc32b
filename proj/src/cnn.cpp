#include "notedx/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "notedx/binary_io.hpp"
#include "notedx/metrics.hpp"
#include "notedx/random.hpp"

namespace notedx::cnn {

namespace {

constexpr char kMagic[5] = "NDXC";

void write_tensor(io::BinaryWriter& w, const Tensor& t) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.put<std::uint64_t>(d);
  w.put_bytes(t.data(), t.size() * sizeof(double));
}

Tensor read_tensor(io::BinaryReader& r) {
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) fail(ErrorCode::CorruptFile, "implausible tensor rank");
  std::vector<std::size_t> shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(r.get<std::uint64_t>());
    count *= shape.back();
    if (count > (std::uint64_t{1} << 34)) fail(ErrorCode::CorruptFile, "implausible tensor size");
  }
  Tensor t(shape);
  r.get_bytes(t.data(), t.size() * sizeof(double));
  return t;
}

std::size_t argmax(const Tensor& v) {
  return static_cast<std::size_t>(
      std::distance(v.values().begin(), std::max_element(v.values().begin(), v.values().end())));
}

}  // namespace

std::size_t CnnConfig::total_filters() const {
  std::size_t total = 0;
  for (const auto& f : filters) total += f.count;
  return total;
}

void CnnConfig::validate() const {
  require(!filters.empty(), ErrorCode::Config, "at least one filter spec is required");
  for (const auto& f : filters) {
    require(f.height >= 1 && f.count >= 1, ErrorCode::Config, "filter height and count must be >= 1");
  }
  require(embed_dim >= 1, ErrorCode::Config, "embedding dimension must be >= 1");
  require(keep_prob > 0.0 && keep_prob <= 1.0, ErrorCode::Config, "keep probability must lie in (0, 1]");
  require(learning_rate >= 0.0, ErrorCode::Config, "learning rate must be >= 0");
  require(batch_size >= 1, ErrorCode::Config, "batch size must be >= 1");
}

std::vector<Tensor*> CnnModel::parameters() {
  std::vector<Tensor*> out{&embedding};
  for (auto& b : banks) {
    out.push_back(&b.weights);
    out.push_back(&b.biases);
  }
  out.push_back(&dense_weights);
  out.push_back(&dense_bias);
  return out;
}

std::vector<const Tensor*> CnnModel::parameters() const {
  std::vector<const Tensor*> out{&embedding};
  for (const auto& b : banks) {
    out.push_back(&b.weights);
    out.push_back(&b.biases);
  }
  out.push_back(&dense_weights);
  out.push_back(&dense_bias);
  return out;
}

std::size_t CnnModel::class_index(const std::string& label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) fail(ErrorCode::UnknownLabel, "label '" + label + "' is not a model class");
  return static_cast<std::size_t>(it - classes.begin());
}

CnnModel build_model(const CnnConfig& config, Vocabulary vocab, std::vector<std::string> classes,
                     const EmbeddingStore* pretrained) {
  config.validate();
  require(classes.size() >= 2, ErrorCode::Config, "a classifier needs at least two classes");
  require(vocab.size() >= 2, ErrorCode::Config, "vocabulary lacks the reserved tokens");
  if (pretrained && pretrained->dim() != config.embed_dim) {
    fail(ErrorCode::ShapeMismatch, "pretrained embeddings have dimension " +
                                       std::to_string(pretrained->dim()) + ", model expects " +
                                       std::to_string(config.embed_dim));
  }
  CnnModel m;
  m.config = config;
  m.vocab = std::move(vocab);
  m.classes = std::move(classes);
  const std::size_t v = m.vocab.size();
  const std::size_t e = config.embed_dim;
  Rng rng(mix_seed(config.seed, 0xC4A1));

  m.embedding = Tensor({v, e});
  for (std::size_t w = 1; w < v; ++w) {
    if (pretrained) {
      const auto vec = pretrained->embed(m.vocab.words()[w]);
      std::copy(vec.begin(), vec.end(), m.embedding.row(w).begin());
    } else {
      for (double& x : m.embedding.row(w)) x = uniform(rng, -0.05, 0.05);
    }
  }
  for (const auto& spec : config.filters) {
    nn::FilterBank bank(spec.count, spec.height, e);
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.height * e));
    for (double& x : bank.weights.values()) x = uniform(rng, -bound, bound);
    m.banks.push_back(std::move(bank));
  }
  const std::size_t features = config.total_filters();
  m.dense_weights = Tensor({m.classes.size(), features});
  const double bound = 1.0 / std::sqrt(static_cast<double>(features));
  for (double& x : m.dense_weights.values()) x = uniform(rng, -bound, bound);
  m.dense_bias = Tensor({m.classes.size()});
  return m;
}

std::vector<std::int32_t> encode_document(const CnnModel& model,
                                          const std::vector<std::string>& tokens) {
  const std::size_t length = std::max<std::size_t>(model.max_length(), 1);
  std::vector<std::int32_t> ids(length, Vocabulary::kPad);
  for (std::size_t i = 0; i < std::min(length, tokens.size()); ++i) {
    ids[i] = model.vocab.index(tokens[i]);
  }
  return ids;
}

ForwardPass forward(const CnnModel& model, std::vector<std::int32_t> ids, nn::Mode mode, Rng& rng) {
  ForwardPass p;
  p.ids = std::move(ids);
  p.embedded = nn::embedding_lookup(p.ids, model.embedding);
  p.features = Tensor({model.config.total_filters()});
  std::size_t offset = 0;
  for (const auto& bank : model.banks) {
    p.conv.push_back(nn::conv1d_same(p.embedded, bank, model.config.activation));
    p.pooled.push_back(nn::max_pool_time(p.conv.back().output));
    const Tensor& v = p.pooled.back().values;
    std::copy(v.values().begin(), v.values().end(), p.features.values().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  p.dropped = nn::dropout(p.features, model.config.keep_prob, mode, rng);
  p.logits = nn::dense(p.dropped.output, model.dense_weights, model.dense_bias);
  p.probs = nn::softmax(p.logits);
  return p;
}

Tensor predict_proba(const CnnModel& model, const std::vector<std::string>& tokens) {
  Rng unused(0);
  return forward(model, encode_document(model, tokens), nn::Mode::Infer, unused).probs;
}

CnnGradients::CnnGradients(const CnnModel& model)
    : embedding(model.embedding.shape()),
      dense_weights(model.dense_weights.shape()),
      dense_bias(model.dense_bias.shape()) {
  for (const auto& b : model.banks) banks.emplace_back(b);
}

void CnnGradients::zero() {
  embedding.fill(0.0);
  for (auto& b : banks) {
    b.weights.fill(0.0);
    b.biases.fill(0.0);
  }
  dense_weights.fill(0.0);
  dense_bias.fill(0.0);
}

void CnnGradients::add(const CnnGradients& other) {
  auto acc = [](Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  acc(embedding, other.embedding);
  for (std::size_t i = 0; i < banks.size(); ++i) {
    acc(banks[i].weights, other.banks[i].weights);
    acc(banks[i].biases, other.banks[i].biases);
  }
  acc(dense_weights, other.dense_weights);
  acc(dense_bias, other.dense_bias);
}

void CnnGradients::scale(double factor) {
  auto mul = [factor](Tensor& a) {
    for (double& x : a.values()) x *= factor;
  };
  mul(embedding);
  for (auto& b : banks) {
    mul(b.weights);
    mul(b.biases);
  }
  mul(dense_weights);
  mul(dense_bias);
}

std::vector<const Tensor*> CnnGradients::tensors() const {
  std::vector<const Tensor*> out{&embedding};
  for (const auto& b : banks) {
    out.push_back(&b.weights);
    out.push_back(&b.biases);
  }
  out.push_back(&dense_weights);
  out.push_back(&dense_bias);
  return out;
}

double backward(const CnnModel& model, const ForwardPass& pass, std::size_t label,
                CnnGradients& grads) {
  const Tensor target = nn::one_hot(label, model.num_classes());
  const double loss = nn::cross_entropy(target, pass.probs);
  const Tensor grad_logits = nn::softmax_cross_entropy_backward(target, pass.probs);
  const Tensor grad_dropped = nn::dense_backward(pass.dropped.output, model.dense_weights,
                                                 grad_logits, grads.dense_weights, grads.dense_bias);
  const Tensor grad_features = nn::dropout_backward(pass.dropped, grad_dropped);

  const std::size_t length = pass.ids.size();
  Tensor grad_embedded({length, model.config.embed_dim});
  std::size_t offset = 0;
  for (std::size_t b = 0; b < model.banks.size(); ++b) {
    const std::size_t f = model.banks[b].filters();
    Tensor grad_pooled({f});
    std::copy_n(grad_features.data() + offset, f, grad_pooled.data());
    offset += f;
    const Tensor grad_conv = nn::max_pool_time_backward(pass.pooled[b], length, grad_pooled);
    const Tensor gx = nn::conv1d_same_backward(pass.embedded, model.banks[b], pass.conv[b], grad_conv,
                                               grads.banks[b], model.config.activation);
    for (std::size_t i = 0; i < gx.size(); ++i) grad_embedded[i] += gx[i];
  }
  nn::embedding_lookup_backward(pass.ids, grad_embedded, grads.embedding);
  return loss;
}

std::vector<Prediction> predict(const CnnModel& model, const std::vector<Document>& docs) {
  std::vector<Prediction> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    const Tensor probs = predict_proba(model, doc.tokens);
    Prediction p;
    p.id = doc.id;
    p.gold = doc.label.value_or("");
    p.pred = model.classes[argmax(probs)];
    p.probs.assign(probs.values().begin(), probs.values().end());
    out.push_back(std::move(p));
  }
  return out;
}

double mean_loss(const CnnModel& model, const std::vector<Document>& docs) {
  require(!docs.empty(), ErrorCode::EmptyInput, "no documents to score");
  double total = 0.0;
  for (const auto& doc : docs) {
    const Tensor probs = predict_proba(model, doc.tokens);
    total -= std::log(probs[model.class_index(doc.label.value())]);
  }
  return total / static_cast<double>(docs.size());
}

namespace {

struct Scores {
  double wf1 = 0;
  double accuracy = 0;
};

Scores score(const CnnModel& model, const std::vector<Document>& docs) {
  std::vector<std::string> gold;
  std::vector<std::string> pred;
  for (const auto& p : predict(model, docs)) {
    gold.push_back(p.gold);
    pred.push_back(p.pred);
  }
  const auto report = metrics::evaluate(metrics::confusion(gold, pred, model.classes));
  return {report.averages.weighted.f1, report.overall_accuracy};
}

struct Example {
  std::vector<std::int32_t> ids;
  std::size_t label;
};

}  // namespace

void train(CnnModel& model, const CorpusSplit& split) {
  require(!split.train.empty(), ErrorCode::EmptyInput, "training split is empty");
  require(!split.validation.empty(), ErrorCode::EmptyInput, "validation split is empty");
  const CnnConfig& cfg = model.config;
  if (model.config.max_length == 0) {
    std::size_t longest = 1;
    for (const auto& d : split.train) longest = std::max(longest, d.tokens.size());
    model.config.max_length = longest;
  }

  std::vector<Example> examples;
  examples.reserve(split.train.size());
  for (const auto& doc : split.train) {
    if (!doc.label) fail(ErrorCode::InvalidArgument, "training document " + doc.id + " has no label");
    examples.push_back({encode_document(model, doc.tokens), model.class_index(*doc.label)});
  }
  for (const auto& doc : split.validation) {
    if (!doc.label) fail(ErrorCode::InvalidArgument, "validation document " + doc.id + " has no label");
    model.class_index(*doc.label);
  }

  std::vector<Tensor*> params = model.parameters();
  if (!cfg.fine_tune_embeddings) params.erase(params.begin());
  nn::AdamState adam(params, nn::AdamOptions{cfg.learning_rate});

  const std::size_t workers = cfg.deterministic ? 1 : std::max<std::size_t>(1, cfg.workers);
  std::vector<CnnGradients> worker_grads(workers, CnnGradients(model));
  std::vector<double> worker_loss(workers, 0.0);

  model.history.clear();
  model.initial_train_loss = mean_loss(model, split.train);
  CnnModel best = model;
  double best_wf1 = -1.0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0xE90C0000ULL + epoch));
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t n = end - start;
      auto run = [&](std::size_t w) {
        CnnGradients& g = worker_grads[w];
        g.zero();
        worker_loss[w] = 0.0;
        const std::size_t lo = start + n * w / workers;
        const std::size_t hi = start + n * (w + 1) / workers;
        for (std::size_t i = lo; i < hi; ++i) {
          const Example& ex = examples[order[i]];
          Rng drop_rng(mix_seed(cfg.seed ^ 0xD809ULL, step * 1000003ULL + (i - start)));
          const ForwardPass pass = forward(model, ex.ids, nn::Mode::Train, drop_rng);
          worker_loss[w] += backward(model, pass, ex.label, g);
        }
      };
      if (workers == 1) {
        run(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
      }
      CnnGradients& total = worker_grads[0];
      for (std::size_t w = 1; w < workers; ++w) total.add(worker_grads[w]);
      for (std::size_t w = 0; w < workers; ++w) epoch_loss += worker_loss[w];
      total.scale(1.0 / static_cast<double>(n));
      std::vector<const Tensor*> grads = total.tensors();
      if (!cfg.fine_tune_embeddings) grads.erase(grads.begin());
      adam.step(params, grads);
    }

    const Scores val = score(model, split.validation);
    model.history.push_back({epoch, epoch_loss / static_cast<double>(examples.size()), val.wf1,
                             val.accuracy});
    if (val.wf1 > best_wf1) {
      best_wf1 = val.wf1;
      since_best = 0;
      best = model;
      best.best_epoch = epoch;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  if (best_wf1 < 0.0) return;  // max_epochs == 0
  const auto history = model.history;
  const double initial = model.initial_train_loss;
  model = std::move(best);
  model.history = history;
  model.initial_train_loss = initial;
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  io::BinaryWriter w(out);
  io::write_header(w, kMagic, kCheckpointVersion);
  const CnnConfig& c = model.config;
  w.put<std::uint64_t>(c.embed_dim);
  w.put<std::uint64_t>(c.filters.size());
  for (const auto& f : c.filters) {
    w.put<std::uint64_t>(f.height);
    w.put<std::uint64_t>(f.count);
  }
  w.put<double>(c.keep_prob);
  w.put<double>(c.learning_rate);
  w.put<std::uint64_t>(c.batch_size);
  w.put<std::uint64_t>(c.max_epochs);
  w.put<std::uint64_t>(c.patience);
  w.put<std::uint8_t>(c.fine_tune_embeddings ? 1 : 0);
  w.put<std::uint8_t>(c.activation == nn::Activation::Relu ? 0 : 1);
  w.put<std::uint64_t>(c.max_length);
  w.put<std::uint64_t>(c.min_count);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint64_t>(model.classes.size());
  for (const auto& cls : model.classes) w.put_string(cls);
  model.vocab.write(w);
  for (const Tensor* t : model.parameters()) write_tensor(w, *t);
  w.put<std::uint64_t>(model.history.size());
  for (const auto& h : model.history) {
    w.put<std::uint64_t>(h.epoch);
    w.put<double>(h.train_loss);
    w.put<double>(h.validation_wf1);
    w.put<double>(h.validation_accuracy);
  }
  w.put<double>(model.initial_train_loss);
  w.put<std::uint64_t>(model.best_epoch);
  if (!out) fail(ErrorCode::Io, "failed writing " + path.string());
}

CnnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  io::BinaryReader r(in);
  io::read_header(r, kMagic, kCheckpointVersion);
  CnnModel m;
  CnnConfig& c = m.config;
  c.embed_dim = r.get<std::uint64_t>();
  const auto nf = r.get<std::uint64_t>();
  if (nf > 1024) fail(ErrorCode::CorruptFile, "implausible filter spec count");
  c.filters.clear();
  for (std::uint64_t i = 0; i < nf; ++i) {
    FilterSpec f;
    f.height = r.get<std::uint64_t>();
    f.count = r.get<std::uint64_t>();
    c.filters.push_back(f);
  }
  c.keep_prob = r.get<double>();
  c.learning_rate = r.get<double>();
  c.batch_size = r.get<std::uint64_t>();
  c.max_epochs = r.get<std::uint64_t>();
  c.patience = r.get<std::uint64_t>();
  c.fine_tune_embeddings = r.get<std::uint8_t>() != 0;
  c.activation = r.get<std::uint8_t>() == 0 ? nn::Activation::Relu : nn::Activation::Identity;
  c.max_length = r.get<std::uint64_t>();
  c.min_count = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  const auto k = r.get<std::uint64_t>();
  if (k > (1u << 20)) fail(ErrorCode::CorruptFile, "implausible class count");
  for (std::uint64_t i = 0; i < k; ++i) m.classes.push_back(r.get_string());
  m.vocab = Vocabulary::read(r);
  m.embedding = read_tensor(r);
  for (const auto& f : c.filters) {
    nn::FilterBank bank;
    bank.weights = read_tensor(r);
    bank.biases = read_tensor(r);
    if (bank.weights.shape() != std::vector<std::size_t>{f.count, f.height, c.embed_dim}) {
      fail(ErrorCode::CorruptFile, "filter bank shape disagrees with its spec");
    }
    m.banks.push_back(std::move(bank));
  }
  m.dense_weights = read_tensor(r);
  m.dense_bias = read_tensor(r);
  if (m.embedding.shape() != std::vector<std::size_t>{m.vocab.size(), c.embed_dim} ||
      m.dense_weights.shape() != std::vector<std::size_t>{k, c.total_filters()}) {
    fail(ErrorCode::CorruptFile, "parameter shapes disagree with the stored configuration");
  }
  const auto epochs = r.get<std::uint64_t>();
  if (epochs > (1u << 24)) fail(ErrorCode::CorruptFile, "implausible history length");
  for (std::uint64_t i = 0; i < epochs; ++i) {
    EpochRecord h;
    h.epoch = r.get<std::uint64_t>();
    h.train_loss = r.get<double>();
    h.validation_wf1 = r.get<double>();
    h.validation_accuracy = r.get<double>();
    m.history.push_back(h);
  }
  m.initial_train_loss = r.get<double>();
  m.best_epoch = r.get<std::uint64_t>();
  return m;
}

}  // namespace notedx::cnn
