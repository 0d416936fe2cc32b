#include "notedx/interpret.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>

#include "notedx/error.hpp"

namespace notedx::interpret {

using nlohmann::json;

std::string NgramActivation::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

/// Strict "ranks before": higher score, then smaller document id, then position.
bool ranks_before(const NgramActivation& a, const NgramActivation& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.document != b.document) return a.document < b.document;
  return a.position < b.position;
}

void check_filter(const cnn::CnnModel& model, FilterId id) {
  require(id.bank < model.banks.size(), ErrorCode::OutOfRange,
          "filter bank " + std::to_string(id.bank) + " does not exist");
  require(id.filter < model.banks[id.bank].filters(), ErrorCode::OutOfRange,
          "filter " + std::to_string(id.filter) + " does not exist in bank " + std::to_string(id.bank));
}

Tensor embedded(const cnn::CnnModel& model, const std::vector<std::string>& tokens) {
  const auto ids = cnn::encode_document(model, tokens);
  return nn::embedding_lookup(ids, model.embedding);
}

}  // namespace

std::vector<FilterId> all_filters(const cnn::CnnModel& model) {
  std::vector<FilterId> out;
  for (std::size_t b = 0; b < model.banks.size(); ++b) {
    for (std::size_t f = 0; f < model.banks[b].filters(); ++f) out.push_back({b, f});
  }
  return out;
}

std::vector<FilterId> select_filters(const cnn::CnnModel& model, std::size_t per_size,
                                     std::uint64_t seed) {
  std::vector<FilterId> out;
  for (std::size_t b = 0; b < model.banks.size(); ++b) {
    std::vector<std::size_t> idx(model.banks[b].filters());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, 0xF170 + b));
    shuffle(std::span<std::size_t>(idx), rng);
    idx.resize(std::min(per_size, idx.size()));
    std::sort(idx.begin(), idx.end());
    for (auto f : idx) out.push_back({b, f});
  }
  return out;
}

std::vector<FilterRanking> rank_ngrams(const cnn::CnnModel& model, const std::vector<Document>& docs,
                                       std::size_t top_n, std::vector<FilterId> filters) {
  require(!docs.empty(), ErrorCode::EmptyInput, "no documents to rank");
  if (filters.empty()) filters = all_filters(model);
  for (const auto& id : filters) check_filter(model, id);

  auto worse_on_top = [](const NgramActivation& a, const NgramActivation& b) { return ranks_before(a, b); };
  using Heap = std::priority_queue<NgramActivation, std::vector<NgramActivation>, decltype(worse_on_top)>;
  std::vector<Heap> heaps(filters.size(), Heap(worse_on_top));

  std::map<std::size_t, std::vector<std::size_t>> by_bank;  // bank -> positions in `filters`
  for (std::size_t i = 0; i < filters.size(); ++i) by_bank[filters[i].bank].push_back(i);

  for (const auto& doc : docs) {
    const Tensor input = embedded(model, doc.tokens);
    const std::size_t real = std::min(doc.tokens.size(), input.dim(0));
    for (const auto& [b, members] : by_bank) {
      const nn::FilterBank& bank = model.banks[b];
      const std::size_t h = bank.height();
      if (real < h) continue;
      const std::size_t lead = nn::leading_padding(h);
      const nn::ConvOutput conv = nn::conv1d_same(input, bank, model.config.activation);
      for (std::size_t start = 0; start + h <= real; ++start) {
        const std::size_t row = start + lead;
        for (std::size_t i : members) {
          NgramActivation a;
          a.score = conv.output(row, filters[i].filter);
          Heap& heap = heaps[i];
          if (top_n == 0) continue;
          if (heap.size() == top_n) {
            // Cheap rejection before building the full record.
            const NgramActivation& worst = heap.top();
            if (a.score < worst.score) continue;
            a.document = doc.id;
            a.position = start;
            if (!ranks_before(a, worst)) continue;
          }
          a.filter = filters[i];
          a.document = doc.id;
          a.position = start;
          a.tokens.assign(doc.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                          doc.tokens.begin() + static_cast<std::ptrdiff_t>(start + h));
          heap.push(std::move(a));
          if (heap.size() > top_n) heap.pop();
        }
      }
    }
  }

  std::vector<FilterRanking> out;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    FilterRanking r;
    r.filter = filters[i];
    r.height = model.banks[filters[i].bank].height();
    while (!heaps[i].empty()) {
      r.top.push_back(heaps[i].top());
      heaps[i].pop();
    }
    std::reverse(r.top.begin(), r.top.end());
    out.push_back(std::move(r));
  }
  return out;
}

double window_score(const cnn::CnnModel& model, const std::vector<std::string>& tokens,
                    FilterId filter, std::size_t position) {
  check_filter(model, filter);
  const Tensor input = embedded(model, tokens);
  const nn::FilterBank& bank = model.banks[filter.bank];
  const std::size_t row = position + nn::leading_padding(bank.height());
  require(row < input.dim(0), ErrorCode::OutOfRange, "window lies outside the document");
  return nn::conv1d_same(input, bank, model.config.activation).output(row, filter.filter);
}

std::string render_tsv(const std::vector<FilterRanking>& rankings) {
  if (rankings.empty()) return "";
  std::string out;
  std::size_t rows = 0;
  for (std::size_t c = 0; c < rankings.size(); ++c) {
    const auto& r = rankings[c];
    if (c) out += '\t';
    out += std::to_string(r.height) + "-gram bank " + std::to_string(r.filter.bank) + " filter " +
           std::to_string(r.filter.filter);
    rows = std::max(rows, r.top.size());
  }
  out += '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < rankings.size(); ++c) {
      if (c) out += '\t';
      if (i < rankings[c].top.size()) out += rankings[c].top[i].text();
    }
    out += '\n';
  }
  return out;
}

json to_json(const std::vector<FilterRanking>& rankings) {
  json out = json::array();
  for (const auto& r : rankings) {
    json top = json::array();
    for (const auto& a : r.top) {
      top.push_back({{"document", a.document},
                     {"position", a.position},
                     {"tokens", a.tokens},
                     {"ngram", a.text()},
                     {"score", a.score}});
    }
    out.push_back({{"bank", r.filter.bank}, {"filter", r.filter.filter}, {"height", r.height}, {"top", top}});
  }
  return out;
}

std::vector<FilterRanking> rankings_from_json(const json& j) {
  std::vector<FilterRanking> out;
  try {
    for (const auto& item : j) {
      FilterRanking r;
      r.filter = {item.at("bank").get<std::size_t>(), item.at("filter").get<std::size_t>()};
      r.height = item.at("height").get<std::size_t>();
      for (const auto& t : item.at("top")) {
        NgramActivation a;
        a.filter = r.filter;
        a.document = t.at("document").get<std::string>();
        a.position = t.at("position").get<std::size_t>();
        a.tokens = t.at("tokens").get<std::vector<std::string>>();
        a.score = t.at("score").get<double>();
        r.top.push_back(std::move(a));
      }
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("bad filter ranking JSON: ") + e.what());
  }
  return out;
}

}  // namespace notedx::interpret
