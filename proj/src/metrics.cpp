#include "notedx/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "notedx/error.hpp"

namespace notedx::metrics {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : classes_(std::move(classes)), k_(classes_.size()), counts_(k_ * k_, 0) {}

void ConfusionMatrix::add(std::size_t gold, std::size_t pred, std::uint64_t n) {
  require(gold < k_ && pred < k_, ErrorCode::UnknownLabel, "class index outside the matrix");
  counts_[gold * k_ + pred] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

std::vector<std::uint64_t> ConfusionMatrix::supports() const {
  std::vector<std::uint64_t> s(k_, 0);
  for (std::size_t g = 0; g < k_; ++g) {
    for (std::size_t p = 0; p < k_; ++p) s[g] += at(g, p);
  }
  return s;
}

ConfusionMatrix confusion(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                          const std::vector<std::string>& classes) {
  require(gold.size() == pred.size(), ErrorCode::ShapeMismatch,
          "gold and predicted label lists differ in length");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) fail(ErrorCode::UnknownLabel, "unknown label '" + label + "'");
    return it->second;
  };
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(lookup(gold[i]), lookup(pred[i]));
  return cm;
}

ConfusionMatrix confusion(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                          const std::vector<std::string>& classes) {
  require(gold.size() == pred.size(), ErrorCode::ShapeMismatch,
          "gold and predicted label lists differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  return cm;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"ACC",       "TNR",    "FPR", "FNR",
                                              "Precision", "Recall", "F1"};
  return names;
}

double metric_value(const MetricSet& m, std::size_t index) {
  switch (index) {
    case 0: return m.acc;
    case 1: return m.tnr;
    case 2: return m.fpr;
    case 3: return m.fnr;
    case 4: return m.precision;
    case 5: return m.recall;
    case 6: return m.f1;
  }
  fail(ErrorCode::OutOfRange, "metric index out of range");
}

void set_metric_value(MetricSet& m, std::size_t index, double value) {
  switch (index) {
    case 0: m.acc = value; return;
    case 1: m.tnr = value; return;
    case 2: m.fpr = value; return;
    case 3: m.fnr = value; return;
    case 4: m.precision = value; return;
    case 5: m.recall = value; return;
    case 6: m.f1 = value; return;
  }
  fail(ErrorCode::OutOfRange, "metric index out of range");
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  require(total > 0, ErrorCode::EmptyInput, "confusion matrix is empty");
  const std::size_t k = cm.classes_count();
  std::vector<std::uint64_t> col(k, 0);
  std::vector<std::uint64_t> row(k, 0);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t p = 0; p < k; ++p) {
      row[g] += cm.at(g, p);
      col[p] += cm.at(g, p);
    }
  }
  std::vector<ClassMetrics> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    ClassMetrics& c = out[i];
    c.label = cm.classes()[i];
    c.tp = cm.at(i, i);
    c.fp = col[i] - c.tp;
    c.fn = row[i] - c.tp;
    c.tn = total - c.tp - c.fp - c.fn;
    auto ratio = [&](std::uint64_t num, std::uint64_t den) {
      if (den == 0) {
        c.degenerate = true;
        return 0.0;
      }
      return static_cast<double>(num) / static_cast<double>(den);
    };
    c.rates.acc = ratio(c.tp + c.tn, total);
    c.rates.tnr = ratio(c.tn, c.tn + c.fp);
    c.rates.fpr = ratio(c.fp, c.tn + c.fp);
    c.rates.fnr = ratio(c.fn, c.tp + c.fn);
    c.rates.precision = ratio(c.tp, c.tp + c.fp);
    c.rates.recall = ratio(c.tp, c.tp + c.fn);
    const double pr = c.rates.precision + c.rates.recall;
    if (pr == 0.0) {
      c.degenerate = c.degenerate || c.tp == 0;
      c.rates.f1 = 0.0;
    } else {
      c.rates.f1 = 2.0 * c.rates.precision * c.rates.recall / pr;
    }
  }
  return out;
}

Averages aggregate(const std::vector<MetricSet>& records, const std::vector<double>& supports) {
  require(records.size() == supports.size(), ErrorCode::ShapeMismatch,
          "one support value per class is required");
  require(!records.empty(), ErrorCode::EmptyInput, "no per-class records to aggregate");
  double total = 0.0;
  for (double s : supports) {
    require(s >= 0.0, ErrorCode::InvalidArgument, "supports must be non-negative");
    total += s;
  }
  require(total > 0.0, ErrorCode::InvalidArgument, "supports are all zero");
  Averages avg;
  for (double s : supports) avg.weights.push_back(s / total);
  const double n = static_cast<double>(records.size());
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    double macro = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const double v = metric_value(records[i], m);
      macro += v;
      weighted += avg.weights[i] * v;
    }
    set_metric_value(avg.macro, m, macro / n);
    set_metric_value(avg.weighted, m, weighted);
  }
  return avg;
}

MetricsReport evaluate(const ConfusionMatrix& cm, std::optional<std::uint64_t> seed) {
  MetricsReport r;
  r.classes = cm.classes();
  r.per_class = per_class_metrics(cm);
  r.supports = cm.supports();
  r.total = cm.total();
  r.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.total);
  std::vector<MetricSet> sets;
  std::vector<double> supports;
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    sets.push_back(r.per_class[i].rates);
    supports.push_back(static_cast<double>(r.supports[i]));
  }
  r.averages = aggregate(sets, supports);
  r.seed = seed;
  return r;
}

MeanStdErr mean_stderr(const std::vector<double>& values) {
  require(!values.empty(), ErrorCode::EmptyInput, "no values to average");
  MeanStdErr out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

/// Every summary entry of a report, keyed by its table name.
std::vector<std::pair<std::string, double>> summary_entries(const MetricsReport& r) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    out.emplace_back(metric_names()[m], metric_value(r.averages.macro, m));
  }
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    out.emplace_back("W" + metric_names()[m], metric_value(r.averages.weighted, m));
  }
  out.emplace_back("OverallACC", r.overall_accuracy);
  return out;
}

}  // namespace

double summary_metric(const MetricsReport& report, std::string_view name) {
  const std::string key = upper(name);
  for (const auto& [n, v] : summary_entries(report)) {
    if (upper(n) == key) return v;
  }
  fail(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

AggregateReport aggregate_seeds(const std::vector<MetricsReport>& reports) {
  require(!reports.empty(), ErrorCode::EmptyInput, "no reports to aggregate");
  AggregateReport agg;
  agg.runs = reports.size();
  agg.classes = reports.front().classes;
  for (const auto& r : reports) {
    require(r.classes == agg.classes, ErrorCode::InvalidArgument,
            "reports were computed over different class sets");
  }
  const auto names = summary_entries(reports.front());
  for (std::size_t e = 0; e < names.size(); ++e) {
    std::vector<double> values;
    for (const auto& r : reports) values.push_back(summary_entries(r)[e].second);
    agg.summary[names[e].first] = mean_stderr(values);
  }
  agg.per_class.resize(agg.classes.size());
  for (std::size_t c = 0; c < agg.classes.size(); ++c) {
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      std::vector<double> values;
      for (const auto& r : reports) values.push_back(metric_value(r.per_class[c].rates, m));
      agg.per_class[c][metric_names()[m]] = mean_stderr(values);
    }
  }
  return agg;
}

// ---------------------------------------------------------------- Welch

namespace {

/// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  require(a > 0 && b > 0, ErrorCode::InvalidArgument, "incomplete beta needs a, b > 0");
  require(x >= 0 && x <= 1, ErrorCode::InvalidArgument, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  require(df > 0, ErrorCode::InvalidArgument, "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorCode::InvalidArgument,
          "Welch's t-test needs at least two values per sample");
  auto moments = [](const std::vector<double>& s) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(s.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  WelchResult r;
  if (sa + sb == 0.0) {
    // Both samples constant: the statistic is 0 for equal means, infinite otherwise.
    r.df = na + nb - 2.0;
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

// ---------------------------------------------------------------- JSON

namespace {

json metric_set_json(const MetricSet& m, const std::string& prefix) {
  json j = json::object();
  for (std::size_t i = 0; i < kMetricCount; ++i) j[prefix + metric_names()[i]] = metric_value(m, i);
  return j;
}

MetricSet metric_set_from(const json& j, const std::string& prefix) {
  MetricSet m;
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    set_metric_value(m, i, j.at(prefix + metric_names()[i]).get<double>());
  }
  return m;
}

json mse_json(const MeanStdErr& v) {
  json j;
  j["mean"] = v.mean;
  j["stderr"] = v.stderr_ ? json(*v.stderr_) : json(nullptr);
  return j;
}

}  // namespace

json to_json(const MetricsReport& r) {
  json j;
  j["classes"] = r.classes;
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  j["total"] = r.total;
  j["overall_accuracy"] = r.overall_accuracy;
  j["supports"] = r.supports;
  j["weights"] = r.averages.weights;
  j["macro"] = metric_set_json(r.averages.macro, "");
  j["weighted"] = metric_set_json(r.averages.weighted, "W");
  json rows = json::array();
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    const auto& c = r.per_class[i];
    json row = metric_set_json(c.rates, "");
    row["Label"] = i;
    row["class"] = c.label;
    row["TP"] = c.tp;
    row["FP"] = c.fp;
    row["FN"] = c.fn;
    row["TN"] = c.tn;
    row["degenerate"] = c.degenerate;
    rows.push_back(row);
  }
  j["per_class"] = rows;
  return j;
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.classes = j.at("classes").get<std::vector<std::string>>();
  if (!j.at("seed").is_null()) r.seed = j["seed"].get<std::uint64_t>();
  r.total = j.at("total").get<std::uint64_t>();
  r.overall_accuracy = j.at("overall_accuracy").get<double>();
  r.supports = j.at("supports").get<std::vector<std::uint64_t>>();
  r.averages.weights = j.at("weights").get<std::vector<double>>();
  r.averages.macro = metric_set_from(j.at("macro"), "");
  r.averages.weighted = metric_set_from(j.at("weighted"), "W");
  for (const auto& row : j.at("per_class")) {
    ClassMetrics c;
    c.label = row.at("class").get<std::string>();
    c.tp = row.at("TP").get<std::uint64_t>();
    c.fp = row.at("FP").get<std::uint64_t>();
    c.fn = row.at("FN").get<std::uint64_t>();
    c.tn = row.at("TN").get<std::uint64_t>();
    c.degenerate = row.at("degenerate").get<bool>();
    c.rates = metric_set_from(row, "");
    r.per_class.push_back(c);
  }
  return r;
}

json to_json(const AggregateReport& a) {
  json j;
  j["runs"] = a.runs;
  j["classes"] = a.classes;
  json summary = json::object();
  for (const auto& [name, v] : a.summary) summary[name] = mse_json(v);
  j["summary"] = summary;
  json rows = json::array();
  for (std::size_t c = 0; c < a.per_class.size(); ++c) {
    json row = json::object();
    row["Label"] = c;
    row["class"] = a.classes[c];
    for (const auto& [name, v] : a.per_class[c]) row[name] = mse_json(v);
    rows.push_back(row);
  }
  j["per_class"] = rows;
  return j;
}

}  // namespace notedx::metrics
