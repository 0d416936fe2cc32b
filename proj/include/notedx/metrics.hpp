#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace notedx::metrics {

/// K x K counts, rows are gold classes and columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> classes);

  void add(std::size_t gold, std::size_t pred, std::uint64_t n = 1);
  std::uint64_t at(std::size_t gold, std::size_t pred) const { return counts_[gold * k_ + pred]; }
  std::size_t classes_count() const noexcept { return k_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  /// Gold count per class.
  std::vector<std::uint64_t> supports() const;

 private:
  std::vector<std::string> classes_;
  std::size_t k_ = 0;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                          const std::vector<std::string>& classes);
ConfusionMatrix confusion(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                          const std::vector<std::string>& classes);

/// The seven reported rates, in table column order.
struct MetricSet {
  double acc = 0, tnr = 0, fpr = 0, fnr = 0, precision = 0, recall = 0, f1 = 0;
};

inline constexpr std::size_t kMetricCount = 7;
/// Column names: ACC TNR FPR FNR Precision Recall F1.
const std::vector<std::string>& metric_names();
double metric_value(const MetricSet& m, std::size_t index);
void set_metric_value(MetricSet& m, std::size_t index, double value);

struct ClassMetrics {
  std::string label;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  MetricSet rates;
  /// True when some rate had a 0/0 denominator and was set to 0.
  bool degenerate = false;
};

/// One-vs-rest metrics for each class.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

struct Averages {
  MetricSet macro;
  MetricSet weighted;
  std::vector<double> weights;
};

/// Macro = plain mean over classes; weighted = sum_i w_i m_i with
/// w_i = support_i / sum(support).
Averages aggregate(const std::vector<MetricSet>& records, const std::vector<double>& supports);

struct MetricsReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  std::vector<std::uint64_t> supports;
  Averages averages;
  double overall_accuracy = 0;
  std::uint64_t total = 0;
  std::optional<std::uint64_t> seed;
};

MetricsReport evaluate(const ConfusionMatrix& cm, std::optional<std::uint64_t> seed = {});

struct MeanStdErr {
  double mean = 0;
  std::optional<double> stderr_;
};

struct AggregateReport {
  std::size_t runs = 0;
  std::vector<std::string> classes;
  /// Keyed by table name: ACC..F1 for macro, WACC..WF1 for weighted, plus OverallACC.
  std::map<std::string, MeanStdErr> summary;
  /// Per class, keyed by ACC..F1.
  std::vector<std::map<std::string, MeanStdErr>> per_class;
};

MeanStdErr mean_stderr(const std::vector<double>& values);
AggregateReport aggregate_seeds(const std::vector<MetricsReport>& reports);

/// Lookup by table name, case-insensitive (e.g. "wf1", "ACC").
double summary_metric(const MetricsReport& report, std::string_view name);

struct WelchResult {
  double t = 0;
  double df = 0;
  double p = 1;
};

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregateReport& report);

}  // namespace notedx::metrics
