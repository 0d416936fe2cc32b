#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "notedx/error.hpp"
#include "notedx/metrics.hpp"
#include "notedx/random.hpp"

using namespace notedx;
using namespace notedx::metrics;

namespace {

const std::vector<std::string> kThree = {"a", "b", "c"};

// Welch statistic and two-sided p straight from the textbook formulas, with
// the tail probability from Boost.Math.
WelchResult welch_reference(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
  boost::math::students_t dist(r.df);
  r.p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace

TEST_CASE("confusion matrix") {
  const auto perfect = confusion(std::vector<std::string>{"a", "b", "c", "a"},
                                 std::vector<std::string>{"a", "b", "c", "a"}, kThree);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK((perfect.at(i, j) != 0) == (i == j));

  const auto zero = confusion(std::vector<std::size_t>{0, 1, 2, 1}, std::vector<std::size_t>{0, 0, 0, 0}, kThree);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(zero.at(i, 1) == 0);
    CHECK(zero.at(i, 2) == 0);
  }
  CHECK(zero.at(1, 0) == 2);

  // Six items counted by hand: gold a a b b c c, pred a b b c c a.
  const auto hand = confusion(std::vector<std::string>{"a", "a", "b", "b", "c", "c"},
                              std::vector<std::string>{"a", "b", "b", "c", "c", "a"}, kThree);
  const std::vector<std::uint64_t> want = {1, 1, 0, 0, 1, 1, 1, 0, 1};
  for (std::size_t i = 0; i < 9; ++i) CHECK(hand.at(i / 3, i % 3) == want[i]);
  CHECK(hand.total() == 6);
  CHECK(hand.trace() == 3);

  CHECK_THROWS_AS(confusion(std::vector<std::string>{"z"}, std::vector<std::string>{"a"}, kThree), Error);
}

TEST_CASE("per-class rates") {
  ConfusionMatrix diag(kThree);
  for (std::size_t k = 0; k < 3; ++k) diag.add(k, k, 4);
  for (const auto& c : per_class_metrics(diag)) {
    CHECK(c.rates.precision == 1.0);
    CHECK(c.rates.recall == 1.0);
    CHECK(c.rates.f1 == 1.0);
    CHECK(c.rates.fpr == 0.0);
    CHECK(c.rates.fnr == 0.0);
  }

  ConfusionMatrix absent(kThree);
  absent.add(0, 0, 3);
  absent.add(1, 1, 2);
  const auto ghost = per_class_metrics(absent)[2];
  CHECK(ghost.degenerate);
  CHECK(ghost.rates.precision == 0.0);
  CHECK(ghost.rates.recall == 0.0);

  // TP=3, FP=1, FN=2, TN=4 for class "p".
  ConfusionMatrix two({"p", "n"});
  two.add(0, 0, 3);
  two.add(1, 0, 1);
  two.add(0, 1, 2);
  two.add(1, 1, 4);
  const auto p = per_class_metrics(two)[0];
  CHECK(p.tp == 3);
  CHECK(p.tn == 4);
  CHECK(p.rates.precision == 0.75);
  CHECK(p.rates.recall == 0.6);
  CHECK(p.rates.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-15));
  CHECK(p.rates.acc == 0.7);
  CHECK(p.rates.tnr == 0.8);
}

TEST_CASE("reference table arithmetic") {
  const std::vector<double> f1 = {84.37, 84.39, 80.43, 74.79, 90.95, 78.85, 61.29, 76.50, 65.04, 87.88};
  const std::vector<double> support = {3193, 1955, 1634, 1229, 1158, 1047, 934, 927, 559, 504};
  std::vector<MetricSet> records(10);
  for (std::size_t i = 0; i < 10; ++i) records[i].f1 = f1[i];
  const auto avg = aggregate(records, support);
  CHECK(std::abs(avg.macro.f1 - 78.45) < 0.01);
  CHECK(std::abs(avg.weighted.f1 - 80.48) < 1.0);
  CHECK(avg.weighted.f1 == doctest::Approx(80.2).epsilon(0.002));

  const auto uniform = aggregate(records, std::vector<double>(10, 7.0));
  CHECK(uniform.weighted.f1 == doctest::Approx(uniform.macro.f1).epsilon(1e-15));
}

TEST_CASE("evaluate and aggregate over seeds") {
  const auto cm = confusion(std::vector<std::string>{"a", "a", "b", "c"},
                            std::vector<std::string>{"a", "b", "b", "c"}, kThree);
  const auto r = evaluate(cm, 3);
  CHECK(r.overall_accuracy == 0.75);
  CHECK(r.seed == std::optional<std::uint64_t>(3));
  CHECK(summary_metric(r, "wf1") == r.averages.weighted.f1);
  CHECK(summary_metric(r, "OverallACC") == 0.75);

  const auto same = aggregate_seeds({r, r, r});
  for (const auto& [name, v] : same.summary) {
    CAPTURE(name);
    REQUIRE(v.stderr_.has_value());
    CHECK(*v.stderr_ == 0.0);
  }
  CHECK_FALSE(aggregate_seeds({r}).summary.at("WF1").stderr_.has_value());

  const auto ms = mean_stderr({1, 2, 3, 4, 5});
  CHECK(ms.mean == 3.0);
  CHECK(*ms.stderr_ == doctest::Approx(std::sqrt(2.5) / std::sqrt(5.0)).epsilon(1e-15));

  const auto back = report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("Welch t-test") {
  const std::vector<double> same = {1, 2, 3};
  const auto z = welch_t_test(same, same);
  CHECK(z.t == 0.0);
  CHECK(z.p == 1.0);

  const auto far = welch_t_test({1, 2, 3}, {101, 102, 103.0001});
  CHECK(far.p < 1e-4);

  const std::vector<double> a = {27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1,
                                 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4};
  const std::vector<double> b = {27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0,
                                 24.8, 20.2, 21.9, 22.1, 22.9, 30.3, 23.9};
  const auto w = welch_t_test(a, b);
  // Frozen output of scipy.stats.ttest_ind(a, b, equal_var=False).
  CHECK(w.t == doctest::Approx(-2.828089550357121).epsilon(1e-12));
  CHECK(w.df == doctest::Approx(27.82013018489081).epsilon(1e-12));
  CHECK(w.p == doctest::Approx(0.008583383908650493).epsilon(1e-9));

  Rng rng(12);
  for (int n = 0; n < 200; ++n) {
    std::vector<double> x(2 + uniform_index(rng, 8)), y(2 + uniform_index(rng, 8));
    const double shift = uniform(rng, -2, 2), spread = uniform(rng, 0.1, 3);
    for (auto& v : x) v = uniform(rng, -1, 1);
    for (auto& v : y) v = shift + spread * uniform(rng, -1, 1);
    const auto got = welch_t_test(x, y);
    const auto want = welch_reference(x, y);
    CHECK(got.t == doctest::Approx(want.t).epsilon(1e-12));
    CHECK(got.df == doctest::Approx(want.df).epsilon(1e-12));
    CHECK(std::abs(got.p - want.p) < 1e-10);
  }
}

TEST_CASE("incomplete beta against Boost") {
  Rng rng(13);
  for (int n = 0; n < 300; ++n) {
    const double a = uniform(rng, 0.1, 40), b = uniform(rng, 0.1, 40), x = uniform01(rng);
    CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-12);
  }
  CHECK(incomplete_beta(2, 3, 0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1) == 1.0);
}

TEST_CASE("metric identities on random matrices") {
  Rng rng(14);
  for (int n = 0; n < 500; ++n) {
    const std::size_t k = 2 + uniform_index(rng, 6);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
    ConfusionMatrix cm(names);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) cm.add(i, j, uniform_index(rng, 20));
    if (cm.total() == 0) continue;
    const auto r = evaluate(cm);
    CHECK(r.overall_accuracy == static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
    for (const auto& c : r.per_class) {
      if (c.fp + c.tn) CHECK(c.rates.fpr + c.rates.tnr == doctest::Approx(1.0).epsilon(1e-15));
      if (c.tp + c.fn) CHECK(c.rates.fnr + c.rates.recall == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}
