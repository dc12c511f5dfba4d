#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "amclip/errors.hpp"
#include "amclip/metrics.hpp"
#include "oracles.hpp"

using namespace amclip;

TEST_CASE("average precision examples") {
  const std::vector<double> s = {0.9, 0.8, 0.1};
  const std::vector<int> y = {1, 0, 1};
  CHECK(average_precision(s, y) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(oracle::brute_force_ap(s, y) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  CHECK(average_precision(std::vector<double>{0.9, 0.7, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(average_precision(std::vector<double>{0.1, 0.9, 0.5}, std::vector<int>{1, 1, 1}) == 1.0);
}

TEST_CASE("average precision errors") {
  CHECK_THROWS_AS(average_precision(std::vector<double>{0.3, 0.2}, std::vector<int>{0, 0}), EvaluationError);
  CHECK_THROWS_AS(average_precision(std::vector<double>{}, std::vector<int>{}), EvaluationError);
  CHECK_THROWS_AS(average_precision(std::vector<double>{0.3}, std::vector<int>{1, 0}), EvaluationError);
}

TEST_CASE("ties rank by ascending clip order") {
  // Positive second among equal scores ranks below the negative.
  CHECK(average_precision(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == doctest::Approx(0.5));
  CHECK(average_precision(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}) == 1.0);
  CHECK(count_ties(std::vector<double>{0.5, 0.5, 0.2, 0.5}) == 2);
}

TEST_CASE("mean_ap") {
  const std::vector<std::optional<double>> two = {1.0, 0.5};
  CHECK(mean_ap(two).value == doctest::Approx(0.75));
  const std::vector<std::optional<double>> one = {0.4};
  CHECK(mean_ap(one).value == doctest::Approx(0.4));
  const std::vector<std::optional<double>> flagged = {std::nullopt, 0.6};
  const auto m = mean_ap(flagged);
  CHECK(m.value == doctest::Approx(0.6));
  CHECK(m.flagged == std::vector<int>{0});
  const std::vector<std::optional<double>> none = {std::nullopt};
  CHECK_THROWS_AS(mean_ap(none), EvaluationError);
}

TEST_CASE("pr_curve examples") {
  const auto perfect = pr_curve(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<int>{1, 1, 0, 0});
  REQUIRE(perfect.size() == 4);
  const double expected[4][2] = {{0.5, 1.0}, {1.0, 1.0}, {1.0, 2.0 / 3.0}, {1.0, 0.5}};
  for (int i = 0; i < 4; ++i) {
    CHECK(perfect[i].recall == doctest::Approx(expected[i][0]));
    CHECK(perfect[i].precision == doctest::Approx(expected[i][1]));
  }
  const auto inverted = pr_curve(std::vector<double>{0.2, 0.9}, std::vector<int>{1, 0});
  REQUIRE(inverted.size() == 2);
  CHECK(inverted[0].recall == 0.0);
  CHECK(inverted[0].precision == 0.0);
  CHECK(inverted[1].recall == 1.0);
  CHECK(inverted[1].precision == 0.5);
  CHECK_THROWS_AS(pr_curve(std::vector<double>{}, std::vector<int>{}), EvaluationError);
}

TEST_CASE("AP matches the brute-force oracle and is rank-invariant") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    std::vector<double> s(k);
    std::vector<int> y(k);
    int pos = 0;
    for (int i = 0; i < k; ++i) {
      s[i] = static_cast<double>(rng() % 5) / 4.0;  // coarse grid forces ties
      y[i] = static_cast<int>(rng() % 2);
      pos += y[i];
    }
    if (pos == 0) y[0] = 1;
    const double ap = average_precision(s, y);
    CHECK(std::abs(ap - oracle::brute_force_ap(s, y)) <= 1e-12);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    std::vector<double> t(k);
    for (int i = 0; i < k; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(average_precision(t, y) == ap);
  }
}

TEST_CASE("evaluate and CSV report") {
  const std::vector<std::vector<double>> scores = {{0.9, 0.1, 0.3}, {0.2, 0.8, 0.4}, {0.7, 0.3, 0.2}};
  const std::vector<std::vector<int>> labels = {{1, 0, 0}, {0, 1, 0}, {1, 0, 0}};
  const auto report = evaluate(scores, labels, {"a", "b", "c"});
  REQUIRE(report.classes.size() == 3);
  CHECK(*report.classes[0].ap == 1.0);
  CHECK(*report.classes[1].ap == 1.0);
  CHECK_FALSE(report.classes[2].ap.has_value());
  CHECK(report.summary.value == 1.0);
  CHECK(report.summary.flagged == std::vector<int>{2});
  std::ostringstream csv;
  write_metrics_csv(csv, report);
  CHECK(csv.str() == "class,AP,positives,ties\n\"a\",1,2,0\n\"b\",1,1,0\n\"c\",NA,0,0\nmAP,1,,\n");
}
