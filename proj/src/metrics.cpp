#include "amclip/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "amclip/errors.hpp"

namespace amclip {

namespace {

std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw EvaluationError("scores and labels differ in length");
  if (scores.empty()) throw EvaluationError("no clips to evaluate");
}

}  // namespace

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; });
  if (positives == 0) throw EvaluationError("class has no positive clips");
  std::vector<PrPoint> points;
  points.reserve(scores.size());
  long tp = 0;
  std::size_t n = 0;
  for (std::size_t idx : ranking(scores)) {
    ++n;
    if (labels[idx] != 0) ++tp;
    points.push_back({static_cast<double>(tp) / static_cast<double>(positives),
                      static_cast<double>(tp) / static_cast<double>(n)});
  }
  return points;
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const PrPoint& p : pr_curve(scores, labels)) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

int count_ties(std::span<const double> scores) {
  const auto order = ranking(scores);
  int ties = 0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (scores[order[i]] == scores[order[i - 1]]) ++ties;
  }
  return ties;
}

MeanAP mean_ap(std::span<const std::optional<double>> aps) {
  MeanAP out;
  double total = 0.0;
  for (std::size_t i = 0; i < aps.size(); ++i) {
    if (aps[i]) {
      total += *aps[i];
      ++out.valid_classes;
    } else {
      out.flagged.push_back(static_cast<int>(i));
    }
  }
  if (out.valid_classes == 0) throw EvaluationError("mAP undefined: no class has a positive clip");
  out.value = total / out.valid_classes;
  return out;
}

MetricsReport evaluate(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& labels,
                       const std::vector<std::string>& class_names) {
  if (scores.size() != labels.size()) throw EvaluationError("score and label clip counts differ");
  if (scores.empty()) throw EvaluationError("no clips to evaluate");
  const std::size_t c = class_names.size();
  MetricsReport report;
  std::vector<std::optional<double>> aps;
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != c || labels[i].size() != c) throw EvaluationError("class count mismatch");
      s.push_back(scores[i][k]);
      y.push_back(labels[i][k]);
    }
    ClassAP entry;
    entry.name = class_names[k];
    entry.positives = static_cast<int>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
    entry.ties = count_ties(s);
    if (entry.positives > 0) entry.ap = average_precision(s, y);
    aps.push_back(entry.ap);
    report.classes.push_back(std::move(entry));
  }
  report.summary = mean_ap(aps);
  return report;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "class,AP,positives,ties\n";
  out << std::setprecision(10);
  for (const auto& c : report.classes) {
    out << '"' << c.name << "\",";
    if (c.ap) {
      out << *c.ap;
    } else {
      out << "NA";
    }
    out << ',' << c.positives << ',' << c.ties << '\n';
  }
  out << "mAP," << report.summary.value << ",,\n";
}

}  // namespace amclip
