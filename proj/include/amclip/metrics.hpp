#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace amclip {

/// Average precision of one class by a rank-threshold sweep without interpolation:
/// AP = sum_n (R_n - R_{n-1}) * P_n over descending scores, ties ranked by ascending clip index.
/// Throws EvaluationError when there are no clips or no positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct PrPoint {
  double recall;
  double precision;
};

/// (recall, precision) after each rank, same ordering rule as average_precision.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

/// Number of adjacent equal scores in the ranked order.
int count_ties(std::span<const double> scores);

struct ClassAP {
  std::string name;
  std::optional<double> ap;  // empty when the class has no positives
  int positives = 0;
  int ties = 0;
};

struct MeanAP {
  double value = 0.0;
  int valid_classes = 0;
  std::vector<int> flagged;  // indices excluded for lack of positives
};

/// Macro average over classes that have an AP. Throws EvaluationError if none do.
MeanAP mean_ap(std::span<const std::optional<double>> aps);

struct MetricsReport {
  std::vector<ClassAP> classes;
  MeanAP summary;
};

/// `scores` and `labels` are clip-major: [clip][class].
MetricsReport evaluate(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& labels,
                       const std::vector<std::string>& class_names);

/// CSV: header "class,AP,positives,ties", one row per class (AP "NA" when flagged), then "mAP,<value>,,".
void write_metrics_csv(std::ostream& out, const MetricsReport& report);

}  // namespace amclip
