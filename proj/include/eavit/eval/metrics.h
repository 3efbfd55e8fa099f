#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace eavit::eval {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::size_t> counts;  // row-major [classes x classes]

  std::size_t classes() const { return class_names.size(); }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes() + predicted]; }
  std::size_t total() const;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t column_sum(std::size_t predicted) const;

  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws ShapeError for unequal lengths or empty input and std::out_of_range
// for an index outside the class list.
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::vector<std::string> class_names);

// trace / total as a fraction; std::invalid_argument when total is zero.
double accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  // Set when the corresponding denominator is zero; the value is then 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

// Harmonic mean 2PR / (P + R), 0 when P + R is 0.
double f1_score(double precision, double recall);

// One-vs-rest counts for class k; std::out_of_range for an invalid k.
ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t k);

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0;
  // Unweighted means over classes; undefined entries count as 0.
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
};

MetricsReport report(const ConfusionMatrix& cm);

// class,precision,recall,f1 with one row per class then a "macro" row.
// Values are written with enough digits to read back exactly.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
// Restores names, per-class precision/recall/f1 and macro averages.
MetricsReport read_metrics_csv(const std::filesystem::path& path);

// Header row of class names, then one row of integer counts per true class.
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

// Row-normalised heatmap with counts printed in each cell.
void write_confusion_svg(const std::filesystem::path& path, const ConfusionMatrix& cm);

struct Series {
  std::string name;
  std::vector<double> values;  // one per epoch; non-finite values are skipped
};

// One panel per entry of panels, each plotting its series against epoch.
void write_curves_svg(const std::filesystem::path& path, const std::vector<std::string>& titles,
                      const std::vector<std::vector<Series>>& panels);

struct TrackPrediction {
  std::string track_id;
  int label = 0;
  int predicted = 0;
  std::size_t segments = 0;
};

// Majority vote of per-segment argmax within each track (first-appearance
// order). Ties go to the class with the larger summed probability, then the
// lower index. The track label is that of its first segment.
std::vector<TrackPrediction> majority_vote(const std::vector<std::vector<double>>& probabilities,
                                           std::span<const int> labels, std::span<const std::string> track_ids);

// Winning class of one track's segment probabilities under the same rule.
int vote(const std::vector<std::vector<double>>& probabilities);

}  // namespace eavit::eval
