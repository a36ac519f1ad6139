#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cafv {

// One test-set judgment: (predicted label, true label), both in m/s.
using Prediction = std::pair<int, int>;

struct MetricsReport {
  std::size_t count = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::map<int, double> per_class_f1;    // classes seen in truth or predictions
  std::map<int, double> per_class_mae;   // over samples whose truth is the class
  std::map<int, double> per_class_rmse;
  std::map<int, std::size_t> support;    // truth counts per class
  std::vector<int> excluded_labels;      // predicted-only classes, not in macro
  std::map<std::pair<int, int>, std::size_t> confusion;  // (truth, predicted) -> count
  std::map<long long, std::size_t> error_histogram;      // bin index -> count
  double bin_width = 1.0;
};

// MAE, RMSE, per-class and averaged f1 (0/0 := 0), confusion counts and the
// absolute-error histogram in one pass. Throws on empty input.
MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              double bin_width = 1.0);

// Counts of |predicted - true| in [k*w, (k+1)*w) bins, keyed by k.
std::map<long long, std::size_t> error_histogram(const std::vector<Prediction>& predictions,
                                                 double bin_width);

// Canonical JSON (sorted keys) and a per-class CSV with one row per label:
// label,support,f1,mae,rmse.
std::string metrics_to_json(const MetricsReport& report);
std::string metrics_per_class_csv(const MetricsReport& report);
std::string histogram_csv(const std::map<long long, std::size_t>& hist, double bin_width);

}  // namespace cafv
