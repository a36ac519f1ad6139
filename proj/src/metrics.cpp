#include "cafv/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "cafv/errors.hpp"
#include "json.hpp"

namespace cafv {

std::map<long long, std::size_t> error_histogram(const std::vector<Prediction>& predictions,
                                                 double bin_width) {
  if (predictions.empty()) throw ValidationError("error_histogram: empty prediction list");
  if (!(bin_width > 0.0)) throw ValidationError("error_histogram: bin_width must be positive");
  std::map<long long, std::size_t> out;
  for (const auto& [pred, truth] : predictions) {
    const long long err = std::llabs(static_cast<long long>(pred) - truth);
    const long long bin = static_cast<long long>(std::floor(err / bin_width));
    ++out[bin];
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              double bin_width) {
  if (predictions.empty()) throw ValidationError("compute_metrics: empty prediction list");

  MetricsReport rep;
  rep.count = predictions.size();
  rep.bin_width = bin_width;

  long long abs_sum = 0;
  long long sq_sum = 0;
  std::map<int, long long> class_abs, class_sq;
  for (const auto& [pred, truth] : predictions) {
    const long long d = static_cast<long long>(pred) - truth;
    const long long a = std::llabs(d);
    abs_sum += a;
    sq_sum += d * d;
    ++rep.confusion[{truth, pred}];
    ++rep.support[truth];
    class_abs[truth] += a;
    class_sq[truth] += d * d;
  }
  const double n = static_cast<double>(rep.count);
  rep.mae = static_cast<double>(abs_sum) / n;
  rep.rmse = std::sqrt(static_cast<double>(sq_sum) / n);
  rep.error_histogram = error_histogram(predictions, bin_width);

  std::set<int> all_labels;
  std::map<int, std::size_t> tp, fp, fn;
  for (const auto& [cell, count] : rep.confusion) {
    const auto& [truth, pred] = cell;
    all_labels.insert(truth);
    all_labels.insert(pred);
    if (truth == pred) {
      tp[truth] += count;
    } else {
      fn[truth] += count;
      fp[pred] += count;
    }
  }

  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  double weighted_sum = 0.0;
  for (int label : all_labels) {
    const double tpv = static_cast<double>(tp[label]);
    const double denom = 2.0 * tpv + static_cast<double>(fp[label]) +
                         static_cast<double>(fn[label]);
    const double f1 = denom == 0.0 ? 0.0 : 2.0 * tpv / denom;
    rep.per_class_f1[label] = f1;
    const auto sup = rep.support.find(label);
    if (sup == rep.support.end()) {
      rep.excluded_labels.push_back(label);  // predicted but never true
      continue;
    }
    macro_sum += f1;
    ++macro_n;
    weighted_sum += f1 * static_cast<double>(sup->second);
    rep.per_class_mae[label] =
        static_cast<double>(class_abs[label]) / static_cast<double>(sup->second);
    rep.per_class_rmse[label] =
        std::sqrt(static_cast<double>(class_sq[label]) / static_cast<double>(sup->second));
  }
  rep.macro_f1 = macro_sum / static_cast<double>(macro_n);
  rep.weighted_f1 = weighted_sum / n;
  return rep;
}

std::string metrics_to_json(const MetricsReport& rep) {
  nlohmann::json j;
  j["count"] = rep.count;
  j["mae"] = rep.mae;
  j["rmse"] = rep.rmse;
  j["macro_f1"] = rep.macro_f1;
  j["weighted_f1"] = rep.weighted_f1;
  j["bin_width"] = rep.bin_width;
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [label, f1] : rep.per_class_f1) {
    nlohmann::json entry;
    entry["f1"] = f1;
    const auto sup = rep.support.find(label);
    if (sup != rep.support.end()) {
      entry["support"] = sup->second;
      entry["mae"] = rep.per_class_mae.at(label);
      entry["rmse"] = rep.per_class_rmse.at(label);
    } else {
      entry["support"] = 0;
    }
    per_class[std::to_string(label)] = entry;
  }
  j["per_class"] = per_class;
  j["excluded_labels"] = rep.excluded_labels;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [bin, count] : rep.error_histogram) {
    hist[std::to_string(bin)] = count;
  }
  j["error_histogram"] = hist;
  return j.dump(2) + "\n";
}

namespace {

std::string dtos(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string metrics_per_class_csv(const MetricsReport& rep) {
  std::ostringstream out;
  out << "label,support,f1,mae,rmse\n";
  for (const auto& [label, f1] : rep.per_class_f1) {
    const auto sup = rep.support.find(label);
    out << label << ',';
    if (sup == rep.support.end()) {
      out << 0 << ',' << dtos(f1) << ",,";
    } else {
      out << sup->second << ',' << dtos(f1) << ',' << dtos(rep.per_class_mae.at(label))
          << ',' << dtos(rep.per_class_rmse.at(label));
    }
    out << "\n";
  }
  return out.str();
}

std::string histogram_csv(const std::map<long long, std::size_t>& hist, double bin_width) {
  std::ostringstream out;
  out << "bin_lower,count\n";
  for (const auto& [bin, count] : hist) {
    out << dtos(static_cast<double>(bin) * bin_width) << ',' << count << "\n";
  }
  return out.str();
}

}  // namespace cafv
