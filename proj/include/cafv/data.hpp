#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cafv/tensor.hpp"

namespace cafv {

struct Provenance {
  bool synthetic = false;
  std::int64_t source_id = 0;  // id of the source sample (synthetic only)
  int delta = 0;               // context interval used (synthetic only)
};

struct FeatureRecord {
  std::int64_t id = 0;
  int label = 0;  // intensity in m/s, >= 0
  std::vector<double> f;
  Provenance prov;
};

struct Dataset {
  std::vector<FeatureRecord> records;
  std::size_t d_f = 0;

  std::size_t size() const { return records.size(); }
  // Sorted distinct labels.
  std::vector<int> label_set() const;
  std::map<int, std::vector<std::size_t>> indices_by_label() const;
  // Rows of all records with the given label, [n, d_f].
  Tensor features_of(int label) const;
};

// Validates uniform feature width, unique ids, non-negative labels.
Dataset make_dataset(std::vector<FeatureRecord> records, std::size_t d_f);

enum class FileFormat { Csv, Binary };
FileFormat file_format_from_name(const std::string& name);
const char* file_format_name(FileFormat f);

// CSV: header `label,f0,...,f{d-1}` plus `,source_id,delta` when any record
// is synthetic (real rows leave those cells empty). Features are stored at
// 32-bit precision with shortest round-trip formatting.
// Binary: magic "CAFV", u16 version 1, u32 d_f, u64 count; per record
// i32 label, u8 flag, [i64 source_id, i32 delta when synthetic], d_f x f32,
// all little endian. Record ids are assigned sequentially on load.
Dataset load_features(const std::string& path, FileFormat format);
void save_features(const Dataset& dataset, const std::string& path, FileFormat format);

std::map<int, std::size_t> class_histogram(const Dataset& dataset);

// Geometry of the synthetic benchmark: class k (zero-based) has prototype
// relu(mu1 + k * drift); samples are relu(prototype + sigma * gaussian).
struct SyntheticSpec {
  std::size_t num_classes = 9;
  std::size_t d_f = 16;
  double sigma = 0.1;
  std::vector<std::size_t> counts;  // per class, size num_classes
  int first_label = 10;
  std::uint64_t seed = 7;
  Tensor mu1;    // [d_f]; empty => drawn uniform [0.5, 1.5]
  Tensor drift;  // [d_f]; empty => drawn uniform [-0.2, 0.2], ~25% zeroed

  void validate() const;
};

// Default imbalance profile: 500 samples per common class, 6 per rare class
// (5 train + 1 test after the split) at every third label starting from
// first_label + 2.
SyntheticSpec default_benchmark_spec(std::uint64_t seed = 7);
std::vector<int> default_rare_labels(const SyntheticSpec& spec);

struct SyntheticBenchmark {
  Dataset train;
  Dataset test;
  std::vector<Tensor> prototypes;  // per class, [d_f]
  std::vector<int> labels;
  SyntheticSpec spec;  // with mu1/drift resolved
};

// Deterministic in spec.seed. Split: per class of size n, the last
// max(1, n/5) samples go to test (none when n < 2).
SyntheticBenchmark make_synthetic_benchmark(const SyntheticSpec& spec);

}  // namespace cafv
