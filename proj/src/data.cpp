#include "cafv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "cafv/errors.hpp"
#include "cafv/rng.hpp"

namespace cafv {

std::vector<int> Dataset::label_set() const {
  std::set<int> s;
  for (const FeatureRecord& r : records) s.insert(r.label);
  return std::vector<int>(s.begin(), s.end());
}

std::map<int, std::vector<std::size_t>> Dataset::indices_by_label() const {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[records[i].label].push_back(i);
  }
  return out;
}

Tensor Dataset::features_of(int label) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == label) idx.push_back(i);
  }
  Tensor out = Tensor::zeros({idx.size(), d_f});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < d_f; ++j) out.at(i, j) = records[idx[i]].f[j];
  }
  return out;
}

Dataset make_dataset(std::vector<FeatureRecord> records, std::size_t d_f) {
  std::set<std::int64_t> ids;
  for (const FeatureRecord& r : records) {
    if (r.f.size() != d_f) {
      throw ValidationError("record " + std::to_string(r.id) + " has " +
                            std::to_string(r.f.size()) + " features, expected " +
                            std::to_string(d_f));
    }
    if (r.label < 0) {
      throw ValidationError("record " + std::to_string(r.id) + " has negative label");
    }
    if (!ids.insert(r.id).second) {
      throw ValidationError("duplicate record id " + std::to_string(r.id));
    }
  }
  Dataset d;
  d.records = std::move(records);
  d.d_f = d_f;
  return d;
}

FileFormat file_format_from_name(const std::string& name) {
  if (name == "csv") return FileFormat::Csv;
  if (name == "binary") return FileFormat::Binary;
  throw ValidationError("unknown file format '" + name + "' (expected csv or binary)");
}

const char* file_format_name(FileFormat f) {
  return f == FileFormat::Csv ? "csv" : "binary";
}

namespace {

// Shortest decimal string that parses back to the same 32-bit float.
std::string float_to_string(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

float parse_float_cell(const std::string& cell, std::size_t line_no) {
  float v = 0.0f;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ValidationError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                          cell + "'");
  }
  return v;
}

long long parse_int_cell(const std::string& cell, std::size_t line_no) {
  long long v = 0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ValidationError("line " + std::to_string(line_no) + ": non-integer cell '" +
                          cell + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  bool with_provenance = false;
  std::size_t d_f = 0;
  if (header.size() >= 3 && header[header.size() - 2] == "source_id" &&
      header.back() == "delta") {
    with_provenance = true;
    d_f = header.size() - 3;
  } else {
    if (header.size() < 2) throw ValidationError(path + ": CSV header has no feature columns");
    d_f = header.size() - 1;
  }
  if (header[0] != "label") {
    throw ValidationError(path + ": CSV header must start with 'label'");
  }
  for (std::size_t j = 0; j < d_f; ++j) {
    if (header[1 + j] != "f" + std::to_string(j)) {
      throw ValidationError(path + ": CSV header feature column " + std::to_string(j) +
                            " must be named f" + std::to_string(j));
    }
  }

  std::vector<FeatureRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    const std::size_t expected = 1 + d_f + (with_provenance ? 2 : 0);
    if (cells.size() != expected) {
      throw ValidationError(path + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(expected));
    }
    FeatureRecord r;
    r.id = static_cast<std::int64_t>(records.size());
    const long long label = parse_int_cell(cells[0], line_no);
    if (label < 0) {
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            " has negative label");
    }
    r.label = static_cast<int>(label);
    r.f.resize(d_f);
    for (std::size_t j = 0; j < d_f; ++j) {
      r.f[j] = static_cast<double>(parse_float_cell(cells[1 + j], line_no));
    }
    if (with_provenance) {
      const std::string& sid = cells[1 + d_f];
      const std::string& delta = cells[2 + d_f];
      if (sid.empty() != delta.empty()) {
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              " has a half-filled provenance pair");
      }
      if (!sid.empty()) {
        r.prov.synthetic = true;
        r.prov.source_id = parse_int_cell(sid, line_no);
        r.prov.delta = static_cast<int>(parse_int_cell(delta, line_no));
      }
    }
    records.push_back(std::move(r));
  }
  return make_dataset(std::move(records), d_f);
}

void save_csv(const Dataset& dataset, const std::string& path) {
  bool with_provenance = false;
  for (const FeatureRecord& r : dataset.records) {
    if (r.prov.synthetic) with_provenance = true;
  }
  std::ofstream out(path, std::ios::binary);  // binary: exact LF endings
  if (!out) throw IoError("cannot write " + path);
  out << "label";
  for (std::size_t j = 0; j < dataset.d_f; ++j) out << ",f" << j;
  if (with_provenance) out << ",source_id,delta";
  out << "\n";
  for (const FeatureRecord& r : dataset.records) {
    out << r.label;
    for (std::size_t j = 0; j < dataset.d_f; ++j) {
      out << ',' << float_to_string(static_cast<float>(r.f[j]));
    }
    if (with_provenance) {
      if (r.prov.synthetic) {
        out << ',' << r.prov.source_id << ',' << r.prov.delta;
      } else {
        out << ",,";
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_le(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  // Host is little-endian on every supported target; keep the copy explicit.
  put_bytes(buf, bytes, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw ValidationError(path_ + ": truncated file, needed " +
                            std::to_string(pos_ + n) + " bytes but only " +
                            std::to_string(data_.size()) + " are present");
    }
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  const char* cursor() const { return data_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'C', 'A', 'F', 'V'};
constexpr std::uint16_t kVersion = 1;

void save_binary(const Dataset& dataset, const std::string& path) {
  std::string buf;
  put_bytes(buf, kMagic, 4);
  put_le<std::uint16_t>(buf, kVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(dataset.d_f));
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(dataset.records.size()));
  for (const FeatureRecord& r : dataset.records) {
    put_le<std::int32_t>(buf, r.label);
    put_le<std::uint8_t>(buf, r.prov.synthetic ? 1 : 0);
    if (r.prov.synthetic) {
      put_le<std::int64_t>(buf, r.prov.source_id);
      put_le<std::int32_t>(buf, r.prov.delta);
    }
    for (double v : r.f) put_le<float>(buf, static_cast<float>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ByteReader r(ss.str(), path);

  r.need(4);
  if (std::memcmp(r.cursor(), kMagic, 4) != 0) {
    throw ValidationError(path + ": bad magic bytes");
  }
  r.skip(4);
  const auto version = r.get_le<std::uint16_t>();
  if (version != kVersion) {
    throw ValidationError(path + ": unsupported format version " + std::to_string(version));
  }
  const auto d_f = r.get_le<std::uint32_t>();
  const auto count = r.get_le<std::uint64_t>();

  std::vector<FeatureRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord rec;
    rec.id = static_cast<std::int64_t>(i);
    rec.label = r.get_le<std::int32_t>();
    const auto flag = r.get_le<std::uint8_t>();
    if (flag > 1) {
      throw ValidationError(path + ": record " + std::to_string(i) +
                            " has invalid provenance flag " + std::to_string(flag));
    }
    if (flag == 1) {
      rec.prov.synthetic = true;
      rec.prov.source_id = r.get_le<std::int64_t>();
      rec.prov.delta = r.get_le<std::int32_t>();
    }
    rec.f.resize(d_f);
    for (std::uint32_t j = 0; j < d_f; ++j) {
      rec.f[j] = static_cast<double>(r.get_le<float>());
    }
    records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw ValidationError(path + ": " + std::to_string(r.remaining()) +
                          " trailing bytes after the last record");
  }
  return make_dataset(std::move(records), d_f);
}

}  // namespace

Dataset load_features(const std::string& path, FileFormat format) {
  return format == FileFormat::Csv ? load_csv(path) : load_binary(path);
}

void save_features(const Dataset& dataset, const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv) {
    save_csv(dataset, path);
  } else {
    save_binary(dataset, path);
  }
}

std::map<int, std::size_t> class_histogram(const Dataset& dataset) {
  std::map<int, std::size_t> out;
  for (const FeatureRecord& r : dataset.records) ++out[r.label];
  return out;
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ValidationError("synthetic spec: need at least 2 classes");
  if (d_f == 0) throw ValidationError("synthetic spec: d_f must be positive");
  if (!(sigma > 0.0)) throw ValidationError("synthetic spec: sigma must be positive");
  if (first_label < 0) throw ValidationError("synthetic spec: first_label must be >= 0");
  if (counts.size() != num_classes) {
    throw ValidationError("synthetic spec: counts has " + std::to_string(counts.size()) +
                          " entries, expected " + std::to_string(num_classes));
  }
  for (std::size_t c : counts) {
    if (c == 0) throw ValidationError("synthetic spec: every class needs at least 1 sample");
  }
  if (!mu1.data.empty() && mu1.numel() != d_f) {
    throw ValidationError("synthetic spec: mu1 must have d_f entries");
  }
  if (!drift.data.empty() && drift.numel() != d_f) {
    throw ValidationError("synthetic spec: drift must have d_f entries");
  }
}

SyntheticSpec default_benchmark_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.counts.assign(spec.num_classes, 500);
  for (std::size_t k = 2; k < spec.num_classes; k += 3) spec.counts[k] = 6;
  return spec;
}

std::vector<int> default_rare_labels(const SyntheticSpec& spec) {
  std::vector<int> out;
  for (std::size_t k = 2; k < spec.num_classes; k += 3) {
    out.push_back(spec.first_label + static_cast<int>(k));
  }
  return out;
}

SyntheticBenchmark make_synthetic_benchmark(const SyntheticSpec& spec_in) {
  spec_in.validate();
  SyntheticSpec spec = spec_in;

  if (spec.mu1.data.empty() || spec.drift.data.empty()) {
    RngStream geom(spec.seed, "geometry");
    if (spec.mu1.data.empty()) {
      spec.mu1 = Tensor::zeros({spec.d_f});
      for (double& v : spec.mu1.data) v = geom.uniform(0.5, 1.5);
    }
    if (spec.drift.data.empty()) {
      spec.drift = Tensor::zeros({spec.d_f});
      for (double& v : spec.drift.data) {
        const double value = geom.uniform(-0.2, 0.2);
        v = geom.uniform01() < 0.25 ? 0.0 : value;
      }
    }
  }

  SyntheticBenchmark bench;
  bench.spec = spec;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    Tensor proto = Tensor::zeros({spec.d_f});
    for (std::size_t j = 0; j < spec.d_f; ++j) {
      const double pre = spec.mu1.data[j] + static_cast<double>(k) * spec.drift.data[j];
      proto.data[j] = pre > 0.0 ? pre : 0.0;
    }
    bench.prototypes.push_back(std::move(proto));
    bench.labels.push_back(spec.first_label + static_cast<int>(k));
  }

  RngStream data(spec.seed, "data");
  std::vector<FeatureRecord> train, test;
  std::int64_t next_id = 0;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    const std::size_t n = spec.counts[k];
    std::vector<FeatureRecord> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRecord r;
      r.id = next_id++;
      r.label = bench.labels[k];
      r.f.resize(spec.d_f);
      for (std::size_t j = 0; j < spec.d_f; ++j) {
        const double v = bench.prototypes[k].data[j] + spec.sigma * data.gaussian();
        r.f[j] = v > 0.0 ? v : 0.0;
      }
      samples.push_back(std::move(r));
    }
    const std::size_t n_test = n < 2 ? 0 : std::max<std::size_t>(1, n / 5);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n - n_test) {
        train.push_back(std::move(samples[i]));
      } else {
        test.push_back(std::move(samples[i]));
      }
    }
  }
  bench.train = make_dataset(std::move(train), spec.d_f);
  bench.test = make_dataset(std::move(test), spec.d_f);
  return bench;
}

}  // namespace cafv
