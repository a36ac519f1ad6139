#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cafv/rng.hpp"
#include "cafv/tensor.hpp"

namespace cafv {

using GradMap = std::map<std::string, Tensor>;

struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t t = 0;
};

// Named parameter registry. Iteration is always in name order, which keeps
// every pass over the store deterministic.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;

  const Tensor& value(const std::string& name) const;
  Tensor& value(const std::string& name);

  bool trainable(const std::string& name) const;
  void set_trainable(const std::string& name, bool trainable);

  std::vector<std::string> names() const;
  std::vector<std::string> trainable_names() const;

  AdamState& adam_state(const std::string& name);  // created lazily
  void reset_adam_state();

  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;

 private:
  struct Entry {
    Tensor value;
    bool trainable = true;
    AdamState adam;
    bool has_adam = false;
  };

  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::map<std::string, Entry> entries_;
};

// Layer-weight initialization: uniform in +-sqrt(6 / (fan_in + fan_out)),
// values drawn in element order from the given stream.
Tensor uniform_fan_init(std::vector<std::size_t> shape, std::size_t fan_in,
                        std::size_t fan_out, RngStream& rng);

}  // namespace cafv
