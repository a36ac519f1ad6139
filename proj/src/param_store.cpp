#include "cafv/param_store.hpp"

#include <cmath>
#include <utility>

#include "cafv/errors.hpp"

namespace cafv {

void ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (name.empty()) throw ValidationError("parameter name must be non-empty");
  if (entries_.count(name) != 0) throw ValidationError("duplicate parameter: " + name);
  Entry e;
  e.value = std::move(value);
  e.trainable = trainable;
  entries_.emplace(name, std::move(e));
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::value(const std::string& name) const { return entry(name).value; }

Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }

bool ParamStore::trainable(const std::string& name) const { return entry(name).trainable; }

void ParamStore::set_trainable(const std::string& name, bool trainable) {
  entry(name).trainable = trainable;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) {
    if (e.trainable) out.push_back(name);
  }
  return out;
}

AdamState& ParamStore::adam_state(const std::string& name) {
  Entry& e = entry(name);
  if (!e.has_adam) {
    e.adam.m = Tensor::zeros(e.value.shape);
    e.adam.v = Tensor::zeros(e.value.shape);
    e.adam.t = 0;
    e.has_adam = true;
  }
  return e.adam;
}

void ParamStore::reset_adam_state() {
  for (auto& [name, e] : entries_) e.has_adam = false;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.numel();
  return n;
}

Tensor uniform_fan_init(std::vector<std::size_t> shape, std::size_t fan_in,
                        std::size_t fan_out, RngStream& rng) {
  if (fan_in + fan_out == 0) throw ValidationError("uniform_fan_init with zero fans");
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace cafv
