#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "cafv/tensor.hpp"

namespace cafv {

std::uint64_t fnv1a64(const std::string& s);
std::uint64_t splitmix64(std::uint64_t x);

// Named deterministic random stream. A stream is fully determined by
// (seed, label): the label is hashed into the engine seed so independent
// streams ("data", "noise", "alpha", "init", ...) never share state.
//
// The engine is mt19937_64, whose output sequence is specified by the
// standard, and all distribution transforms are implemented here rather
// than taken from <random>, so integer and uniform draws are identical
// across standard libraries. Gaussian draws go through libm (log/cos) and
// are deterministic per platform.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64+boxmuller";

  RngStream(std::uint64_t seed, std::string label);

  std::uint64_t next_u64();
  double uniform01();       // [0, 1)
  double uniform01_open();  // (0, 1]
  double uniform(double lo, double hi);
  double gaussian();        // Box-Muller, two uniforms per draw, no cached spare
  std::size_t index(std::size_t n);  // uniform in [0, n), rejection sampling

  Tensor gaussian_tensor(std::vector<std::size_t> shape);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  // Engine state as decimal words (the standard stream format); exact restore.
  std::string serialize_state() const;
  void restore_state(const std::string& state);

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
};

}  // namespace cafv
