#include "cafv/rng.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "cafv/errors.hpp"

namespace cafv {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)), engine_(splitmix64(seed ^ fnv1a64(label_))) {}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform01() {
  return double(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform01_open() {
  return double((engine_() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double RngStream::gaussian() {
  const double u1 = uniform01_open();
  const double u2 = uniform01();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw ValidationError("RngStream::index(0)");
  const std::uint64_t n64 = n;
  const std::uint64_t residue = (0 - n64) % n64;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= residue) return std::size_t((x - residue) % n64);
  }
}

Tensor RngStream::gaussian_tensor(std::vector<std::size_t> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = gaussian();
  return t;
}

std::string RngStream::serialize_state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void RngStream::restore_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) throw IoError("malformed RNG state for stream '" + label_ + "'");
}

}  // namespace cafv
