#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace cafv {

// Incremental SHA-256. Used for artifact checksums and config hashes.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(const std::string& s);
  std::string hex_digest();  // finalizes; further updates are invalid

 private:
  void process_block(const std::uint8_t* block);

  std::uint32_t state_[8];
  std::uint8_t buffer_[64];
  std::size_t buffer_len_ = 0;
  std::uint64_t total_bits_ = 0;
  bool finalized_ = false;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);  // throws IoError

}  // namespace cafv
