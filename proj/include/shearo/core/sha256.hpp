#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shearo {

/// Incremental SHA-256. Used for config hashes, checkpoint identity and the
/// pipeline reproducibility checks.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  /// Finalizes and returns the lowercase hex digest. The object must not be
  /// updated afterwards.
  std::string hex_digest();

 private:
  void process_block(const std::uint8_t* block);
  std::uint32_t state_[8];
  std::uint64_t bit_count_ = 0;
  std::uint8_t buffer_[64];
  std::size_t buffer_len_ = 0;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace shearo
