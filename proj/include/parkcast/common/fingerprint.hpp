#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace parkcast {

// Incremental 64-bit FNV-1a. Stable across platforms and runs, which is all
// artifact fingerprints need; it is not a cryptographic hash.
class Fingerprint {
public:
  Fingerprint& add(std::string_view bytes);
  Fingerprint& add(double v);
  Fingerprint& add(std::int64_t v);
  Fingerprint& add(std::uint64_t v);
  Fingerprint& add(std::span<const double> values);

  std::uint64_t value() const noexcept { return state_; }
  // 16 lowercase hex digits.
  std::string hex() const;

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fingerprint_of(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
// Writes atomically enough for a CLI: temp file in the same directory, then rename.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace parkcast
