#pragma once
// Shared error type, stable hashing, and small string/file helpers.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thoughtbench {

// Error with a stable machine-readable code ("ReplayMiss", "MaskCountError", ...)
// alongside the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void raise(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

// FNV-1a. Stable across platforms and runs; used for request fingerprints,
// config hashes, and deterministic ids.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 1469598103934665603ull);

std::string hex64(std::uint64_t v);

// 32 hex chars from two independently seeded FNV passes.
std::string stable_digest(std::string_view data);

// First 8 hex chars of stable_digest.
std::string short_digest(std::string_view data);

std::string ascii_lower(std::string s);
std::string rtrim(std::string_view s);
std::string trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

// Splits on '\n', dropping a trailing '\r' per line. A trailing final newline
// does not produce an empty last element.
std::vector<std::string> split_lines(std::string_view text);

std::vector<std::string> split_list(std::string_view text, char sep);

std::string iso8601_utc_now();

}  // namespace thoughtbench
