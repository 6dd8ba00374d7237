#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace crcsf {

/// Shortest round-trip decimal formatting. Used for every CSV/JSON number we
/// emit so that replaying a run reproduces output files byte for byte.
inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

/// FNV-1a 64-bit digest, used for config hashes and artifact digests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written into pre-sized slots keyed by i so the outcome is independent of
/// the parallelism degree.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Minimal CSV splitter for our own output format (no quoting in our files).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace crcsf
