#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace earl {

inline constexpr const char* kVersion = "0.3.0";

// Dense entity / relation / row index.
using Index = std::uint32_t;

// Error hierarchy. The CLI maps each family onto an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Usage or configuration problem (exit code 1).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or missing input data (exit code 2).
struct DataError : Error {
  using Error::Error;
};

struct ParseError : DataError {
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// NaN/Inf or other numerical breakdown (exit code 3).
struct NumericalError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Randomness
//
// All stochastic choices go through splitmix64-derived streams so a run is a
// pure function of (seed, config, data) on every platform. std:: distributions
// are avoided because their output is implementation-defined.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Lemire's multiply-shift with rejection.
  __extension__ using u128 = unsigned __int128;
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    u128 m = static_cast<u128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<u128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  bool coin() noexcept { return (next() >> 63) != 0; }

  // Independent child stream; used for per-step / per-entity streams.
  Rng split(std::uint64_t key) const noexcept { return Rng(mix_seed(state_, key)); }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Threading

inline std::atomic<unsigned>& thread_budget() {
  static std::atomic<unsigned> n{std::max(1u, std::thread::hardware_concurrency())};
  return n;
}

inline void set_threads(unsigned n) { thread_budget() = std::max(1u, n); }
inline unsigned threads() { return thread_budget().load(); }

// Runs fn(begin, end) over disjoint chunks of [0, n). Each index is touched by
// exactly one worker, so results written to per-index slots are deterministic.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 256) {
  const std::size_t workers =
      std::min<std::size_t>(threads(), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

// FNV-1a over raw bytes; stable content checksum for manifests.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace earl
