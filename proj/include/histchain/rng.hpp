#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace histchain {

/// Seeded generator for one named consumer, keyed on (global seed, stream name).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound), by rejection sampling.
  std::uint64_t below(std::uint64_t bound);
  void fill(std::uint8_t* out, std::size_t len);

 private:
  std::mt19937_64 engine_;
};

}  // namespace histchain
