#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace aetransfer {

/// Seeded generator used for every sampling decision in the project.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are implementation-defined, so all
/// conversions to doubles, ranges and normals are done here:
///   uniform()  : top 53 bits of one draw, scaled by 2^-53
///   below(n)   : rejection sampling on a 64-bit draw (no modulo bias)
///   normal()   : Box-Muller, one draw pair per call, cosine branch
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t below(std::size_t n);

  /// `k` distinct indices from [0, n), ascending. Returns all of them when k >= n.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer applied to `seed ^ stream`; gives independent child seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace aetransfer
