#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "legonet/blocking.hpp"

namespace legonet {

// K centroid blocks ("Legos"), each dim = b*b floats, stored contiguously.
class Codebook {
 public:
  Codebook() = default;
  Codebook(std::uint32_t b, std::size_t dim, std::vector<float> legos);

  std::uint32_t b() const { return b_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : legos_.size() / dim_; }

  std::span<const float> lego(std::size_t k) const {
    return std::span<const float>(legos_).subspan(k * dim_, dim_);
  }
  std::span<const float> values() const { return legos_; }

  bool operator==(const Codebook&) const = default;

 private:
  std::uint32_t b_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> legos_;
};

struct Assignment {
  std::vector<std::uint32_t> indices;
  double inertia = 0.0;
};

// Squared Euclidean distance accumulated in f64, element order fixed.
double squared_distance(std::span<const float> a, std::span<const float> b);

// Nearest lego per block; ties go to the lowest index. Work is split across
// `threads` workers but the result does not depend on the split.
Assignment assign(const BlockSet& blocks, const Codebook& codebook, unsigned threads = 1);

// D^2-weighted seeding driven by Xoshiro256 seeded with `seed`.
Codebook kmeanspp_seed(const BlockSet& blocks, std::size_t k, std::uint64_t seed);

struct KMeansParams {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::uint32_t max_iters = 100;
  double rel_tol = 1e-6;
  unsigned threads = 1;
};

enum class StopReason { kFixedPoint, kTolerance, kMaxIters };

struct KMeansResult {
  Codebook codebook;
  Assignment assignment;
  // Inertia after each assignment step, first entry is the seeding.
  std::vector<double> inertia_history;
  StopReason stop = StopReason::kMaxIters;
};

// Lloyd iterations from k-means++ seeds. Stops when an assignment repeats
// (fixed point), when the relative inertia improvement drops to rel_tol, or
// after max_iters assignment steps. The returned assignment is always the
// nearest-lego assignment for the returned codebook. Empty clusters are moved
// onto the block farthest from its current centroid.
KMeansResult kmeans(const BlockSet& blocks, const KMeansParams& params);

}  // namespace legonet
