#include "legonet/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "legonet/detail/parallel.hpp"
#include "legonet/error.hpp"
#include "legonet/rng.hpp"

namespace legonet {

Codebook::Codebook(std::uint32_t b, std::size_t dim, std::vector<float> legos)
    : b_(b), dim_(dim), legos_(std::move(legos)) {
  if (dim_ == 0 || legos_.empty() || legos_.size() % dim_ != 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "codebook of " + std::to_string(legos_.size()) +
                    " floats is not a positive multiple of " + std::to_string(dim_));
  }
  for (float v : legos_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite lego value");
  }
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

namespace {

// Partial sums only grow, so abandoning a candidate once it reaches the best
// distance leaves the argmin (and its exact distance) unchanged.
std::pair<std::uint32_t, double> nearest(std::span<const float> x, const Codebook& cb) {
  const std::size_t dim = cb.dim();
  const float* legos = cb.values().data();
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cb.size(); ++k) {
    const float* c = legos + k * dim;
    double acc = 0.0;
    std::size_t i = 0;
    for (; i < dim; ++i) {
      const double d = static_cast<double>(x[i]) - static_cast<double>(c[i]);
      acc += d * d;
      if ((i & 3) == 3 && acc >= best_d) break;
    }
    if (i == dim && acc < best_d) {
      best_d = acc;
      best = static_cast<std::uint32_t>(k);
    }
  }
  return {best, best_d};
}

void check_k(const BlockSet& blocks, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (blocks.empty() || k > blocks.size()) {
    throw Error(ErrorCode::kTooFewBlocks, "K = " + std::to_string(k) + " exceeds " +
                                              std::to_string(blocks.size()) + " blocks");
  }
}

Assignment assign_with_distances(const BlockSet& blocks, const Codebook& codebook,
                                 unsigned threads, std::vector<double>& distances) {
  if (codebook.dim() != blocks.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "lego dim " + std::to_string(codebook.dim()) + " vs block dim " +
                    std::to_string(blocks.dim()));
  }
  Assignment out;
  out.indices.resize(blocks.size());
  distances.resize(blocks.size());
  detail::parallel_for(blocks.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto [k, d] = nearest(blocks.block(i), codebook);
      out.indices[i] = k;
      distances[i] = d;
    }
  });
  for (double d : distances) out.inertia += d;
  return out;
}

}  // namespace

Assignment assign(const BlockSet& blocks, const Codebook& codebook, unsigned threads) {
  std::vector<double> distances;
  return assign_with_distances(blocks, codebook, threads, distances);
}

Codebook kmeanspp_seed(const BlockSet& blocks, std::size_t k, std::uint64_t seed) {
  check_k(blocks, k);
  const std::size_t n = blocks.size();
  const std::size_t dim = blocks.dim();
  Xoshiro256 rng(seed);

  std::vector<float> centroids;
  centroids.reserve(k * dim);
  auto take = [&](std::size_t i) {
    auto blk = blocks.block(i);
    centroids.insert(centroids.end(), blk.begin(), blk.end());
  };

  std::size_t chosen = rng.below(n);
  take(chosen);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(blocks.block(i), blocks.block(chosen));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      std::size_t last_positive = n;
      chosen = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        last_positive = i;
        cum += d2[i];
        if (cum > target) {
          chosen = i;
          break;
        }
      }
      if (chosen == n) chosen = last_positive;
    } else {
      // Fewer distinct blocks than K: duplicates cannot be avoided.
      chosen = rng.below(n);
    }
    take(chosen);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(blocks.block(i), blocks.block(chosen)));
    }
  }
  return Codebook(blocks.b(), dim, std::move(centroids));
}

KMeansResult kmeans(const BlockSet& blocks, const KMeansParams& params) {
  check_k(blocks, params.k);
  if (params.max_iters == 0) throw Error(ErrorCode::kInvalidArgument, "max_iters must be >= 1");
  if (!(params.rel_tol >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "rel_tol must be >= 0");

  const std::size_t n = blocks.size();
  const std::size_t dim = blocks.dim();
  const std::size_t k = params.k;

  KMeansResult result;
  result.codebook = kmeanspp_seed(blocks, k, params.seed);
  std::vector<double> distances;
  std::vector<std::uint32_t> previous;
  std::vector<std::size_t> counts(k);
  std::vector<double> sums(k * dim);

  for (std::uint32_t iter = 0;; ++iter) {
    result.assignment = assign_with_distances(blocks, result.codebook, params.threads, distances);
    const double inertia = result.assignment.inertia;
    result.inertia_history.push_back(inertia);

    std::fill(counts.begin(), counts.end(), 0);
    for (auto idx : result.assignment.indices) ++counts[idx];
    const bool has_empty = std::find(counts.begin(), counts.end(), 0) != counts.end();

    if (!has_empty) {
      if (result.assignment.indices == previous || inertia == 0.0) {
        result.stop = StopReason::kFixedPoint;
        break;
      }
      if (iter > 0) {
        const double prev = result.inertia_history[iter - 1];
        if (prev - inertia <= params.rel_tol * prev) {
          result.stop = StopReason::kTolerance;
          break;
        }
      }
    }
    if (iter + 1 >= params.max_iters) {
      result.stop = StopReason::kMaxIters;
      break;
    }

    // Centroid update: f64 sums in canonical block order.
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* s = sums.data() + result.assignment.indices[i] * dim;
      auto blk = blocks.block(i);
      for (std::size_t j = 0; j < dim; ++j) s[j] += blk[j];
    }
    std::vector<float> legos(result.codebook.values().begin(), result.codebook.values().end());
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        legos[c * dim + j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (distances[i] > far_d) {
          far_d = distances[i];
          far = i;
        }
      }
      // All remaining blocks sit on a centroid: nothing left to re-seed with.
      if (far == n) continue;
      distances[far] = 0.0;
      auto blk = blocks.block(far);
      std::copy(blk.begin(), blk.end(), legos.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }
    result.codebook = Codebook(blocks.b(), dim, std::move(legos));
    previous = result.assignment.indices;
  }
  return result;
}

}  // namespace legonet
