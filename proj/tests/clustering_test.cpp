#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "legonet/clustering.hpp"
#include "legonet/error.hpp"
#include "legonet/rng.hpp"
#include "oracles.hpp"

namespace legonet {
namespace {

using Points = std::vector<std::vector<float>>;

BlockSet as_blocks(const Points& pts) {
  std::vector<float> flat;
  for (const auto& p : pts) flat.insert(flat.end(), p.begin(), p.end());
  return BlockSet::from_points(std::move(flat), pts.front().size());
}

double oracle_inertia(const BlockSet& bs, const Codebook& cb, const std::vector<std::uint32_t>& idx) {
  double total = 0.0;
  for (std::size_t i = 0; i < bs.size(); ++i) total += testing::full_distance(bs.block(i), cb.lego(idx[i]));
  return total;
}

TEST(RngTest, KnownFirstOutputsAreStable) {
  Xoshiro256 a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  Xoshiro256 r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(7), 7u);
  }
}

TEST(ClusteringTest, AssignMatchesExhaustiveSearch) {
  std::mt19937_64 rng(12);
  const BlockSet bs = BlockSet::from_points(testing::random_values(rng, 100 * 16), 16);
  const Codebook cb(4, 16, testing::random_values(rng, 7 * 16));
  for (unsigned threads : {1u, 3u}) {
    const Assignment a = assign(bs, cb, threads);
    for (std::size_t i = 0; i < bs.size(); ++i)
      ASSERT_EQ(a.indices[i], testing::brute_nearest(bs.block(i), cb.values(), 16));
    EXPECT_DOUBLE_EQ(a.inertia, oracle_inertia(bs, cb, a.indices));
  }
}

TEST(ClusteringTest, TiesGoToLowestIndex) {
  const BlockSet bs = as_blocks({{0.0f, 0.0f}, {1.0f, 0.0f}});
  // Both legos sit at distance 1 from each point.
  const Codebook cb(0, 2, {0.5f, 1.0f, 0.5f, -1.0f, 0.5f, 1.0f});
  const Assignment a = assign(bs, cb);
  EXPECT_EQ(a.indices, (std::vector<std::uint32_t>{0, 0}));
  const Codebook dup(0, 2, {3.0f, 3.0f, 0.0f, 0.0f, 0.0f, 0.0f});
  EXPECT_EQ(assign(bs, dup).indices, (std::vector<std::uint32_t>{1, 1}));
}

TEST(ClusteringTest, AssignRejectsDimensionMismatch) {
  const BlockSet bs = as_blocks({{0.0f, 0.0f, 0.0f}});
  try {
    assign(bs, Codebook(0, 2, {0.0f, 0.0f}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(ClusteringTest, SeedingPicksDistinctBlocksAndIsDeterministic) {
  std::mt19937_64 rng(13);
  const BlockSet bs = BlockSet::from_points(testing::random_values(rng, 50 * 4), 4);
  const Codebook a = kmeanspp_seed(bs, 10, 99);
  EXPECT_EQ(a, kmeanspp_seed(bs, 10, 99));
  EXPECT_NE(a, kmeanspp_seed(bs, 10, 100));
  std::set<std::vector<float>> seen;
  for (std::size_t k = 0; k < a.size(); ++k) {
    std::vector<float> lego(a.lego(k).begin(), a.lego(k).end());
    bool is_block = false;
    for (std::size_t i = 0; i < bs.size() && !is_block; ++i)
      is_block = std::equal(lego.begin(), lego.end(), bs.block(i).begin());
    EXPECT_TRUE(is_block);
    EXPECT_TRUE(seen.insert(lego).second);
  }
}

TEST(ClusteringTest, SecondSeedFollowsSquaredDistance) {
  // Points at 0, 1 and 10 on a line. Whatever the first seed is, the D^2
  // weights make the far point dominate when it is not already chosen.
  const BlockSet bs = as_blocks({{0.0f}, {1.0f}, {10.0f}});
  int far = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const Codebook cb = kmeanspp_seed(bs, 2, seed);
    if (cb.lego(0)[0] == 10.0f) continue;
    ++total;
    if (cb.lego(1)[0] == 10.0f) ++far;
  }
  ASSERT_GT(total, 100);
  // From 0: P(10) = 100/101. From 1: P(10) = 81/82.
  EXPECT_GT(static_cast<double>(far) / total, 0.95);
}

TEST(ClusteringTest, SeedingErrors) {
  const BlockSet bs = as_blocks({{0.0f}, {1.0f}});
  EXPECT_THROW(kmeanspp_seed(bs, 3, 0), Error);
  EXPECT_THROW(kmeanspp_seed(bs, 0, 0), Error);
  try {
    kmeans(bs, {.k = 5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewBlocks);
  }
}

TEST(ClusteringTest, DistinctBlockCountGivesZeroInertiaAndExactCentroids) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t distinct = 3 + trial % 9;
    const auto protos = testing::random_values(rng, distinct * 4);
    std::vector<float> flat;
    std::uniform_int_distribution<std::size_t> pick(0, distinct - 1);
    for (std::size_t d = 0; d < distinct; ++d) flat.insert(flat.end(), protos.begin() + d * 4, protos.begin() + d * 4 + 4);
    for (int extra = 0; extra < 40; ++extra) {
      const auto p = pick(rng);
      flat.insert(flat.end(), protos.begin() + p * 4, protos.begin() + p * 4 + 4);
    }
    const BlockSet bs = BlockSet::from_points(flat, 4);
    const KMeansResult r = kmeans(bs, {.k = distinct, .seed = static_cast<std::uint64_t>(trial)});
    EXPECT_EQ(r.assignment.inertia, 0.0);
    std::set<std::vector<float>> want, got;
    for (std::size_t d = 0; d < distinct; ++d) want.emplace(protos.begin() + d * 4, protos.begin() + d * 4 + 4);
    for (std::size_t k = 0; k < r.codebook.size(); ++k) got.emplace(r.codebook.lego(k).begin(), r.codebook.lego(k).end());
    EXPECT_EQ(got, want);
  }
}

TEST(ClusteringTest, ResultIsAFixedPointOfLloyd) {
  std::mt19937_64 rng(15);
  const BlockSet bs = BlockSet::from_points(testing::random_values(rng, 6 * 4), 4);
  const KMeansResult r = kmeans(bs, {.k = 2, .seed = 3, .max_iters = 1000, .rel_tol = 0.0});
  ASSERT_EQ(r.stop, StopReason::kFixedPoint);
  // Every point is nearest its own centroid...
  for (std::size_t i = 0; i < bs.size(); ++i)
    EXPECT_EQ(r.assignment.indices[i], testing::brute_nearest(bs.block(i), r.codebook.values(), 4));
  // ...and every centroid is the mean of its members.
  for (std::uint32_t k = 0; k < 2; ++k) {
    std::vector<double> sum(4, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (r.assignment.indices[i] != k) continue;
      ++n;
      for (int d = 0; d < 4; ++d) sum[d] += bs.block(i)[d];
    }
    ASSERT_GT(n, 0);
    for (int d = 0; d < 4; ++d) EXPECT_NEAR(r.codebook.lego(k)[d], sum[d] / n, 1e-6);
  }
}

TEST(ClusteringTest, InertiaNeverIncreasesAndMatchesOracle) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const BlockSet bs = BlockSet::from_points(testing::random_values(rng, 300 * 9), 9);
    const KMeansResult r = kmeans(bs, {.k = 12, .seed = static_cast<std::uint64_t>(trial)});
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] * (1 + 1e-12));
    EXPECT_NEAR(r.assignment.inertia, oracle_inertia(bs, r.codebook, r.assignment.indices),
                1e-9 * r.assignment.inertia);
    std::set<std::uint32_t> used(r.assignment.indices.begin(), r.assignment.indices.end());
    EXPECT_EQ(used.size(), 12u);
  }
}

TEST(ClusteringTest, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(17);
  const BlockSet bs = BlockSet::from_points(testing::random_values(rng, 2000 * 16), 16);
  const KMeansResult one = kmeans(bs, {.k = 32, .seed = 5, .threads = 1});
  const KMeansResult four = kmeans(bs, {.k = 32, .seed = 5, .threads = 4});
  EXPECT_EQ(one.codebook, four.codebook);
  EXPECT_EQ(one.assignment.indices, four.assignment.indices);
  EXPECT_EQ(one.inertia_history, four.inertia_history);
}

TEST(ClusteringTest, SingleClusterIsTheMean) {
  std::mt19937_64 rng(18);
  const BlockSet bs = BlockSet::from_points(testing::random_values(rng, 37 * 4), 4);
  const KMeansResult r = kmeans(bs, {.k = 1});
  for (int d = 0; d < 4; ++d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < bs.size(); ++i) sum += bs.block(i)[d];
    EXPECT_FLOAT_EQ(r.codebook.lego(0)[d], static_cast<float>(sum / bs.size()));
  }
}

}  // namespace
}  // namespace legonet
