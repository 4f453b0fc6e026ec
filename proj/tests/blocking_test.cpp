#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "legonet/blocking.hpp"
#include "legonet/container.hpp"
#include "legonet/error.hpp"
#include "oracles.hpp"

namespace legonet {
namespace {

Tensor iota_tensor(std::string name, Shape shape) {
  std::vector<float> v(shape_elements(shape));
  std::iota(v.begin(), v.end(), 0.0f);
  return Tensor(std::move(name), std::move(shape), std::move(v));
}

TEST(BlockingTest, FlattenKeepsElementOrder) {
  const Tensor conv = iota_tensor("c", {3, 2, 2, 3});
  const MatrixView m = flatten_to_matrix(conv);
  ASSERT_EQ(m.rows, 3u);
  ASSERT_EQ(m.cols, 12u);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 3; ++x)
          EXPECT_EQ(m.at(o, (i * 2 + y) * 3 + x),
                    conv.data()[((o * 2 + i) * 2 + y) * 3 + x]);

  const MatrixView v = flatten_to_matrix(iota_tensor("v", {7}));
  EXPECT_EQ(v.rows, 1u);
  EXPECT_EQ(v.cols, 7u);

  try {
    flatten_to_matrix(iota_tensor("r3", {2, 2, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedRank);
  }
}

TEST(BlockingTest, EightByEightGivesFourBlocksInRowMajorOrder) {
  const BlockSet bs = breakup(ModelBundle({iota_tensor("w", {8, 8})}), 4);
  ASSERT_EQ(bs.size(), 4u);
  const std::vector<BlockOrigin> expect = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}};
  EXPECT_EQ(bs.origins(), expect);
  // Block (1, 0) starts at row 4, col 0.
  const auto blk = bs.block(2);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(blk[r * 4 + c], (4 + r) * 8 + c);
}

TEST(BlockingTest, IndivisibleLayersAreSkippedNotPadded) {
  const ModelBundle m({iota_tensor("a", {10, 10}), iota_tensor("b", {4, 8})});
  const BlockSet bs = breakup(m, 4);
  EXPECT_EQ(bs.size(), 2u);
  ASSERT_EQ(bs.skipped_layers().size(), 1u);
  EXPECT_EQ(bs.skipped_layers()[0], 0u);
  EXPECT_EQ(skipped_params(bs, m), 100u);
  EXPECT_EQ(bs.origins()[0].layer_index, 1u);
}

TEST(BlockingTest, FixtureCnnBlockCount) {
  const ModelBundle m = read_model(LEGONET_TEST_DATA "/mnist_cnn.lgtw");
  const BlockSet bs = breakup(m, 4);
  // conv1 16x16, conv2 32x256, fc1 64x512 tile; fc2 10x64 does not.
  EXPECT_EQ(bs.size(), (16u * 16 + 32 * 256 + 64 * 512) / 16);
  EXPECT_EQ(bs.skipped_layers().size(), 1u);
  EXPECT_EQ(m.layers()[bs.skipped_layers()[0]].name(), "fc2.weight");
}

TEST(BlockingTest, ReassembleInvertsBreakup) {
  std::mt19937_64 rng(1);
  for (std::uint32_t b : {1u, 2u, 3u, 4u}) {
    for (int trial = 0; trial < 20; ++trial) {
      const ModelBundle m = testing::random_bundle(rng, 4);
      const BlockSet bs = breakup(m, b);
      EXPECT_EQ(reassemble(bs, bs.values(), m), m);
      // Conservation: every weight element is either tiled or skipped.
      std::size_t weights = 0;
      for (const auto& t : m.layers())
        if (t.role() == TensorRole::kWeight) weights += t.size();
      EXPECT_EQ(bs.covered_params() + skipped_params(bs, m), weights);
      EXPECT_EQ(bs.covered_params(), bs.size() * b * b);
    }
  }
}

TEST(BlockingTest, ZeroBlocksGiveZeroLayers) {
  const ModelBundle m({iota_tensor("w", {8, 4}), iota_tensor("v", {3, 3})});
  const BlockSet bs = breakup(m, 4);
  const std::vector<float> zeros(bs.values().size(), 0.0f);
  const ModelBundle z = reassemble(bs, zeros, m);
  for (float v : z.layers()[0].data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(z.layers()[1], m.layers()[1]);
}

TEST(BlockingTest, PermutedBlocksMoveOnlyTheirRegions) {
  const ModelBundle m({iota_tensor("w", {8, 12})});
  const BlockSet bs = breakup(m, 4);
  const std::size_t dim = 16;
  std::vector<float> swapped(bs.values().begin(), bs.values().end());
  // Swap block 1 (row 0, col 1) with block 5 (row 1, col 2).
  std::swap_ranges(swapped.begin() + 1 * dim, swapped.begin() + 2 * dim, swapped.begin() + 5 * dim);
  const ModelBundle out = reassemble(bs, swapped, m);
  const auto before = m.layers()[0].data();
  const auto after = out.layers()[0].data();
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 12; ++c) {
      const bool in_a = r < 4 && c >= 4 && c < 8;
      const bool in_b = r >= 4 && c >= 8;
      if (in_a) {
        EXPECT_EQ(after[r * 12 + c], before[(r + 4) * 12 + c + 4]);
      } else if (in_b) {
        EXPECT_EQ(after[r * 12 + c], before[(r - 4) * 12 + c - 4]);
      } else {
        EXPECT_EQ(after[r * 12 + c], before[r * 12 + c]);
      }
    }
  }
}

TEST(BlockingTest, ReassembleRejectsWrongCounts) {
  const ModelBundle m({iota_tensor("w", {8, 8})});
  const BlockSet bs = breakup(m, 4);
  const std::vector<float> short_values(bs.values().size() - 16);
  try {
    reassemble(bs, short_values, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCountMismatch);
  }
  EXPECT_THROW(reassemble(bs, bs.values(), ModelBundle({iota_tensor("w", {8, 4})})), Error);
}

}  // namespace
}  // namespace legonet
