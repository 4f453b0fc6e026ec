#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "legonet/blocking.hpp"
#include "legonet/codec.hpp"
#include "legonet/container.hpp"
#include "legonet/error.hpp"
#include "legonet/pipeline.hpp"
#include "oracles.hpp"

namespace legonet {
namespace {

// A [rows*4, cols*4] weight whose blocks cycle through `distinct` random
// prototypes, plus a bias and an untileable layer.
ModelBundle tiled_model(std::size_t distinct, std::uint32_t rows, std::uint32_t cols,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto protos = testing::random_values(rng, distinct * 16);
  const std::uint32_t width = cols * 4;
  std::vector<float> w(rows * 4 * width);
  for (std::uint32_t br = 0; br < rows; ++br) {
    for (std::uint32_t bc = 0; bc < cols; ++bc) {
      const std::size_t p = (br * cols + bc) % distinct;
      for (std::uint32_t r = 0; r < 4; ++r)
        for (std::uint32_t c = 0; c < 4; ++c)
          w[(br * 4 + r) * width + bc * 4 + c] = protos[p * 16 + r * 4 + c];
    }
  }
  return ModelBundle({Tensor("w", {rows * 4, width}, std::move(w)),
                      testing::random_tensor(rng, "w.bias", {rows * 4}, TensorRole::kBias),
                      testing::random_tensor(rng, "odd", {3, 5})});
}

std::size_t distinct_blocks(const ModelBundle& m) {
  const BlockSet bs = breakup(m, 4);
  std::set<std::vector<float>> seen;
  for (std::size_t i = 0; i < bs.size(); ++i) seen.emplace(bs.block(i).begin(), bs.block(i).end());
  return seen.size();
}

TEST(PipelineTest, DistinctBlockCountIsLossless) {
  const ModelBundle m = tiled_model(32, 8, 12, 1);
  ASSERT_EQ(distinct_blocks(m), 32u);
  const CompressResult r = compress(m, {.k = 32, .b = 4});
  EXPECT_EQ(r.report.inertia, 0.0);
  EXPECT_EQ(reconstruct(r.model), m);
  EXPECT_EQ(reconstruct(decode_compressed(encode_compressed(r.model))), m);
}

TEST(PipelineTest, SingleLegoIsTheGlobalMeanBlock) {
  const ModelBundle m = tiled_model(7, 4, 4, 2);
  const CompressResult r = compress(m, {.k = 1, .b = 4});
  const BlockSet bs = breakup(m, 4);
  std::vector<double> mean(16, 0.0);
  for (std::size_t i = 0; i < bs.size(); ++i)
    for (int d = 0; d < 16; ++d) mean[d] += bs.block(i)[d];
  const ModelBundle out = reconstruct(r.model);
  const BlockSet rb = breakup(out, 4);
  for (std::size_t i = 0; i < rb.size(); ++i)
    for (int d = 0; d < 16; ++d) EXPECT_FLOAT_EQ(rb.block(i)[d], static_cast<float>(mean[d] / bs.size()));
  EXPECT_EQ(r.report.bits_per_index, 1u);
}

TEST(PipelineTest, InertiaRecomputedFromTheFile) {
  std::mt19937_64 rng(3);
  const ModelBundle m({testing::random_tensor(rng, "w", {64, 64})});
  const CompressResult r = compress(m, {.k = 8, .b = 4, .seed = 11});
  const auto path = std::filesystem::temp_directory_path() / "legonet_pipeline.lgnc";
  write_compressed(r.model, path);
  const CompressedModel back = read_compressed(path);
  std::filesystem::remove(path);

  const BlockSet bs = breakup(m, 4);
  ASSERT_EQ(back.streams.size(), 1u);
  const auto idx = unpack_indices(back.streams[0].stream, bs.size(), back.bits_per_index);
  double inertia = 0.0;
  for (std::size_t i = 0; i < bs.size(); ++i)
    inertia += testing::full_distance(bs.block(i), back.codebook.lego(idx[i]));
  EXPECT_NEAR(inertia, r.report.inertia, 1e-9 * inertia);
  // Every block really is mapped to its nearest lego.
  for (std::size_t i = 0; i < bs.size(); ++i)
    EXPECT_EQ(idx[i], testing::brute_nearest(bs.block(i), back.codebook.values(), 16));
}

TEST(PipelineTest, ReportSizesAgreeWithTheEncoding) {
  const ModelBundle m = tiled_model(40, 8, 8, 4);
  const CompressResult r = compress(m, {.k = 16, .b = 4});
  const auto bytes = encode_compressed(r.model);
  EXPECT_EQ(r.report.file_bytes, bytes.size());
  EXPECT_EQ(r.report.block_count, 64u);
  EXPECT_EQ(r.report.p_compressed, 32u * 32);
  EXPECT_EQ(r.report.p_raw, 32u + 15);  // bias + odd, both stored raw
  EXPECT_EQ(r.report.skipped_layers, std::vector<std::string>{"odd"});
  EXPECT_EQ(r.report.predicted_bits, compute_cr(32 * 32, 47, 16, 4).compressed_bits);
  EXPECT_DOUBLE_EQ(r.report.theoretical_cr, 128.0);
  // effective: all stored floats at 32 bits over the real file.
  EXPECT_DOUBLE_EQ(r.report.effective_cr, (32.0 * 32 + 32 + 15) * 32 / (8.0 * bytes.size()));
}

TEST(PipelineTest, OutputIsDeterministicAcrossRunsAndThreads) {
  std::mt19937_64 rng(5);
  const ModelBundle m({testing::random_tensor(rng, "w", {64, 128})});
  const auto a = encode_compressed(compress(m, {.k = 20, .seed = 9, .threads = 1}).model);
  const auto b = encode_compressed(compress(m, {.k = 20, .seed = 9, .threads = 1}).model);
  const auto c = encode_compressed(compress(m, {.k = 20, .seed = 9, .threads = 3}).model);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(PipelineTest, CompressRejectsBadOptions) {
  const ModelBundle m = tiled_model(4, 2, 2, 6);
  EXPECT_THROW(compress(m, {.k = 0}), Error);
  EXPECT_THROW(compress(m, {.k = 5, .b = 4}), Error);  // only 4 blocks
  EXPECT_THROW(compress(m, {.k = 2, .b = 0}), Error);
  EXPECT_THROW(compress(ModelBundle({Tensor::zeros("w", {3, 3})}), {.k = 1, .b = 4}), Error);
}

// Metric = min(distinct blocks, 16): the baseline is 16 and only K >= 16 reaches it.
Evaluator distinct_metric() {
  return {"distinct", [](const ModelBundle& m) {
            return static_cast<double>(std::min<std::size_t>(distinct_blocks(m), 16));
          }};
}

TEST(PipelineTest, LegoASmallestLosslessCandidate) {
  const ModelBundle m = tiled_model(64, 12, 16, 7);
  const std::vector<std::size_t> ks = {2, 4, 8, 12, 16, 24, 32};
  const SearchResult r = search_lego_a(m, distinct_metric(), ks, {});
  EXPECT_TRUE(r.satisfied);
  EXPECT_EQ(r.best_k, 16u);
  EXPECT_EQ(r.baseline_metric, 16.0);
  EXPECT_EQ(r.reports.size(), ks.size());

  const Evaluator flat{"const", [](const ModelBundle&) { return 1.0; }};
  EXPECT_EQ(search_lego_a(m, flat, ks, {}).best_k, 2u);
}

TEST(PipelineTest, LegoANotLosslessFallsBackToBestMetric) {
  const ModelBundle m = tiled_model(64, 12, 16, 7);
  const SearchResult r = search_lego_a(m, distinct_metric(), {2, 4, 8}, {});
  EXPECT_FALSE(r.satisfied);
  EXPECT_EQ(r.best_k, 8u);
}

TEST(PipelineTest, LegoCStopsAtFirstWithinTolerance) {
  const ModelBundle m = tiled_model(64, 12, 16, 7);
  const std::vector<std::size_t> ks = {2, 4, 8, 12, 16, 24, 32};
  const SearchResult c = search_lego_c(m, distinct_metric(), 4.0, ks, {});
  EXPECT_TRUE(c.satisfied);
  EXPECT_EQ(c.best_k, 12u);
  EXPECT_EQ(c.reports.size(), 4u);

  // No overshoot: the answer is the first schedule entry whose full
  // evaluation is within tolerance.
  const SearchResult a = search_lego_a(m, distinct_metric(), ks, {});
  std::size_t first = 0;
  for (const auto& rep : a.reports) {
    if (a.baseline_metric - *rep.compressed_metric <= 4.0) {
      first = rep.k;
      break;
    }
  }
  EXPECT_EQ(c.best_k, first);

  EXPECT_EQ(search_lego_c(m, distinct_metric(), 100.0, ks, {}).best_k, 2u);
  EXPECT_EQ(search_lego_c(m, distinct_metric(), 0.0, ks, {}).best_k, a.best_k);
  const SearchResult unmet = search_lego_c(m, distinct_metric(), 1.0, {2, 4, 8}, {});
  EXPECT_FALSE(unmet.satisfied);
  EXPECT_EQ(unmet.best_k, 8u);
}

TEST(PipelineTest, SearchPolicyValidation) {
  EXPECT_THROW((SearchPolicy{SearchMode::kLegoC, -1.0, {2}}.validate()), Error);
  EXPECT_THROW((SearchPolicy{SearchMode::kLegoA, 0.0, {}}.validate()), Error);
  EXPECT_THROW((SearchPolicy{SearchMode::kLegoA, 0.0, {2, 8, 4}}.validate()), Error);
  EXPECT_NO_THROW((SearchPolicy{SearchMode::kLegoA, 0.0, {2, 4}}.validate()));
  const auto sched = default_k_schedule();
  EXPECT_EQ(sched.front(), 2u);
  EXPECT_EQ(sched.back(), 256u);
  EXPECT_EQ(sched.size(), 255u);
}

TEST(PipelineTest, DeviationEvaluatorScoresReferenceAtZero) {
  const ModelBundle m = read_model(LEGONET_TEST_DATA "/mnist_cnn.lgtw");
  const Evaluator dev = deviation_evaluator(m, 16, 0);
  EXPECT_EQ(dev.fn(m), 0.0);
  const CompressResult r = compress(m, {.k = 32});
  EXPECT_LT(dev.fn(reconstruct(r.model)), 0.0);
  EXPECT_DOUBLE_EQ(r.report.theoretical_cr, 102.4);
}

TEST(PipelineTest, JsonAndCsvShapes) {
  const ModelBundle m = tiled_model(8, 4, 4, 8);
  CompressionReport rep = compress(m, {.k = 4}).report;
  const auto j = report_to_json(rep);
  EXPECT_EQ(j["k"], 4);
  EXPECT_EQ(j["bits_per_index"], 2);
  EXPECT_FALSE(j.contains("metric"));
  const std::string row = report_csv_row(rep);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 6);
  EXPECT_EQ(row.rfind("4,4,2,", 0), 0u);
}

}  // namespace
}  // namespace legonet
