#include "legonet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <memory>

#include "legonet/blocking.hpp"
#include "legonet/clustering.hpp"
#include "legonet/error.hpp"
#include "legonet/inference.hpp"

namespace legonet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t stored_params(const ModelBundle& model) {
  std::size_t n = 0;
  for (const auto& t : model.layers()) n += t.size();
  return n;
}

}  // namespace

CompressResult compress(const ModelBundle& model, const CompressOptions& options) {
  if (options.k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (options.b == 0 || options.b > 255) {
    throw Error(ErrorCode::kInvalidArgument, "b must be in 1..=255");
  }

  CompressResult out;
  CompressionReport& report = out.report;
  auto t0 = Clock::now();
  const BlockSet blocks = breakup(model, options.b);
  report.seconds.breakup = seconds_since(t0);
  for (auto li : blocks.skipped_layers()) report.skipped_layers.push_back(model.layers()[li].name());
  if (blocks.size() < options.k) {
    throw Error(ErrorCode::kTooFewBlocks, "K = " + std::to_string(options.k) + " but breakup produced " +
                                              std::to_string(blocks.size()) + " blocks");
  }

  t0 = Clock::now();
  KMeansParams params;
  params.k = options.k;
  params.seed = options.seed;
  params.max_iters = options.max_iters;
  params.rel_tol = options.rel_tol;
  params.threads = options.threads;
  KMeansResult km = kmeans(blocks, params);
  report.seconds.cluster = seconds_since(t0);

  t0 = Clock::now();
  CompressedModel& cm = out.model;
  cm.b = options.b;
  cm.bits_per_index = bits_for_k(options.k);
  cm.wordlength = kWordLengthBits;
  cm.codebook = std::move(km.codebook);
  cm.manifest = model.manifest();
  const auto indices = std::span<const std::uint32_t>(km.assignment.indices);
  for (const auto& grid : blocks.layer_grids()) {
    const Tensor& t = model.layers()[grid.layer_index];
    IndexStream s;
    s.layer_index = grid.layer_index;
    s.name = t.name();
    s.shape = t.shape();
    s.rows_in_blocks = grid.rows_in_blocks;
    s.cols_in_blocks = grid.cols_in_blocks;
    s.stream = pack_indices(indices.subspan(grid.first_block, grid.block_count()), cm.bits_per_index);
    cm.streams.push_back(std::move(s));
  }
  std::vector<bool> compressed(model.layers().size(), false);
  for (const auto& grid : blocks.layer_grids()) compressed[grid.layer_index] = true;
  for (std::uint32_t li = 0; li < model.layers().size(); ++li) {
    if (!compressed[li]) cm.raw_layers.push_back({li, model.layers()[li]});
  }
  const auto bytes = encode_compressed(cm);
  report.seconds.encode = seconds_since(t0);

  const CrBreakdown cr = compute_cr(cm.compressed_params(), cm.raw_params(), cm.k(), cm.b);
  report.k = cm.k();
  report.b = cm.b;
  report.bits_per_index = cm.bits_per_index;
  report.theoretical_cr = cr.theoretical_cr;
  report.predicted_bits = cr.compressed_bits;
  report.file_bytes = bytes.size();
  report.effective_cr = static_cast<double>(stored_params(model)) * kWordLengthBits /
                        (static_cast<double>(bytes.size()) * 8.0);
  report.inertia = km.assignment.inertia;
  report.iterations = km.inertia_history.size();
  report.block_count = blocks.size();
  report.p_compressed = cm.compressed_params();
  report.p_raw = cm.raw_params();
  return out;
}

ModelBundle reconstruct(const CompressedModel& cm) {
  cm.validate();
  std::vector<std::optional<Tensor>> slots(cm.layer_count());
  for (const auto& s : cm.streams) {
    const auto indices = unpack_indices(s.stream, s.block_count(), cm.bits_per_index);
    Tensor t = Tensor::zeros(s.name, s.shape, TensorRole::kWeight);
    const std::size_t cols = static_cast<std::size_t>(s.cols_in_blocks) * cm.b;
    auto out = t.mutable_data();
    for (std::size_t br = 0; br < s.rows_in_blocks; ++br) {
      for (std::size_t bc = 0; bc < s.cols_in_blocks; ++bc) {
        const auto lego = cm.codebook.lego(indices[br * s.cols_in_blocks + bc]);
        for (std::size_t r = 0; r < cm.b; ++r) {
          std::copy_n(lego.data() + r * cm.b, cm.b, out.data() + (br * cm.b + r) * cols + bc * cm.b);
        }
      }
    }
    slots[s.layer_index] = std::move(t);
  }
  for (const auto& r : cm.raw_layers) slots[r.layer_index] = r.tensor;
  std::vector<Tensor> layers;
  layers.reserve(slots.size());
  for (auto& slot : slots) layers.push_back(std::move(*slot));
  return ModelBundle(std::move(layers), cm.manifest);
}

Evaluator accuracy_evaluator(const DatasetBundle& dataset, unsigned threads) {
  return {"top1_accuracy",
          [&dataset, threads](const ModelBundle& m) { return top1_accuracy(m, dataset, threads); }};
}

Evaluator deviation_evaluator(const ModelBundle& reference, std::size_t probes,
                              std::uint64_t seed, unsigned threads) {
  auto batch = std::make_shared<Tensor>(random_probes(reference.manifest(), probes, seed));
  return {"neg_output_deviation", [&reference, batch, threads](const ModelBundle& m) {
            return -output_deviation(reference, m, *batch, threads);
          }};
}

void SearchPolicy::validate() const {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be >= 0");
  if (k_candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no K candidates");
  for (std::size_t i = 0; i < k_candidates.size(); ++i) {
    if (k_candidates[i] == 0) throw Error(ErrorCode::kInvalidArgument, "K candidates must be >= 1");
    if (i > 0 && k_candidates[i] <= k_candidates[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "K candidates must be strictly increasing");
    }
  }
}

std::vector<std::size_t> default_k_schedule() {
  std::vector<std::size_t> ks;
  for (std::size_t k = 2; k <= 256; ++k) ks.push_back(k);
  return ks;
}

namespace {

CompressionReport evaluate_candidate(const ModelBundle& model, const Evaluator& eval,
                                     double baseline, std::size_t k,
                                     const CompressOptions& base) {
  CompressOptions options = base;
  options.k = k;
  auto result = compress(model, options);
  result.report.metric_name = eval.name;
  result.report.baseline_metric = baseline;
  result.report.compressed_metric = eval.fn(reconstruct(result.model));
  return std::move(result.report);
}

std::size_t best_metric_k(const std::vector<CompressionReport>& reports) {
  const CompressionReport* best = &reports.front();
  for (const auto& r : reports) {
    if (*r.compressed_metric > *best->compressed_metric) best = &r;
  }
  return best->k;
}

// Candidates beyond the block count cannot be clustered; they are dropped.
std::vector<std::size_t> feasible(const ModelBundle& model, const std::vector<std::size_t>& ks,
                                  std::uint32_t b) {
  const std::size_t available = breakup(model, b).size();
  std::vector<std::size_t> out;
  for (auto k : ks) {
    if (k <= available) out.push_back(k);
  }
  if (out.empty()) {
    throw Error(ErrorCode::kTooFewBlocks,
                "no K candidate fits within " + std::to_string(available) + " blocks");
  }
  return out;
}

}  // namespace

SearchResult search_lego_a(const ModelBundle& model, const Evaluator& eval,
                           const std::vector<std::size_t>& k_candidates,
                           const CompressOptions& base) {
  SearchPolicy{SearchMode::kLegoA, 0.0, k_candidates}.validate();
  SearchResult out;
  out.baseline_metric = eval.fn(model);
  std::optional<std::size_t> lossless;
  for (auto k : feasible(model, k_candidates, base.b)) {
    out.reports.push_back(evaluate_candidate(model, eval, out.baseline_metric, k, base));
    if (!lossless && *out.reports.back().compressed_metric >= out.baseline_metric) lossless = k;
  }
  out.satisfied = lossless.has_value();
  out.best_k = lossless ? *lossless : best_metric_k(out.reports);
  return out;
}

SearchResult search_lego_c(const ModelBundle& model, const Evaluator& eval, double epsilon,
                           const std::vector<std::size_t>& k_schedule,
                           const CompressOptions& base) {
  SearchPolicy{SearchMode::kLegoC, epsilon, k_schedule}.validate();
  SearchResult out;
  out.baseline_metric = eval.fn(model);
  for (auto k : feasible(model, k_schedule, base.b)) {
    out.reports.push_back(evaluate_candidate(model, eval, out.baseline_metric, k, base));
    if (out.baseline_metric - *out.reports.back().compressed_metric <= epsilon) {
      out.satisfied = true;
      out.best_k = k;
      return out;
    }
  }
  out.best_k = best_metric_k(out.reports);
  return out;
}

SearchResult search(const ModelBundle& model, const Evaluator& eval, const SearchPolicy& policy,
                    const CompressOptions& base) {
  policy.validate();
  return policy.mode == SearchMode::kLegoA
             ? search_lego_a(model, eval, policy.k_candidates, base)
             : search_lego_c(model, eval, policy.epsilon, policy.k_candidates, base);
}

nlohmann::json report_to_json(const CompressionReport& r) {
  nlohmann::json j = {
      {"k", r.k},
      {"b", r.b},
      {"bits_per_index", r.bits_per_index},
      {"theoretical_cr", r.theoretical_cr},
      {"effective_cr", r.effective_cr},
      {"inertia", r.inertia},
      {"iterations", r.iterations},
      {"block_count", r.block_count},
      {"p_compressed", r.p_compressed},
      {"p_raw", r.p_raw},
      {"predicted_bits", r.predicted_bits},
      {"file_bytes", r.file_bytes},
      {"skipped_layers", r.skipped_layers},
      {"seconds",
       {{"breakup", r.seconds.breakup},
        {"cluster", r.seconds.cluster},
        {"encode", r.seconds.encode}}},
  };
  if (r.compressed_metric) {
    j["metric"] = {{"name", r.metric_name},
                   {"baseline", *r.baseline_metric},
                   {"compressed", *r.compressed_metric}};
  }
  return j;
}

nlohmann::json search_to_json(const SearchResult& result, SearchMode mode, double epsilon) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : result.reports) reports.push_back(report_to_json(r));
  nlohmann::json j = {
      {"mode", mode == SearchMode::kLegoA ? "a" : "c"},
      {"best_k", result.best_k},
      {"bits_per_index", bits_for_k(result.best_k)},
      {"baseline_metric", result.baseline_metric},
      {"reports", reports},
  };
  if (mode == SearchMode::kLegoA) {
    j["lossless"] = result.satisfied;
  } else {
    j["epsilon"] = epsilon;
    j["tolerance_met"] = result.satisfied;
  }
  return j;
}

std::string report_csv_row(const CompressionReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%u,%u,%.6g,%.9g,%.9g,%.6f", r.k, r.b, r.bits_per_index,
                r.theoretical_cr, r.compressed_metric.value_or(0.0), r.inertia, r.seconds.total());
  return buf;
}

}  // namespace legonet
