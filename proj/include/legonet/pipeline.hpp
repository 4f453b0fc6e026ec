#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "legonet/codec.hpp"
#include "legonet/tensor.hpp"

namespace legonet {

struct CompressOptions {
  std::size_t k = 256;
  std::uint32_t b = 4;
  std::uint64_t seed = 0;
  std::uint32_t max_iters = 100;
  double rel_tol = 1e-6;
  unsigned threads = 1;
};

struct StageSeconds {
  double breakup = 0.0;
  double cluster = 0.0;
  double encode = 0.0;

  double total() const { return breakup + cluster + encode; }
};

struct CompressionReport {
  std::size_t k = 0;
  std::uint32_t b = 0;
  unsigned bits_per_index = 0;
  double theoretical_cr = 0.0;
  // Uncompressed payload bits of every stored tensor over actual LGNC bits.
  double effective_cr = 0.0;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::size_t block_count = 0;
  std::size_t p_compressed = 0;
  std::size_t p_raw = 0;
  std::uint64_t predicted_bits = 0;
  std::size_t file_bytes = 0;
  // Weight layers left raw because b does not divide them.
  std::vector<std::string> skipped_layers;
  // Set only when an evaluator was supplied.
  std::string metric_name;
  std::optional<double> baseline_metric;
  std::optional<double> compressed_metric;
  StageSeconds seconds;
};

struct CompressResult {
  CompressedModel model;
  CompressionReport report;
};

// breakup -> kmeans -> assign -> pack -> LGNC assembly. Deterministic for a
// fixed (model, options); threads never changes the output.
CompressResult compress(const ModelBundle& model, const CompressOptions& options);

// Dense model with every compressed block replaced by its lego.
ModelBundle reconstruct(const CompressedModel& cm);

// Higher is better.
using EvalFn = std::function<double(const ModelBundle&)>;

struct Evaluator {
  std::string name;
  EvalFn fn;
};

// Top-1 accuracy in percent on the dataset. Holds a reference to dataset.
Evaluator accuracy_evaluator(const DatasetBundle& dataset, unsigned threads = 1);

// Negative mean logit deviation from `reference` over `probes` seeded
// uniform inputs. The reference scores exactly 0. Holds a reference to it.
Evaluator deviation_evaluator(const ModelBundle& reference, std::size_t probes = 128,
                              std::uint64_t seed = 0, unsigned threads = 1);

enum class SearchMode { kLegoA, kLegoC };

struct SearchPolicy {
  SearchMode mode = SearchMode::kLegoA;
  double epsilon = 0.0;
  std::vector<std::size_t> k_candidates;

  void validate() const;
};

// 2, 3, ..., 256.
std::vector<std::size_t> default_k_schedule();

struct SearchResult {
  std::size_t best_k = 0;
  // false means NotLossless (mode a) or ToleranceUnmet (mode c).
  bool satisfied = false;
  double baseline_metric = 0.0;
  std::vector<CompressionReport> reports;
};

// Smallest candidate whose metric is >= the uncompressed baseline; if none
// qualifies, the best-metric candidate with satisfied = false. Every
// candidate is evaluated and reported.
SearchResult search_lego_a(const ModelBundle& model, const Evaluator& eval,
                           const std::vector<std::size_t>& k_candidates,
                           const CompressOptions& base);

// Walks the schedule in order and stops at the first K whose metric loss
// against the baseline is <= epsilon. Exhaustion returns the best-metric K.
SearchResult search_lego_c(const ModelBundle& model, const Evaluator& eval, double epsilon,
                           const std::vector<std::size_t>& k_schedule,
                           const CompressOptions& base);

SearchResult search(const ModelBundle& model, const Evaluator& eval, const SearchPolicy& policy,
                    const CompressOptions& base);

nlohmann::json report_to_json(const CompressionReport& report);
nlohmann::json search_to_json(const SearchResult& result, SearchMode mode, double epsilon);

inline constexpr const char* kSweepCsvHeader = "k,b,bits,theoretical_cr,metric,inertia,seconds";
std::string report_csv_row(const CompressionReport& report);

}  // namespace legonet
