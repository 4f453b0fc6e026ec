// legonet: command-line front end for block-clustering compression.
//
// Exit codes: 0 success, 2 invalid arguments or data, 3 file I/O or
// container decoding failure. Results go to stdout (JSON, or CSV for sweep);
// diagnostics go to stderr.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "legonet/codec.hpp"
#include "legonet/container.hpp"
#include "legonet/detail/byte_io.hpp"
#include "legonet/error.hpp"
#include "legonet/inference.hpp"
#include "legonet/pipeline.hpp"

namespace {

using legonet::ErrorCode;

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure:
    case ErrorCode::kBadMagic:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kTruncatedFile:
    case ErrorCode::kTrailingData:
      return kExitIo;
    default:
      return kExitValidation;
  }
}

struct KMeansFlags {
  std::uint32_t b = 4;
  std::uint64_t seed = 0;
  std::uint32_t max_iters = 100;
  double tol = 1e-6;
  unsigned threads = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-b,--b", b, "Lego side length b (blocks are b x b)")->capture_default_str();
    cmd->add_option("--seed", seed, "k-means++ seed")->capture_default_str();
    cmd->add_option("--max-iters", max_iters, "Lloyd iteration cap")->capture_default_str();
    cmd->add_option("--tol", tol, "relative inertia improvement to stop at")->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads")->capture_default_str();
  }

  legonet::CompressOptions options(std::size_t k) const {
    legonet::CompressOptions o;
    o.k = k;
    o.b = b;
    o.seed = seed;
    o.max_iters = max_iters;
    o.rel_tol = tol;
    o.threads = threads;
    return o;
  }

  void validate() const {
    if (b == 0 || b > 255) throw legonet::Error(ErrorCode::kInvalidArgument, "--b must be in 1..=255");
    if (max_iters == 0) throw legonet::Error(ErrorCode::kInvalidArgument, "--max-iters must be >= 1");
    if (!(tol >= 0.0)) throw legonet::Error(ErrorCode::kInvalidArgument, "--tol must be >= 0");
    if (threads == 0) throw legonet::Error(ErrorCode::kInvalidArgument, "--threads must be >= 1");
  }
};

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw legonet::Error(ErrorCode::kInvalidArgument, "--k-list entry '" + item + "' is not a positive integer");
    }
  }
  if (ks.empty()) throw legonet::Error(ErrorCode::kInvalidArgument, "--k-list is empty");
  return ks;
}

bool has_magic(const std::string& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw legonet::Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  char buf[4] = {};
  in.read(buf, 4);
  return in.gcount() == 4 && std::string_view(buf, 4) == magic;
}

// Accepts either an LGTW model or an LGNC compressed model.
legonet::ModelBundle load_any_model(const std::string& path) {
  if (has_magic(path, "LGNC")) return legonet::reconstruct(legonet::read_compressed(path));
  return legonet::read_model(path);
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

void warn_skipped(const legonet::CompressionReport& report) {
  for (const auto& name : report.skipped_layers) {
    std::cerr << "warning: layer '" << name << "' is not divisible into " << report.b << "x"
              << report.b << " blocks; stored raw\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"legonet: compress trained networks by clustering b x b weight blocks"};
  app.require_subcommand(1);

  // compress
  std::string model_path, out_path, dataset_path, lgnc_path;
  std::size_t k = 0;
  KMeansFlags km;
  auto* compress_cmd = app.add_subcommand("compress", "cluster blocks and write an LGNC file");
  compress_cmd->add_option("model", model_path, "input LGTW model")->required();
  compress_cmd->add_option("out", out_path, "output LGNC path")->required();
  compress_cmd->add_option("-K,--k", k, "number of Legos K")->required();
  km.add_to(compress_cmd);

  // decompress
  auto* decompress_cmd = app.add_subcommand("decompress", "rebuild a dense LGTW model from LGNC");
  decompress_cmd->add_option("lgnc", lgnc_path, "input LGNC")->required();
  decompress_cmd->add_option("out", out_path, "output LGTW path")->required();

  // eval
  unsigned eval_threads = 1;
  auto* eval_cmd = app.add_subcommand("eval", "top-1 accuracy of an LGTW or LGNC model");
  eval_cmd->add_option("model", model_path, "LGTW or LGNC model")->required();
  eval_cmd->add_option("dataset", dataset_path, "LGTD dataset")->required();
  eval_cmd->add_option("--threads", eval_threads, "worker threads")->capture_default_str();

  // sweep
  std::string k_list = "4,8,16,32,64,128,256";
  std::string csv_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "metric versus K, one CSV row per K");
  sweep_cmd->add_option("model", model_path, "input LGTW model")->required();
  sweep_cmd->add_option("dataset", dataset_path, "LGTD dataset (omit for data-free deviation)");
  sweep_cmd->add_option("--k-list", k_list, "comma-separated K values")->capture_default_str();
  sweep_cmd->add_option("--csv", csv_path, "also write the CSV to this file");
  km.add_to(sweep_cmd);

  // search
  std::string mode = "a";
  double epsilon = 0.0;
  std::string search_k_list;
  auto* search_cmd = app.add_subcommand("search", "pick K by the lossless (a) or tolerance (c) policy");
  search_cmd->add_option("model", model_path, "input LGTW model")->required();
  search_cmd->add_option("dataset", dataset_path, "LGTD dataset (omit for data-free deviation)");
  search_cmd->add_option("--mode", mode, "a: smallest lossless K, c: smallest K within epsilon")
      ->check(CLI::IsMember({"a", "c"}))
      ->capture_default_str();
  search_cmd->add_option("--epsilon", epsilon, "tolerated metric loss (accuracy points) for mode c")
      ->capture_default_str();
  search_cmd->add_option("--k-list", search_k_list,
                         "candidates; default 2,4,...,256 for a and 2,3,...,256 for c");
  km.add_to(search_cmd);

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "describe an LGNC file");
  stats_cmd->add_option("lgnc", lgnc_path, "input LGNC")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*compress_cmd) {
      km.validate();
      if (k == 0) throw legonet::Error(ErrorCode::kInvalidArgument, "--k must be >= 1 (K = 0 Legos)");
      const auto model = legonet::read_model(model_path);
      auto result = legonet::compress(model, km.options(k));
      warn_skipped(result.report);
      legonet::write_compressed(result.model, out_path);
      print_json(legonet::report_to_json(result.report));
    } else if (*decompress_cmd) {
      const auto model = legonet::reconstruct(legonet::read_compressed(lgnc_path));
      legonet::write_model(model, out_path);
      print_json({{"layers", model.layers().size()},
                  {"params", legonet::model_param_count(model)},
                  {"out", out_path}});
    } else if (*eval_cmd) {
      if (eval_threads == 0) throw legonet::Error(ErrorCode::kInvalidArgument, "--threads must be >= 1");
      const auto model = load_any_model(model_path);
      const auto dataset = legonet::read_dataset(dataset_path);
      const double acc = legonet::top1_accuracy(model, dataset, eval_threads);
      print_json({{"top1_accuracy", acc}, {"count", dataset.count()}});
    } else if (*sweep_cmd) {
      km.validate();
      const auto ks = parse_k_list(k_list);
      const auto model = legonet::read_model(model_path);
      std::optional<legonet::DatasetBundle> dataset;
      if (!dataset_path.empty()) dataset = legonet::read_dataset(dataset_path);
      const auto eval = dataset ? legonet::accuracy_evaluator(*dataset, km.threads)
                                : legonet::deviation_evaluator(model, 128, km.seed, km.threads);
      const double baseline = eval.fn(model);
      std::cerr << "baseline " << eval.name << " = " << baseline << '\n';
      std::ostringstream csv;
      csv << legonet::kSweepCsvHeader << '\n';
      for (auto kk : ks) {
        auto result = legonet::compress(model, km.options(kk));
        if (kk == ks.front()) warn_skipped(result.report);
        result.report.baseline_metric = baseline;
        result.report.compressed_metric = eval.fn(legonet::reconstruct(result.model));
        csv << legonet::report_csv_row(result.report) << '\n';
      }
      std::cout << csv.str();
      if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        if (!(f << csv.str())) throw legonet::Error(ErrorCode::kIoFailure, "cannot write '" + csv_path + "'");
      }
    } else if (*search_cmd) {
      km.validate();
      legonet::SearchPolicy policy;
      policy.mode = mode == "a" ? legonet::SearchMode::kLegoA : legonet::SearchMode::kLegoC;
      policy.epsilon = epsilon;
      if (!search_k_list.empty()) {
        policy.k_candidates = parse_k_list(search_k_list);
      } else if (policy.mode == legonet::SearchMode::kLegoA) {
        policy.k_candidates = {2, 4, 8, 16, 32, 64, 128, 256};
      } else {
        policy.k_candidates = legonet::default_k_schedule();
      }
      const auto model = legonet::read_model(model_path);
      std::optional<legonet::DatasetBundle> dataset;
      if (!dataset_path.empty()) dataset = legonet::read_dataset(dataset_path);
      const auto eval = dataset ? legonet::accuracy_evaluator(*dataset, km.threads)
                                : legonet::deviation_evaluator(model, 128, km.seed, km.threads);
      const auto result = legonet::search(model, eval, policy, km.options(policy.k_candidates.front()));
      if (!result.reports.empty()) warn_skipped(result.reports.front());
      print_json(legonet::search_to_json(result, policy.mode, policy.epsilon));
    } else if (*stats_cmd) {
      const auto bytes = legonet::detail::read_file(lgnc_path);
      const auto cm = legonet::decode_compressed(bytes);
      const auto cr = legonet::compute_cr(cm.compressed_params(), cm.raw_params(), cm.k(), cm.b,
                                          cm.wordlength);
      const double stored_bits =
          static_cast<double>(cm.compressed_params() + cm.raw_params()) * cm.wordlength;
      print_json({
          {"k", cm.k()},
          {"b", cm.b},
          {"bits_per_index", cm.bits_per_index},
          {"wordlength", cm.wordlength},
          {"theoretical_cr", cr.theoretical_cr},
          {"effective_cr", stored_bits / (static_cast<double>(bytes.size()) * 8.0)},
          {"codebook_bytes", cr.codebook_bits / 8},
          {"predicted_bytes", (cr.compressed_bits + 7) / 8},
          {"file_bytes", bytes.size()},
          {"block_count", cm.block_count()},
          {"compressed_layers", cm.streams.size()},
          {"raw_layers", cm.raw_layers.size()},
      });
    }
  } catch (const legonet::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
