#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "legonet/tensor.hpp"

namespace legonet {

inline constexpr std::uint16_t kLgtwVersion = 1;
inline constexpr std::uint16_t kLgtdVersion = 1;

// LGTW: raw-weights container. Encoding is canonical, so equal bundles
// always produce identical bytes.
std::vector<std::uint8_t> encode_model(const ModelBundle& model);
ModelBundle decode_model(std::span<const std::uint8_t> bytes);

ModelBundle read_model(const std::filesystem::path& path);
void write_model(const ModelBundle& model, const std::filesystem::path& path);

// LGTD: evaluation dataset container.
std::vector<std::uint8_t> encode_dataset(const DatasetBundle& dataset);
DatasetBundle decode_dataset(std::span<const std::uint8_t> bytes);

DatasetBundle read_dataset(const std::filesystem::path& path);
void write_dataset(const DatasetBundle& dataset, const std::filesystem::path& path);

}  // namespace legonet
