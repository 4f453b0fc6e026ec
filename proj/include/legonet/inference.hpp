#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "legonet/tensor.hpp"

namespace legonet {

// Runs the manifest's layers on one sample. The input must match the
// manifest's input shape exactly. Returns logits named "logits".
Tensor forward(const ModelBundle& model, const Tensor& input);

// Same, over a raw sample buffer; returns the flat output.
std::vector<float> forward_sample(const ModelBundle& model, std::span<const float> input);

// Logits for every sample of a [N, ...] batch, as an [N, outputs] tensor.
// Samples are independent, so `threads` never changes the result.
Tensor forward_batch(const ModelBundle& model, const Tensor& batch, unsigned threads = 1);

// argmax(logits) == label, as a percentage. Ties go to the lowest class.
double top1_accuracy(const ModelBundle& model, const DatasetBundle& dataset,
                     unsigned threads = 1);
std::size_t argmax(std::span<const float> logits);

// Mean over probes of the L2 distance between the two models' logits.
double output_deviation(const ModelBundle& a, const ModelBundle& b, const Tensor& probes,
                        unsigned threads = 1);

// `count` uniform [0, 1) inputs shaped like the manifest input, as [count, ...].
Tensor random_probes(const ArchManifest& manifest, std::size_t count, std::uint64_t seed);

}  // namespace legonet
