#include "legonet/inference.hpp"

#include <algorithm>
#include <cmath>

#include "legonet/detail/parallel.hpp"
#include "legonet/error.hpp"
#include "legonet/rng.hpp"

namespace legonet {

namespace {

struct Activation {
  Shape shape;
  std::vector<float> values;
};

[[noreturn]] void shape_error(std::size_t layer, const std::string& what, const Shape& got) {
  throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(layer) + ": " + what +
                                             ", got input " + shape_to_string(got));
}

std::span<const float> bias_or_empty(const ModelBundle& model, const std::string& name) {
  if (name.empty()) return {};
  return model.find(name)->data();
}

Activation dense(const ModelBundle& model, const LayerSpec& spec, std::size_t layer,
                 const Activation& x) {
  if (x.shape.size() != 1 || x.shape[0] != spec.in_features) {
    shape_error(layer, "dense expects [" + std::to_string(spec.in_features) + "]", x.shape);
  }
  const auto w = model.find(spec.weight)->data();
  const auto bias = bias_or_empty(model, spec.bias);
  Activation y{{spec.out_features}, std::vector<float>(spec.out_features)};
  for (std::size_t o = 0; o < spec.out_features; ++o) {
    const float* row = w.data() + o * spec.in_features;
    float acc = 0.0f;
    for (std::size_t i = 0; i < spec.in_features; ++i) acc += row[i] * x.values[i];
    y.values[o] = acc + (bias.empty() ? 0.0f : bias[o]);
  }
  return y;
}

Activation conv2d(const ModelBundle& model, const LayerSpec& spec, std::size_t layer,
                  const Activation& x) {
  if (x.shape.size() != 3 || x.shape[0] != spec.in_channels) {
    shape_error(layer, "conv2d expects [" + std::to_string(spec.in_channels) + ", H, W]",
                x.shape);
  }
  const long h = x.shape[1], wdt = x.shape[2];
  const long kh = spec.kernel_h, kw = spec.kernel_w;
  const long s = spec.stride, p = spec.padding;
  if (h + 2 * p < kh || wdt + 2 * p < kw) shape_error(layer, "conv2d kernel larger than input", x.shape);
  const long oh = (h + 2 * p - kh) / s + 1;
  const long ow = (wdt + 2 * p - kw) / s + 1;

  const auto w = model.find(spec.weight)->data();
  const auto bias = bias_or_empty(model, spec.bias);
  Activation y{{spec.out_channels, static_cast<std::uint32_t>(oh), static_cast<std::uint32_t>(ow)},
               std::vector<float>(static_cast<std::size_t>(spec.out_channels * oh * ow))};

  // Per output element the sum runs over (in channel, ky, kx) in that order.
  for (long oc = 0; oc < spec.out_channels; ++oc) {
    float* out = y.values.data() + oc * oh * ow;
    std::fill(out, out + oh * ow, 0.0f);
    for (long ic = 0; ic < spec.in_channels; ++ic) {
      const float* in = x.values.data() + ic * h * wdt;
      const float* kernel = w.data() + ((oc * spec.in_channels + ic) * kh) * kw;
      for (long ky = 0; ky < kh; ++ky) {
        for (long kx = 0; kx < kw; ++kx) {
          const float wv = kernel[ky * kw + kx];
          for (long oy = 0; oy < oh; ++oy) {
            const long iy = oy * s + ky - p;
            if (iy < 0 || iy >= h) continue;
            const float* in_row = in + iy * wdt;
            float* out_row = out + oy * ow;
            if (s == 1) {
              const long lo = std::max(0L, p - kx);
              const long hi = std::min(ow, wdt + p - kx);
              for (long ox = lo; ox < hi; ++ox) out_row[ox] += wv * in_row[ox + kx - p];
            } else {
              for (long ox = 0; ox < ow; ++ox) {
                const long ix = ox * s + kx - p;
                if (ix >= 0 && ix < wdt) out_row[ox] += wv * in_row[ix];
              }
            }
          }
        }
      }
    }
    if (!bias.empty()) {
      for (long i = 0; i < oh * ow; ++i) out[i] += bias[static_cast<std::size_t>(oc)];
    }
  }
  return y;
}

Activation maxpool2d(const LayerSpec& spec, std::size_t layer, const Activation& x) {
  if (x.shape.size() != 3) shape_error(layer, "maxpool2d expects [C, H, W]", x.shape);
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  const std::size_t k = spec.kernel_h, s = spec.stride;
  if (h < k || w < k) shape_error(layer, "maxpool2d window larger than input", x.shape);
  const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
  Activation y{{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(oh),
                static_cast<std::uint32_t>(ow)},
               std::vector<float>(c * oh * ow)};
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* in = x.values.data() + ch * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float m = in[(oy * s) * w + ox * s];
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            m = std::max(m, in[(oy * s + dy) * w + ox * s + dx]);
          }
        }
        y.values[(ch * oh + oy) * ow + ox] = m;
      }
    }
  }
  return y;
}

Activation run(const ModelBundle& model, Activation x) {
  const auto& layers = model.manifest().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    switch (spec.kind) {
      case LayerKind::kDense:
        x = dense(model, spec, i, x);
        break;
      case LayerKind::kConv2d:
        x = conv2d(model, spec, i, x);
        break;
      case LayerKind::kRelu:
        for (auto& v : x.values) v = std::max(v, 0.0f);
        break;
      case LayerKind::kMaxPool2d:
        x = maxpool2d(spec, i, x);
        break;
      case LayerKind::kFlatten:
        x.shape = {static_cast<std::uint32_t>(x.values.size())};
        break;
    }
  }
  return x;
}

void check_runnable(const ModelBundle& model) {
  if (model.manifest().input_shape.empty() || model.manifest().layers.empty()) {
    throw Error(ErrorCode::kBadManifest, "model has no architecture manifest to run");
  }
}

Shape batch_sample_shape(const Tensor& batch) {
  if (batch.rank() < 2) {
    throw Error(ErrorCode::kShapeMismatch, "batch must be [N, ...], got " +
                                               shape_to_string(batch.shape()));
  }
  return Shape(batch.shape().begin() + 1, batch.shape().end());
}

}  // namespace

std::vector<float> forward_sample(const ModelBundle& model, std::span<const float> input) {
  check_runnable(model);
  const Shape& in_shape = model.manifest().input_shape;
  if (input.size() != shape_elements(in_shape)) {
    throw Error(ErrorCode::kShapeMismatch,
                "input has " + std::to_string(input.size()) + " elements, model expects " +
                    shape_to_string(in_shape));
  }
  return run(model, {in_shape, std::vector<float>(input.begin(), input.end())}).values;
}

Tensor forward(const ModelBundle& model, const Tensor& input) {
  check_runnable(model);
  if (input.shape() != model.manifest().input_shape) {
    throw Error(ErrorCode::kShapeMismatch,
                "input " + shape_to_string(input.shape()) + ", model expects " +
                    shape_to_string(model.manifest().input_shape));
  }
  auto out = run(model, {input.shape(), std::vector<float>(input.data().begin(), input.data().end())});
  return Tensor("logits", std::move(out.shape), std::move(out.values), TensorRole::kOther);
}

Tensor forward_batch(const ModelBundle& model, const Tensor& batch, unsigned threads) {
  check_runnable(model);
  if (batch_sample_shape(batch) != model.manifest().input_shape) {
    throw Error(ErrorCode::kShapeMismatch,
                "batch " + shape_to_string(batch.shape()) + ", model expects [N] + " +
                    shape_to_string(model.manifest().input_shape));
  }
  const std::size_t n = batch.shape()[0];
  const std::size_t stride = batch.size() / n;
  std::vector<std::vector<float>> outputs(n);
  detail::parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      outputs[i] = forward_sample(model, batch.data().subspan(i * stride, stride));
    }
  });
  const std::size_t width = outputs.front().size();
  std::vector<float> flat;
  flat.reserve(n * width);
  for (const auto& o : outputs) flat.insert(flat.end(), o.begin(), o.end());
  return Tensor("logits", {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(width)},
                std::move(flat), TensorRole::kOther);
}

std::size_t argmax(std::span<const float> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

double top1_accuracy(const ModelBundle& model, const DatasetBundle& dataset, unsigned threads) {
  const Tensor logits = forward_batch(model, dataset.inputs(), threads);
  const std::size_t width = logits.shape()[1];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.count(); ++i) {
    if (argmax(logits.data().subspan(i * width, width)) == dataset.labels()[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(dataset.count());
}

double output_deviation(const ModelBundle& a, const ModelBundle& b, const Tensor& probes,
                        unsigned threads) {
  if (a.manifest() != b.manifest()) {
    throw Error(ErrorCode::kShapeMismatch, "models have different manifests");
  }
  const Tensor la = forward_batch(a, probes, threads);
  const Tensor lb = forward_batch(b, probes, threads);
  const std::size_t n = la.shape()[0];
  const std::size_t width = la.shape()[1];
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double d = static_cast<double>(la.data()[i * width + j]) - lb.data()[i * width + j];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(n);
}

Tensor random_probes(const ArchManifest& manifest, std::size_t count, std::uint64_t seed) {
  if (manifest.input_shape.empty() || count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "probes need an input shape and count >= 1");
  }
  Shape shape{static_cast<std::uint32_t>(count)};
  shape.insert(shape.end(), manifest.input_shape.begin(), manifest.input_shape.end());
  std::vector<float> data(shape_elements(shape));
  Xoshiro256 rng(seed);
  for (auto& v : data) v = static_cast<float>(rng.uniform());
  return Tensor("probes", std::move(shape), std::move(data), TensorRole::kOther);
}

}  // namespace legonet
