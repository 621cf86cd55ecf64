#pragma once

// Residual channel-attention SR network mapping C x 16 x 16 transformed LR
// stacks to a 1 x 64 x 64 transformed HR estimate:
//
//   head conv (C -> F)
//   B blocks:  x + gate(conv(relu(conv(x))))
//              gate = sigmoid(W2 relu(W1 avgpool + b1) + b2), per channel
//   long skip: head + body
//   2 x { conv F -> 4F, depth-to-space x2 }
//   tail conv (F -> 1)
//
// All parameters live in one flat vector; ParamLayout names the slices.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbsr/tensor.hpp"

namespace mbsr {

struct MisrSample;

struct SrModelConfig {
  std::size_t in_channels = 1;
  std::size_t features = 32;
  std::size_t blocks = 5;
  std::size_t reduction = 8;
  std::size_t scale = 4;

  void validate() const;
  std::size_t squeezed() const { return features / reduction; }
  bool operator==(const SrModelConfig&) const = default;
};

struct ParamSlot {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::vector<std::size_t> shape;
};

class ParamLayout {
 public:
  explicit ParamLayout(const SrModelConfig& config);

  const std::vector<ParamSlot>& slots() const { return slots_; }
  const ParamSlot& slot(std::string_view name) const;
  std::size_t total() const { return total_; }

 private:
  void add(std::string name, std::vector<std::size_t> shape);

  std::vector<ParamSlot> slots_;
  std::size_t total_ = 0;
};

/// Closed-form parameter count, independent of ParamLayout.
std::size_t parameter_count(const SrModelConfig& config);

template <typename T>
class SrModel {
 public:
  SrModel() : SrModel(SrModelConfig{}) {}
  explicit SrModel(const SrModelConfig& config)
      : config_((config.validate(), config)), layout_(config_), params_(layout_.total(), T{}) {}

  const SrModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  std::span<T> param(std::string_view name) {
    const auto& s = layout_.slot(name);
    return {params_.data() + s.offset, s.size};
  }
  std::span<const T> param(std::string_view name) const {
    const auto& s = layout_.slot(name);
    return {params_.data() + s.offset, s.size};
  }

  template <typename U>
  SrModel<U> cast() const {
    SrModel<U> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = static_cast<U>(params_[i]);
    return out;
  }

 private:
  SrModelConfig config_;
  ParamLayout layout_;
  std::vector<T> params_;
};

/// Conv and dense weights ~ U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)) drawn in
/// layout order from SplitMix64(seed); biases zero; the gate's excitation
/// weights scaled by 0.1.
template <typename T>
SrModel<T> init_model(const SrModelConfig& config, std::uint64_t seed);

template <typename T>
struct BlockCache {
  Tensor<T> in, a1, z1, a2;
  std::vector<T> pooled, d1, e1, gate;  // (F or F/r) x N, channel-major
};

/// Intermediate activations kept for the backward pass.
template <typename T>
struct ForwardCache {
  Tensor<T> input, head;
  std::vector<BlockCache<T>> blocks;
  Tensor<T> body, p1, p2, output;
};

/// Raw (unclamped) network output, 1 x N x 4H x 4W.
template <typename T>
Tensor<T> forward(const SrModel<T>& model, const Tensor<T>& input, ForwardCache<T>* cache = nullptr);

/// forward() clamped to [0, 1].
template <typename T>
Tensor<T> infer(const SrModel<T>& model, const Tensor<T>& input);

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  std::vector<T> grad;  // same layout as the parameters
};

/// Mean absolute error of the unclamped output against target, with the
/// gradient with respect to every parameter.
template <typename T>
LossAndGrad<T> loss_and_gradients(const SrModel<T>& model, const Tensor<T>& input, const Tensor<T>& target,
                                  ForwardCache<T>* cache = nullptr);

/// Mean absolute error only (no gradients).
template <typename T>
double l1_loss(const Tensor<T>& output, const Tensor<T>& target);

/// C x N x 16 x 16 input stack for the given sample positions.
template <typename T>
Tensor<T> make_input_batch(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices);

/// 1 x N x 64 x 64 target stack.
template <typename T>
Tensor<T> make_target_batch(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices);

}  // namespace mbsr
