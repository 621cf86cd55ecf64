#include "mbsr/model.hpp"

#include <algorithm>
#include <cmath>

#include "mbsr/dataset.hpp"
#include "mbsr/kernels.hpp"
#include "mbsr/patch.hpp"
#include "mbsr/rng.hpp"

namespace mbsr {

void SrModelConfig::validate() const {
  if (in_channels < 1) throw Error("model needs at least one input channel");
  if (features < 1 || reduction < 1 || features % reduction != 0)
    throw Error("features (" + std::to_string(features) + ") must be a positive multiple of reduction (" +
                std::to_string(reduction) + ")");
  if (scale != 4) throw Error("only scale 4 (two x2 sub-pixel stages) is supported");
}

ParamLayout::ParamLayout(const SrModelConfig& cfg) {
  cfg.validate();
  const std::size_t f = cfg.features, s = cfg.squeezed();
  add("head.weight", {f, cfg.in_channels, 3, 3});
  add("head.bias", {f});
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    add(p + "conv1.weight", {f, f, 3, 3});
    add(p + "conv1.bias", {f});
    add(p + "conv2.weight", {f, f, 3, 3});
    add(p + "conv2.bias", {f});
    add(p + "gate.squeeze.weight", {s, f});
    add(p + "gate.squeeze.bias", {s});
    add(p + "gate.excite.weight", {f, s});
    add(p + "gate.excite.bias", {f});
  }
  for (std::size_t u = 0; u < 2; ++u) {
    const std::string p = "up" + std::to_string(u) + ".";
    add(p + "weight", {4 * f, f, 3, 3});
    add(p + "bias", {4 * f});
  }
  add("tail.weight", {1, f, 3, 3});
  add("tail.bias", {1});
}

void ParamLayout::add(std::string name, std::vector<std::size_t> shape) {
  std::size_t size = 1;
  for (auto d : shape) size *= d;
  slots_.push_back({std::move(name), total_, size, std::move(shape)});
  total_ += size;
}

const ParamSlot& ParamLayout::slot(std::string_view name) const {
  for (const auto& s : slots_)
    if (s.name == name) return s;
  throw Error("no parameter named '" + std::string(name) + "'");
}

std::size_t parameter_count(const SrModelConfig& c) {
  const std::size_t f = c.features, s = c.features / c.reduction;
  const std::size_t head = c.in_channels * f * 9 + f;
  const std::size_t block = 2 * (f * f * 9 + f) + (s * f + s) + (f * s + f);
  const std::size_t up = 2 * (4 * f * f * 9 + 4 * f);
  const std::size_t tail = f * 9 + 1;
  return head + c.blocks * block + up + tail;
}

template <typename T>
SrModel<T> init_model(const SrModelConfig& config, std::uint64_t seed) {
  SrModel<T> model(config);
  SplitMix64 rng(seed);
  for (const auto& slot : model.layout().slots()) {
    auto values = model.param(slot.name);
    if (slot.name.ends_with(".bias")) {
      std::fill(values.begin(), values.end(), T{});
      continue;
    }
    const double fan_in = static_cast<double>(slot.size / slot.shape[0]);
    const double bound = std::sqrt(6.0 / fan_in);
    const double gain = slot.name.ends_with("gate.excite.weight") ? 0.1 : 1.0;
    for (auto& v : values) v = static_cast<T>(gain * rng.uniform(-bound, bound));
  }
  return model;
}

namespace {

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

// out[j][n] = sum_i w[j][i] in[i][n] + b[j]
template <typename T>
std::vector<T> dense(std::span<const T> w, std::span<const T> b, const std::vector<T>& in, std::size_t n_in,
                     std::size_t n_out, std::size_t batch) {
  std::vector<T> out(n_out * batch);
  for (std::size_t j = 0; j < n_out; ++j)
    for (std::size_t n = 0; n < batch; ++n) {
      T s = b[j];
      for (std::size_t i = 0; i < n_in; ++i) s += w[j * n_in + i] * in[i * batch + n];
      out[j * batch + n] = s;
    }
  return out;
}

// Accumulates weight/bias gradients of dense(); returns gradient w.r.t. input.
template <typename T>
std::vector<T> dense_backward(std::span<const T> w, const std::vector<T>& in, const std::vector<T>& grad_out,
                              std::span<T> grad_w, std::span<T> grad_b, std::size_t n_in, std::size_t n_out,
                              std::size_t batch) {
  std::vector<T> grad_in(n_in * batch, T{});
  for (std::size_t j = 0; j < n_out; ++j)
    for (std::size_t n = 0; n < batch; ++n) {
      const T g = grad_out[j * batch + n];
      grad_b[j] += g;
      for (std::size_t i = 0; i < n_in; ++i) {
        grad_w[j * n_in + i] += g * in[i * batch + n];
        grad_in[i * batch + n] += g * w[j * n_in + i];
      }
    }
  return grad_in;
}

template <typename T>
void conv(const SrModel<T>& m, const std::string& prefix, const Tensor<T>& in, Tensor<T>& out, std::vector<T>& col) {
  const auto w = m.param(prefix + "weight");
  kernels::conv3x3_forward<T>(in, w, m.param(prefix + "bias"), m.layout().slot(prefix + "weight").shape[0], out, col);
}

template <typename T>
std::span<T> grad_slice(const SrModel<T>& m, std::vector<T>& grad, const std::string& name) {
  const auto& s = m.layout().slot(name);
  return {grad.data() + s.offset, s.size};
}

}  // namespace

template <typename T>
Tensor<T> forward(const SrModel<T>& m, const Tensor<T>& x, ForwardCache<T>* cache) {
  const auto& cfg = m.config();
  if (x.c != cfg.in_channels)
    throw Error("input has " + std::to_string(x.c) + " channels, model expects " + std::to_string(cfg.in_channels));
  if (x.n == 0 || x.h == 0 || x.w == 0) throw Error("empty input batch");
  for (const T v : x.data)
    if (!std::isfinite(v)) throw Error("non-finite value in model input");

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  std::vector<T> col;
  const std::size_t f = cfg.features, s = cfg.squeezed(), batch = x.n;

  c.input = x;
  conv(m, "head.", x, c.head, col);
  Tensor<T> r = c.head;
  c.blocks.assign(cfg.blocks, {});
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockCache<T>& bc = c.blocks[b];
    bc.in = r;
    conv(m, p + "conv1.", r, bc.a1, col);
    bc.z1 = bc.a1;
    for (auto& v : bc.z1.data) v = std::max(v, T{0});
    conv(m, p + "conv2.", bc.z1, bc.a2, col);

    const std::size_t plane = bc.a2.plane();
    bc.pooled.assign(f * batch, T{});
    for (std::size_t ci = 0; ci < f; ++ci)
      for (std::size_t n = 0; n < batch; ++n) {
        const T* a = &bc.a2.at(ci, n, 0, 0);
        T sum{};
        for (std::size_t i = 0; i < plane; ++i) sum += a[i];
        bc.pooled[ci * batch + n] = sum / static_cast<T>(plane);
      }
    bc.d1 = dense<T>(m.param(p + "gate.squeeze.weight"), m.param(p + "gate.squeeze.bias"), bc.pooled, f, s, batch);
    bc.e1 = bc.d1;
    for (auto& v : bc.e1) v = std::max(v, T{0});
    bc.gate = dense<T>(m.param(p + "gate.excite.weight"), m.param(p + "gate.excite.bias"), bc.e1, s, f, batch);
    for (auto& v : bc.gate) v = sigmoid(v);

    for (std::size_t ci = 0; ci < f; ++ci)
      for (std::size_t n = 0; n < batch; ++n) {
        const T g = bc.gate[ci * batch + n];
        T* out = &r.at(ci, n, 0, 0);
        const T* a = &bc.a2.at(ci, n, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) out[i] += g * a[i];
      }
  }
  c.body = std::move(r);
  for (std::size_t i = 0; i < c.body.size(); ++i) c.body.data[i] += c.head.data[i];

  Tensor<T> u;
  conv(m, "up0.", c.body, u, col);
  c.p1 = kernels::depth_to_space(u, 2);
  conv(m, "up1.", c.p1, u, col);
  c.p2 = kernels::depth_to_space(u, 2);
  conv(m, "tail.", c.p2, c.output, col);
  return c.output;
}

template <typename T>
Tensor<T> infer(const SrModel<T>& model, const Tensor<T>& input) {
  Tensor<T> y = forward(model, input);
  for (auto& v : y.data) v = std::clamp(v, T{0}, T{1});
  return y;
}

template <typename T>
double l1_loss(const Tensor<T>& y, const Tensor<T>& t) {
  if (!y.same_shape(t)) throw Error("loss: output and target shapes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(static_cast<double>(y.data[i]) - t.data[i]);
  return sum / static_cast<double>(y.size());
}

template <typename T>
LossAndGrad<T> loss_and_gradients(const SrModel<T>& m, const Tensor<T>& x, const Tensor<T>& target,
                                  ForwardCache<T>* cache) {
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  const Tensor<T>& y = forward(m, x, &c);
  if (!y.same_shape(target)) throw Error("target shape does not match model output");

  LossAndGrad<T> res;
  res.loss = l1_loss(y, target);
  if (!std::isfinite(res.loss)) {
    for (std::size_t n = 0; n < y.n; ++n)
      for (std::size_t i = 0; i < y.plane(); ++i)
        if (!std::isfinite(y.data[n * y.plane() + i]))
          throw Error("non-finite loss: output of batch sample " + std::to_string(n) + " is not finite");
    throw Error("non-finite loss");
  }
  res.grad.assign(m.params().size(), T{});
  auto& grad = res.grad;
  const auto& cfg = m.config();
  const std::size_t f = cfg.features, s = cfg.squeezed(), batch = x.n;
  std::vector<T> col;

  Tensor<T> dy(y.c, y.n, y.h, y.w);
  const T scale = T{1} / static_cast<T>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T d = y.data[i] - target.data[i];
    dy.data[i] = d > 0 ? scale : (d < 0 ? -scale : T{0});
  }

  Tensor<T> dp2, dp1, dbody;
  kernels::conv3x3_backward<T>(c.p2, dy, m.param("tail.weight"), grad_slice(m, grad, "tail.weight"),
                               grad_slice(m, grad, "tail.bias"), &dp2, col);
  kernels::conv3x3_backward<T>(c.p1, kernels::space_to_depth(dp2, 2), m.param("up1.weight"),
                               grad_slice(m, grad, "up1.weight"), grad_slice(m, grad, "up1.bias"), &dp1, col);
  kernels::conv3x3_backward<T>(c.body, kernels::space_to_depth(dp1, 2), m.param("up0.weight"),
                               grad_slice(m, grad, "up0.weight"), grad_slice(m, grad, "up0.bias"), &dbody, col);

  // body = head + blocks(head): the long skip feeds dbody straight to head.
  Tensor<T> dr = dbody;
  Tensor<T> da2, dz1, dconv;
  for (std::size_t bi = cfg.blocks; bi-- > 0;) {
    const std::string p = "block" + std::to_string(bi) + ".";
    const BlockCache<T>& bc = c.blocks[bi];
    const std::size_t plane = bc.a2.plane();

    // r_out = r_in + a2 * gate
    da2 = Tensor<T>(f, batch, bc.a2.h, bc.a2.w);
    std::vector<T> dgate(f * batch, T{});
    for (std::size_t ci = 0; ci < f; ++ci)
      for (std::size_t n = 0; n < batch; ++n) {
        const T g = bc.gate[ci * batch + n];
        const T* d = &dr.at(ci, n, 0, 0);
        const T* a = &bc.a2.at(ci, n, 0, 0);
        T* o = &da2.at(ci, n, 0, 0);
        T acc{};
        for (std::size_t i = 0; i < plane; ++i) {
          o[i] = d[i] * g;
          acc += d[i] * a[i];
        }
        dgate[ci * batch + n] = acc * g * (T{1} - g);
      }
    std::vector<T> de1 = dense_backward<T>(m.param(p + "gate.excite.weight"), bc.e1, dgate,
                                           grad_slice(m, grad, p + "gate.excite.weight"),
                                           grad_slice(m, grad, p + "gate.excite.bias"), s, f, batch);
    for (std::size_t i = 0; i < de1.size(); ++i)
      if (!(bc.d1[i] > 0)) de1[i] = T{0};
    std::vector<T> dpooled = dense_backward<T>(m.param(p + "gate.squeeze.weight"), bc.pooled, de1,
                                               grad_slice(m, grad, p + "gate.squeeze.weight"),
                                               grad_slice(m, grad, p + "gate.squeeze.bias"), f, s, batch);
    const T inv_plane = T{1} / static_cast<T>(plane);
    for (std::size_t ci = 0; ci < f; ++ci)
      for (std::size_t n = 0; n < batch; ++n) {
        const T add = dpooled[ci * batch + n] * inv_plane;
        T* o = &da2.at(ci, n, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) o[i] += add;
      }

    kernels::conv3x3_backward<T>(bc.z1, da2, m.param(p + "conv2.weight"), grad_slice(m, grad, p + "conv2.weight"),
                                 grad_slice(m, grad, p + "conv2.bias"), &dz1, col);
    for (std::size_t i = 0; i < dz1.size(); ++i)
      if (!(bc.a1.data[i] > 0)) dz1.data[i] = T{0};
    kernels::conv3x3_backward<T>(bc.in, dz1, m.param(p + "conv1.weight"), grad_slice(m, grad, p + "conv1.weight"),
                                 grad_slice(m, grad, p + "conv1.bias"), &dconv, col);
    for (std::size_t i = 0; i < dr.size(); ++i) dr.data[i] += dconv.data[i];
  }
  for (std::size_t i = 0; i < dr.size(); ++i) dr.data[i] += dbody.data[i];
  kernels::conv3x3_backward<T>(c.input, dr, m.param("head.weight"), grad_slice(m, grad, "head.weight"),
                               grad_slice(m, grad, "head.bias"), nullptr, col);
  return res;
}

template <typename T>
Tensor<T> make_input_batch(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error("empty batch");
  const std::size_t ch = samples.at(indices[0]).channels();
  constexpr std::size_t plane = kLrSize * kLrSize;
  Tensor<T> x(ch, indices.size(), kLrSize, kLrSize);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const MisrSample& s = samples.at(indices[n]);
    if (s.channels() != ch || s.input.size() != ch * plane) throw Error("inconsistent sample channel counts in batch");
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t i = 0; i < plane; ++i) x.data[(c * x.n + n) * plane + i] = static_cast<T>(s.input[c * plane + i]);
  }
  return x;
}

template <typename T>
Tensor<T> make_target_batch(const std::vector<MisrSample>& samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error("empty batch");
  constexpr std::size_t plane = kHrSize * kHrSize;
  Tensor<T> t(1, indices.size(), kHrSize, kHrSize);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const MisrSample& s = samples.at(indices[n]);
    if (s.target.size() != plane) throw Error("sample target is not 64x64");
    for (std::size_t i = 0; i < plane; ++i) t.data[n * plane + i] = static_cast<T>(s.target[i]);
  }
  return t;
}

#define MBSR_INSTANTIATE(T)                                                                                       \
  template SrModel<T> init_model<T>(const SrModelConfig&, std::uint64_t);                                        \
  template Tensor<T> forward<T>(const SrModel<T>&, const Tensor<T>&, ForwardCache<T>*);                          \
  template Tensor<T> infer<T>(const SrModel<T>&, const Tensor<T>&);                                              \
  template double l1_loss<T>(const Tensor<T>&, const Tensor<T>&);                                                \
  template LossAndGrad<T> loss_and_gradients<T>(const SrModel<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                                ForwardCache<T>*);                                               \
  template Tensor<T> make_input_batch<T>(const std::vector<MisrSample>&, std::span<const std::size_t>);          \
  template Tensor<T> make_target_batch<T>(const std::vector<MisrSample>&, std::span<const std::size_t>);

MBSR_INSTANTIATE(float)
MBSR_INSTANTIATE(double)

#undef MBSR_INSTANTIATE

}  // namespace mbsr
