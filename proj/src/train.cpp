#include "mbsr/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace mbsr {

void TrainConfig::validate() const {
  if (!(lr_min < lr_max) || lr_min < 0.0) throw Error("need 0 <= lr_min < lr_max");
  if (max_iters == 0) throw Error("max_iters must be positive");
  if (val_every == 0) throw Error("val_every must be positive");
  if (patience == 0) throw Error("patience must be >= 1");
  if (batch_size == 0) throw Error("batch_size must be >= 1");
}

double cosine_lr(std::size_t t, const TrainConfig& cfg) {
  if (t > cfg.max_iters)
    throw Error("iteration " + std::to_string(t) + " outside [0, " + std::to_string(cfg.max_iters) + "]");
  if (t == 0) return cfg.lr_max;
  if (t == cfg.max_iters) return cfg.lr_min;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.max_iters);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(phase));
}

template <typename T>
void adam_step(AdamState<T>& s, std::span<T> params, std::span<const T> grad, double lr) {
  if (grad.size() != params.size()) throw Error("adam: gradient size mismatch");
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), T{});
    s.v.assign(params.size(), T{});
  }
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i])) throw Error("adam: non-finite gradient at parameter " + std::to_string(i));
  ++s.step;
  const double t = static_cast<double>(s.step);
  const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(s.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(s.beta2, t)));
  const T eps = static_cast<T>(s.eps), rate = static_cast<T>(lr);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(params.size()); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const T g = grad[i];
    s.m[i] = b1 * s.m[i] + (T{1} - b1) * g;
    s.v[i] = b2 * s.v[i] + (T{1} - b2) * g * g;
    const T mhat = s.m[i] * c1;
    const T vhat = s.v[i] * c2;
    params[i] -= rate * mhat / (std::sqrt(vhat) + eps);
  }
}

bool EarlyStopping::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_ = 0;
    return true;
  }
  ++bad_;
  return false;
}

template <typename T>
double mean_loss(const SrModel<T>& model, const std::vector<MisrSample>& samples,
                 std::span<const std::size_t> indices, std::size_t batch_size) {
  if (indices.empty()) throw Error("mean loss over an empty set");
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    const auto y = forward(model, make_input_batch<T>(samples, chunk));
    total += l1_loss(y, make_target_batch<T>(samples, chunk)) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(indices.size());
}

template <typename T>
TrainResult<T> train(SrModel<T> model, const std::vector<MisrSample>& samples,
                     const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (train_idx.empty() || val_idx.empty()) throw Error("training needs nonempty train and validation splits");

  TrainResult<T> res{model, AdamState<T>(model.params().size()), {}, 0, 0, 0.0, false};
  EarlyStopping stopper(cfg.patience);
  BatchIterator batches(train_idx, cfg.batch_size, cfg.seed);
  double window_loss = 0.0;
  std::size_t window_n = 0;

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    const auto idx = batches.next();
    const auto x = make_input_batch<T>(samples, idx);
    const auto t = make_target_batch<T>(samples, idx);
    LossAndGrad<T> lg;
    try {
      lg = loss_and_gradients(model, x, t);
    } catch (const Error& e) {
      throw TrainingDiverged("iteration " + std::to_string(it) + ": " + e.what(), res.history);
    }
    const double lr = cosine_lr(it - 1, cfg);
    adam_step<T>(res.optimizer, model.params(), lg.grad, lr);
    window_loss += lg.loss;
    ++window_n;
    res.iterations = it;

    if (it % cfg.val_every == 0) {
      const double val = mean_loss(model, samples, val_idx, cfg.batch_size);
      if (!std::isfinite(val)) throw TrainingDiverged("non-finite validation loss at iteration " + std::to_string(it), res.history);
      res.history.push_back({it, window_loss / static_cast<double>(window_n), val, lr});
      window_loss = 0.0;
      window_n = 0;
      if (stopper.observe(val)) {
        res.best_model = model;
        res.best_iter = it;
        res.best_val = val;
      }
      if (stopper.stop()) {
        res.stopped_early = true;
        break;
      }
    }
  }
  if (res.history.empty()) {
    // Fewer iterations than one validation period: validate once at the end.
    const double val = mean_loss(model, samples, val_idx, cfg.batch_size);
    res.history.push_back({res.iterations, window_loss / static_cast<double>(std::max<std::size_t>(window_n, 1)), val,
                           cosine_lr(res.iterations - 1, cfg)});
    res.best_model = model;
    res.best_iter = res.iterations;
    res.best_val = val;
  }
  return res;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "iter,train_loss,val_loss,lr\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", h.iter, h.train_loss, h.val_loss, h.lr);
    out << buf;
  }
}

#define MBSR_INSTANTIATE(T)                                                                                   \
  template void adam_step<T>(AdamState<T>&, std::span<T>, std::span<const T>, double);                       \
  template double mean_loss<T>(const SrModel<T>&, const std::vector<MisrSample>&, std::span<const std::size_t>, \
                               std::size_t);                                                                  \
  template TrainResult<T> train<T>(SrModel<T>, const std::vector<MisrSample>&, const std::vector<std::size_t>&, \
                                   const std::vector<std::size_t>&, const TrainConfig&);

MBSR_INSTANTIATE(float)
MBSR_INSTANTIATE(double)

#undef MBSR_INSTANTIATE

}  // namespace mbsr
