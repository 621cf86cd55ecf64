#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mbsr/dataset.hpp"
#include "mbsr/model.hpp"

namespace mbsr {

struct TrainConfig {
  double lr_max = 1e-4;
  double lr_min = 1e-7;
  std::size_t max_iters = 300'000;
  std::size_t val_every = 1'000;
  std::size_t patience = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Single-cycle cosine annealing from lr_max at t = 0 to lr_min at
/// t = max_iters.
double cosine_lr(std::size_t t, const TrainConfig& cfg);

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<T> m, v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, T{}), v(n, T{}) {}
};

/// One bias-corrected ADAM update of params in place.
template <typename T>
void adam_step(AdamState<T>& state, std::span<T> params, std::span<const T> grad, double lr);

/// Counts validations without improvement; stop() once `patience` in a row.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when this value is a new best.
  bool observe(double val_loss);
  bool stop() const { return bad_ >= patience_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t bad_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct HistoryRow {
  std::size_t iter = 0;
  double train_loss = 0.0;  // mean batch loss since the previous validation
  double val_loss = 0.0;
  double lr = 0.0;
};

template <typename T>
struct TrainResult {
  SrModel<T> best_model;
  AdamState<T> optimizer;  // state at the last iteration run
  std::vector<HistoryRow> history;
  std::size_t iterations = 0;
  std::size_t best_iter = 0;
  double best_val = 0.0;
  bool stopped_early = false;
};

/// Raised when a batch loss is non-finite; carries the history so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<HistoryRow> history)
      : Error(what), history(std::move(history)) {}
  std::vector<HistoryRow> history;
};

/// Mean L1 over the given samples, evaluated in batches.
template <typename T>
double mean_loss(const SrModel<T>& model, const std::vector<MisrSample>& samples,
                 std::span<const std::size_t> indices, std::size_t batch_size);

/// Minibatch ADAM with cosine-annealed learning rate. Validates every
/// val_every iterations on the full validation set, keeps the best
/// parameters, and stops after `patience` validations without improvement.
template <typename T>
TrainResult<T> train(SrModel<T> model, const std::vector<MisrSample>& samples,
                     const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                     const TrainConfig& cfg);

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace mbsr
