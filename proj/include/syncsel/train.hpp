#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "syncsel/data.hpp"
#include "syncsel/losses.hpp"

namespace syncsel {

struct TrainConfig {
  int epochs = 150;
  int batch_size = 64;
  double lr0 = 0.005;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  SyncConfig sync;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_total_loss = 0.0;
  double mean_sync_term = 0.0;
  double empirical_coverage = 0.0;  // mean batch coverage over the epoch
  double train_accuracy = 0.0;
  double lr = 0.0;                  // learning rate at the epoch's first step
};

// lr0 * (1 + cos(pi * step / total_steps)) / 2, for 0 <= step <= total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

// Heavy-ball update: v <- momentum*v + (grad + weight_decay*theta);
// theta <- theta - lr*v.
void sgd_step(SelectiveModel& model, const Gradients& grads,
              Gradients& velocity, double lr, double momentum,
              double weight_decay);

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;  // batch total per optimizer step
};

// Raised when a step produces a non-finite loss; `step` is the 0-based
// global step index.
struct TrainAbort : std::runtime_error {
  std::size_t step;
  TrainAbort(const std::string& what, std::size_t step_index)
      : std::runtime_error(what), step(step_index) {}
};

// Mini-batch SGD with cosine-annealed learning rate. Shuffling draws a fresh
// permutation per epoch from seed ^ epoch, so a (seed, config, data) triple
// fixes the whole run bit-exactly.
TrainResult train(SelectiveModel& model, const Dataset& train_set,
                  const TrainConfig& cfg);

// Exponential moving average with smoothing 2/(window+1), seeded at xs[0].
std::vector<double> ema(std::span<const double> xs, int window);

// Fraction of post-warmup steps at which ema(xs) does not increase.
// warmup_frac is the share of leading steps excluded.
double ema_descent_fraction(std::span<const double> xs, int window,
                            double warmup_frac);

void write_metrics_csv(std::span<const EpochRecord> records,
                       const std::string& path);
void write_trace_csv(std::span<const double> step_losses,
                     const std::string& path);

}  // namespace syncsel
