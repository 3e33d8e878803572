#include "syncsel/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "syncsel/scores.hpp"

namespace syncsel {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("momentum must be in [0,1)");
  if (weight_decay < 0.0)
    throw std::invalid_argument("weight_decay must be >= 0");
  sync.validate();
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (step > total_steps) throw std::invalid_argument("step out of range");
  const double phase = std::numbers::pi * static_cast<double>(step) /
                       static_cast<double>(total_steps);
  return lr0 * (1.0 + std::cos(phase)) / 2.0;
}

void sgd_step(SelectiveModel& model, const Gradients& grads,
              Gradients& velocity, double lr, double momentum,
              double weight_decay) {
  auto params = tensor_list(model);
  if (grads.tensors.size() != params.size() ||
      velocity.tensors.size() != params.size())
    throw std::invalid_argument("sgd_step shape mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& theta = *params[t];
    const auto& g = grads.tensors[t];
    auto& v = velocity.tensors[t];
    if (g.size() != theta.size() || v.size() != theta.size())
      throw std::invalid_argument("sgd_step shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] + (g[i] + weight_decay * theta[i]);
      theta[i] -= lr * v[i];
    }
  }
}

TrainResult train(SelectiveModel& model, const Dataset& train_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.n == 0) throw std::invalid_argument("empty training set");
  if (static_cast<std::size_t>(cfg.batch_size) > train_set.n)
    throw std::invalid_argument("batch_size exceeds the training set");
  if (train_set.dim != model.input_dim)
    throw std::invalid_argument("dataset/model dimension mismatch");
  if (train_set.num_classes != model.num_classes)
    throw std::invalid_argument("dataset/model class count mismatch");

  TrainResult result;
  if (cfg.epochs == 0) return result;

  const std::size_t n = train_set.n;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  Gradients velocity = Gradients::zeros_like(model);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 perm_rng(cfg.seed ^ static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), perm_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(step, total_steps, cfg.lr0);
    double loss_acc = 0.0, sync_acc = 0.0, cov_acc = 0.0;
    std::size_t correct = 0;

    for (std::size_t begin = 0; begin < n; begin += bs, ++step) {
      const std::size_t end = std::min(begin + bs, n);
      const Batch batch = make_batch(
          train_set, std::span(order).subspan(begin, end - begin));

      const double lr = cosine_lr(step, total_steps, cfg.lr0);
      BatchLossBreakdown breakdown;
      Gradients grads;
      try {
        auto res = backward(model, batch, cfg.sync);
        breakdown = res.first;
        grads = std::move(res.second);
      } catch (const NonFiniteLoss& e) {
        throw TrainAbort(std::string(e.what()) + " at step " +
                             std::to_string(step),
                         step);
      } catch (const std::invalid_argument& e) {
        // diverged parameters surface as non-finite forward activations
        throw TrainAbort(std::string(e.what()) + " at step " +
                             std::to_string(step),
                         step);
      }

      // training accuracy from the pre-update forward pass
      const auto outputs = forward_batch(model, batch);
      for (std::size_t i = 0; i < batch.n; ++i) {
        const auto& p = outputs[i].p;
        const std::span<const double> cls(p.data(), model.num_classes);
        if (static_cast<int>(argmax_index(cls)) == batch.y[i]) ++correct;
      }

      sgd_step(model, grads, velocity, lr, cfg.momentum, cfg.weight_decay);

      loss_acc += breakdown.total;
      sync_acc += breakdown.sync_term;
      cov_acc += breakdown.empirical_coverage;
      result.step_losses.push_back(breakdown.total);
    }

    const auto spe = static_cast<double>(steps_per_epoch);
    rec.mean_total_loss = loss_acc / spe;
    rec.mean_sync_term = sync_acc / spe;
    rec.empirical_coverage = cov_acc / spe;
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.epochs.push_back(rec);
  }
  return result;
}

std::vector<double> ema(std::span<const double> xs, int window) {
  if (window < 1) throw std::invalid_argument("ema window must be >= 1");
  std::vector<double> out;
  out.reserve(xs.size());
  const double k = 2.0 / (static_cast<double>(window) + 1.0);
  double value = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    value = i == 0 ? xs[0] : value + k * (xs[i] - value);
    out.push_back(value);
  }
  return out;
}

double ema_descent_fraction(std::span<const double> xs, int window,
                            double warmup_frac) {
  if (xs.size() < 2) return 1.0;
  const auto smooth = ema(xs, window);
  const auto start = std::max<std::size_t>(
      1, static_cast<std::size_t>(warmup_frac * static_cast<double>(xs.size())));
  std::size_t down = 0, counted = 0;
  for (std::size_t i = start; i < smooth.size(); ++i) {
    ++counted;
    if (smooth[i] <= smooth[i - 1]) ++down;
  }
  return counted == 0 ? 1.0
                      : static_cast<double>(down) / static_cast<double>(counted);
}

void write_metrics_csv(std::span<const EpochRecord> records,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open metrics csv: " + path);
  os << "epoch,total,sync,coverage,acc,lr\n";
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  r.epoch, r.mean_total_loss, r.mean_sync_term,
                  r.empirical_coverage, r.train_accuracy, r.lr);
    os << buf;
  }
  if (!os) throw std::runtime_error("metrics csv write failed: " + path);
}

void write_trace_csv(std::span<const double> step_losses,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open trace csv: " + path);
  os << "step,total\n";
  char buf[64];
  for (std::size_t i = 0; i < step_losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g\n", i, step_losses[i]);
    os << buf;
  }
  if (!os) throw std::runtime_error("trace csv write failed: " + path);
}

}  // namespace syncsel
