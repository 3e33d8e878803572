#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "syncsel/eval.hpp"
#include "syncsel/losses.hpp"
#include "syncsel/network.hpp"

namespace testutil {

// ---------------------------------------------------------------------------
// Central finite-difference gradient oracle, independent of the backprop path:
// it only evaluates the forward loss at perturbed parameters.
// ---------------------------------------------------------------------------

inline double loss_value(const syncsel::SelectiveModel& model,
                         const syncsel::Batch& batch,
                         const syncsel::SyncConfig& cfg) {
  const auto outputs = syncsel::forward_batch(model, batch);
  return syncsel::batch_loss(outputs, batch.y, cfg).total;
}

inline syncsel::Gradients finite_diff_grads(const syncsel::SelectiveModel& model,
                                            const syncsel::Batch& batch,
                                            const syncsel::SyncConfig& cfg,
                                            double eps = 1e-5) {
  syncsel::SelectiveModel work = model;
  auto tensors = syncsel::tensor_list(work);
  syncsel::Gradients fd = syncsel::Gradients::zeros_like(model);
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
      const double saved = (*tensors[t])[i];
      (*tensors[t])[i] = saved + eps;
      const double up = loss_value(work, batch, cfg);
      (*tensors[t])[i] = saved - eps;
      const double down = loss_value(work, batch, cfg);
      (*tensors[t])[i] = saved;
      fd.tensors[t][i] = (up - down) / (2.0 * eps);
    }
  }
  return fd;
}

struct GradCompare {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Relative error with the absolute floor the gradient checks use:
// entries within atol of each other are treated as matching.
inline GradCompare compare_grads(const syncsel::Gradients& analytic,
                                 const syncsel::Gradients& numeric,
                                 double atol = 1e-8) {
  GradCompare out;
  for (std::size_t t = 0; t < analytic.tensors.size(); ++t) {
    for (std::size_t i = 0; i < analytic.tensors[t].size(); ++i) {
      const double a = analytic.tensors[t][i];
      const double n = numeric.tensors[t][i];
      const double abs_err = std::abs(a - n);
      if (abs_err <= atol) continue;
      const double rel = abs_err / std::max(std::abs(a), std::abs(n));
      if (rel > out.max_rel_err) {
        out.max_rel_err = rel;
        out.worst_analytic = a;
        out.worst_numeric = n;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force risk/coverage oracle: sort by score descending, slice top
// ceil(c*N), average.
// ---------------------------------------------------------------------------

struct BrutePoint {
  double coverage;
  double risk;
  double accuracy;
};

inline BrutePoint brute_force_rc(std::vector<syncsel::EvalRecord> records,
                                 double target) {
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) {
                     return a.sel_score > b.sel_score;
                   });
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(target * static_cast<double>(records.size())));
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < keep; ++i) {
    loss += records[i].sample_loss;
    if (records[i].correct) ++correct;
  }
  return {static_cast<double>(keep) / static_cast<double>(records.size()),
          loss / static_cast<double>(keep),
          static_cast<double>(correct) / static_cast<double>(keep)};
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

inline syncsel::Batch random_batch(std::size_t n, std::size_t dim,
                                   std::size_t num_classes,
                                   std::uint64_t seed, double scale = 1.5) {
  syncsel::Batch b;
  b.n = n;
  b.dim = dim;
  b.x.resize(n * dim);
  b.y.resize(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
  for (auto& v : b.x) v = normal(rng);
  for (auto& v : b.y) v = label(rng);
  return b;
}

inline bool bitwise_equal(const syncsel::SelectiveModel& a,
                          const syncsel::SelectiveModel& b) {
  const auto ta = syncsel::tensor_list(a);
  const auto tb = syncsel::tensor_list(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t t = 0; t < ta.size(); ++t) {
    if (ta[t]->size() != tb[t]->size()) return false;
    for (std::size_t i = 0; i < ta[t]->size(); ++i)
      if ((*ta[t])[i] != (*tb[t])[i]) return false;
  }
  return true;
}

// Scratch directory under the system temp path, wiped on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("syncsel_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

inline std::string read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, got);
  std::fclose(f);
  return out;
}

}  // namespace testutil
