#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "syncsel/network.hpp"

namespace syncsel {

// Labeled point set. region marks a per-sample difficulty flag:
// 0 = clean, 1 = ambiguous, -1 = unknown (external data).
struct Dataset {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> x;   // row-major n x dim
  std::vector<int> y;
  std::vector<int> region;

  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * dim, dim};
  }
};

struct SplitSpec {
  double train_frac = 0.8;
  double cal_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // fractions in (0,1), summing to 1 within 1e-9
};

// C isotropic unit-variance Gaussian clusters. Centers sit on a line (d = 1)
// or on a circle in the first two coordinates (d >= 2) with minimum pairwise
// distance `separation`. All regions are 0.
Dataset gen_blobs(std::size_t num_classes, std::size_t per_class,
                  std::size_t dim, double separation, std::uint64_t seed);

// Blobs plus a shared ambiguity region: round(noise_frac * N) points are
// drawn at the cluster centroid with uniformly random labels and region = 1.
// Fixed dim = 2 and separation = 10.
Dataset gen_ambiguity(std::size_t num_classes, std::size_t per_class,
                      double noise_frac, std::uint64_t seed);

// CSV with header f0,...,f{d-1},label[,region]. Class count is inferred as
// max label + 1; a missing region column reads as -1. Parse failures report
// the 1-based line number.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

struct SplitResult {
  Dataset train, cal, test;
};

// Class-stratified disjoint split covering the input; deterministic per seed.
SplitResult split(const Dataset& ds, const SplitSpec& spec);

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);
Batch full_batch(const Dataset& ds);

}  // namespace syncsel
