#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "syncsel/losses.hpp"
#include "syncsel/network.hpp"

namespace syncsel {

// Outcome of one numerical bound verification. max_violation is the largest
// observed excess over the bound (negative = slack everywhere); passed is
// max_violation <= the check's tolerance.
struct TheoryReport {
  std::string check_name;
  std::size_t n_trials = 0;
  double max_violation = 0.0;
  double bound_value = 0.0;
  bool passed = false;
  std::uint64_t seed = 0;
};

// Constants feeding the global smoothness bound.
struct SmoothnessInputs {
  double baseline_hessian_bound = 0.0;   // L, >= 0
  double mu = 0.0;                       // sync weight, >= 0
  double selector_jacobian_bound = 0.0;  // G*, >= 0
  double logit_bound = 1.0;              // B, > 0
  double backbone_lipschitz = 1.0;       // L_z, > 0
};

// Worst-case sensitivity of the SMP score on the simplex under the
// sup-norm: gamma for gamma >= 1, gamma * C^(1-gamma) otherwise.
double lipschitz_modulus(double gamma, std::size_t num_classes);

// True iff backbone_lipschitz * (1/logit_bound) * lipschitz_modulus <= 1,
// i.e. the composed input->score map is nonexpansive. The gamma < 1 branch
// is non-monotone in gamma (gamma * C^(1-gamma) peaks at 1/ln C), so the
// inequality is evaluated directly.
bool check_gamma_admissible(double gamma, double logit_bound,
                            double backbone_lipschitz,
                            std::size_t num_classes);

// Spectral norm of diag(p) - p p^T by power iteration (deterministic ramp
// start; the all-ones vector is in this matrix's null space). Always
// <= 1/2 for a valid probability vector.
double softmax_jacobian_norm(std::span<const double> p);

// L + 2 mu G*^2.
double smoothness_constant(const SmoothnessInputs& inp);

// Samples n_pairs Dirichlet(1) pairs per an independent sub-seed each and
// records the worst excess of |s_gamma(u)-s_gamma(v)| over
// modulus * ||u-v||_inf. modulus_scale != 1 deliberately corrupts the
// modulus (test hook). Tolerance 1e-12.
TheoryReport verify_lipschitz(double gamma, std::size_t num_classes,
                              std::size_t n_pairs, std::uint64_t seed,
                              double modulus_scale = 1.0);

// Spectral-norm bound check over random logit vectors. Tolerance 1e-9.
TheoryReport verify_softmax_jacobian(std::size_t num_classes,
                                     std::size_t n_trials, std::uint64_t seed);

// max over the batch of the spectral norm of d z / d x.
double estimate_backbone_lipschitz(const SelectiveModel& model,
                                   const Batch& batch);

// ||d z / d x||_2 at one input (ReLU mask taken at x).
double input_jacobian_norm(const SelectiveModel& model,
                           std::span<const double> x);

// Parameter gradient of the selection output g for a single sample.
Gradients selection_gradient(const SelectiveModel& model,
                             std::span<const double> x);

// Parameter gradient of mu * mean_i (g_i - score(p_i))^2 over the batch,
// with the score differentiated through p (no detaching).
Gradients sync_term_gradient(const SelectiveModel& model, const Batch& batch,
                             double mu, const ScoreKind& kind);

// Empirical gradient-Lipschitz check of the full objective:
// the SYNC gradient-difference ratio over random parameter pairs must stay
// within 5% of L_hat + 2 mu G_hat^2, where L_hat is the worst SN-part ratio
// and G_hat the worst per-sample residual Jacobian norm on the same probes.
TheoryReport verify_smoothness(const SelectiveModel& model, const Batch& batch,
                               const SyncConfig& cfg, std::size_t n_probe,
                               std::uint64_t seed);

// Same check for the sync term alone against the bound 2 mu G_hat^2.
TheoryReport verify_sync_term_smoothness(const SelectiveModel& model,
                                         const Batch& batch, double mu,
                                         const ScoreKind& kind,
                                         std::size_t n_probe,
                                         std::uint64_t seed,
                                         double probe_radius = 1e-3);

// The full verification suite run by the CLI.
std::vector<TheoryReport> run_verify_suite(std::uint64_t seed,
                                           double modulus_scale = 1.0);

}  // namespace syncsel
