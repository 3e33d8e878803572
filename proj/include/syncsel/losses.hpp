#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "syncsel/network.hpp"
#include "syncsel/scores.hpp"

namespace syncsel {

enum class LossMode { SN, DG, SYNC };
enum class PenaltyMode { Hinge, Symmetric };

// All loss hyperparameters in one place.
struct SyncConfig {
  LossMode mode = LossMode::SYNC;
  double target_coverage = 0.7;  // in (0,1]
  double lambda = 6.0;           // coverage penalty weight, >= 0
  double alpha = 0.5;            // selective/auxiliary mix, in [0,1]
  double mu = 1.0;               // sync weight, >= 0
  ScoreKind score_kind = ScoreKind::smp(0.5);
  PenaltyMode penalty = PenaltyMode::Hinge;
  double odds = 2.2;             // DG only, > 1

  void validate() const;  // throws std::invalid_argument on bad ranges
};

// Diagnostic decomposition of one batch loss. coverage_penalty and sync_term
// are stored unweighted; the recomposition is
//   total = alpha*(selective_risk + lambda*coverage_penalty + mu*sync_term)
//           + (1-alpha)*aux_loss
// for SN/SYNC. For DG only total and empirical_coverage (mean kept
// probability mass, 1 - p[C]) are meaningful; the other parts are zero.
struct BatchLossBreakdown {
  double total = 0.0;
  double selective_risk = 0.0;
  double coverage_penalty = 0.0;
  double sync_term = 0.0;
  double aux_loss = 0.0;
  double empirical_coverage = 0.0;
};

// -ln(p[y]) with p clamped into [kProbFloor, 1].
double cross_entropy(std::span<const double> p, int label);

// logsumexp(z) - z[label]: the same quantity computed in log space, exact
// and smooth even when the softmax saturates. This is the per-sample loss
// used inside the selective risk and the auxiliary loss.
double cross_entropy_logits(std::span<const double> z, int label);

// (sum l_i g_i) / (sum g_i + 1e-8); 0 when all g_i are 0.
double empirical_selective_risk(std::span<const double> per_sample_loss,
                                std::span<const double> g);

// Hinge: max(0, target - achieved)^2. Symmetric: (target - achieved)^2.
double coverage_penalty(double target, double achieved, PenaltyMode mode);

// Mean cross-entropy of softmax(h_logits) against the labels.
double aux_loss(std::span<const std::vector<double>> h_logits,
                std::span<const int> labels, std::size_t num_classes);

// Mean squared gap between the selection scores and score(p).
double sync_term(std::span<const double> g,
                 std::span<const std::vector<double>> p,
                 const ScoreKind& kind);

// Single-sample DG objective over C+1 softmax outputs:
// -log(p[y]*odds + p[C]), log-clamped from below. Can be negative.
double dg_loss(std::span<const double> p_ext, int label, double odds);

BatchLossBreakdown sn_selective_loss(std::span<const HeadOutputs> outputs,
                                     std::span<const int> labels,
                                     const SyncConfig& cfg);
BatchLossBreakdown sync_loss(std::span<const HeadOutputs> outputs,
                             std::span<const int> labels,
                             const SyncConfig& cfg);
BatchLossBreakdown dg_batch_loss(std::span<const HeadOutputs> outputs,
                                 std::span<const int> labels,
                                 const SyncConfig& cfg);

// Dispatches on cfg.mode. When upstream is non-null it is filled with exact
// per-sample logit-space gradients of `total`.
BatchLossBreakdown batch_loss(std::span<const HeadOutputs> outputs,
                              std::span<const int> labels,
                              const SyncConfig& cfg,
                              std::vector<SampleUpstream>* upstream = nullptr);

// Loss value and exact reverse-mode gradients for one batch. Throws
// NonFiniteLoss if the total is not finite.
std::pair<BatchLossBreakdown, Gradients> backward(const SelectiveModel& model,
                                                  const Batch& batch,
                                                  const SyncConfig& cfg);

struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace syncsel
