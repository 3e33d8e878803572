#pragma once

#include <span>
#include <string>
#include <vector>

namespace syncsel {

// Probabilities are clamped into [kProbFloor, 1] before any logarithm.
inline constexpr double kProbFloor = 1e-12;

enum class ScoreTag { SR, SMP, NegEntropy };

// Confidence score selector: SR (max softmax probability), SMP (max softmax
// probability raised to gamma), or normalized negative entropy.
struct ScoreKind {
  ScoreTag tag = ScoreTag::SR;
  double gamma = 1.0;  // SMP exponent, > 0; ignored otherwise

  static ScoreKind sr() { return {ScoreTag::SR, 1.0}; }
  static ScoreKind smp(double gamma) { return {ScoreTag::SMP, gamma}; }
  static ScoreKind neg_entropy() { return {ScoreTag::NegEntropy, 1.0}; }
};

// True iff p is a valid probability vector: C >= 2, entries in [0,1],
// sum within tol of 1.
bool is_prob_vector(std::span<const double> p, double tol = 1e-9);
void require_prob_vector(std::span<const double> p);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax_index(std::span<const double> v);

// max_i p_i, in [1/C, 1].
double sr_score(std::span<const double> p);

// (max_i p_i)^gamma, gamma > 0. Equals sr_score exactly at gamma = 1.
double smp_score(std::span<const double> p, double gamma);

// 1 - H(p)/ln C with H the Shannon entropy on clamped probabilities.
// 0 at the uniform distribution, 1 at a vertex.
double neg_entropy_score(std::span<const double> p);

double score(std::span<const double> p, const ScoreKind& kind);

// d score / d p. For SR/SMP the gradient routes entirely to the argmax
// coordinate (ties to the lowest index); for NegEntropy, entries whose
// probability sits at the clamp floor get zero.
std::vector<double> score_grad(std::span<const double> p, const ScoreKind& kind);

// Config names: "sr", "smp" (uses gamma), "negent".
ScoreKind parse_score_kind(const std::string& name, double gamma);
std::string score_name(const ScoreKind& kind);

}  // namespace syncsel
