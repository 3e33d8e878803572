#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "syncsel/data.hpp"
#include "syncsel/losses.hpp"

namespace syncsel {

// One evaluated sample: selection score (higher = keep), correctness of the
// argmax prediction, its cross-entropy loss, and the dataset region flag.
struct EvalRecord {
  double sel_score = 0.0;
  bool correct = false;
  double sample_loss = 0.0;
  int region = -1;
};

enum class MechanismKind { Head, Score };

// Selection mechanism: the model's own head (g for SN/SYNC, -p[C] for DG)
// or a post-hoc score of the softmax output.
struct Mechanism {
  MechanismKind kind = MechanismKind::Head;
  ScoreKind score = ScoreKind::sr();

  static Mechanism head() { return {MechanismKind::Head, ScoreKind::sr()}; }
  static Mechanism post_hoc(const ScoreKind& s) {
    return {MechanismKind::Score, s};
  }
  // "head" | "sr" | "smp:<gamma>" | "negent"
  static Mechanism parse(const std::string& text);
  std::string name() const;
};

std::vector<EvalRecord> collect(const SelectiveModel& model, const Dataset& ds,
                                const Mechanism& mechanism);

// Threshold whose acceptance rule (sel_score >= tau) keeps the top
// ceil(target * N) records; -inf for target = 1. With distinct scores tau is
// the midpoint between the adjacent order statistics; tied boundary scores
// are all accepted (coverage overshoots and is reported as realized).
double calibrate_threshold(std::span<const EvalRecord> records,
                           double target_coverage);

struct SelectiveMetrics {
  double coverage = 0.0;
  std::optional<double> risk;      // absent when nothing is accepted
  std::optional<double> accuracy;  // absent when nothing is accepted
};

SelectiveMetrics selective_metrics(std::span<const EvalRecord> records,
                                   double tau);

struct RcPoint {
  double coverage = 0.0;  // realized
  double threshold = 0.0;
  double risk = 0.0;
  double accuracy = 0.0;
};

struct RiskCoverageCurve {
  std::vector<RcPoint> points;
};

// One point per grid coverage (grid sorted ascending, values in (0,1]),
// using exact top-k selection on these records.
RiskCoverageCurve rc_curve(std::span<const EvalRecord> records,
                           std::span<const double> grid);

// Fractions over all records; the four cells sum to 1.
struct ConfusionTable {
  double accept_correct = 0.0;
  double accept_incorrect = 0.0;
  double reject_correct = 0.0;
  double reject_incorrect = 0.0;
};

ConfusionTable confusion_table(std::span<const EvalRecord> records, double tau);

struct RegionRate {
  int region = 0;
  std::size_t count = 0;
  double rejection_rate = 0.0;
};

// Rejection rate per region value present, ascending by region.
std::vector<RegionRate> region_rejection_rates(
    std::span<const EvalRecord> records, double tau);

// CSV emitters; all values with 6 decimal places, absent values as "NA".
void write_rc_curve_csv(const RiskCoverageCurve& curve,
                        const std::string& path);
void write_confusion_csv(std::span<const double> coverages,
                         std::span<const ConfusionTable> tables,
                         const std::string& path);
void write_regions_csv(std::span<const double> coverages,
                       std::span<const std::vector<RegionRate>> rates,
                       const std::string& path);

}  // namespace syncsel
