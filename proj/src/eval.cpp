#include "syncsel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace syncsel {

Mechanism Mechanism::parse(const std::string& text) {
  if (text == "head") return head();
  if (text == "sr") return post_hoc(ScoreKind::sr());
  if (text == "negent") return post_hoc(ScoreKind::neg_entropy());
  if (text.rfind("smp", 0) == 0) {
    if (text.size() > 4 && text[3] == ':') {
      const double gamma = std::stod(text.substr(4));
      return post_hoc(ScoreKind::smp(gamma));
    }
    throw std::invalid_argument("smp mechanism needs a gamma, e.g. smp:2.5");
  }
  throw std::invalid_argument("unknown mechanism '" + text + "'");
}

std::string Mechanism::name() const {
  if (kind == MechanismKind::Head) return "head";
  if (score.tag == ScoreTag::SMP) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "smp:%g", score.gamma);
    return buf;
  }
  return score_name(score);
}

std::vector<EvalRecord> collect(const SelectiveModel& model, const Dataset& ds,
                                const Mechanism& mechanism) {
  if (ds.n == 0) throw std::invalid_argument("empty dataset");
  if (ds.dim != model.input_dim)
    throw std::invalid_argument("dataset/model dimension mismatch");
  if (ds.num_classes != model.num_classes)
    throw std::invalid_argument("dataset/model class count mismatch");

  std::vector<EvalRecord> records;
  records.reserve(ds.n);
  const std::size_t C = model.num_classes;
  for (std::size_t i = 0; i < ds.n; ++i) {
    const HeadOutputs out = forward(model, ds.row(i));
    const std::span<const double> cls(out.p.data(), C);

    EvalRecord rec;
    rec.correct = static_cast<int>(argmax_index(cls)) == ds.y[i];
    rec.sample_loss = cross_entropy_logits(out.z, ds.y[i]);
    rec.region = ds.region[i];

    if (mechanism.kind == MechanismKind::Head) {
      rec.sel_score = model.mode == NetMode::DG ? -out.p[C] : out.g;
    } else if (model.mode == NetMode::DG) {
      // post-hoc scores act on the class posterior given no abstention
      double kept = 0.0;
      for (double v : cls) kept += v;
      kept = std::max(kept, 1e-300);
      std::vector<double> renorm(cls.begin(), cls.end());
      for (double& v : renorm) v /= kept;
      rec.sel_score = score(renorm, mechanism.score);
    } else {
      rec.sel_score = score(out.p, mechanism.score);
    }
    records.push_back(rec);
  }
  return records;
}

double calibrate_threshold(std::span<const EvalRecord> records,
                           double target_coverage) {
  if (records.empty()) throw std::invalid_argument("no records to calibrate");
  if (!(target_coverage > 0.0 && target_coverage <= 1.0))
    throw std::invalid_argument("target coverage must be in (0,1]");

  const std::size_t n = records.size();
  const auto keep = static_cast<std::size_t>(
      std::ceil(target_coverage * static_cast<double>(n)));
  if (keep >= n) return -std::numeric_limits<double>::infinity();

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = records[i].sel_score;
  std::sort(scores.begin(), scores.end());
  const double lo = scores[n - keep - 1];  // largest rejected
  const double hi = scores[n - keep];      // smallest accepted
  return lo < hi ? (lo + hi) / 2.0 : hi;   // ties at the cut are accepted
}

SelectiveMetrics selective_metrics(std::span<const EvalRecord> records,
                                   double tau) {
  if (records.empty()) throw std::invalid_argument("no records");
  std::size_t accepted = 0, correct = 0;
  double loss = 0.0;
  for (const auto& r : records) {
    if (r.sel_score >= tau) {
      ++accepted;
      loss += r.sample_loss;
      if (r.correct) ++correct;
    }
  }
  SelectiveMetrics m;
  m.coverage = static_cast<double>(accepted) / static_cast<double>(records.size());
  if (accepted > 0) {
    m.risk = loss / static_cast<double>(accepted);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(accepted);
  }
  return m;
}

RiskCoverageCurve rc_curve(std::span<const EvalRecord> records,
                           std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("empty coverage grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0))
      throw std::invalid_argument("grid coverages must lie in (0,1]");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw std::invalid_argument("grid must be strictly increasing");
  }
  RiskCoverageCurve curve;
  curve.points.reserve(grid.size());
  for (double target : grid) {
    const double tau = calibrate_threshold(records, target);
    const auto m = selective_metrics(records, tau);
    RcPoint pt;
    pt.coverage = m.coverage;
    pt.threshold = tau;
    pt.risk = *m.risk;          // grid > 0 keeps at least one record
    pt.accuracy = *m.accuracy;
    curve.points.push_back(pt);
  }
  return curve;
}

ConfusionTable confusion_table(std::span<const EvalRecord> records,
                               double tau) {
  if (records.empty()) throw std::invalid_argument("no records");
  std::size_t ac = 0, ai = 0, rc = 0, ri = 0;
  for (const auto& r : records) {
    const bool accept = r.sel_score >= tau;
    if (accept && r.correct) ++ac;
    else if (accept) ++ai;
    else if (r.correct) ++rc;
    else ++ri;
  }
  const auto n = static_cast<double>(records.size());
  return {ac / n, ai / n, rc / n, ri / n};
}

std::vector<RegionRate> region_rejection_rates(
    std::span<const EvalRecord> records, double tau) {
  if (records.empty()) throw std::invalid_argument("no records");
  std::map<int, std::pair<std::size_t, std::size_t>> by_region;  // n, rejected
  for (const auto& r : records) {
    auto& cell = by_region[r.region];
    ++cell.first;
    if (r.sel_score < tau) ++cell.second;
  }
  std::vector<RegionRate> out;
  out.reserve(by_region.size());
  for (const auto& [region, cell] : by_region)
    out.push_back({region, cell.first,
                   static_cast<double>(cell.second) /
                       static_cast<double>(cell.first)});
  return out;
}

namespace {

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_rc_curve_csv(const RiskCoverageCurve& curve,
                        const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open rc csv: " + path);
  os << "coverage,threshold,risk,accuracy\n";
  for (const auto& pt : curve.points) {
    const std::string tau = std::isinf(pt.threshold) ? "-inf"
                                                     : fmt6(pt.threshold);
    os << fmt6(pt.coverage) << "," << tau << "," << fmt6(pt.risk) << ","
       << fmt6(pt.accuracy) << "\n";
  }
  if (!os) throw std::runtime_error("rc csv write failed: " + path);
}

void write_confusion_csv(std::span<const double> coverages,
                         std::span<const ConfusionTable> tables,
                         const std::string& path) {
  if (coverages.size() != tables.size())
    throw std::invalid_argument("confusion csv size mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open confusion csv: " + path);
  os << "coverage,accept_correct,accept_incorrect,reject_correct,"
        "reject_incorrect\n";
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& t = tables[i];
    os << fmt6(coverages[i]) << "," << fmt6(t.accept_correct) << ","
       << fmt6(t.accept_incorrect) << "," << fmt6(t.reject_correct) << ","
       << fmt6(t.reject_incorrect) << "\n";
  }
  if (!os) throw std::runtime_error("confusion csv write failed: " + path);
}

void write_regions_csv(std::span<const double> coverages,
                       std::span<const std::vector<RegionRate>> rates,
                       const std::string& path) {
  if (coverages.size() != rates.size())
    throw std::invalid_argument("regions csv size mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open regions csv: " + path);
  os << "coverage,region,count,rejection_rate\n";
  for (std::size_t i = 0; i < rates.size(); ++i)
    for (const auto& r : rates[i])
      os << fmt6(coverages[i]) << "," << r.region << "," << r.count << ","
         << fmt6(r.rejection_rate) << "\n";
  if (!os) throw std::runtime_error("regions csv write failed: " + path);
}

}  // namespace syncsel
