#include "syncsel/scores.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace syncsel {

bool is_prob_vector(std::span<const double> p, double tol) {
  if (p.size() < 2) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void require_prob_vector(std::span<const double> p) {
  if (!is_prob_vector(p))
    throw std::invalid_argument("not a probability vector");
}

std::size_t argmax_index(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double sr_score(std::span<const double> p) {
  require_prob_vector(p);
  return p[argmax_index(p)];
}

double smp_score(std::span<const double> p, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("smp gamma must be > 0");
  require_prob_vector(p);
  return std::pow(p[argmax_index(p)], gamma);
}

double neg_entropy_score(std::span<const double> p) {
  require_prob_vector(p);
  double h = 0.0;
  for (double v : p) {
    const double c = std::clamp(v, kProbFloor, 1.0);
    h -= c * std::log(c);
  }
  return 1.0 - h / std::log(static_cast<double>(p.size()));
}

double score(std::span<const double> p, const ScoreKind& kind) {
  switch (kind.tag) {
    case ScoreTag::SR:
      return sr_score(p);
    case ScoreTag::SMP:
      return smp_score(p, kind.gamma);
    case ScoreTag::NegEntropy:
      return neg_entropy_score(p);
  }
  throw std::logic_error("unreachable score tag");
}

std::vector<double> score_grad(std::span<const double> p,
                               const ScoreKind& kind) {
  require_prob_vector(p);
  std::vector<double> d(p.size(), 0.0);
  switch (kind.tag) {
    case ScoreTag::SR: {
      d[argmax_index(p)] = 1.0;
      break;
    }
    case ScoreTag::SMP: {
      if (!(kind.gamma > 0.0))
        throw std::invalid_argument("smp gamma must be > 0");
      const std::size_t j = argmax_index(p);
      d[j] = kind.gamma * std::pow(p[j], kind.gamma - 1.0);
      break;
    }
    case ScoreTag::NegEntropy: {
      const double log_c = std::log(static_cast<double>(p.size()));
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > kProbFloor && p[i] < 1.0)
          d[i] = (std::log(p[i]) + 1.0) / log_c;
      }
      break;
    }
  }
  return d;
}

ScoreKind parse_score_kind(const std::string& name, double gamma) {
  if (name == "sr") return ScoreKind::sr();
  if (name == "smp") return ScoreKind::smp(gamma);
  if (name == "negent") return ScoreKind::neg_entropy();
  throw std::invalid_argument("unknown score kind '" + name + "'");
}

std::string score_name(const ScoreKind& kind) {
  switch (kind.tag) {
    case ScoreTag::SR:
      return "sr";
    case ScoreTag::SMP:
      return "smp";
    case ScoreTag::NegEntropy:
      return "negent";
  }
  return "?";
}

}  // namespace syncsel
