#include "syncsel/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace syncsel {

namespace {

constexpr double kRiskEps = 1e-8;

void require_labels(std::span<const int> labels, std::size_t num_classes) {
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("label out of range");
}

// Shared SN/SYNC evaluation. The sync contribution to `total` and to the
// gradients is added only when include_sync && mu != 0, so a mu = 0 SYNC
// run executes exactly the SN arithmetic.
BatchLossBreakdown selective_family_loss(std::span<const HeadOutputs> outputs,
                                         std::span<const int> labels,
                                         const SyncConfig& cfg,
                                         bool include_sync,
                                         std::vector<SampleUpstream>* upstream) {
  const std::size_t batch = outputs.size();
  const std::size_t num_classes = outputs[0].p.size();
  require_labels(labels, num_classes);

  std::vector<double> ell(batch), g(batch), s(batch, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    ell[i] = cross_entropy_logits(outputs[i].z, labels[i]);
    g[i] = outputs[i].g;
    if (include_sync) s[i] = score(outputs[i].p, cfg.score_kind);
  }

  double g_sum = 0.0;
  for (double v : g) g_sum += v;
  // same accumulation order as empirical_selective_risk's denominator
  double d_sum = kRiskEps;
  for (double v : g) d_sum += v;

  BatchLossBreakdown out;
  out.selective_risk = empirical_selective_risk(ell, g);
  out.empirical_coverage = g_sum / static_cast<double>(batch);
  out.coverage_penalty =
      coverage_penalty(cfg.target_coverage, out.empirical_coverage, cfg.penalty);

  if (include_sync) {
    double acc = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const double d = g[i] - s[i];
      acc += d * d;
    }
    out.sync_term = acc / static_cast<double>(batch);
  }

  double aux_acc = 0.0;
  for (std::size_t i = 0; i < batch; ++i)
    aux_acc += cross_entropy_logits(outputs[i].h_logits, labels[i]);
  out.aux_loss = aux_acc / static_cast<double>(batch);

  double base = out.selective_risk + cfg.lambda * out.coverage_penalty;
  const bool sync_active = include_sync && cfg.mu != 0.0;
  if (sync_active) base += cfg.mu * out.sync_term;
  out.total = cfg.alpha * base + (1.0 - cfg.alpha) * out.aux_loss;

  if (upstream) {
    const double b = static_cast<double>(batch);
    double dpen_dcov = 0.0;
    const double gap = cfg.target_coverage - out.empirical_coverage;
    if (cfg.penalty == PenaltyMode::Symmetric)
      dpen_dcov = -2.0 * gap;
    else
      dpen_dcov = gap > 0.0 ? -2.0 * gap : 0.0;

    upstream->assign(batch, SampleUpstream{});
    for (std::size_t i = 0; i < batch; ++i) {
      const auto& p = outputs[i].p;
      const auto y = static_cast<std::size_t>(labels[i]);
      auto& up = (*upstream)[i];

      // d ell / dz = p - e_y (log-space cross-entropy), scaled by the risk
      // weight; the sync term adds its score pullback through the softmax.
      const double dl_dell = cfg.alpha * g[i] / d_sum;
      double dg = cfg.alpha * ((ell[i] - out.selective_risk) / d_sum +
                               cfg.lambda * dpen_dcov / b);
      if (sync_active) {
        const double resid = g[i] - s[i];
        dg += cfg.alpha * cfg.mu * 2.0 * resid / b;
        const double coef = -cfg.alpha * cfg.mu * 2.0 * resid / b;
        auto dp = score_grad(p, cfg.score_kind);
        for (auto& v : dp) v *= coef;
        up.dz = softmax_vjp(p, dp);
        for (std::size_t j = 0; j < p.size(); ++j)
          up.dz[j] += dl_dell * (p[j] - (j == y ? 1.0 : 0.0));
      } else {
        up.dz.resize(p.size());
        for (std::size_t j = 0; j < p.size(); ++j)
          up.dz[j] = dl_dell * (p[j] - (j == y ? 1.0 : 0.0));
      }
      up.dg = dg;

      const auto p_h = softmax(outputs[i].h_logits);
      up.dh.resize(p_h.size());
      const double aux_w = (1.0 - cfg.alpha) / b;
      for (std::size_t j = 0; j < p_h.size(); ++j)
        up.dh[j] = aux_w * (p_h[j] - (j == y ? 1.0 : 0.0));
    }
  }
  return out;
}

BatchLossBreakdown dg_family_loss(std::span<const HeadOutputs> outputs,
                                  std::span<const int> labels,
                                  const SyncConfig& cfg,
                                  std::vector<SampleUpstream>* upstream) {
  const std::size_t batch = outputs.size();
  const std::size_t ext = outputs[0].p.size();
  if (ext < 3) throw std::invalid_argument("DG needs C+1 >= 3 outputs");
  require_labels(labels, ext - 1);

  BatchLossBreakdown out;
  double acc = 0.0, kept = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    acc += dg_loss(outputs[i].p, labels[i], cfg.odds);
    kept += 1.0 - outputs[i].p[ext - 1];
  }
  const double b = static_cast<double>(batch);
  out.total = acc / b;
  out.empirical_coverage = kept / b;

  if (upstream) {
    upstream->assign(batch, SampleUpstream{});
    for (std::size_t i = 0; i < batch; ++i) {
      const auto& p = outputs[i].p;
      const double q = p[labels[i]] * cfg.odds + p[ext - 1];
      std::vector<double> dp(ext, 0.0);
      if (q > kProbFloor) {
        const double dq = -1.0 / (b * q);
        dp[labels[i]] += cfg.odds * dq;
        dp[ext - 1] += dq;
      }
      (*upstream)[i].dz = softmax_vjp(p, dp);
    }
  }
  return out;
}

}  // namespace

void SyncConfig::validate() const {
  if (!(target_coverage > 0.0 && target_coverage <= 1.0))
    throw std::invalid_argument("target_coverage must be in (0,1]");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must be in [0,1]");
  if (mu < 0.0) throw std::invalid_argument("mu must be >= 0");
  if (mode == LossMode::DG && !(odds > 1.0))
    throw std::invalid_argument("DG odds must be > 1");
  if (score_kind.tag == ScoreTag::SMP && !(score_kind.gamma > 0.0))
    throw std::invalid_argument("smp gamma must be > 0");
}

double cross_entropy(std::span<const double> p, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.size())
    throw std::invalid_argument("label out of range");
  return -std::log(std::clamp(p[label], kProbFloor, 1.0));
}

double cross_entropy_logits(std::span<const double> z, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size())
    throw std::invalid_argument("label out of range");
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return zmax + std::log(sum) - z[label];
}

double empirical_selective_risk(std::span<const double> per_sample_loss,
                                std::span<const double> g) {
  if (per_sample_loss.size() != g.size() || g.empty())
    throw std::invalid_argument("selective risk: length mismatch");
  double num = 0.0, den = kRiskEps;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 0.0 || g[i] > 1.0)
      throw std::invalid_argument("selection weights must be in [0,1]");
    num += per_sample_loss[i] * g[i];
    den += g[i];
  }
  return num / den;
}

double coverage_penalty(double target, double achieved, PenaltyMode mode) {
  const double gap =
      mode == PenaltyMode::Hinge ? std::max(0.0, target - achieved)
                                 : target - achieved;
  return gap * gap;
}

double aux_loss(std::span<const std::vector<double>> h_logits,
                std::span<const int> labels, std::size_t num_classes) {
  if (h_logits.size() != labels.size() || h_logits.empty())
    throw std::invalid_argument("aux loss: length mismatch");
  require_labels(labels, num_classes);
  double acc = 0.0;
  for (std::size_t i = 0; i < h_logits.size(); ++i)
    acc += cross_entropy_logits(h_logits[i], labels[i]);
  return acc / static_cast<double>(h_logits.size());
}

double sync_term(std::span<const double> g,
                 std::span<const std::vector<double>> p,
                 const ScoreKind& kind) {
  if (g.size() != p.size() || g.empty())
    throw std::invalid_argument("sync term: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = g[i] - score(p[i], kind);
    acc += d * d;
  }
  return acc / static_cast<double>(g.size());
}

double dg_loss(std::span<const double> p_ext, int label, double odds) {
  if (!(odds > 1.0)) throw std::invalid_argument("DG odds must be > 1");
  if (label < 0 || static_cast<std::size_t>(label) + 1 >= p_ext.size())
    throw std::invalid_argument("label out of range");
  const double q = p_ext[label] * odds + p_ext[p_ext.size() - 1];
  return -std::log(std::max(q, kProbFloor));
}

BatchLossBreakdown sn_selective_loss(std::span<const HeadOutputs> outputs,
                                     std::span<const int> labels,
                                     const SyncConfig& cfg) {
  if (outputs.empty()) throw std::invalid_argument("empty batch");
  return selective_family_loss(outputs, labels, cfg, /*include_sync=*/false,
                               nullptr);
}

BatchLossBreakdown sync_loss(std::span<const HeadOutputs> outputs,
                             std::span<const int> labels,
                             const SyncConfig& cfg) {
  if (outputs.empty()) throw std::invalid_argument("empty batch");
  return selective_family_loss(outputs, labels, cfg, /*include_sync=*/true,
                               nullptr);
}

BatchLossBreakdown dg_batch_loss(std::span<const HeadOutputs> outputs,
                                 std::span<const int> labels,
                                 const SyncConfig& cfg) {
  if (outputs.empty()) throw std::invalid_argument("empty batch");
  return dg_family_loss(outputs, labels, cfg, nullptr);
}

BatchLossBreakdown batch_loss(std::span<const HeadOutputs> outputs,
                              std::span<const int> labels,
                              const SyncConfig& cfg,
                              std::vector<SampleUpstream>* upstream) {
  if (outputs.empty()) throw std::invalid_argument("empty batch");
  if (outputs.size() != labels.size())
    throw std::invalid_argument("outputs/labels length mismatch");
  cfg.validate();
  switch (cfg.mode) {
    case LossMode::SN:
      return selective_family_loss(outputs, labels, cfg, false, upstream);
    case LossMode::SYNC:
      return selective_family_loss(outputs, labels, cfg, true, upstream);
    case LossMode::DG:
      return dg_family_loss(outputs, labels, cfg, upstream);
  }
  throw std::logic_error("unreachable loss mode");
}

std::pair<BatchLossBreakdown, Gradients> backward(const SelectiveModel& model,
                                                  const Batch& batch,
                                                  const SyncConfig& cfg) {
  if ((cfg.mode == LossMode::DG) != (model.mode == NetMode::DG))
    throw std::invalid_argument("loss mode does not match the model head layout");
  const auto outputs = forward_batch(model, batch);
  std::vector<SampleUpstream> upstream;
  BatchLossBreakdown breakdown = batch_loss(outputs, batch.y, cfg, &upstream);
  if (!std::isfinite(breakdown.total))
    throw NonFiniteLoss("non-finite batch loss");
  Gradients grads = backprop_outputs(model, batch, upstream);
  return {breakdown, std::move(grads)};
}

}  // namespace syncsel
