#include "syncsel/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "syncsel/rng.hpp"

namespace syncsel {

namespace {

// One power-iteration run with a Rayleigh-quotient estimate. Converged once
// the eigen-residual ||A v - lambda v|| drops below tol (relative for
// matrices above unit scale); the Rayleigh value never overshoots the true
// largest eigenvalue. The start vector is a graded ramp: the all-ones vector
// sits in the null space of diag(p) - p p^T (its rows sum to zero), so it
// cannot be used here.
bool power_iteration_attempt(const std::vector<double>& a, std::size_t n,
                             double tol, std::size_t max_iter, double* out) {
  std::vector<double> v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i + 1);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;

  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      const double* row = a.data() + r * n;
      for (std::size_t c = 0; c < n; ++c) acc += row[c] * v[c];
      w[r] = acc;
    }
    double lambda = 0.0;  // Rayleigh quotient v^T A v with ||v|| = 1
    for (std::size_t i = 0; i < n; ++i) lambda += v[i] * w[i];
    double resid = 0.0, wnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = w[i] - lambda * v[i];
      resid += r * r;
      wnorm += w[i] * w[i];
    }
    if (std::sqrt(resid) <= tol * std::max(1.0, std::abs(lambda))) {
      *out = lambda;
      return true;
    }
    wnorm = std::sqrt(wnorm);
    if (wnorm < 1e-300) {
      *out = 0.0;
      return true;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wnorm;
  }
  return false;
}

// Largest eigenvalue of a symmetric PSD matrix. A tight top cluster can make
// plain power iteration crawl, so a stalled run is retried on A^8 (three
// squarings sharpen the gap eighth-fold) and un-done by an eighth root.
double psd_power_iteration(const std::vector<double>& a, std::size_t n,
                           double tol, std::size_t max_iter) {
  double lambda = 0.0;
  if (power_iteration_attempt(a, n, tol, max_iter, &lambda)) return lambda;

  std::vector<double> sq = a, tmp(n * n);
  for (int round = 0; round < 3; ++round) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double aik = sq[i * n + k];
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j)
          tmp[i * n + j] += aik * sq[k * n + j];
      }
    sq.swap(tmp);
  }
  if (power_iteration_attempt(sq, n, tol, max_iter, &lambda))
    return std::pow(lambda, 1.0 / 8.0);
  throw std::runtime_error("power iteration did not converge");
}

std::vector<double> get_params(const SelectiveModel& model) {
  std::vector<double> out;
  for (const auto* t : tensor_list(model))
    out.insert(out.end(), t->begin(), t->end());
  return out;
}

void set_params(SelectiveModel& model, std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto* t : tensor_list(model)) {
    std::copy_n(flat.begin() + pos, t->size(), t->begin());
    pos += t->size();
  }
  if (pos != flat.size())
    throw std::invalid_argument("parameter vector size mismatch");
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  for (const auto& t : g.tensors) out.insert(out.end(), t.begin(), t.end());
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> random_direction(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> d(n);
  double norm = 0.0;
  for (auto& x : d) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : d) x /= norm;
  return d;
}

// Max over the batch of the per-sample residual Jacobian norm
// ||grad_theta (g_i - score(p_i))||_2, score differentiated through p.
double max_residual_jacobian(const SelectiveModel& model, const Batch& batch,
                             const ScoreKind& kind) {
  double worst = 0.0;
  for (std::size_t i = 0; i < batch.n; ++i) {
    Batch one;
    one.n = 1;
    one.dim = batch.dim;
    one.x.assign(batch.row(i).begin(), batch.row(i).end());
    one.y = {batch.y[i]};
    const HeadOutputs out = forward(model, one.row(0));
    SampleUpstream up;
    up.dg = 1.0;
    auto sg = score_grad(out.p, kind);
    for (auto& v : sg) v = -v;
    up.dz = softmax_vjp(out.p, sg);
    const Gradients g = backprop_outputs(model, one, std::span(&up, 1));
    worst = std::max(worst, g.norm2());
  }
  return worst;
}

struct ProbeStats {
  std::vector<double> target_ratios;  // gradient-difference ratios to bound
  double l_hat = 0.0;                 // worst SN-part ratio (full check only)
  double g_hat = 0.0;                 // worst residual Jacobian norm
};

// Shared probe loop. For each probe, evaluates gradients of the target
// objective at two random points near the model and records the ratio
// ||grad1 - grad2|| / ||theta1 - theta2||.
template <typename GradFn>
ProbeStats run_probes(const SelectiveModel& model, const Batch& batch,
                      const ScoreKind& kind, std::size_t n_probe,
                      std::uint64_t seed, double radius, GradFn target_grad,
                      const SyncConfig* sn_cfg) {
  ProbeStats stats;
  const std::vector<double> center = get_params(model);
  SelectiveModel work = model;
  stats.g_hat = max_residual_jacobian(model, batch, kind);

  std::vector<double> theta1(center.size()), theta2(center.size());
  for (std::size_t probe = 0; probe < n_probe; ++probe) {
    std::mt19937_64 rng(sub_seed(seed, probe));
    const auto d1 = random_direction(center.size(), rng);
    const auto d2 = random_direction(center.size(), rng);
    for (std::size_t i = 0; i < center.size(); ++i) {
      theta1[i] = center[i] + radius * d1[i];
      theta2[i] = center[i] + radius * d2[i];
    }
    const double dist = l2_distance(theta1, theta2);
    if (dist == 0.0) continue;

    set_params(work, theta1);
    const auto target1 = flatten(target_grad(work));
    stats.g_hat =
        std::max(stats.g_hat, max_residual_jacobian(work, batch, kind));
    std::vector<double> sn1;
    if (sn_cfg) sn1 = flatten(backward(work, batch, *sn_cfg).second);

    set_params(work, theta2);
    const auto target2 = flatten(target_grad(work));
    stats.g_hat =
        std::max(stats.g_hat, max_residual_jacobian(work, batch, kind));

    stats.target_ratios.push_back(l2_distance(target1, target2) / dist);
    if (sn_cfg) {
      const auto sn2 = flatten(backward(work, batch, *sn_cfg).second);
      stats.l_hat = std::max(stats.l_hat, l2_distance(sn1, sn2) / dist);
    }
  }
  return stats;
}

TheoryReport ratios_to_report(const char* name, const ProbeStats& stats,
                              double bound, std::size_t n_probe,
                              std::uint64_t seed) {
  TheoryReport rep;
  rep.check_name = name;
  rep.n_trials = n_probe;
  rep.bound_value = bound;
  rep.seed = seed;
  double worst = -std::numeric_limits<double>::infinity();
  for (double r : stats.target_ratios)
    worst = std::max(worst, (r - bound) / bound);
  rep.max_violation = worst;
  rep.passed = worst <= 0.05;
  return rep;
}

constexpr double kProbeRadius = 1e-3;

}  // namespace

double lipschitz_modulus(double gamma, std::size_t num_classes) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (num_classes < 2) throw std::invalid_argument("need C >= 2");
  if (gamma >= 1.0) return gamma;
  return gamma * std::pow(static_cast<double>(num_classes), 1.0 - gamma);
}

bool check_gamma_admissible(double gamma, double logit_bound,
                            double backbone_lipschitz,
                            std::size_t num_classes) {
  if (!(logit_bound > 0.0) || !(backbone_lipschitz > 0.0))
    throw std::invalid_argument("bounds must be > 0");
  return lipschitz_modulus(gamma, num_classes) <=
         logit_bound / backbone_lipschitz;
}

double softmax_jacobian_norm(std::span<const double> p) {
  require_prob_vector(p);
  const std::size_t n = p.size();
  std::vector<double> jac(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      jac[i * n + j] = (i == j ? p[i] : 0.0) - p[i] * p[j];
  return psd_power_iteration(jac, n, 1e-10, 1000);
}

double smoothness_constant(const SmoothnessInputs& inp) {
  if (inp.baseline_hessian_bound < 0.0 || inp.mu < 0.0 ||
      inp.selector_jacobian_bound < 0.0)
    throw std::invalid_argument("smoothness inputs must be nonnegative");
  return inp.baseline_hessian_bound +
         2.0 * inp.mu * inp.selector_jacobian_bound *
             inp.selector_jacobian_bound;
}

TheoryReport verify_lipschitz(double gamma, std::size_t num_classes,
                              std::size_t n_pairs, std::uint64_t seed,
                              double modulus_scale) {
  if (n_pairs < 1) throw std::invalid_argument("n_pairs must be >= 1");
  const double modulus = lipschitz_modulus(gamma, num_classes) * modulus_scale;

  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n_pairs; ++t) {
    std::mt19937_64 rng(sub_seed(seed, t));
    const auto u = sample_simplex(num_classes, rng);
    const auto v = sample_simplex(num_classes, rng);
    double dinf = 0.0;
    for (std::size_t i = 0; i < num_classes; ++i)
      dinf = std::max(dinf, std::abs(u[i] - v[i]));
    const double gap = std::abs(smp_score(u, gamma) - smp_score(v, gamma));
    worst = std::max(worst, gap - modulus * dinf);
  }

  TheoryReport rep;
  char name[96];
  std::snprintf(name, sizeof(name), "lipschitz_smp_gamma%g_C%zu", gamma,
                num_classes);
  rep.check_name = name;
  rep.n_trials = n_pairs;
  rep.max_violation = worst;
  rep.bound_value = modulus;
  rep.passed = worst <= 1e-12;
  rep.seed = seed;
  return rep;
}

TheoryReport verify_softmax_jacobian(std::size_t num_classes,
                                     std::size_t n_trials,
                                     std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  // logit scales cycle through soft, moderate and near-saturated regimes
  constexpr double kScales[3] = {0.5, 2.0, 8.0};
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n_trials; ++t) {
    std::mt19937_64 rng(sub_seed(seed, t));
    std::normal_distribution<double> normal(0.0, kScales[t % 3]);
    std::vector<double> z(num_classes);
    for (auto& v : z) v = normal(rng);
    worst = std::max(worst, softmax_jacobian_norm(softmax(z)) - 0.5);
  }

  TheoryReport rep;
  char name[64];
  std::snprintf(name, sizeof(name), "softmax_jacobian_C%zu", num_classes);
  rep.check_name = name;
  rep.n_trials = n_trials;
  rep.max_violation = worst;
  rep.bound_value = 0.5;
  rep.passed = worst <= 1e-9;
  rep.seed = seed;
  return rep;
}

double input_jacobian_norm(const SelectiveModel& model,
                           std::span<const double> x) {
  // accumulate J = W_f * D_k W_k * ... * D_1 W_1 explicitly
  std::vector<double> cur(x.begin(), x.end());
  std::size_t rows = model.input_dim;
  std::vector<double> jac(rows * model.input_dim, 0.0);
  for (std::size_t i = 0; i < rows; ++i) jac[i * model.input_dim + i] = 1.0;

  auto apply_layer = [&](const LinearLayer& layer, bool relu) {
    std::vector<double> pre(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      double acc = layer.b[r];
      for (std::size_t c = 0; c < layer.in; ++c)
        acc += layer.w[r * layer.in + c] * cur[c];
      pre[r] = acc;
    }
    std::vector<double> next(layer.out * model.input_dim, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const bool active = !relu || pre[r] > 0.0;
      if (!active) continue;
      for (std::size_t c = 0; c < layer.in; ++c) {
        const double w = layer.w[r * layer.in + c];
        if (w == 0.0) continue;
        for (std::size_t d = 0; d < model.input_dim; ++d)
          next[r * model.input_dim + d] += w * jac[c * model.input_dim + d];
      }
    }
    jac = std::move(next);
    rows = layer.out;
    cur.assign(layer.out, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r)
      cur[r] = relu ? std::max(pre[r], 0.0) : pre[r];
  };

  for (const auto& layer : model.body) apply_layer(layer, true);
  apply_layer(model.f_head, false);

  // spectral norm via J^T J
  const std::size_t n = model.input_dim;
  std::vector<double> jtj(n * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const double ji = jac[r * n + i];
      if (ji == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) jtj[i * n + j] += ji * jac[r * n + j];
    }
  return std::sqrt(psd_power_iteration(jtj, n, 1e-12, 10000));
}

double estimate_backbone_lipschitz(const SelectiveModel& model,
                                   const Batch& batch) {
  if (batch.n == 0) throw std::invalid_argument("empty batch");
  double worst = 0.0;
  for (std::size_t i = 0; i < batch.n; ++i)
    worst = std::max(worst, input_jacobian_norm(model, batch.row(i)));
  return worst;
}

Gradients selection_gradient(const SelectiveModel& model,
                             std::span<const double> x) {
  Batch one;
  one.n = 1;
  one.dim = x.size();
  one.x.assign(x.begin(), x.end());
  one.y = {0};
  SampleUpstream up;
  up.dg = 1.0;
  return backprop_outputs(model, one, std::span(&up, 1));
}

Gradients sync_term_gradient(const SelectiveModel& model, const Batch& batch,
                             double mu, const ScoreKind& kind) {
  const auto outputs = forward_batch(model, batch);
  const double b = static_cast<double>(batch.n);
  std::vector<SampleUpstream> upstream(batch.n);
  for (std::size_t i = 0; i < batch.n; ++i) {
    const auto& p = outputs[i].p;
    const double resid = outputs[i].g - score(p, kind);
    upstream[i].dg = 2.0 * mu * resid / b;
    auto dp = score_grad(p, kind);
    const double coef = -2.0 * mu * resid / b;
    for (auto& v : dp) v *= coef;
    upstream[i].dz = softmax_vjp(p, dp);
  }
  return backprop_outputs(model, batch, upstream);
}

TheoryReport verify_smoothness(const SelectiveModel& model, const Batch& batch,
                               const SyncConfig& cfg, std::size_t n_probe,
                               std::uint64_t seed) {
  if (n_probe < 1) throw std::invalid_argument("n_probe must be >= 1");
  SyncConfig sn_cfg = cfg;
  sn_cfg.mode = LossMode::SN;

  auto grad_sync = [&](const SelectiveModel& m) {
    return backward(m, batch, cfg).second;
  };
  const ProbeStats stats = run_probes(model, batch, cfg.score_kind, n_probe,
                                      seed, kProbeRadius, grad_sync, &sn_cfg);
  const double bound =
      stats.l_hat + 2.0 * cfg.mu * stats.g_hat * stats.g_hat;
  return ratios_to_report("smoothness_full_objective", stats, bound, n_probe,
                          seed);
}

TheoryReport verify_sync_term_smoothness(const SelectiveModel& model,
                                         const Batch& batch, double mu,
                                         const ScoreKind& kind,
                                         std::size_t n_probe,
                                         std::uint64_t seed,
                                         double probe_radius) {
  if (n_probe < 1) throw std::invalid_argument("n_probe must be >= 1");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be > 0 for this check");
  if (!(probe_radius > 0.0))
    throw std::invalid_argument("probe_radius must be > 0");

  auto grad_sync_term = [&](const SelectiveModel& m) {
    return sync_term_gradient(m, batch, mu, kind);
  };
  const ProbeStats stats = run_probes(model, batch, kind, n_probe, seed,
                                      probe_radius, grad_sync_term, nullptr);
  const double bound = 2.0 * mu * stats.g_hat * stats.g_hat;
  char name[64];
  std::snprintf(name, sizeof(name), "smoothness_sync_term_gamma%g",
                kind.tag == ScoreTag::SMP ? kind.gamma : 1.0);
  return ratios_to_report(name, stats, bound, n_probe, seed);
}

std::vector<TheoryReport> run_verify_suite(std::uint64_t seed,
                                           double modulus_scale) {
  std::vector<TheoryReport> reports;
  std::uint64_t idx = 0;

  for (double gamma : {0.5, 1.0, 2.5})
    for (std::size_t C : {std::size_t{2}, std::size_t{5}, std::size_t{100}})
      reports.push_back(verify_lipschitz(gamma, C, 100000,
                                         sub_seed(seed, ++idx), modulus_scale));

  for (std::size_t C : {std::size_t{2}, std::size_t{10}, std::size_t{100}})
    reports.push_back(
        verify_softmax_jacobian(C, 10000, sub_seed(seed, ++idx)));

  {
    TheoryReport rep;
    rep.check_name = "gamma_admissibility";
    rep.seed = seed;
    rep.bound_value = 2.5;  // B/L_z for B = 10, L_z = 4
    std::size_t mismatches = 0;
    mismatches += check_gamma_admissible(2.5, 10.0, 4.0, 100) ? 0 : 1;
    mismatches += check_gamma_admissible(2.6, 10.0, 4.0, 100) ? 1 : 0;
    mismatches += check_gamma_admissible(1.0, 7.0, 7.0, 100) ? 0 : 1;
    mismatches += check_gamma_admissible(0.5, 5.0, 1.0, 100) ? 0 : 1;
    rep.n_trials = 4;
    rep.max_violation = static_cast<double>(mismatches);
    rep.passed = mismatches == 0;
    reports.push_back(rep);
  }

  {
    // small model + synthetic batch for the gradient-Lipschitz probes
    const std::uint64_t probe_seed = sub_seed(seed, ++idx);
    SelectiveModel model =
        init_model(3, {8, 8}, 4, 8, sub_seed(probe_seed, 1));
    Batch batch;
    batch.n = 32;
    batch.dim = 3;
    std::mt19937_64 rng(sub_seed(probe_seed, 2));
    std::normal_distribution<double> normal(0.0, 1.5);
    std::uniform_int_distribution<int> label(0, 3);
    batch.x.resize(batch.n * batch.dim);
    batch.y.resize(batch.n);
    for (auto& v : batch.x) v = normal(rng);
    for (auto& v : batch.y) v = label(rng);

    SyncConfig cfg;
    cfg.mode = LossMode::SYNC;
    reports.push_back(
        verify_smoothness(model, batch, cfg, 300, sub_seed(probe_seed, 3)));
    reports.push_back(verify_sync_term_smoothness(
        model, batch, 1.0, ScoreKind::smp(0.5), 1000, sub_seed(probe_seed, 4)));
    reports.push_back(verify_sync_term_smoothness(
        model, batch, 1.0, ScoreKind::smp(2.5), 1000, sub_seed(probe_seed, 5)));
  }

  return reports;
}

}  // namespace syncsel
