#include "syncsel/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace syncsel {

namespace {

constexpr char kMagic[8] = {'S', 'Y', 'N', 'C', 'N', 'E', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) +
                                                       " contains a non-finite value");
}

LinearLayer make_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  LinearLayer layer;
  layer.in = in;
  layer.out = out;
  layer.w.resize(in * out);
  layer.b.assign(out, 0.0);
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : layer.w) v = dist(rng);
  return layer;
}

// y = W x + b
void affine(const LinearLayer& layer, std::span<const double> x,
            std::vector<double>& y) {
  y.assign(layer.out, 0.0);
  for (std::size_t r = 0; r < layer.out; ++r) {
    double acc = layer.b[r];
    const double* wrow = layer.w.data() + r * layer.in;
    for (std::size_t c = 0; c < layer.in; ++c) acc += wrow[c] * x[c];
    y[r] = acc;
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct ForwardCache {
  std::vector<std::vector<double>> pre;   // body pre-activations
  std::vector<std::vector<double>> act;   // act[0] = x, act[l+1] = relu(pre[l])
  std::vector<double> g1_pre;
  std::vector<double> g1_act;
  double g_pre = 0.0;
  HeadOutputs out;
};

ForwardCache forward_cached(const SelectiveModel& model,
                            std::span<const double> x) {
  if (x.size() != model.input_dim)
    throw std::invalid_argument("input dimension mismatch");
  require_finite(x, "input");

  ForwardCache c;
  c.act.reserve(model.body.size() + 1);
  c.act.emplace_back(x.begin(), x.end());
  for (const auto& layer : model.body) {
    std::vector<double> pre;
    affine(layer, c.act.back(), pre);
    std::vector<double> act(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i)
      act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    c.pre.push_back(std::move(pre));
    c.act.push_back(std::move(act));
  }
  const auto& hidden = c.act.back();

  affine(model.f_head, hidden, c.out.z);
  c.out.p = softmax(c.out.z);

  affine(model.g1, hidden, c.g1_pre);
  c.g1_act.resize(c.g1_pre.size());
  for (std::size_t i = 0; i < c.g1_pre.size(); ++i)
    c.g1_act[i] = c.g1_pre[i] > 0.0 ? c.g1_pre[i] : 0.0;
  std::vector<double> g_out;
  affine(model.g2, c.g1_act, g_out);
  c.g_pre = g_out[0];
  c.out.g = sigmoid(c.g_pre);

  affine(model.h_head, hidden, c.out.h_logits);

  if (model.mode == NetMode::DG)
    c.out.dg_abstain = c.out.p[model.num_classes];
  return c;
}

// Accumulates dL/dW, dL/db for `layer` stored at grads.tensors[slot] and
// [slot+1], and adds W^T dy into dx.
void affine_backward(const LinearLayer& layer, std::span<const double> x,
                     std::span<const double> dy, Gradients& grads,
                     std::size_t slot, std::vector<double>* dx) {
  auto& gw = grads.tensors[slot];
  auto& gb = grads.tensors[slot + 1];
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    double* gwrow = gw.data() + r * layer.in;
    const double* wrow = layer.w.data() + r * layer.in;
    for (std::size_t c = 0; c < layer.in; ++c) {
      gwrow[c] += d * x[c];
      if (dx) (*dx)[c] += wrow[c] * d;
    }
    gb[r] += d;
  }
}

void backprop_sample(const SelectiveModel& model, const ForwardCache& cache,
                     const SampleUpstream& up, Gradients& grads) {
  const std::size_t layers = model.body.size();
  const std::size_t slot_f = 2 * layers;
  const std::size_t slot_g1 = slot_f + 2;
  const std::size_t slot_g2 = slot_g1 + 2;
  const std::size_t slot_h = slot_g2 + 2;
  const auto& hidden = cache.act.back();

  std::vector<double> d_hidden(hidden.size(), 0.0);

  if (!up.dz.empty()) {
    if (up.dz.size() != model.logit_dim())
      throw std::invalid_argument("dz dimension mismatch");
    affine_backward(model.f_head, hidden, up.dz, grads, slot_f, &d_hidden);
  }
  if (!up.dh.empty()) {
    if (up.dh.size() != model.num_classes)
      throw std::invalid_argument("dh dimension mismatch");
    affine_backward(model.h_head, hidden, up.dh, grads, slot_h, &d_hidden);
  }
  if (up.dg != 0.0) {
    const double g = cache.out.g;
    const double d_gpre = up.dg * g * (1.0 - g);
    std::vector<double> d_g1_act(cache.g1_act.size(), 0.0);
    affine_backward(model.g2, cache.g1_act, std::span(&d_gpre, 1), grads,
                    slot_g2, &d_g1_act);
    std::vector<double> d_g1_pre(cache.g1_pre.size());
    for (std::size_t i = 0; i < d_g1_pre.size(); ++i)
      d_g1_pre[i] = cache.g1_pre[i] > 0.0 ? d_g1_act[i] : 0.0;
    affine_backward(model.g1, hidden, d_g1_pre, grads, slot_g1, &d_hidden);
  }

  // body, last layer first
  std::vector<double> d_act = std::move(d_hidden);
  for (std::size_t l = layers; l-- > 0;) {
    std::vector<double> d_pre(d_act.size());
    for (std::size_t i = 0; i < d_pre.size(); ++i)
      d_pre[i] = cache.pre[l][i] > 0.0 ? d_act[i] : 0.0;
    std::vector<double> d_prev(cache.act[l].size(), 0.0);
    affine_backward(model.body[l], cache.act[l], d_pre, grads, 2 * l,
                    l > 0 ? &d_prev : nullptr);
    d_act = std::move(d_prev);
  }
}

void append_layer_tensors(std::vector<std::vector<double>*>& out,
                          LinearLayer& layer) {
  out.push_back(&layer.w);
  out.push_back(&layer.b);
}

template <typename T>
void write_raw(std::ofstream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return value;
}

}  // namespace

Gradients Gradients::zeros_like(const SelectiveModel& model) {
  Gradients g;
  for (const auto* t : tensor_list(model))
    g.tensors.emplace_back(t->size(), 0.0);
  return g;
}

void Gradients::fill(double value) {
  for (auto& t : tensors) std::fill(t.begin(), t.end(), value);
}

double Gradients::norm2() const {
  double s = 0.0;
  for (const auto& t : tensors)
    for (double v : t) s += v * v;
  return std::sqrt(s);
}

void Gradients::axpy(double scale, const Gradients& other) {
  if (tensors.size() != other.tensors.size())
    throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (tensors[t].size() != other.tensors[t].size())
      throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t i = 0; i < tensors[t].size(); ++i)
      tensors[t][i] += scale * other.tensors[t][i];
  }
}

SelectiveModel init_model(std::size_t input_dim,
                          const std::vector<std::size_t>& hidden_dims,
                          std::size_t num_classes, std::size_t g_hidden,
                          std::uint64_t seed, NetMode mode) {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (g_hidden < 1) throw std::invalid_argument("g_hidden must be >= 1");
  for (std::size_t d : hidden_dims)
    if (d < 1) throw std::invalid_argument("hidden dims must be >= 1");

  SelectiveModel m;
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  m.g_hidden = g_hidden;
  m.mode = mode;

  std::mt19937_64 rng(seed);
  std::size_t width = input_dim;
  for (std::size_t d : hidden_dims) {
    m.body.push_back(make_layer(width, d, rng));
    width = d;
  }
  m.f_head = make_layer(width, m.logit_dim(), rng);
  m.g1 = make_layer(width, g_hidden, rng);
  m.g2 = make_layer(g_hidden, 1, rng);
  m.h_head = make_layer(width, num_classes, rng);
  return m;
}

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("softmax of empty vector");
  require_finite(z, "logits");
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> softmax_vjp(std::span<const double> p,
                                std::span<const double> dp) {
  if (p.size() != dp.size())
    throw std::invalid_argument("softmax_vjp size mismatch");
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += dp[i] * p[i];
  std::vector<double> dz(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = p[i] * (dp[i] - inner);
  return dz;
}

HeadOutputs forward(const SelectiveModel& model, std::span<const double> x) {
  return forward_cached(model, x).out;
}

std::vector<HeadOutputs> forward_batch(const SelectiveModel& model,
                                       const Batch& batch) {
  if (batch.n == 0) throw std::invalid_argument("empty batch");
  std::vector<HeadOutputs> outs;
  outs.reserve(batch.n);
  for (std::size_t i = 0; i < batch.n; ++i)
    outs.push_back(forward(model, batch.row(i)));
  return outs;
}

Gradients backprop_outputs(const SelectiveModel& model, const Batch& batch,
                           std::span<const SampleUpstream> upstream) {
  if (upstream.size() != batch.n)
    throw std::invalid_argument("upstream size mismatch");
  Gradients grads = Gradients::zeros_like(model);
  for (std::size_t i = 0; i < batch.n; ++i) {
    ForwardCache cache = forward_cached(model, batch.row(i));
    backprop_sample(model, cache, upstream[i], grads);
  }
  return grads;
}

std::vector<std::vector<double>*> tensor_list(SelectiveModel& model) {
  std::vector<std::vector<double>*> out;
  for (auto& layer : model.body) append_layer_tensors(out, layer);
  append_layer_tensors(out, model.f_head);
  append_layer_tensors(out, model.g1);
  append_layer_tensors(out, model.g2);
  append_layer_tensors(out, model.h_head);
  return out;
}

std::vector<const std::vector<double>*> tensor_list(
    const SelectiveModel& model) {
  auto mutable_list = tensor_list(const_cast<SelectiveModel&>(model));
  return {mutable_list.begin(), mutable_list.end()};
}

void save_checkpoint(const SelectiveModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_raw(os, static_cast<std::uint32_t>(model.input_dim));
  write_raw(os, static_cast<std::uint32_t>(model.body.size()));
  for (const auto& layer : model.body)
    write_raw(os, static_cast<std::uint32_t>(layer.out));
  write_raw(os, static_cast<std::uint32_t>(model.num_classes));
  write_raw(os, static_cast<std::uint32_t>(model.g_hidden));
  write_raw(os, static_cast<std::uint32_t>(model.mode));
  for (const auto* t : tensor_list(model))
    os.write(reinterpret_cast<const char*>(t->data()),
             static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

SelectiveModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);

  const auto input_dim = read_raw<std::uint32_t>(is);
  const auto n_layers = read_raw<std::uint32_t>(is);
  std::vector<std::size_t> hidden(n_layers);
  for (auto& d : hidden) d = read_raw<std::uint32_t>(is);
  const auto num_classes = read_raw<std::uint32_t>(is);
  const auto g_hidden = read_raw<std::uint32_t>(is);
  const auto mode = read_raw<std::uint32_t>(is);
  if (mode > 1) throw std::runtime_error("bad checkpoint mode field");

  SelectiveModel m = init_model(input_dim, hidden, num_classes, g_hidden,
                                /*seed=*/0, static_cast<NetMode>(mode));
  for (auto* t : tensor_list(m)) {
    is.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint truncated: " + path);
  }
  // trailing bytes indicate a format mismatch
  is.peek();
  if (!is.eof()) throw std::runtime_error("checkpoint has trailing data: " + path);
  return m;
}

}  // namespace syncsel
