#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace syncsel {

// Head layout of the classifier. SN carries C prediction logits plus the
// selection and auxiliary heads; DG widens the prediction head to C+1 where
// the extra logit is the abstention class.
enum class NetMode : std::uint32_t { SN = 0, DG = 1 };

struct LinearLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // row-major [out][in]
  std::vector<double> b;  // [out]
};

// MLP body with ReLU activations, a prediction head f, a two-layer selection
// head g (ReLU between, sigmoid on top) and an auxiliary head h.
struct SelectiveModel {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;  // C
  std::size_t g_hidden = 0;
  NetMode mode = NetMode::SN;
  std::vector<LinearLayer> body;
  LinearLayer f_head;  // body width -> logit_dim()
  LinearLayer g1;      // body width -> g_hidden
  LinearLayer g2;      // g_hidden -> 1
  LinearLayer h_head;  // body width -> C

  std::size_t logit_dim() const {
    return num_classes + (mode == NetMode::DG ? 1 : 0);
  }
  std::size_t body_width() const {
    return body.empty() ? input_dim : body.back().out;
  }
};

struct HeadOutputs {
  std::vector<double> z;        // prediction logits (logit_dim entries)
  std::vector<double> p;        // softmax(z)
  double g = 0.0;               // selection score, in (0,1)
  std::vector<double> h_logits; // auxiliary logits (C entries)
  std::optional<double> dg_abstain;  // p[C], DG mode only
};

// Per-parameter-tensor gradient carrier; tensors[i] is shape-congruent with
// tensor_list(model)[i].
struct Gradients {
  std::vector<std::vector<double>> tensors;

  static Gradients zeros_like(const SelectiveModel& model);
  void fill(double value);
  double norm2() const;
  // this += scale * other
  void axpy(double scale, const Gradients& other);
};

struct Batch {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> x;  // row-major n x dim
  std::vector<int> y;     // labels in [0, C)

  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * dim, dim};
  }
};

// Deterministic init: weights uniform with He-style fan-in scaling
// (limit = sqrt(6/fan_in)), biases zero.
SelectiveModel init_model(std::size_t input_dim,
                          const std::vector<std::size_t>& hidden_dims,
                          std::size_t num_classes, std::size_t g_hidden,
                          std::uint64_t seed, NetMode mode = NetMode::SN);

// Max-subtracted softmax; stable for |z|_inf up to ~700. Rejects non-finite
// input.
std::vector<double> softmax(std::span<const double> z);

// Vector-Jacobian product of softmax: given dL/dp at p = softmax(z),
// returns dL/dz.
std::vector<double> softmax_vjp(std::span<const double> p,
                                std::span<const double> dp);

HeadOutputs forward(const SelectiveModel& model, std::span<const double> x);
std::vector<HeadOutputs> forward_batch(const SelectiveModel& model,
                                       const Batch& batch);

// Upstream gradients for one sample, already mapped to logit space:
// dz = dL/dz (prediction logits), dg = dL/dg (post-sigmoid selection score),
// dh = dL/dh_logits. Empty vectors mean zero.
struct SampleUpstream {
  std::vector<double> dz;
  double dg = 0.0;
  std::vector<double> dh;
};

// Reverse-mode accumulation of dL/dparams for a batch given per-sample
// upstream gradients. Samples are reduced in batch order.
Gradients backprop_outputs(const SelectiveModel& model, const Batch& batch,
                           std::span<const SampleUpstream> upstream);

// All parameter tensors in declaration (= checkpoint) order:
// body W/b pairs, then f, g1, g2, h.
std::vector<std::vector<double>*> tensor_list(SelectiveModel& model);
std::vector<const std::vector<double>*> tensor_list(const SelectiveModel& model);

// Flat binary checkpoint, little-endian: magic "SYNCNET1", u32 header
// (input_dim, layer count, hidden dims, C, g_hidden, mode), then all
// tensors as f64 in declaration order. Round-trips bit-exactly.
void save_checkpoint(const SelectiveModel& model, const std::string& path);
SelectiveModel load_checkpoint(const std::string& path);

}  // namespace syncsel
