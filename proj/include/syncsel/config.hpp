#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "syncsel/data.hpp"
#include "syncsel/train.hpp"

namespace syncsel {

// Flat key = value run configuration. Parsing is strict: unknown keys,
// duplicate keys and malformed values are fatal, with line numbers.
struct RunConfig {
  // data
  std::string dataset = "ambiguity";  // "blobs" | "ambiguity" | "csv"
  std::string data_path;              // csv only
  std::size_t classes = 4;
  std::size_t per_class = 250;
  std::size_t dim = 2;
  double separation = 10.0;
  double noise_frac = 0.2;
  double train_frac = 0.8;
  double cal_frac = 0.1;
  double test_frac = 0.1;
  // model
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t g_hidden = 32;
  // training
  int epochs = 150;
  int batch_size = 64;
  double lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  // loss
  std::string loss = "sync";  // "sn" | "dg" | "sync"
  double coverage = 0.7;
  double lambda = 6.0;
  double alpha = 0.5;
  double mu = 1.0;
  std::string score = "smp";  // "sr" | "smp" | "negent"
  double gamma = 0.5;
  std::string penalty = "hinge";  // "hinge" | "symmetric"
  double odds = 2.2;
  // evaluation
  std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5,
                              0.6, 0.7, 0.8, 0.9, 1.0};
  std::string mechanism = "head";
  // output
  std::string out_dir;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical serialization covering every key; parses back to an identical
// config (doubles round-trip via %.17g).
std::string serialize_config(const RunConfig& cfg);

SyncConfig to_sync_config(const RunConfig& cfg);
TrainConfig to_train_config(const RunConfig& cfg);
NetMode net_mode(const RunConfig& cfg);

// Builds the configured dataset (generator or CSV).
Dataset build_dataset(const RunConfig& cfg);

std::vector<double> parse_grid(const std::string& text);

}  // namespace syncsel
