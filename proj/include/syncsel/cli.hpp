#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace syncsel {

// Exit codes: 0 success, 1 config/data error, 2 non-finite loss,
// 3 failed verification checks.

struct TrainOptions {
  std::string config_path;
  std::optional<std::string> out_dir;     // overrides config out_dir
  std::optional<std::uint64_t> seed;      // overrides config seed
  bool dump_trace = false;                // also write trace.csv
};
int cmd_train(const TrainOptions& opt, std::ostream& log);

struct EvalOptions {
  std::string checkpoint_path;
  std::string data_path;
  std::string mechanism = "head";
  std::string grid;                       // "0.1,0.2,..."; empty = default
  std::string out_dir;
};
int cmd_eval(const EvalOptions& opt, std::ostream& log);

struct VerifyOptions {
  std::uint64_t seed = 1;
  double modulus_scale = 1.0;             // test hook; != 1 corrupts L_gamma
};
int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err);

struct SweepOptions {
  std::string config_path;
  std::string gammas;                     // "0.5,1,2.5"
  std::optional<std::string> out_dir;
};
int cmd_sweep(const SweepOptions& opt, std::ostream& log);

struct GenOptions {
  std::string config_path;
  std::string out_csv;
};
int cmd_gen(const GenOptions& opt, std::ostream& log);

}  // namespace syncsel
