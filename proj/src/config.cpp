#include "syncsel/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace syncsel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("config line " + std::to_string(line_no) + ": " +
                           what);
}

double parse_double(const std::string& v, std::size_t line_no,
                    const std::string& key) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    fail(line_no, "bad numeric value for '" + key + "': '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(out))
    fail(line_no, "bad numeric value for '" + key + "': '" + v + "'");
  return out;
}

long parse_long(const std::string& v, std::size_t line_no,
                const std::string& key) {
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    fail(line_no, "bad integer value for '" + key + "': '" + v + "'");
  }
  if (pos != v.size())
    fail(line_no, "bad integer value for '" + key + "': '" + v + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += fmt_double(values[i]);
    else
      out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (value.empty()) fail(line_no, "empty value for '" + key + "'");
    if (!seen.insert(key).second) fail(line_no, "duplicate key '" + key + "'");

    if (key == "dataset") {
      if (value != "blobs" && value != "ambiguity" && value != "csv")
        fail(line_no, "dataset must be blobs, ambiguity or csv");
      cfg.dataset = value;
    } else if (key == "data_path") {
      cfg.data_path = value;
    } else if (key == "classes") {
      const long v = parse_long(value, line_no, key);
      if (v < 2) fail(line_no, "classes must be >= 2");
      cfg.classes = static_cast<std::size_t>(v);
    } else if (key == "per_class") {
      const long v = parse_long(value, line_no, key);
      if (v < 1) fail(line_no, "per_class must be >= 1");
      cfg.per_class = static_cast<std::size_t>(v);
    } else if (key == "dim") {
      const long v = parse_long(value, line_no, key);
      if (v < 1) fail(line_no, "dim must be >= 1");
      cfg.dim = static_cast<std::size_t>(v);
    } else if (key == "separation") {
      cfg.separation = parse_double(value, line_no, key);
    } else if (key == "noise_frac") {
      cfg.noise_frac = parse_double(value, line_no, key);
    } else if (key == "train_frac") {
      cfg.train_frac = parse_double(value, line_no, key);
    } else if (key == "cal_frac") {
      cfg.cal_frac = parse_double(value, line_no, key);
    } else if (key == "test_frac") {
      cfg.test_frac = parse_double(value, line_no, key);
    } else if (key == "hidden") {
      cfg.hidden.clear();
      for (const auto& item : split_list(value)) {
        const long v = parse_long(item, line_no, key);
        if (v < 1) fail(line_no, "hidden dims must be >= 1");
        cfg.hidden.push_back(static_cast<std::size_t>(v));
      }
    } else if (key == "g_hidden") {
      const long v = parse_long(value, line_no, key);
      if (v < 1) fail(line_no, "g_hidden must be >= 1");
      cfg.g_hidden = static_cast<std::size_t>(v);
    } else if (key == "epochs") {
      const long v = parse_long(value, line_no, key);
      if (v < 0) fail(line_no, "epochs must be >= 0");
      cfg.epochs = static_cast<int>(v);
    } else if (key == "batch_size") {
      const long v = parse_long(value, line_no, key);
      if (v < 1) fail(line_no, "batch_size must be >= 1");
      cfg.batch_size = static_cast<int>(v);
    } else if (key == "lr") {
      cfg.lr = parse_double(value, line_no, key);
    } else if (key == "momentum") {
      cfg.momentum = parse_double(value, line_no, key);
    } else if (key == "weight_decay") {
      cfg.weight_decay = parse_double(value, line_no, key);
    } else if (key == "seed") {
      const long v = parse_long(value, line_no, key);
      if (v < 0) fail(line_no, "seed must be >= 0");
      cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key == "loss") {
      if (value != "sn" && value != "dg" && value != "sync")
        fail(line_no, "loss must be sn, dg or sync");
      cfg.loss = value;
    } else if (key == "coverage") {
      cfg.coverage = parse_double(value, line_no, key);
    } else if (key == "lambda") {
      cfg.lambda = parse_double(value, line_no, key);
    } else if (key == "alpha") {
      cfg.alpha = parse_double(value, line_no, key);
    } else if (key == "mu") {
      cfg.mu = parse_double(value, line_no, key);
    } else if (key == "score") {
      if (value != "sr" && value != "smp" && value != "negent")
        fail(line_no, "score must be sr, smp or negent");
      cfg.score = value;
    } else if (key == "gamma") {
      cfg.gamma = parse_double(value, line_no, key);
    } else if (key == "penalty") {
      if (value != "hinge" && value != "symmetric")
        fail(line_no, "penalty must be hinge or symmetric");
      cfg.penalty = value;
    } else if (key == "odds") {
      cfg.odds = parse_double(value, line_no, key);
    } else if (key == "grid") {
      cfg.grid = parse_grid(value);
    } else if (key == "mechanism") {
      cfg.mechanism = value;
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else {
      fail(line_no, "unknown config key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "dataset = " << cfg.dataset << "\n";
  if (!cfg.data_path.empty()) os << "data_path = " << cfg.data_path << "\n";
  os << "classes = " << cfg.classes << "\n";
  os << "per_class = " << cfg.per_class << "\n";
  os << "dim = " << cfg.dim << "\n";
  os << "separation = " << fmt_double(cfg.separation) << "\n";
  os << "noise_frac = " << fmt_double(cfg.noise_frac) << "\n";
  os << "train_frac = " << fmt_double(cfg.train_frac) << "\n";
  os << "cal_frac = " << fmt_double(cfg.cal_frac) << "\n";
  os << "test_frac = " << fmt_double(cfg.test_frac) << "\n";
  os << "hidden = " << join(cfg.hidden) << "\n";
  os << "g_hidden = " << cfg.g_hidden << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "lr = " << fmt_double(cfg.lr) << "\n";
  os << "momentum = " << fmt_double(cfg.momentum) << "\n";
  os << "weight_decay = " << fmt_double(cfg.weight_decay) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "loss = " << cfg.loss << "\n";
  os << "coverage = " << fmt_double(cfg.coverage) << "\n";
  os << "lambda = " << fmt_double(cfg.lambda) << "\n";
  os << "alpha = " << fmt_double(cfg.alpha) << "\n";
  os << "mu = " << fmt_double(cfg.mu) << "\n";
  os << "score = " << cfg.score << "\n";
  os << "gamma = " << fmt_double(cfg.gamma) << "\n";
  os << "penalty = " << cfg.penalty << "\n";
  os << "odds = " << fmt_double(cfg.odds) << "\n";
  os << "grid = " << join(cfg.grid) << "\n";
  os << "mechanism = " << cfg.mechanism << "\n";
  if (!cfg.out_dir.empty()) os << "out_dir = " << cfg.out_dir << "\n";
  return os.str();
}

SyncConfig to_sync_config(const RunConfig& cfg) {
  SyncConfig sc;
  if (cfg.loss == "sn") sc.mode = LossMode::SN;
  else if (cfg.loss == "dg") sc.mode = LossMode::DG;
  else sc.mode = LossMode::SYNC;
  sc.target_coverage = cfg.coverage;
  sc.lambda = cfg.lambda;
  sc.alpha = cfg.alpha;
  sc.mu = cfg.mu;
  sc.score_kind = parse_score_kind(cfg.score, cfg.gamma);
  sc.penalty = cfg.penalty == "symmetric" ? PenaltyMode::Symmetric
                                          : PenaltyMode::Hinge;
  sc.odds = cfg.odds;
  sc.validate();
  return sc;
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr0 = cfg.lr;
  tc.momentum = cfg.momentum;
  tc.weight_decay = cfg.weight_decay;
  tc.seed = cfg.seed;
  tc.sync = to_sync_config(cfg);
  tc.validate();
  return tc;
}

NetMode net_mode(const RunConfig& cfg) {
  return cfg.loss == "dg" ? NetMode::DG : NetMode::SN;
}

Dataset build_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "blobs")
    return gen_blobs(cfg.classes, cfg.per_class, cfg.dim, cfg.separation,
                     cfg.seed);
  if (cfg.dataset == "ambiguity")
    return gen_ambiguity(cfg.classes, cfg.per_class, cfg.noise_frac, cfg.seed);
  if (cfg.data_path.empty())
    throw std::runtime_error("dataset = csv requires data_path");
  return load_csv(cfg.data_path);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  for (const auto& item : split_list(text)) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error("bad grid value '" + item + "'");
    }
    if (pos != item.size() || !(v > 0.0 && v <= 1.0))
      throw std::runtime_error("bad grid value '" + item + "'");
    grid.push_back(v);
  }
  if (grid.empty()) throw std::runtime_error("empty coverage grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw std::runtime_error("grid must be strictly increasing");
  return grid;
}

}  // namespace syncsel
