#include "syncsel/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "syncsel/rng.hpp"

namespace syncsel {

namespace {

// Cluster centers with minimum pairwise distance `separation`: evenly spaced
// on a line for d = 1, otherwise on a circle in the first two coordinates.
std::vector<std::vector<double>> class_centers(std::size_t num_classes,
                                               std::size_t dim,
                                               double separation) {
  std::vector<std::vector<double>> centers(num_classes,
                                           std::vector<double>(dim, 0.0));
  if (dim == 1) {
    for (std::size_t k = 0; k < num_classes; ++k)
      centers[k][0] = separation * static_cast<double>(k);
  } else {
    const double radius =
        separation / (2.0 * std::sin(std::numbers::pi / num_classes));
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / num_classes;
      centers[k][0] = radius * std::cos(angle);
      centers[k][1] = radius * std::sin(angle);
    }
  }
  return centers;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  return out;
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("csv line " + std::to_string(line_no) + ": " + what);
}

double parse_feature(const std::string& s, std::size_t line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    csv_error(line_no, "not a number: '" + s + "'");
  }
  if (pos != s.size()) csv_error(line_no, "not a number: '" + s + "'");
  if (!std::isfinite(v)) csv_error(line_no, "non-finite value");
  return v;
}

int parse_int_field(const std::string& s, std::size_t line_no,
                    const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    csv_error(line_no, std::string("not an integer ") + what + ": '" + s + "'");
  }
  if (pos != s.size())
    csv_error(line_no, std::string("not an integer ") + what + ": '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace

void SplitSpec::validate() const {
  for (double f : {train_frac, cal_frac, test_frac})
    if (!(f > 0.0 && f < 1.0))
      throw std::invalid_argument("split fractions must lie in (0,1)");
  if (std::abs(train_frac + cal_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
}

Dataset gen_blobs(std::size_t num_classes, std::size_t per_class,
                  std::size_t dim, double separation, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (!(separation >= 0.0) || !std::isfinite(separation))
    throw std::invalid_argument("separation must be finite and >= 0");

  const auto centers = class_centers(num_classes, dim, separation);
  Dataset ds;
  ds.n = num_classes * per_class;
  ds.dim = dim;
  ds.num_classes = num_classes;
  ds.x.resize(ds.n * dim);
  ds.y.resize(ds.n);
  ds.region.assign(ds.n, 0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t row = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t j = 0; j < per_class; ++j, ++row) {
      for (std::size_t d = 0; d < dim; ++d)
        ds.x[row * dim + d] = centers[k][d] + normal(rng);
      ds.y[row] = static_cast<int>(k);
    }
  }
  return ds;
}

Dataset gen_ambiguity(std::size_t num_classes, std::size_t per_class,
                      double noise_frac, std::uint64_t seed) {
  if (!(noise_frac >= 0.0 && noise_frac <= 0.5))
    throw std::invalid_argument("noise_frac must lie in [0, 0.5]");
  constexpr std::size_t kDim = 2;
  constexpr double kSeparation = 10.0;

  Dataset ds = gen_blobs(num_classes, per_class, kDim, kSeparation, seed);
  const auto n_ambiguous =
      static_cast<std::size_t>(std::llround(noise_frac * ds.n));
  if (n_ambiguous == 0) return ds;

  // Overwrite the tail of each class block so the ambiguous count per class
  // stays balanced to within one sample.
  std::mt19937_64 rng(sub_seed(seed, 0xA3B1u));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < num_classes && assigned < n_ambiguous; ++k) {
    const std::size_t quota =
        std::min(per_class, (n_ambiguous - assigned + (num_classes - k) - 1) /
                                (num_classes - k));
    for (std::size_t j = 0; j < quota; ++j, ++assigned) {
      const std::size_t row = k * per_class + per_class - 1 - j;
      for (std::size_t d = 0; d < kDim; ++d)
        ds.x[row * kDim + d] = normal(rng);
      ds.y[row] = label(rng);
      ds.region[row] = 1;
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open csv: " + path);

  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv is empty: " + path);
  auto header = split_fields(line);
  bool has_region = !header.empty() && header.back() == "region";
  if (has_region) header.pop_back();
  if (header.size() < 2 || header.back() != "label")
    throw std::runtime_error("csv header must be f0,...,label[,region]");
  const std::size_t dim = header.size() - 1;
  for (std::size_t d = 0; d < dim; ++d)
    if (header[d] != "f" + std::to_string(d))
      throw std::runtime_error("csv header must be f0,...,label[,region]");

  Dataset ds;
  ds.dim = dim;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::size_t expected = dim + 1 + (has_region ? 1 : 0);
    if (fields.size() != expected)
      csv_error(line_no, "expected " + std::to_string(expected) +
                             " fields, got " + std::to_string(fields.size()));
    for (std::size_t d = 0; d < dim; ++d)
      ds.x.push_back(parse_feature(fields[d], line_no));
    const int y = parse_int_field(fields[dim], line_no, "label");
    if (y < 0) csv_error(line_no, "label must be >= 0");
    max_label = std::max(max_label, y);
    ds.y.push_back(y);
    ds.region.push_back(has_region
                            ? parse_int_field(fields[dim + 1], line_no, "region")
                            : -1);
    ++ds.n;
  }
  if (ds.n == 0) throw std::runtime_error("csv has no data rows: " + path);
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  if (ds.num_classes < 2) ds.num_classes = 2;
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open csv for writing: " + path);
  for (std::size_t d = 0; d < ds.dim; ++d) os << "f" << d << ",";
  os << "label,region\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t d = 0; d < ds.dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x[i * ds.dim + d]);
      os << buf << ",";
    }
    os << ds.y[i] << "," << ds.region[i] << "\n";
  }
  if (!os) throw std::runtime_error("csv write failed: " + path);
}

SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.n; ++i)
    by_class[static_cast<std::size_t>(ds.y[i])].push_back(i);

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> train_idx, cal_idx, test_idx;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    if (idx.empty()) continue;
    const std::size_t n = idx.size();
    if (n < 3)
      throw std::invalid_argument("class " + std::to_string(k) +
                                  " has fewer samples than splits");
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_frac * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
    auto n_cal = static_cast<std::size_t>(
        std::llround(spec.cal_frac * static_cast<double>(n)));
    n_cal = std::clamp<std::size_t>(n_cal, 1, n - n_train - 1);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
    cal_idx.insert(cal_idx.end(), idx.begin() + n_train,
                   idx.begin() + n_train + n_cal);
    test_idx.insert(test_idx.end(), idx.begin() + n_train + n_cal, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(cal_idx.begin(), cal_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto take = [&](const std::vector<std::size_t>& indices) {
    Dataset out;
    out.n = indices.size();
    out.dim = ds.dim;
    out.num_classes = ds.num_classes;
    out.x.reserve(out.n * ds.dim);
    out.y.reserve(out.n);
    out.region.reserve(out.n);
    for (std::size_t i : indices) {
      const auto row = ds.row(i);
      out.x.insert(out.x.end(), row.begin(), row.end());
      out.y.push_back(ds.y[i]);
      out.region.push_back(ds.region[i]);
    }
    return out;
  };
  return {take(train_idx), take(cal_idx), take(test_idx)};
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.n = indices.size();
  b.dim = ds.dim;
  b.x.reserve(b.n * ds.dim);
  b.y.reserve(b.n);
  for (std::size_t i : indices) {
    const auto row = ds.row(i);
    b.x.insert(b.x.end(), row.begin(), row.end());
    b.y.push_back(ds.y[i]);
  }
  return b;
}

Batch full_batch(const Dataset& ds) {
  Batch b;
  b.n = ds.n;
  b.dim = ds.dim;
  b.x = ds.x;
  b.y = ds.y;
  return b;
}

}  // namespace syncsel
