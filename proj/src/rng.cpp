#include "syncsel/rng.hpp"

#include <stdexcept>

namespace syncsel {

std::vector<double> sample_simplex(std::size_t num_classes,
                                   std::mt19937_64& rng) {
  if (num_classes < 2) throw std::invalid_argument("simplex needs C >= 2");
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(num_classes);
  double sum = 0.0;
  for (auto& v : p) {
    v = expo(rng);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace syncsel
