#include "qrlab/discrete_law.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "qrlab/errors.hpp"

namespace qrlab {

DiscreteLaw::DiscreteLaw(std::vector<double> atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.empty()) throw InvalidArgument("DiscreteLaw: no atoms");
  if (atoms_.size() != weights_.size())
    throw InvalidArgument("DiscreteLaw: atoms and weights differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (!std::isfinite(atoms_[k]))
      throw InvalidArgument("DiscreteLaw: non-finite atom");
    if (!(weights_[k] > 0.0))
      throw InvalidArgument("DiscreteLaw: weights must be positive");
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("DiscreteLaw: weights sum to " +
                          std::to_string(total) + ", expected 1");
}

DiscreteLaw DiscreteLaw::point(double atom) { return DiscreteLaw({atom}, {1.0}); }

DiscreteLaw DiscreteLaw::uniform(std::vector<double> atoms) {
  const auto n = atoms.size();
  if (n == 0) throw InvalidArgument("DiscreteLaw::uniform: no atoms");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  // Re-normalise so the sum is 1 to the last ulp for large n.
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= s;
  return DiscreteLaw(std::move(atoms), std::move(w));
}

double DiscreteLaw::min_atom() const {
  return *std::min_element(atoms_.begin(), atoms_.end());
}

double DiscreteLaw::max_atom() const {
  return *std::max_element(atoms_.begin(), atoms_.end());
}

double DiscreteLaw::mean() const {
  return expect([](double x) { return x; });
}

DiscreteLaw DiscreteLaw::compressed() const {
  std::map<double, double> merged;
  for (std::size_t k = 0; k < atoms_.size(); ++k) merged[atoms_[k]] += weights_[k];
  std::vector<double> a, w;
  a.reserve(merged.size());
  w.reserve(merged.size());
  double total = 0.0;
  for (const auto& [atom, weight] : merged) {
    a.push_back(atom);
    w.push_back(weight);
    total += weight;
  }
  for (auto& x : w) x /= total;
  return DiscreteLaw(std::move(a), std::move(w));
}

DiscreteLaw DiscreteLaw::scaled(double c) const {
  std::vector<double> a = atoms_;
  for (auto& x : a) x *= c;
  return DiscreteLaw(std::move(a), weights_);
}

}  // namespace qrlab
