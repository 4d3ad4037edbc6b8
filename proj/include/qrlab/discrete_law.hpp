#pragma once

#include <cstddef>
#include <vector>

namespace qrlab {

/// Finitely supported probability law: atoms with positive weights summing
/// to one. Used for the population law of the centred tensor covariance.
class DiscreteLaw {
 public:
  DiscreteLaw() = default;
  DiscreteLaw(std::vector<double> atoms, std::vector<double> weights);

  static DiscreteLaw point(double atom);
  static DiscreteLaw uniform(std::vector<double> atoms);

  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }

  double min_atom() const;
  double max_atom() const;
  double mean() const;

  /// Sum of weight_k * fn(atom_k).
  template <class Fn>
  auto expect(Fn&& fn) const {
    using R = decltype(fn(0.0));
    R acc{};
    for (std::size_t k = 0; k < atoms_.size(); ++k)
      acc += weights_[k] * fn(atoms_[k]);
    return acc;
  }

  /// Merges equal atoms; the law is unchanged, sums get cheaper.
  DiscreteLaw compressed() const;

  /// Law of c * X for X ~ this.
  DiscreteLaw scaled(double c) const;

 private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
};

}  // namespace qrlab
