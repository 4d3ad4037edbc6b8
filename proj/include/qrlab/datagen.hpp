#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qrlab/discrete_law.hpp"
#include "qrlab/seeding.hpp"

namespace qrlab {

/// Diagonal population covariance. Only the diagonal is stored; the
/// realized values are fixed at construction (seeded for random kinds).
class CovarianceSpec {
 public:
  enum class Kind { identity, uniform, two_point, explicit_diagonal };

  static CovarianceSpec identity(std::size_t d);
  /// Diagonal entries iid U(lo, hi), drawn from `seed`.
  static CovarianceSpec uniform(std::size_t d, double lo, double hi,
                                std::uint64_t seed);
  /// Diagonal entries equal v1 with probability p, else v2.
  static CovarianceSpec two_point(std::size_t d, double v1, double v2, double p,
                                  std::uint64_t seed);
  static CovarianceSpec from_diagonal(std::vector<double> diagonal);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return diag_.size(); }
  const std::vector<double>& diagonal() const noexcept { return diag_; }

  /// Tr(Sigma)/d at this d.
  double tau() const noexcept { return trace_ / static_cast<double>(dim()); }
  /// lim Tr(Sigma)/d for the generating distribution (equals tau() for
  /// identity and explicit diagonals).
  double tau_limit() const noexcept { return tau_limit_; }
  double trace() const noexcept { return trace_; }
  double trace_sq() const noexcept { return trace_sq_; }
  /// Operator-norm bound (largest diagonal entry).
  double bound() const noexcept { return bound_; }

  /// Generator parameters, for serialisation.
  double param(std::size_t i) const { return params_.at(i); }
  std::uint64_t seed() const noexcept { return seed_; }

  std::string describe() const;

 private:
  CovarianceSpec(Kind kind, std::vector<double> diag, double tau_limit,
                 std::vector<double> params, std::uint64_t seed);

  Kind kind_;
  std::vector<double> diag_;
  double trace_ = 0.0;
  double trace_sq_ = 0.0;
  double bound_ = 0.0;
  double tau_limit_ = 0.0;
  std::vector<double> params_;
  std::uint64_t seed_ = 0;
};

/// m-point Gauss-Hermite rule for the standard normal weight, rescaled so
/// the discrete law has mean 0 and variance 1 exactly.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

QuadratureRule gauss_hermite_rule(int m);

/// Entry distribution for z. `gh_discrete(m)` samples the m-point
/// Gauss-Hermite law, which reproduces E[g^t] for t <= 2m-1.
class MomentMatchedSampler {
 public:
  enum class Mode { gaussian, gh_discrete };

  static MomentMatchedSampler gaussian();
  static MomentMatchedSampler gh_discrete(int m);

  Mode mode() const noexcept { return mode_; }
  int nodes() const noexcept { return m_; }
  /// Largest t such that E[z^t] = E[g^t] for all orders up to t.
  int matched_moments() const noexcept;

  double draw(Engine& engine) const;
  std::string describe() const;

 private:
  Mode mode_ = Mode::gaussian;
  int m_ = 0;
  QuadratureRule rule_;
  std::vector<double> cdf_;
};

struct Dataset {
  Eigen::MatrixXd X;  // n x d, rows x_i = Sigma^{1/2} z_i
  std::uint64_t seed = 0;
  CovarianceSpec covariance;
  MomentMatchedSampler sampler;

  Eigen::Index n() const noexcept { return X.rows(); }
  Eigen::Index d() const noexcept { return X.cols(); }
};

/// Draws n rows; row i uses its own substream derived from (seed, i), so the
/// result does not depend on how rows are partitioned across workers.
Dataset sample_dataset(std::size_t n, const CovarianceSpec& cov,
                       const MomentMatchedSampler& sampler, std::uint64_t seed,
                       Stream stream = Stream::data);

/// Number of reduced tensor coordinates, d(d+1)/2.
constexpr std::size_t tensor_dim(std::size_t d) noexcept { return d * (d + 1) / 2; }

/// Largest d accepted by reduced_tensor_features without the override.
inline constexpr std::size_t kMaxTensorDim = 512;

/// Reduced tensor map: coordinate (k, l), k <= l, in row-major pair order is
/// x_k^2 on the diagonal and sqrt(2) x_k x_l off it, so that
/// <x^(2), y^(2)> = <x, y>^2.
Eigen::MatrixXd reduced_tensor_features(const Eigen::MatrixXd& X,
                                        bool allow_large = false);

/// Same map centred by the population mean E x^(2)(k,l) = delta_kl Sigma_kk.
Eigen::MatrixXd centered_tensor_features(const Eigen::MatrixXd& X,
                                         const CovarianceSpec& cov,
                                         bool allow_large = false);

/// Diagonal of Sigma^(2), the covariance of the centred reduced tensor:
/// Var(x_k^2) = 2 Sigma_kk^2 for k = l (Gaussian fourth moment 3 minus the
/// squared mean) and 2 Sigma_kk Sigma_ll for k < l, in the same pair order,
/// as a uniform-weight law.
DiscreteLaw sigma2_diagonal(const CovarianceSpec& cov);
std::vector<double> sigma2_values(const CovarianceSpec& cov);

/// d -> infinity law of Sigma^(2)'s spectrum for the generating distribution
/// of `cov` (off-diagonal pairs dominate): delta_2 for the identity, the
/// law of 2 s s' for independent diagonal draws otherwise. Uniform
/// covariances are discretised on a midpoint grid of `grid` points per axis.
DiscreteLaw sigma2_limit_law(const CovarianceSpec& cov, int grid = 64);

}  // namespace qrlab
