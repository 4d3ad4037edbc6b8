#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "qrlab/datagen.hpp"

namespace qrlab {

/// Scalar function f of the inner-product kernel K(x, z) = f(<x, z>/d),
/// together with its derivatives at 0 up to order 4. Derivatives are
/// supplied analytically, never by differentiation of eval.
class KernelFunction {
 public:
  static KernelFunction exp();
  static KernelFunction cosh();
  /// f(t) = b0 + b2 t^2/2 + b4 t^4/24.
  static KernelFunction quartic(double b0, double b2, double b4);
  /// f(t) = sum_k coeffs[k] t^k.
  static KernelFunction custom_poly(std::vector<double> coeffs);
  static KernelFunction custom(std::string name, std::function<double(double)> f,
                               std::array<double, 5> derivs0,
                               bool ninth_derivative_bounded = false);

  double operator()(double t) const { return f_(t); }
  double eval(double t) const { return f_(t); }
  double value_at(double tau) const { return f_(tau); }

  /// (f(0), f'(0), f''(0), f'''(0), f''''(0)).
  const std::array<double, 5>& derivs0() const noexcept { return derivs0_; }
  double deriv0(int order) const { return derivs0_.at(static_cast<std::size_t>(order)); }

  const std::string& name() const noexcept { return name_; }
  /// Whether |f^(9)| is globally bounded (true for polynomials of degree <= 8).
  bool ninth_derivative_bounded() const noexcept { return ninth_bounded_; }
  /// Polynomial coefficients for polynomial kernels, empty otherwise.
  const std::vector<double>& poly_coeffs() const noexcept { return poly_; }

 private:
  std::string name_;
  std::function<double(double)> f_;
  std::array<double, 5> derivs0_{};
  bool ninth_bounded_ = false;
  std::vector<double> poly_;
};

struct DerivativeCheck {
  std::array<double, 5> finite_difference{};
  std::array<double, 5> relative_error{};
  bool ok = true;
};

/// Compares the declared derivatives against central differences of eval
/// (step 1e-3 up to order 3, 1e-2 for order 4) at relative tolerance 1e-4.
DerivativeCheck check_derivatives(const KernelFunction& kernel);

/// Conditions the generalisation formulas rely on: f'(0) = f'''(0) = 0,
/// f''(0) > 0, and a bounded ninth derivative (reported as a warning only).
struct KernelAssumptions {
  bool odd_derivatives_vanish = false;
  bool curvature_positive = false;
  bool ninth_derivative_bounded = false;
  std::vector<std::string> warnings;

  bool admissible() const noexcept { return odd_derivatives_vanish && curvature_positive; }
};

KernelAssumptions assumption_check(const KernelFunction& kernel);

/// Coefficients of the quadratic surrogate
///   K2 = a0 11^T + a1 XX^T + a2 (XX^T)^{o2} + a I.
struct QuadCoeffs {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a = 0.0;
  /// f(tau) - f(0) - f'(0) tau - f''(0) tau^2 / 2 with the finite-d tau.
  double a_star = 0.0;
  /// Same with tau replaced by its d -> infinity limit.
  double a_star_limit = 0.0;
  std::vector<std::string> warnings;
};

/// Surrogate coefficients with the fourth-order corrections to a0, a2 and
/// the third-order correction to a1.
QuadCoeffs quad_coeffs(const KernelFunction& kernel, const CovarianceSpec& cov);

/// Plain Taylor coefficients f(0), f'(0)/d, f''(0)/(2d^2), same diagonal a.
QuadCoeffs taylor_coeffs(const KernelFunction& kernel, const CovarianceSpec& cov);

/// XX^T, exactly symmetric.
Eigen::MatrixXd gram(const Eigen::MatrixXd& X);

/// K_ij = f(<x_i, x_j>/d).
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const KernelFunction& kernel);
inline Eigen::MatrixXd kernel_matrix(const Dataset& ds, const KernelFunction& kernel) {
  return kernel_matrix(ds.X, kernel);
}

enum class HadamardRoute { direct, tensor_gram };

Eigen::MatrixXd quad_kernel_matrix(const Eigen::MatrixXd& X, const QuadCoeffs& c,
                                   HadamardRoute route = HadamardRoute::direct);
inline Eigen::MatrixXd quad_kernel_matrix(const Dataset& ds, const QuadCoeffs& c,
                                          HadamardRoute route = HadamardRoute::direct) {
  return quad_kernel_matrix(ds.X, c, route);
}

struct SpectralNormEstimate {
  double value = 0.0;
  /// Certified bounds: lower <= ||D|| <= upper.
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
};

/// Power iteration for ||D||, D symmetric. Throws NumericalFailure if the
/// estimate has not settled to relative tolerance `tol` after `max_iter`.
SpectralNormEstimate spectral_norm_power(const Eigen::MatrixXd& D, double tol = 1e-8,
                                         int max_iter = 10000, std::uint64_t seed = 0);

/// Largest-magnitude eigenvalue of K - K2. Full symmetric eigensolve when
/// n <= full_solve_limit, power iteration beyond.
double spectral_norm_gap(const Eigen::MatrixXd& K, const Eigen::MatrixXd& K2,
                         Eigen::Index full_solve_limit = 2048);

/// [f(<x, x_1>/d), ..., f(<x, x_n>/d)].
Eigen::VectorXd cross_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                             const KernelFunction& kernel);

/// Row t holds cross_kernel(X, test.row(t)).
Eigen::MatrixXd cross_kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& test,
                                    const KernelFunction& kernel);

}  // namespace qrlab
