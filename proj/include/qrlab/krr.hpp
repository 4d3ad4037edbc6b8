#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qrlab/datagen.hpp"
#include "qrlab/discrete_law.hpp"
#include "qrlab/kernels.hpp"
#include "qrlab/spectra.hpp"

namespace qrlab {

/// Teacher function f*.
///   general:             c0 + c1 <x, beta> + (c2/d) x^T G x
///   pure_quadratic:      x^T G x / d
///   deterministic_sigma: x^T Sigma x / d
class TeacherModel {
 public:
  enum class Kind { general, pure_quadratic, deterministic_sigma };

  static TeacherModel general(double c0, double c1, Eigen::VectorXd beta, double c2,
                              Eigen::MatrixXd G);
  static TeacherModel pure_quadratic(Eigen::MatrixXd G);
  static TeacherModel deterministic_sigma(const CovarianceSpec& cov);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  double c0() const noexcept { return c0_; }
  double c1() const noexcept { return c1_; }
  double c2() const noexcept { return c2_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  const Eigen::MatrixXd& G() const noexcept { return G_; }

  /// True when the quadratic part carries a random G (redrawn per replicate
  /// by empirical_risk).
  bool has_random_quadratic() const noexcept {
    return kind_ == Kind::pure_quadratic || (kind_ == Kind::general && c2_ != 0.0);
  }

  /// Same teacher with G replaced.
  TeacherModel with_G(Eigen::MatrixXd G) const;

  double operator()(const Eigen::VectorXd& x) const;
  /// f* applied to every row of X.
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;

 private:
  Kind kind_ = Kind::pure_quadratic;
  std::size_t dim_ = 0;
  double c0_ = 0.0, c1_ = 0.0, c2_ = 1.0;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd G_;
  Eigen::VectorXd sigma_diag_;
};

/// Symmetric d x d matrix whose entries on and above the diagonal are iid N(0, 1).
Eigen::MatrixXd random_symmetric_gaussian(std::size_t d, std::uint64_t seed,
                                          std::uint64_t index = 0);

enum class NoiseKind { gaussian, two_point };

/// y_i = f*(x_i) + eps_i with eps iid of variance sigma_eps^2.
Eigen::VectorXd make_labels(const Eigen::MatrixXd& X, const TeacherModel& teacher,
                            double sigma_eps, std::uint64_t seed,
                            NoiseKind noise = NoiseKind::gaussian, std::uint64_t index = 0);
inline Eigen::VectorXd make_labels(const Dataset& ds, const TeacherModel& teacher,
                                   double sigma_eps, std::uint64_t seed,
                                   NoiseKind noise = NoiseKind::gaussian) {
  return make_labels(ds.X, teacher, sigma_eps, seed, noise);
}

/// Cholesky factorisation of K + lambda I, reused across right-hand sides.
/// Solves apply one step of iterative refinement.
class RidgeSystem {
 public:
  /// Throws SingularSystem (with a lambda_min estimate) when K + lambda I is
  /// not positive definite.
  RidgeSystem(const Eigen::MatrixXd& K, double lambda);

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const;
  double lambda() const noexcept { return lambda_; }
  Eigen::Index size() const noexcept { return A_.rows(); }

 private:
  Eigen::MatrixXd A_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double lambda_ = 0.0;
};

/// (K + lambda I)^{-1} y.
Eigen::VectorXd krr_fit(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double lambda);

/// (lambda^2 / n) y^T (K + lambda I)^{-2} y.
double training_error(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double lambda);
/// (1/n) ||K (K + lambda I)^{-1} y - y||^2.
double training_error_residual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                               double lambda);

/// Scalars the asymptotic formulas depend on.
struct RiskInputs {
  double f2 = 0.0;      // f''(0)
  double a_star = 0.0;  // implicit ridge
  double alpha = 0.0;   // d^2 / (2n)
  DiscreteLaw nu;       // spectral law of Sigma^(2)
  /// Number of atoms of nu per d^2/2 coordinates: C(d+1, 2)/(d^2/2) when nu
  /// holds the finite-d atoms, 1 for a limit law.
  double nu_mass = 1.0;

  /// Aspect ratio of the tensor sample covariance, alpha * nu_mass.
  double gamma() const noexcept { return alpha * nu_mass; }
};

enum class NuChoice { finite, limit };

/// finite: nu = the C(d+1, 2) atoms of sigma2_diagonal and a_* at the
/// finite-d tau. limit: nu = sigma2_limit_law and a_* at the limiting tau.
RiskInputs risk_inputs(const KernelFunction& kernel, const CovarianceSpec& cov, double alpha,
                       NuChoice choice = NuChoice::finite,
                       std::optional<double> a_star_override = std::nullopt);

/// lambda^2 (4 alpha/f'')^2 [(c2^2/alpha) I1 + sigma^2 I2] with the law
/// integrals taken at s = 4 alpha (a_* + lambda)/f''.
double asymptotic_training_error(const RiskInputs& in, double lambda, double c2,
                                 double sigma_eps);
/// The same limit by trapezoid quadrature over the inverted density.
double asymptotic_training_error_quadrature(const RiskInputs& in, double lambda, double c2,
                                            double sigma_eps, const GridSpec& grid = {});

enum class LambdaRoute { direct_root, stieltjes };

struct LambdaStar {
  double value = 0.0;
  /// 1 / m~(-z) at z = 4 alpha (a_* + lambda) / f''.
  double alternate = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Root of 1/gamma - 4 alpha (a_* + lambda)/(gamma f'' t) = E_nu[x/(x + t)]
/// (the usual form when nu_mass = 1) on
/// (0, 1e6 scale] by safeguarded Newton-bisection. Throws
/// NumericalFailure if the two routes disagree by more than 1e-10.
LambdaStar lambda_star(const RiskInputs& in, double lambda);

struct RiskPrediction {
  double lambda_star = 0.0;
  double V = 0.0;
  double B = 0.0;
  double total = 0.0;
  double J1 = 0.0;  // E_nu[x/(x + lambda_*)^2]
  double J2 = 0.0;  // E_nu[x^2/(x + lambda_*)^2]
  /// (a_* + lambda)^2 B: the bias with the ridge factor of the push-through
  /// identity kept, lambda_*^2 J1/(1 - alpha J2). Invariant under rescaling
  /// the kernel and lambda together, which B is not.
  double B_rescaled = 0.0;
  LambdaRoute route = LambdaRoute::direct_root;
};

/// V = alpha J2/(1 - alpha J2), B = (lambda_*/(a_* + lambda))^2 J1/(1 - alpha J2),
/// with alpha read as gamma() inside the integrals.
/// total = sigma^2 V + B for pure_quadratic teachers, sigma^2 V (with B = 0)
/// for deterministic_sigma. General teachers are rejected.
RiskPrediction asymptotic_risk(const RiskInputs& in, double lambda, double sigma_eps,
                               TeacherModel::Kind teacher,
                               LambdaRoute route = LambdaRoute::direct_root);
/// Checks assumption_check(kernel) and a_* > 0 first.
RiskPrediction asymptotic_risk(const KernelFunction& kernel, const CovarianceSpec& cov,
                               double alpha, double lambda, double sigma_eps,
                               TeacherModel::Kind teacher,
                               NuChoice choice = NuChoice::finite);

struct EmpiricalRiskOptions {
  std::size_t n_test = 4000;
  std::size_t n_repl = 8;
  std::uint64_t seed = 0;
  MomentMatchedSampler test_sampler = MomentMatchedSampler::gaussian();
  NoiseKind noise = NoiseKind::gaussian;
  /// Used instead of fresh draws when set.
  std::optional<Eigen::MatrixXd> test_points;
};

struct RiskEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::vector<double> replicates;
};

/// Monte Carlo estimate of E[(f_hat(x) - f*(x))^2 | X]. Each replicate
/// draws fresh noise and, for random teachers, a fresh G; all replicates
/// share one factorisation and one set of test points.
RiskEstimate empirical_risk(const Dataset& train, const KernelFunction& kernel,
                            const TeacherModel& teacher, double lambda, double sigma_eps,
                            const EmpiricalRiskOptions& options = {});

struct ResolventTraces {
  double t1 = 0.0;  // a2 Tr(M^{-1} Sigma2)
  double t2 = 0.0;  // a2 (a + lambda) Tr(M^{-2} Sigma2)
  double t3 = 0.0;  // (2/d^2) Tr(M^{-2} Sigma2)
};

/// Traces of M = a2 Xbar^T Xbar + (a + lambda) I against diag(sigma2), with
/// Xbar the centred tensor features (n x p).
ResolventTraces resolvent_traces(const Eigen::MatrixXd& Xbar, std::span<const double> sigma2,
                                 double a2, double a_plus_lambda, std::size_t d);

/// Deterministic equivalents of the three traces.
ResolventTraces resolvent_trace_limits(const RiskInputs& in, double lambda);

}  // namespace qrlab
