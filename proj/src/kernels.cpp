#include "qrlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qrlab/errors.hpp"

namespace qrlab {

// ---------------------------------------------------------------------------
// KernelFunction

KernelFunction KernelFunction::exp() {
  KernelFunction k;
  k.name_ = "exp";
  k.f_ = [](double t) { return std::exp(t); };
  k.derivs0_ = {1.0, 1.0, 1.0, 1.0, 1.0};
  return k;
}

KernelFunction KernelFunction::cosh() {
  KernelFunction k;
  k.name_ = "cosh";
  k.f_ = [](double t) { return std::cosh(t); };
  k.derivs0_ = {1.0, 0.0, 1.0, 0.0, 1.0};
  return k;
}

KernelFunction KernelFunction::quartic(double b0, double b2, double b4) {
  KernelFunction k = custom_poly({b0, 0.0, b2 / 2.0, 0.0, b4 / 24.0});
  std::ostringstream os;
  os << "quartic:" << b0 << "," << b2 << "," << b4;
  k.name_ = os.str();
  return k;
}

KernelFunction KernelFunction::custom_poly(std::vector<double> coeffs) {
  if (coeffs.empty()) throw InvalidArgument("custom_poly: no coefficients");
  KernelFunction k;
  std::ostringstream os;
  os << "custom_poly:";
  for (std::size_t i = 0; i < coeffs.size(); ++i) os << (i ? "," : "") << coeffs[i];
  k.name_ = os.str();
  double factorial = 1.0;
  for (std::size_t order = 0; order < k.derivs0_.size(); ++order) {
    if (order > 0) factorial *= static_cast<double>(order);
    k.derivs0_[order] = order < coeffs.size() ? factorial * coeffs[order] : 0.0;
  }
  k.ninth_bounded_ = coeffs.size() <= 10;  // degree <= 9: f^(9) constant
  k.poly_ = coeffs;
  k.f_ = [c = std::move(coeffs)](double t) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
    return acc;
  };
  return k;
}

KernelFunction KernelFunction::custom(std::string name, std::function<double(double)> f,
                                      std::array<double, 5> derivs0,
                                      bool ninth_derivative_bounded) {
  if (!f) throw InvalidArgument("custom kernel: empty function");
  KernelFunction k;
  k.name_ = std::move(name);
  k.f_ = std::move(f);
  k.derivs0_ = derivs0;
  k.ninth_bounded_ = ninth_derivative_bounded;
  return k;
}

DerivativeCheck check_derivatives(const KernelFunction& kernel) {
  DerivativeCheck out;
  const auto& f = kernel;
  const double f0 = f(0.0);
  auto stencil = [&](int order, double h) {
    switch (order) {
      case 1: return (f(h) - f(-h)) / (2 * h);
      case 2: return (f(h) - 2 * f0 + f(-h)) / (h * h);
      case 3: return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h * h * h);
      default: return (f(2 * h) - 4 * f(h) + 6 * f0 - 4 * f(-h) + f(-2 * h)) / (h * h * h * h);
    }
  };
  out.finite_difference[0] = f0;
  for (int order = 1; order <= 4; ++order)
    out.finite_difference[order] = stencil(order, order == 4 ? 1e-2 : 1e-3);
  for (std::size_t order = 0; order < 5; ++order) {
    const double declared = kernel.derivs0()[order];
    out.relative_error[order] =
        std::abs(out.finite_difference[order] - declared) / std::max(1.0, std::abs(declared));
    if (out.relative_error[order] > 1e-4) out.ok = false;
  }
  return out;
}

KernelAssumptions assumption_check(const KernelFunction& kernel) {
  KernelAssumptions a;
  const auto& d = kernel.derivs0();
  a.odd_derivatives_vanish = d[1] == 0.0 && d[3] == 0.0;
  a.curvature_positive = d[2] > 0.0;
  a.ninth_derivative_bounded = kernel.ninth_derivative_bounded();
  if (!a.odd_derivatives_vanish)
    a.warnings.push_back("f'(0) or f'''(0) is nonzero");
  if (!a.curvature_positive) a.warnings.push_back("f''(0) is not positive");
  if (!a.ninth_derivative_bounded)
    a.warnings.push_back("f^(9) is not globally bounded for kernel " + kernel.name());
  return a;
}

// ---------------------------------------------------------------------------
// Surrogate coefficients

namespace {

double diagonal_offset(const KernelFunction& f, double tau) {
  const auto& d = f.derivs0();
  return f.value_at(tau) - d[0] - d[1] * tau - 0.5 * d[2] * tau * tau;
}

void attach_sign_warnings(QuadCoeffs& c) {
  if (!(c.a_star > 0.0))
    c.warnings.push_back("a_star <= 0: the kernel has no implicit ridge");
  if (c.a0 < 0.0) c.warnings.push_back("a0 < 0");
  if (c.a1 < 0.0) c.warnings.push_back("a1 < 0");
  if (c.a2 < 0.0) c.warnings.push_back("a2 < 0");
}

}  // namespace

QuadCoeffs quad_coeffs(const KernelFunction& kernel, const CovarianceSpec& cov) {
  const auto& f = kernel.derivs0();
  const double d = static_cast<double>(cov.dim());
  const double tr2 = cov.trace_sq();
  const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
  QuadCoeffs c;
  c.a0 = f[0] - f[4] * tr2 * tr2 / (8.0 * d4);
  c.a1 = f[1] / d + f[3] * tr2 / (2.0 * d3);
  c.a2 = f[2] / (2.0 * d2) + f[4] * tr2 / (4.0 * d4);
  c.a = diagonal_offset(kernel, cov.tau());
  c.a_star = c.a;
  c.a_star_limit = diagonal_offset(kernel, cov.tau_limit());
  attach_sign_warnings(c);
  return c;
}

QuadCoeffs taylor_coeffs(const KernelFunction& kernel, const CovarianceSpec& cov) {
  const auto& f = kernel.derivs0();
  const double d = static_cast<double>(cov.dim());
  QuadCoeffs c;
  c.a0 = f[0];
  c.a1 = f[1] / d;
  c.a2 = f[2] / (2.0 * d * d);
  c.a = diagonal_offset(kernel, cov.tau());
  c.a_star = c.a;
  c.a_star_limit = diagonal_offset(kernel, cov.tau_limit());
  attach_sign_warnings(c);
  return c;
}

// ---------------------------------------------------------------------------
// Matrices

Eigen::MatrixXd gram(const Eigen::MatrixXd& X) {
  const auto n = X.rows();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  G.selfadjointView<Eigen::Lower>().rankUpdate(X);
  G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const KernelFunction& kernel) {
  const double inv_d = 1.0 / static_cast<double>(X.cols());
  Eigen::MatrixXd K = gram(X);
  const auto n = K.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) K(i, j) = kernel(K(i, j) * inv_d);
  K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

Eigen::MatrixXd quad_kernel_matrix(const Eigen::MatrixXd& X, const QuadCoeffs& c,
                                   HadamardRoute route) {
  const Eigen::MatrixXd G = gram(X);
  Eigen::MatrixXd H;
  if (route == HadamardRoute::direct) {
    H = G.cwiseProduct(G);
  } else {
    H = gram(reduced_tensor_features(X, true));
  }
  Eigen::MatrixXd K2 = c.a1 * G + c.a2 * H;
  K2.array() += c.a0;
  K2.diagonal().array() += c.a;
  return K2;
}

// ---------------------------------------------------------------------------
// Spectral norm

SpectralNormEstimate spectral_norm_power(const Eigen::MatrixXd& D, double tol,
                                         int max_iter, std::uint64_t seed) {
  if (D.rows() != D.cols()) throw InvalidArgument("spectral_norm_power: matrix not square");
  SpectralNormEstimate est;
  const double frob = D.norm();
  const double row_sum = D.rows() ? D.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  est.upper = std::min(frob, row_sum);
  if (frob == 0.0) return est;

  auto engine = make_engine(seed, Stream::monte_carlo);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(D.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(engine);
  v.normalize();

  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd w = D * v;
    const double norm = w.norm();
    est.iterations = it;
    est.value = norm;
    est.lower = std::max(est.lower, norm);
    if (norm == 0.0) return est;
    if (it > 1 && std::abs(norm - previous) <= tol * norm) return est;
    previous = norm;
    v = w / norm;
  }
  std::ostringstream os;
  os << "spectral_norm_power: no convergence after " << max_iter
     << " iterations (estimate " << est.value << ", bounds [" << est.lower << ", "
     << est.upper << "])";
  throw NumericalFailure(os.str());
}

double spectral_norm_gap(const Eigen::MatrixXd& K, const Eigen::MatrixXd& K2,
                         Eigen::Index full_solve_limit) {
  if (K.rows() != K2.rows() || K.cols() != K2.cols() || K.rows() != K.cols())
    throw InvalidArgument("spectral_norm_gap: shape mismatch");
  Eigen::MatrixXd D = K - K2;
  D = 0.5 * (D + D.transpose()).eval();
  if (D.rows() <= full_solve_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
      throw NumericalFailure("spectral_norm_gap: eigensolver failed");
    const auto& ev = eig.eigenvalues();
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  }
  return spectral_norm_power(D).value;
}

Eigen::VectorXd cross_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                             const KernelFunction& kernel) {
  if (x.size() != X.cols())
    throw InvalidArgument("cross_kernel: test point has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(X.cols()));
  const double inv_d = 1.0 / static_cast<double>(X.cols());
  Eigen::VectorXd k = X * x;
  for (Eigen::Index i = 0; i < k.size(); ++i) k(i) = kernel(k(i) * inv_d);
  return k;
}

Eigen::MatrixXd cross_kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& test,
                                    const KernelFunction& kernel) {
  if (test.cols() != X.cols()) throw InvalidArgument("cross_kernel_matrix: dimension mismatch");
  const double inv_d = 1.0 / static_cast<double>(X.cols());
  Eigen::MatrixXd T = test * X.transpose();
  T = T.unaryExpr([&](double v) { return kernel(v * inv_d); });
  return T;
}

}  // namespace qrlab
