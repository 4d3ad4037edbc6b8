#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Slow, brute-force reference implementations. Nothing on the main path
// depends on this header.

namespace qrlab::oracles {

/// Normalised Hermite polynomial h_r(x), orthonormal under N(0, 1).
/// Requires 0 <= r <= 20.
double hermite(int r, double x);

/// <h_j, h_k> under N(0, 1) for j, k <= jmax (jmax <= 12), by an exact
/// (jmax + 1)-point Gauss-Hermite rule.
Eigen::MatrixXd hermite_gram(int jmax);

/// All perfect matchings of {0, ..., m-1}; m must be even.
std::vector<std::vector<std::pair<int, int>>> pairings(int m);

/// (m - 1)!! for even m, 0 for odd m.
std::uint64_t double_factorial_count(int m);

struct PairingSum {
  int a = 0;
  int b = 0;
  std::vector<double> terms;  // one product per pairing
  double value = 0.0;
};

/// E[<x, xi>^a <x, xk>^b] for x ~ N(0, diag(sigma)), by summing over all
/// pairings of the a + b factors. Throws CapacityError for a + b > 12.
PairingSum wick_moment(int a, int b, std::span<const double> sigma, const Eigen::VectorXd& xi,
                       const Eigen::VectorXd& xk);

/// Closed forms in terms of w = Sigma^{1/2} x:
/// s = <w_i, w_k>, p = ||w_i||^2, q = ||w_k||^2.
struct WInner {
  double s = 0.0;
  double p = 0.0;
  double q = 0.0;
};
WInner w_inner(std::span<const double> sigma, const Eigen::VectorXd& xi,
               const Eigen::VectorXd& xk);

double moment11(const WInner& w);  // s
double moment22(const WInner& w);  // 2 s^2 + p q
double moment31(const WInner& w);  // 3 s p
double moment33(const WInner& w);  // 9 s p q + 6 s^3
double moment44(const WInner& w);  // 72 s^2 p q + 24 s^4 + 9 p^2 q^2
double moment42(const WInner& w);  // 12 s^2 p + 3 p^2 q

/// E[(g^T A g)^s] for g ~ N(0, I), s in {2, 3, 4}.
double gaussian_quadform_moment(const Eigen::MatrixXd& A, int s);
/// The third moment with the middle term read as 6 Tr(A) (Tr(A^2))^2.
double gaussian_quadform_alpha3_printed(const Eigen::MatrixXd& A);
/// E[(g^T A g)(g^T B g)] = Tr(A) Tr(B) + 2 Tr(AB).
double gaussian_quadform_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t draws = 0;

  /// |value - mean| <= k * stderr.
  bool within(double value, double k = 5.0) const;
};

/// Monte Carlo estimate of E[(g^T A g)^s].
McEstimate quadform_moment_mc(const Eigen::MatrixXd& A, int s, std::size_t draws,
                              std::uint64_t seed);
/// Monte Carlo estimate of E[(g^T A g)(g^T B g)].
McEstimate quadform_cross_mc(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             std::size_t draws, std::uint64_t seed);
/// Monte Carlo estimate of E[<x, xi>^a <x, xk>^b], x ~ N(0, diag(sigma)).
McEstimate wick_moment_mc(int a, int b, std::span<const double> sigma,
                          const Eigen::VectorXd& xi, const Eigen::VectorXd& xk,
                          std::size_t draws, std::uint64_t seed);

/// |xbar_i^T A xbar_i - Tr(A Sigma2)| / n for the first `trials` rows of
/// the centred tensor features (n = number of rows). A must be symmetric
/// with spectral norm <= 1 (checked by power iteration).
std::vector<double> quadform_concentration_stat(const Eigen::MatrixXd& X2centered,
                                                std::span<const double> sigma2,
                                                const Eigen::MatrixXd& A,
                                                std::size_t trials);

/// Orthogonal projector onto a uniformly random rank-r subspace of R^p.
Eigen::MatrixXd random_projector(Eigen::Index p, Eigen::Index rank, std::uint64_t seed);

}  // namespace qrlab::oracles
