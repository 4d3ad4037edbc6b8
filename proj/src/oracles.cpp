#include "qrlab/oracles.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "qrlab/datagen.hpp"
#include "qrlab/errors.hpp"
#include "qrlab/kernels.hpp"
#include "qrlab/seeding.hpp"

namespace qrlab::oracles {

double hermite(int r, double x) {
  if (r < 0 || r > 20) throw InvalidArgument("hermite: order must lie in [0, 20]");
  double prev = 0.0, cur = 1.0;
  for (int k = 0; k < r; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                        std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

Eigen::MatrixXd hermite_gram(int jmax) {
  if (jmax < 0 || jmax > 12) throw InvalidArgument("hermite_gram: jmax must lie in [0, 12]");
  const QuadratureRule rule = gauss_hermite_rule(jmax + 1);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(jmax + 1, jmax + 1);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    for (int j = 0; j <= jmax; ++j)
      for (int k = 0; k <= jmax; ++k)
        M(j, k) += rule.weights[i] * hermite(j, rule.nodes[i]) * hermite(k, rule.nodes[i]);
  return M;
}

// ---------------------------------------------------------------------------
// Wick pairings

std::vector<std::vector<std::pair<int, int>>> pairings(int m) {
  std::vector<std::vector<std::pair<int, int>>> out;
  if (m < 0 || m % 2 != 0) return out;
  std::vector<int> free(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) free[i] = i;
  std::vector<std::pair<int, int>> current;
  std::function<void(std::vector<int>)> rec = [&](std::vector<int> rest) {
    if (rest.empty()) {
      out.push_back(current);
      return;
    }
    const int first = rest.front();
    for (std::size_t j = 1; j < rest.size(); ++j) {
      std::vector<int> next;
      next.reserve(rest.size() - 2);
      for (std::size_t k = 1; k < rest.size(); ++k)
        if (k != j) next.push_back(rest[k]);
      current.emplace_back(first, rest[j]);
      rec(next);
      current.pop_back();
    }
  };
  rec(free);
  return out;
}

std::uint64_t double_factorial_count(int m) {
  if (m < 0 || m % 2 != 0) return 0;
  std::uint64_t acc = 1;
  for (int k = m - 1; k > 1; k -= 2) acc *= static_cast<std::uint64_t>(k);
  return acc;
}

namespace {

double sigma_inner(std::span<const double> sigma, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& v) {
  double acc = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k)
    acc += u(static_cast<Eigen::Index>(k)) * sigma[k] * v(static_cast<Eigen::Index>(k));
  return acc;
}

void check_vectors(std::span<const double> sigma, const Eigen::VectorXd& xi,
                   const Eigen::VectorXd& xk, const char* who) {
  if (static_cast<std::size_t>(xi.size()) != sigma.size() ||
      static_cast<std::size_t>(xk.size()) != sigma.size())
    throw InvalidArgument(std::string(who) + ": vector lengths do not match sigma");
}

}  // namespace

PairingSum wick_moment(int a, int b, std::span<const double> sigma, const Eigen::VectorXd& xi,
                       const Eigen::VectorXd& xk) {
  if (a < 0 || b < 0) throw InvalidArgument("wick_moment: negative power");
  if (a + b > 12) throw CapacityError("wick_moment: a + b > 12 exceeds the enumeration limit");
  check_vectors(sigma, xi, xk, "wick_moment");
  PairingSum out;
  out.a = a;
  out.b = b;
  if ((a + b) % 2 != 0) return out;
  const double c[2][2] = {{sigma_inner(sigma, xi, xi), sigma_inner(sigma, xi, xk)},
                          {sigma_inner(sigma, xk, xi), sigma_inner(sigma, xk, xk)}};
  auto which = [a](int slot) { return slot < a ? 0 : 1; };
  for (const auto& matching : pairings(a + b)) {
    double term = 1.0;
    for (const auto& [u, v] : matching) term *= c[which(u)][which(v)];
    out.terms.push_back(term);
    out.value += term;
  }
  return out;
}

WInner w_inner(std::span<const double> sigma, const Eigen::VectorXd& xi,
               const Eigen::VectorXd& xk) {
  check_vectors(sigma, xi, xk, "w_inner");
  return {sigma_inner(sigma, xi, xk), sigma_inner(sigma, xi, xi), sigma_inner(sigma, xk, xk)};
}

double moment11(const WInner& w) { return w.s; }
double moment22(const WInner& w) { return 2 * w.s * w.s + w.p * w.q; }
double moment31(const WInner& w) { return 3 * w.s * w.p; }
double moment33(const WInner& w) { return 9 * w.s * w.p * w.q + 6 * w.s * w.s * w.s; }
double moment44(const WInner& w) {
  const double s2 = w.s * w.s;
  return 72 * s2 * w.p * w.q + 24 * s2 * s2 + 9 * w.p * w.p * w.q * w.q;
}
double moment42(const WInner& w) { return 12 * w.s * w.s * w.p + 3 * w.p * w.p * w.q; }

// ---------------------------------------------------------------------------
// Quadratic forms

namespace {

struct Traces {
  double t1, t2, t3, t4;
};

Traces power_traces(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw InvalidArgument("quadratic form: matrix not square");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("quadratic form: matrix not symmetric");
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A3 = A2 * A;
  return {A.trace(), A2.trace(), A3.trace(), (A2 * A2).trace()};
}

McEstimate summarize(double sum, double sum_sq, std::size_t n) {
  McEstimate e;
  e.draws = n;
  const double N = static_cast<double>(n);
  e.mean = sum / N;
  const double var = std::max(0.0, (sum_sq - N * e.mean * e.mean) / (N - 1.0));
  e.stderr_ = std::sqrt(var / N);
  return e;
}

}  // namespace

double gaussian_quadform_moment(const Eigen::MatrixXd& A, int s) {
  const Traces t = power_traces(A);
  switch (s) {
    case 2: return t.t1 * t.t1 + 2 * t.t2;
    case 3: return t.t1 * t.t1 * t.t1 + 6 * t.t1 * t.t2 + 8 * t.t3;
    case 4:
      return std::pow(t.t1, 4) + 32 * t.t1 * t.t3 + 12 * t.t2 * t.t2 + 12 * t.t1 * t.t1 * t.t2 +
             48 * t.t4;
    default:
      throw InvalidArgument("gaussian_quadform_moment: s must be 2, 3 or 4");
  }
}

double gaussian_quadform_alpha3_printed(const Eigen::MatrixXd& A) {
  const Traces t = power_traces(A);
  return t.t1 * t.t1 * t.t1 + 6 * t.t1 * t.t2 * t.t2 + 8 * t.t3;
}

double gaussian_quadform_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw InvalidArgument("gaussian_quadform_cross: shape mismatch");
  return A.trace() * B.trace() + 2 * (A * B).trace();
}

bool McEstimate::within(double value, double k) const {
  return std::abs(value - mean) <= k * stderr_;
}

McEstimate quadform_moment_mc(const Eigen::MatrixXd& A, int s, std::size_t draws,
                              std::uint64_t seed) {
  if (s < 1) throw InvalidArgument("quadform_moment_mc: s must be >= 1");
  if (draws < 2) throw InvalidArgument("quadform_moment_mc: need at least 2 draws");
  auto engine = make_engine(seed, Stream::monte_carlo);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(A.rows());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < draws; ++t) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(engine);
    const double q = std::pow(v.dot(A * v), s);
    sum += q;
    sum_sq += q * q;
  }
  return summarize(sum, sum_sq, draws);
}

McEstimate quadform_cross_mc(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw InvalidArgument("quadform_cross_mc: need at least 2 draws");
  auto engine = make_engine(seed, Stream::monte_carlo, 1);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(A.rows());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < draws; ++t) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(engine);
    const double q = v.dot(A * v) * v.dot(B * v);
    sum += q;
    sum_sq += q * q;
  }
  return summarize(sum, sum_sq, draws);
}

McEstimate wick_moment_mc(int a, int b, std::span<const double> sigma,
                          const Eigen::VectorXd& xi, const Eigen::VectorXd& xk,
                          std::size_t draws, std::uint64_t seed) {
  check_vectors(sigma, xi, xk, "wick_moment_mc");
  if (draws < 2) throw InvalidArgument("wick_moment_mc: need at least 2 draws");
  auto engine = make_engine(seed, Stream::monte_carlo, 2);
  std::normal_distribution<double> g;
  std::vector<double> root(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) root[k] = std::sqrt(sigma[k]);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < draws; ++t) {
    double u = 0.0, v = 0.0;
    for (std::size_t k = 0; k < sigma.size(); ++k) {
      const double x = root[k] * g(engine);
      u += x * xi(static_cast<Eigen::Index>(k));
      v += x * xk(static_cast<Eigen::Index>(k));
    }
    const double q = std::pow(u, a) * std::pow(v, b);
    sum += q;
    sum_sq += q * q;
  }
  return summarize(sum, sum_sq, draws);
}

// ---------------------------------------------------------------------------
// Concentration

std::vector<double> quadform_concentration_stat(const Eigen::MatrixXd& X2centered,
                                                std::span<const double> sigma2,
                                                const Eigen::MatrixXd& A,
                                                std::size_t trials) {
  const auto p = X2centered.cols();
  if (A.rows() != p || A.cols() != p || static_cast<std::size_t>(p) != sigma2.size())
    throw InvalidArgument("quadform_concentration_stat: dimension mismatch");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("quadform_concentration_stat: A must be symmetric");
  if (spectral_norm_power(A).value > 1.0 + 1e-8)
    throw InvalidArgument("quadform_concentration_stat: ||A|| must be <= 1");
  double trace = 0.0;
  for (Eigen::Index k = 0; k < p; ++k) trace += A(k, k) * sigma2[static_cast<std::size_t>(k)];
  const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(trials), X2centered.rows());
  const double n = static_cast<double>(X2centered.rows());
  const Eigen::MatrixXd Y = X2centered.topRows(rows) * A;
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i)
    out[static_cast<std::size_t>(i)] = std::abs(Y.row(i).dot(X2centered.row(i)) - trace) / n;
  return out;
}

Eigen::MatrixXd random_projector(Eigen::Index p, Eigen::Index rank, std::uint64_t seed) {
  if (rank < 0 || rank > p) throw InvalidArgument("random_projector: rank out of range");
  auto engine = make_engine(seed, Stream::projector);
  std::normal_distribution<double> g;
  Eigen::MatrixXd Z(p, rank);
  for (Eigen::Index j = 0; j < rank; ++j)
    for (Eigen::Index i = 0; i < p; ++i) Z(i, j) = g(engine);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, rank);
  Eigen::MatrixXd P = Q * Q.transpose();
  return 0.5 * (P + P.transpose());
}

}  // namespace qrlab::oracles
