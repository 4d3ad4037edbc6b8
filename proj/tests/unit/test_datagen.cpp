#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numeric>

#include "qrlab/datagen.hpp"
#include "qrlab/errors.hpp"
#include "qrlab/oracles.hpp"

using namespace qrlab;
using Catch::Approx;

namespace {

// Mean and standard error of a sample.
std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1) / n)};
}

double rule_moment(const QuadratureRule& r, int t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * std::pow(r.nodes[i], t);
  return acc;
}

}  // namespace

TEST_CASE("gauss_hermite_rule small cases") {
  const auto r1 = gauss_hermite_rule(1);
  REQUIRE(r1.nodes.size() == 1);
  CHECK(r1.nodes[0] == 0.0);
  CHECK(r1.weights[0] == 1.0);

  const auto r2 = gauss_hermite_rule(2);
  REQUIRE(r2.nodes.size() == 2);
  CHECK(r2.nodes[0] == Approx(-1.0).margin(1e-14));
  CHECK(r2.nodes[1] == Approx(1.0).margin(1e-14));
  CHECK(r2.weights[0] == Approx(0.5).margin(1e-14));

  // E[g^8] = 7!! from the pairing count oracle.
  const double e8 = static_cast<double>(oracles::double_factorial_count(8));
  CHECK(e8 == 105.0);
  CHECK(std::abs(rule_moment(gauss_hermite_rule(5), 8) - e8) <= 1e-9);

  CHECK_THROWS_AS(gauss_hermite_rule(0), InvalidArgument);
  CHECK_THROWS_AS(gauss_hermite_rule(65), InvalidArgument);
}

TEST_CASE("gauss_hermite_rule normalisation for every m") {
  for (int m = 1; m <= 64; ++m) {
    const auto r = gauss_hermite_rule(m);
    CHECK(std::abs(rule_moment(r, 0) - 1.0) <= 1e-14);
    CHECK(std::abs(rule_moment(r, 1)) <= 1e-12);
    if (m >= 2) CHECK(std::abs(rule_moment(r, 2) - 1.0) <= 1e-12);
    for (double w : r.weights) CHECK(w > 0.0);
  }
}

TEST_CASE("gh_discrete(m) matches Gaussian moments up to 2m-1") {
  for (int m : {3, 5, 10}) {
    const auto r = gauss_hermite_rule(m);
    for (int t = 1; t <= 2 * m - 1; ++t) {
      const double exact =
          t % 2 ? 0.0 : static_cast<double>(oracles::double_factorial_count(t));
      CHECK(std::abs(rule_moment(r, t) - exact) <= 1e-9 * std::max(1.0, exact));
    }
    // the first unmatched moment differs
    const double e2m = static_cast<double>(oracles::double_factorial_count(2 * m));
    CHECK(std::abs(rule_moment(r, 2 * m) - e2m) > 1e-6);
    CHECK(MomentMatchedSampler::gh_discrete(m).matched_moments() == 2 * m - 1);
  }
}

TEST_CASE("sample_dataset determinism and moments") {
  const auto cov = CovarianceSpec::identity(3);
  const auto a = sample_dataset(4, cov, MomentMatchedSampler::gaussian(), 7);
  const auto b = sample_dataset(4, cov, MomentMatchedSampler::gaussian(), 7);
  CHECK(a.X == b.X);
  CHECK(a.n() == 4);
  CHECK(a.d() == 3);
  const auto c = sample_dataset(4, cov, MomentMatchedSampler::gaussian(), 8);
  CHECK(a.X != c.X);

  SECTION("gh_discrete(5) fourth moment") {
    const auto ds = sample_dataset(10000, CovarianceSpec::identity(1),
                                   MomentMatchedSampler::gh_discrete(5), 3);
    std::vector<double> x4(10000);
    for (Eigen::Index i = 0; i < ds.n(); ++i) x4[static_cast<std::size_t>(i)] = std::pow(ds.X(i, 0), 4);
    const auto [m, se] = mean_se(x4);
    CHECK(std::abs(m - 3.0) <= 5 * se);
  }
  SECTION("variance scales with the covariance entry") {
    const auto ds = sample_dataset(10000, CovarianceSpec::two_point(1, 2.0, 2.0, 1.0, 0),
                                   MomentMatchedSampler::gaussian(), 5);
    std::vector<double> x2(10000);
    for (Eigen::Index i = 0; i < ds.n(); ++i) x2[static_cast<std::size_t>(i)] = ds.X(i, 0) * ds.X(i, 0);
    const auto [m, se] = mean_se(x2);
    CHECK(std::abs(m - 2.0) <= 5 * se);
  }
  SECTION("gh(1) is the zero distribution and rows are scaled by sqrt(sigma)") {
    const auto ds = sample_dataset(5, CovarianceSpec::from_diagonal({4.0, 1.0}),
                                   MomentMatchedSampler::gh_discrete(2), 9);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      CHECK(std::abs(ds.X(i, 0)) == Approx(2.0));
      CHECK(std::abs(ds.X(i, 1)) == Approx(1.0));
    }
  }
  CHECK_THROWS_AS(sample_dataset(0, cov, MomentMatchedSampler::gaussian(), 1), InvalidArgument);
}

TEST_CASE("CovarianceSpec invariants") {
  const auto u = CovarianceSpec::uniform(50, 0.5, 1.5, 4);
  double sum = 0.0;
  for (double v : u.diagonal()) {
    CHECK(v >= 0.5);
    CHECK(v <= 1.5);
    CHECK(v <= u.bound());
    sum += v;
  }
  CHECK(u.tau() == Approx(sum / 50.0));
  CHECK(u.tau_limit() == 1.0);
  CHECK(u.trace() == Approx(sum));
  CHECK(CovarianceSpec::uniform(50, 0.5, 1.5, 4).diagonal() == u.diagonal());

  const auto tp = CovarianceSpec::two_point(1000, 1.0, 3.0, 0.25, 2);
  std::size_t ones = 0;
  for (double v : tp.diagonal()) {
    CHECK((v == 1.0 || v == 3.0));
    ones += v == 1.0;
  }
  CHECK(ones > 180);
  CHECK(ones < 320);
  CHECK(tp.tau_limit() == Approx(0.25 * 1.0 + 0.75 * 3.0));

  CHECK(CovarianceSpec::identity(4).tau() == 1.0);
  CHECK(CovarianceSpec::identity(4).trace_sq() == 4.0);
  CHECK_THROWS_AS(CovarianceSpec::from_diagonal({0.0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(CovarianceSpec::from_diagonal({1.0, -1.0}), InvalidArgument);
  CHECK_THROWS_AS(CovarianceSpec::uniform(3, 2.0, 1.0, 0), InvalidArgument);
  CHECK_THROWS_AS(CovarianceSpec::two_point(3, 1.0, 2.0, 1.5, 0), InvalidArgument);
}

TEST_CASE("reduced tensor features") {
  Eigen::MatrixXd x(1, 2);
  x << 1, 0;
  Eigen::RowVector3d want(1, 0, 0);
  CHECK(reduced_tensor_features(x).row(0) == Eigen::MatrixXd(want));

  x << 1, 1;
  const Eigen::MatrixXd f = reduced_tensor_features(x);
  CHECK(f(0, 0) == 1.0);
  CHECK(f(0, 1) == Approx(std::sqrt(2.0)));
  CHECK(f(0, 2) == 1.0);
  CHECK(f.row(0).squaredNorm() == Approx(4.0));

  // column order (1,1), (1,2), (1,3), (2,2), (2,3), (3,3)
  Eigen::MatrixXd y(1, 3);
  y << 2, 3, 5;
  const Eigen::MatrixXd g = reduced_tensor_features(y);
  REQUIRE(g.cols() == 6);
  const double r2 = std::sqrt(2.0);
  CHECK(g(0, 0) == 4.0);
  CHECK(g(0, 1) == Approx(r2 * 6));
  CHECK(g(0, 2) == Approx(r2 * 10));
  CHECK(g(0, 3) == 9.0);
  CHECK(g(0, 4) == Approx(r2 * 15));
  CHECK(g(0, 5) == 25.0);

  const auto ds = sample_dataset(50, CovarianceSpec::identity(8), MomentMatchedSampler::gaussian(), 2);
  const Eigen::MatrixXd X2 = reduced_tensor_features(ds.X);
  const Eigen::MatrixXd G = ds.X * ds.X.transpose();
  const double dev = (X2 * X2.transpose() - G.cwiseProduct(G)).cwiseAbs().maxCoeff();
  CHECK(dev <= 1e-10 * 64);

  CHECK(tensor_dim(8) == 36);
  const Eigen::MatrixXd big = Eigen::MatrixXd::Zero(1, 513);
  CHECK_THROWS_AS(reduced_tensor_features(big), CapacityError);
  CHECK(reduced_tensor_features(big, true).cols() == static_cast<Eigen::Index>(tensor_dim(513)));
}

TEST_CASE("sigma2_diagonal") {
  const auto law = sigma2_diagonal(CovarianceSpec::identity(5)).compressed();
  REQUIRE(law.size() == 1);
  CHECK(law.atoms()[0] == 2.0);
  CHECK(law.weights()[0] == Approx(1.0));

  const auto v = sigma2_values(CovarianceSpec::from_diagonal({1.0, 4.0}));
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 2.0);
  CHECK(v[1] == 8.0);
  CHECK(v[2] == 32.0);
  CHECK(sigma2_diagonal(CovarianceSpec::from_diagonal({1.0, 4.0})).size() == 3);

  SECTION("limit law for identity is a point mass at 2") {
    const auto lim = sigma2_limit_law(CovarianceSpec::identity(10)).compressed();
    REQUIRE(lim.size() == 1);
    CHECK(lim.atoms()[0] == 2.0);
  }
  SECTION("limit law for uniform covariance has mean 2 E[s]^2") {
    const auto lim = sigma2_limit_law(CovarianceSpec::uniform(10, 0.5, 1.5, 1));
    CHECK(lim.mean() == Approx(2.0).epsilon(1e-3));
    CHECK(lim.min_atom() >= 2 * 0.25 - 1e-12);
    CHECK(lim.max_atom() <= 2 * 2.25 + 1e-12);
  }
}

TEST_CASE("centred tensor features: mean, variance and zero off-diagonal covariance") {
  const std::size_t d = 3, n = 40000;
  const auto cov = CovarianceSpec::uniform(d, 0.5, 1.5, 6);
  const auto ds = sample_dataset(n, cov, MomentMatchedSampler::gaussian(), 12);
  const Eigen::MatrixXd raw = reduced_tensor_features(ds.X);
  const Eigen::MatrixXd c = centered_tensor_features(ds.X, cov);
  const auto s2 = sigma2_values(cov);
  const auto& sd = cov.diagonal();

  // Raw means: Sigma_kk on the diagonal pairs, 0 elsewhere.
  std::size_t col = 0;
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t l = k; l < d; ++l, ++col) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col));
      const auto [m, se] = mean_se(v);
      CHECK(std::abs(m - (k == l ? sd[k] : 0.0)) <= 5 * se);
    }

  const Eigen::Index p = c.cols();
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = a; b < p; ++b) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = c(static_cast<Eigen::Index>(i), a) * c(static_cast<Eigen::Index>(i), b);
      const auto [m, se] = mean_se(v);
      const double want = a == b ? s2[static_cast<std::size_t>(a)] : 0.0;
      CHECK(std::abs(m - want) <= 5 * se);
    }
}
