#include "qrlab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qrlab/errors.hpp"

namespace qrlab {

// ---------------------------------------------------------------------------
// CovarianceSpec

CovarianceSpec::CovarianceSpec(Kind kind, std::vector<double> diag,
                               double tau_limit, std::vector<double> params,
                               std::uint64_t seed)
    : kind_(kind),
      diag_(std::move(diag)),
      tau_limit_(tau_limit),
      params_(std::move(params)),
      seed_(seed) {
  if (diag_.empty()) throw InvalidArgument("covariance: dimension must be >= 1");
  for (double v : diag_) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidArgument("covariance: diagonal entries must be finite and >= 0");
    trace_ += v;
    trace_sq_ += v * v;
    bound_ = std::max(bound_, v);
  }
  if (!(trace_ > 0.0)) throw InvalidArgument("covariance: tau must be > 0");
}

CovarianceSpec CovarianceSpec::identity(std::size_t d) {
  return CovarianceSpec(Kind::identity, std::vector<double>(d, 1.0), 1.0, {}, 0);
}

CovarianceSpec CovarianceSpec::uniform(std::size_t d, double lo, double hi,
                                       std::uint64_t seed) {
  if (!(lo >= 0.0) || !(hi >= lo))
    throw InvalidArgument("covariance uniform: need 0 <= lo <= hi");
  auto engine = make_engine(seed, Stream::covariance);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> diag(d);
  for (auto& v : diag) v = u(engine);
  return CovarianceSpec(Kind::uniform, std::move(diag), 0.5 * (lo + hi), {lo, hi},
                        seed);
}

CovarianceSpec CovarianceSpec::two_point(std::size_t d, double v1, double v2,
                                         double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidArgument("covariance two_point: p must lie in [0, 1]");
  auto engine = make_engine(seed, Stream::covariance);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> diag(d);
  for (auto& v : diag) v = (u(engine) < p) ? v1 : v2;
  return CovarianceSpec(Kind::two_point, std::move(diag), p * v1 + (1 - p) * v2,
                        {v1, v2, p}, seed);
}

CovarianceSpec CovarianceSpec::from_diagonal(std::vector<double> diagonal) {
  const double mean =
      diagonal.empty()
          ? 0.0
          : std::accumulate(diagonal.begin(), diagonal.end(), 0.0) /
                static_cast<double>(diagonal.size());
  return CovarianceSpec(Kind::explicit_diagonal, std::move(diagonal), mean, {}, 0);
}

std::string CovarianceSpec::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::identity: os << "identity"; break;
    case Kind::uniform: os << "uniform(" << params_[0] << "," << params_[1] << ")"; break;
    case Kind::two_point:
      os << "two_point(" << params_[0] << "," << params_[1] << "," << params_[2] << ")";
      break;
    case Kind::explicit_diagonal: os << "diagonal"; break;
  }
  os << " d=" << dim();
  return os.str();
}

// ---------------------------------------------------------------------------
// Gauss-Hermite

namespace {

// Normalised probabilists' Hermite values h_0..h_{m} at x.
void hermite_values(int m, double x, std::vector<double>& h) {
  h.assign(static_cast<std::size_t>(m) + 1, 0.0);
  h[0] = 1.0;
  if (m >= 1) h[1] = x;
  for (int r = 1; r < m; ++r)
    h[r + 1] = (x * h[r] - std::sqrt(static_cast<double>(r)) * h[r - 1]) /
               std::sqrt(static_cast<double>(r + 1));
}

}  // namespace

QuadratureRule gauss_hermite_rule(int m) {
  if (m < 1 || m > 64)
    throw InvalidArgument("gauss_hermite_rule: m must lie in [1, 64], got " +
                          std::to_string(m));
  QuadratureRule rule;
  if (m == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }

  // Golub-Welsch start: Jacobi matrix of the probabilists' recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int k = 1; k < m; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  std::vector<double> x(eig.eigenvalues().data(), eig.eigenvalues().data() + m);

  // Newton polish on h_m, with h_m' = sqrt(m) h_{m-1}; Christoffel weights.
  std::vector<double> h;
  std::vector<double> w(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int it = 0; it < 8; ++it) {
      hermite_values(m, x[i], h);
      const double step = h[m] / (std::sqrt(static_cast<double>(m)) * h[m - 1]);
      x[i] -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x[i]))) break;
    }
    hermite_values(m - 1, x[i], h);
    double s = 0.0;
    for (double v : h) s += v * v;
    w[i] = 1.0 / s;
  }

  // Nodes are still ascending; enforce the reflection symmetry exactly.
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double node = 0.5 * (x[j] - x[i]);
    x[i] = -node;
    x[j] = node;
    const double weight = 0.5 * (w[i] + w[j]);
    w[i] = weight;
    w[j] = weight;
  }
  if (m % 2 == 1) x[m / 2] = 0.0;

  // Pairwise-symmetric summation: normalise mass, then variance.
  double mass = 0.0;
  for (double v : w) mass += v;
  for (auto& v : w) v /= mass;
  double var = 0.0;
  for (int i = 0; i < m; ++i) var += w[i] * x[i] * x[i];
  const double scale = 1.0 / std::sqrt(var);
  for (auto& v : x) v *= scale;

  rule.nodes = std::move(x);
  rule.weights = std::move(w);
  return rule;
}

// ---------------------------------------------------------------------------
// MomentMatchedSampler

MomentMatchedSampler MomentMatchedSampler::gaussian() { return MomentMatchedSampler{}; }

MomentMatchedSampler MomentMatchedSampler::gh_discrete(int m) {
  MomentMatchedSampler s;
  s.mode_ = Mode::gh_discrete;
  s.m_ = m;
  s.rule_ = gauss_hermite_rule(m);
  s.cdf_.resize(s.rule_.weights.size());
  std::partial_sum(s.rule_.weights.begin(), s.rule_.weights.end(), s.cdf_.begin());
  s.cdf_.back() = 1.0;
  return s;
}

int MomentMatchedSampler::matched_moments() const noexcept {
  return mode_ == Mode::gaussian ? std::numeric_limits<int>::max() : 2 * m_ - 1;
}

double MomentMatchedSampler::draw(Engine& engine) const {
  if (mode_ == Mode::gaussian) {
    std::normal_distribution<double> g(0.0, 1.0);
    return g(engine);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(engine);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()),
                                         rule_.nodes.size() - 1);
  return rule_.nodes[idx];
}

std::string MomentMatchedSampler::describe() const {
  return mode_ == Mode::gaussian ? std::string("gaussian")
                                 : "gh_discrete(" + std::to_string(m_) + ")";
}

// ---------------------------------------------------------------------------
// Datasets and tensor features

Dataset sample_dataset(std::size_t n, const CovarianceSpec& cov,
                       const MomentMatchedSampler& sampler, std::uint64_t seed,
                       Stream stream) {
  if (n == 0) throw InvalidArgument("sample_dataset: n must be >= 1");
  const auto d = static_cast<Eigen::Index>(cov.dim());
  std::vector<double> root(cov.diagonal().size());
  std::transform(cov.diagonal().begin(), cov.diagonal().end(), root.begin(),
                 [](double v) { return std::sqrt(v); });

  Dataset ds{Eigen::MatrixXd(static_cast<Eigen::Index>(n), d), seed, cov, sampler};
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    auto engine = make_engine(seed, stream, static_cast<std::uint64_t>(i));
    for (Eigen::Index k = 0; k < d; ++k) ds.X(i, k) = root[k] * sampler.draw(engine);
  }
  return ds;
}

Eigen::MatrixXd reduced_tensor_features(const Eigen::MatrixXd& X, bool allow_large) {
  const auto d = static_cast<std::size_t>(X.cols());
  const auto p = tensor_dim(d);
  if (d > kMaxTensorDim && !allow_large) {
    const double bytes = static_cast<double>(X.rows()) * static_cast<double>(p) * 8.0;
    std::ostringstream os;
    os << "reduced_tensor_features: d=" << d << " exceeds " << kMaxTensorDim
       << "; the feature matrix would need " << bytes << " bytes";
    throw CapacityError(os.str());
  }
  const double root2 = std::sqrt(2.0);
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::Index c = 0;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      out(i, c++) = X(i, k) * X(i, k);
      for (Eigen::Index l = k + 1; l < X.cols(); ++l) out(i, c++) = root2 * X(i, k) * X(i, l);
    }
  }
  return out;
}

Eigen::MatrixXd centered_tensor_features(const Eigen::MatrixXd& X,
                                         const CovarianceSpec& cov, bool allow_large) {
  if (static_cast<std::size_t>(X.cols()) != cov.dim())
    throw InvalidArgument("centered_tensor_features: covariance dimension mismatch");
  Eigen::MatrixXd out = reduced_tensor_features(X, allow_large);
  Eigen::Index c = 0;
  for (std::size_t k = 0; k < cov.dim(); ++k) {
    out.col(c).array() -= cov.diagonal()[k];
    c += static_cast<Eigen::Index>(cov.dim() - k);
  }
  return out;
}

std::vector<double> sigma2_values(const CovarianceSpec& cov) {
  const auto& s = cov.diagonal();
  std::vector<double> v;
  v.reserve(tensor_dim(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k) {
    v.push_back(2.0 * s[k] * s[k]);
    for (std::size_t l = k + 1; l < s.size(); ++l) v.push_back(2.0 * s[k] * s[l]);
  }
  return v;
}

DiscreteLaw sigma2_diagonal(const CovarianceSpec& cov) {
  return DiscreteLaw::uniform(sigma2_values(cov));
}

DiscreteLaw sigma2_limit_law(const CovarianceSpec& cov, int grid) {
  switch (cov.kind()) {
    case CovarianceSpec::Kind::identity:
      return DiscreteLaw::point(2.0);
    case CovarianceSpec::Kind::two_point: {
      const double v1 = cov.param(0), v2 = cov.param(1), p = cov.param(2);
      std::vector<double> a, w;
      auto push = [&](double atom, double weight) {
        if (weight > 0.0) {
          a.push_back(atom);
          w.push_back(weight);
        }
      };
      push(2 * v1 * v1, p * p);
      push(2 * v1 * v2, 2 * p * (1 - p));
      push(2 * v2 * v2, (1 - p) * (1 - p));
      return DiscreteLaw(std::move(a), std::move(w)).compressed();
    }
    case CovarianceSpec::Kind::uniform: {
      if (grid < 1) throw InvalidArgument("sigma2_limit_law: grid must be >= 1");
      const double lo = cov.param(0), hi = cov.param(1);
      std::vector<double> mid(static_cast<std::size_t>(grid));
      for (int i = 0; i < grid; ++i) mid[i] = lo + (hi - lo) * (i + 0.5) / grid;
      std::vector<double> a;
      a.reserve(mid.size() * mid.size());
      for (double s : mid)
        for (double t : mid) a.push_back(2.0 * s * t);
      return DiscreteLaw::uniform(std::move(a));
    }
    case CovarianceSpec::Kind::explicit_diagonal:
      break;
  }
  return sigma2_diagonal(cov);
}

}  // namespace qrlab
