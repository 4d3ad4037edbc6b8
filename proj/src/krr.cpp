#include "qrlab/krr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qrlab/errors.hpp"

namespace qrlab {

// ---------------------------------------------------------------------------
// Teachers

namespace {

void require_symmetric(const Eigen::MatrixXd& G, const char* who) {
  if (G.rows() != G.cols() || G.rows() == 0)
    throw InvalidArgument(std::string(who) + ": G must be square and nonempty");
  const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument(std::string(who) + ": G must be symmetric");
}

Eigen::VectorXd quadratic_rows(const Eigen::MatrixXd& X, const Eigen::MatrixXd& G) {
  return (X * G).cwiseProduct(X).rowwise().sum() / static_cast<double>(X.cols());
}

}  // namespace

TeacherModel TeacherModel::general(double c0, double c1, Eigen::VectorXd beta, double c2,
                                   Eigen::MatrixXd G) {
  require_symmetric(G, "teacher");
  if (beta.size() != G.rows()) throw InvalidArgument("teacher: beta and G dimensions differ");
  if (std::abs(beta.norm() - 1.0) > 1e-12) throw InvalidArgument("teacher: beta must be a unit vector");
  TeacherModel t;
  t.kind_ = Kind::general;
  t.dim_ = static_cast<std::size_t>(G.rows());
  t.c0_ = c0;
  t.c1_ = c1;
  t.c2_ = c2;
  t.beta_ = std::move(beta);
  t.G_ = std::move(G);
  return t;
}

TeacherModel TeacherModel::pure_quadratic(Eigen::MatrixXd G) {
  require_symmetric(G, "teacher");
  TeacherModel t;
  t.kind_ = Kind::pure_quadratic;
  t.dim_ = static_cast<std::size_t>(G.rows());
  t.G_ = std::move(G);
  return t;
}

TeacherModel TeacherModel::deterministic_sigma(const CovarianceSpec& cov) {
  TeacherModel t;
  t.kind_ = Kind::deterministic_sigma;
  t.dim_ = cov.dim();
  t.sigma_diag_ = Eigen::Map<const Eigen::VectorXd>(cov.diagonal().data(),
                                                    static_cast<Eigen::Index>(cov.dim()));
  return t;
}

TeacherModel TeacherModel::with_G(Eigen::MatrixXd G) const {
  if (kind_ == Kind::deterministic_sigma)
    throw InvalidArgument("teacher: deterministic_sigma has no G");
  require_symmetric(G, "teacher");
  if (static_cast<std::size_t>(G.rows()) != dim_)
    throw InvalidArgument("teacher: replacement G has the wrong dimension");
  TeacherModel t = *this;
  t.G_ = std::move(G);
  return t;
}

double TeacherModel::operator()(const Eigen::VectorXd& x) const {
  return evaluate(x.transpose())(0);
}

Eigen::VectorXd TeacherModel::evaluate(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != dim_)
    throw InvalidArgument("teacher: input dimension " + std::to_string(X.cols()) +
                          " does not match teacher dimension " + std::to_string(dim_));
  const double inv_d = 1.0 / static_cast<double>(dim_);
  switch (kind_) {
    case Kind::pure_quadratic:
      return quadratic_rows(X, G_);
    case Kind::deterministic_sigma:
      return X.cwiseAbs2() * sigma_diag_ * inv_d;
    case Kind::general: {
      Eigen::VectorXd y = Eigen::VectorXd::Constant(X.rows(), c0_);
      if (c1_ != 0.0) y += c1_ * (X * beta_);
      if (c2_ != 0.0) y += c2_ * quadratic_rows(X, G_);
      return y;
    }
  }
  return {};
}

Eigen::MatrixXd random_symmetric_gaussian(std::size_t d, std::uint64_t seed,
                                          std::uint64_t index) {
  auto engine = make_engine(seed, Stream::teacher, index);
  std::normal_distribution<double> g;
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) G(i, j) = G(j, i) = g(engine);
  return G;
}

Eigen::VectorXd make_labels(const Eigen::MatrixXd& X, const TeacherModel& teacher,
                            double sigma_eps, std::uint64_t seed, NoiseKind noise,
                            std::uint64_t index) {
  if (!(sigma_eps >= 0.0)) throw InvalidArgument("make_labels: sigma_eps must be >= 0");
  Eigen::VectorXd y = teacher.evaluate(X);
  if (sigma_eps == 0.0) return y;
  auto engine = make_engine(seed, Stream::noise, index);
  if (noise == NoiseKind::gaussian) {
    std::normal_distribution<double> g(0.0, sigma_eps);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += g(engine);
  } else {
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += coin(engine) ? sigma_eps : -sigma_eps;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Ridge solves

namespace {

double smallest_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()),
                                                     Eigen::EigenvaluesOnly);
  return eig.info() == Eigen::Success ? eig.eigenvalues()(0) : NAN;
}

}  // namespace

RidgeSystem::RidgeSystem(const Eigen::MatrixXd& K, double lambda) : lambda_(lambda) {
  if (K.rows() != K.cols() || K.rows() == 0)
    throw InvalidArgument("krr: kernel matrix must be square and nonempty");
  if (!(lambda >= 0.0)) throw InvalidArgument("krr: lambda must be >= 0");
  A_ = K;
  A_.diagonal().array() += lambda;
  llt_.compute(A_);
  if (llt_.info() != Eigen::Success) {
    const double lmin = smallest_eigenvalue(A_);
    std::ostringstream os;
    os << "krr: K + lambda I is not positive definite (lambda_min estimate " << lmin << ")";
    throw SingularSystem(os.str(), lmin);
  }
}

Eigen::VectorXd RidgeSystem::solve(const Eigen::VectorXd& y) const {
  if (y.size() != A_.rows()) throw InvalidArgument("krr: label vector has the wrong length");
  Eigen::VectorXd w = llt_.solve(y);
  w += llt_.solve(y - A_ * w);
  const double residual = (A_ * w - y).norm();
  const double ynorm = y.norm();
  if (residual > 1e-8 * std::max(ynorm, 1e-300) && ynorm > 0.0) {
    const double lmin = smallest_eigenvalue(A_);
    std::ostringstream os;
    os << "krr: solve residual " << residual << " exceeds 1e-8 ||y|| (lambda_min estimate "
       << lmin << ")";
    throw SingularSystem(os.str(), lmin);
  }
  return w;
}

Eigen::VectorXd krr_fit(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double lambda) {
  return RidgeSystem(K, lambda).solve(y);
}

double training_error(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double lambda) {
  if (lambda == 0.0) {
    RidgeSystem check(K, 0.0);
    return 0.0;
  }
  const Eigen::VectorXd w = krr_fit(K, y, lambda);
  return lambda * lambda * w.squaredNorm() / static_cast<double>(y.size());
}

double training_error_residual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                               double lambda) {
  const Eigen::VectorXd w = krr_fit(K, y, lambda);
  return (K * w - y).squaredNorm() / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Asymptotic predictors

RiskInputs risk_inputs(const KernelFunction& kernel, const CovarianceSpec& cov, double alpha,
                       NuChoice choice, std::optional<double> a_star_override) {
  if (!(alpha > 0.0)) throw InvalidArgument("risk_inputs: alpha must be > 0");
  const QuadCoeffs c = quad_coeffs(kernel, cov);
  RiskInputs in;
  in.f2 = kernel.deriv0(2);
  in.alpha = alpha;
  if (choice == NuChoice::finite) {
    in.nu = sigma2_diagonal(cov).compressed();
    in.a_star = c.a_star;
    const double d = static_cast<double>(cov.dim());
    in.nu_mass = static_cast<double>(tensor_dim(cov.dim())) / (0.5 * d * d);
  } else {
    in.nu = sigma2_limit_law(cov).compressed();
    in.a_star = c.a_star_limit;
  }
  if (a_star_override) in.a_star = *a_star_override;
  return in;
}

namespace {

double law_shift(const RiskInputs& in, double lambda, const char* who) {
  if (!(in.alpha > 0.0)) throw InvalidArgument(std::string(who) + ": alpha must be > 0");
  if (in.f2 == 0.0) throw AssumptionViolation(std::string(who) + ": f''(0) = 0");
  if (!(in.a_star + lambda > 0.0))
    throw AssumptionViolation(std::string(who) + ": a_* + lambda must be > 0");
  const double s = 4.0 * in.alpha * (in.a_star + lambda) / in.f2;
  if (!(s > 0.0)) throw AssumptionViolation(std::string(who) + ": f''(0) must be > 0");
  return s;
}

}  // namespace

double asymptotic_training_error(const RiskInputs& in, double lambda, double c2,
                                 double sigma_eps) {
  const double s = law_shift(in, lambda, "asymptotic_training_error");
  if (lambda == 0.0) return 0.0;
  const LawIntegrals I = law_integrals(in.gamma(), in.nu, s);
  const double pre = lambda * 4.0 * in.alpha / in.f2;
  return pre * pre * (c2 * c2 / in.alpha * I.I1 + sigma_eps * sigma_eps * I.I2);
}

double asymptotic_training_error_quadrature(const RiskInputs& in, double lambda, double c2,
                                            double sigma_eps, const GridSpec& grid) {
  law_shift(in, lambda, "asymptotic_training_error_quadrature");
  if (lambda == 0.0) return 0.0;
  const SpectralLaw law = deformed_mp_law(in.gamma(), in.nu, grid);
  const double k = in.f2 / (4.0 * in.alpha);
  return lambda * lambda * law.integrate([&](double x) {
    const double den = k * x + in.a_star + lambda;
    return (c2 * c2 * x / in.alpha + sigma_eps * sigma_eps) / (den * den);
  });
}

LambdaStar lambda_star(const RiskInputs& in, double lambda) {
  const double z = law_shift(in, lambda, "lambda_star");
  const double g = in.gamma();
  const auto& atoms = in.nu.atoms();
  const auto& weights = in.nu.weights();
  // h(t) = 1 - z/t - gamma E_nu[x/(x + t)], increasing in t.
  auto h = [&](double t, double& dh, double& mag) {
    double e = 0.0, de = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const double q = atoms[k] / (atoms[k] + t);
      e += weights[k] * q;
      de += weights[k] * q / (atoms[k] + t);
    }
    dh = z / (t * t) + g * de;
    mag = std::max({1.0, z / t, g * e});
    return 1.0 - z / t - g * e;
  };

  // h(z) <= 0 and h(z + gamma E x) >= 0.
  const double scale = std::max({1.0, in.nu.max_atom(), z});
  double lo = z;
  double hi = std::min(z + g * std::max(in.nu.mean(), 0.0), 1e6 * scale);
  double dh = 0.0, mag = 0.0;
  const double h_lo = h(lo, dh, mag);
  const double h_hi = h(hi, dh, mag);
  if (h_lo > 0.0 || h_hi < 0.0) {
    std::ostringstream os;
    os << "lambda_star: no sign change on [" << lo << ", " << hi << "]";
    throw AssumptionViolation(os.str());
  }

  LambdaStar out;
  double t = h_lo == 0.0 ? lo : (h_hi == 0.0 ? hi : 0.5 * (lo + hi));
  for (int it = 0; it < 200; ++it) {
    const double v = h(t, dh, mag);
    out.iterations = it + 1;
    out.residual = std::abs(v);
    if (std::abs(v) <= 1e-14 * mag) break;
    (v < 0.0 ? lo : hi) = t;
    double next = t - v / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * hi) break;
    t = next;
  }
  out.value = t;

  const auto ev = companion_stieltjes(cplx(-z, 0.0), g, in.nu);
  out.alternate = 1.0 / ev.m_tilde.real();
  if (std::abs(out.alternate - out.value) > 1e-10 * std::max(1.0, out.value)) {
    std::ostringstream os;
    os.precision(17);
    os << "lambda_star: routes disagree (root " << out.value << ", 1/m~ " << out.alternate << ")";
    throw NumericalFailure(os.str());
  }
  return out;
}

RiskPrediction asymptotic_risk(const RiskInputs& in, double lambda, double sigma_eps,
                               TeacherModel::Kind teacher, LambdaRoute route) {
  if (teacher == TeacherModel::Kind::general)
    throw InvalidArgument("asymptotic_risk: only pure_quadratic and deterministic_sigma teachers");
  if (!(in.a_star > 0.0)) throw AssumptionViolation("asymptotic_risk: a_* must be > 0");
  const LambdaStar ls = lambda_star(in, lambda);
  RiskPrediction p;
  p.route = route;
  p.lambda_star = route == LambdaRoute::direct_root ? ls.value : ls.alternate;
  const double t = p.lambda_star;
  p.J1 = in.nu.expect([&](double x) { return x / ((x + t) * (x + t)); });
  p.J2 = in.nu.expect([&](double x) { return x * x / ((x + t) * (x + t)); });
  const double g = in.gamma();
  const double den = 1.0 - g * p.J2;
  if (!(den > 1e-8)) {
    std::ostringstream os;
    os << "asymptotic_risk: 1 - alpha J2 = " << den << " (alpha J2 = " << g * p.J2 << ")";
    throw AssumptionViolation(os.str());
  }
  p.V = g * p.J2 / den;
  if (teacher != TeacherModel::Kind::deterministic_sigma) {
    const double r = t / (in.a_star + lambda);
    p.B = r * r * in.nu_mass * p.J1 / den;
    p.B_rescaled = t * t * in.nu_mass * p.J1 / den;
  }
  p.total = sigma_eps * sigma_eps * p.V + p.B;
  return p;
}

RiskPrediction asymptotic_risk(const KernelFunction& kernel, const CovarianceSpec& cov,
                               double alpha, double lambda, double sigma_eps,
                               TeacherModel::Kind teacher, NuChoice choice) {
  const KernelAssumptions a = assumption_check(kernel);
  if (!a.admissible()) {
    std::string msg = "asymptotic_risk: kernel " + kernel.name() + " is not admissible";
    for (const auto& w : a.warnings) msg += "; " + w;
    throw AssumptionViolation(msg);
  }
  return asymptotic_risk(risk_inputs(kernel, cov, alpha, choice), lambda, sigma_eps, teacher);
}

// ---------------------------------------------------------------------------
// Empirical risk

RiskEstimate empirical_risk(const Dataset& train, const KernelFunction& kernel,
                            const TeacherModel& teacher, double lambda, double sigma_eps,
                            const EmpiricalRiskOptions& opt) {
  if (opt.n_repl == 0) throw InvalidArgument("empirical_risk: n_repl must be >= 1");
  const RidgeSystem system(kernel_matrix(train.X, kernel), lambda);
  Eigen::MatrixXd test;
  if (opt.test_points) {
    test = *opt.test_points;
  } else {
    if (opt.n_test == 0) throw InvalidArgument("empirical_risk: n_test must be >= 1");
    if (opt.test_sampler.matched_moments() < 18)
      throw AssumptionViolation("empirical_risk: test sampler must match 18 Gaussian moments");
    test = sample_dataset(opt.n_test, train.covariance, opt.test_sampler, opt.seed,
                          Stream::test_points)
               .X;
  }
  const Eigen::MatrixXd T = cross_kernel_matrix(train.X, test, kernel);

  RiskEstimate est;
  est.replicates.reserve(opt.n_repl);
  for (std::size_t r = 0; r < opt.n_repl; ++r) {
    const TeacherModel f = teacher.has_random_quadratic()
                               ? teacher.with_G(random_symmetric_gaussian(teacher.dim(), opt.seed, r))
                               : teacher;
    const Eigen::VectorXd y = make_labels(train.X, f, sigma_eps, opt.seed, opt.noise, r);
    const Eigen::VectorXd w = system.solve(y);
    const Eigen::VectorXd err = T * w - f.evaluate(test);
    est.replicates.push_back(err.squaredNorm() / static_cast<double>(err.size()));
  }
  const double R = static_cast<double>(opt.n_repl);
  for (double v : est.replicates) est.mean += v;
  est.mean /= R;
  if (opt.n_repl > 1) {
    double ss = 0.0;
    for (double v : est.replicates) ss += (v - est.mean) * (v - est.mean);
    est.stderr_ = std::sqrt(ss / (R - 1.0) / R);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Resolvent traces

ResolventTraces resolvent_traces(const Eigen::MatrixXd& Xbar, std::span<const double> sigma2,
                                 double a2, double a_plus_lambda, std::size_t d) {
  const auto p = Xbar.cols();
  if (static_cast<std::size_t>(p) != sigma2.size())
    throw InvalidArgument("resolvent_traces: sigma2 length does not match feature count");
  if (!(a_plus_lambda > 0.0)) throw InvalidArgument("resolvent_traces: a + lambda must be > 0");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
  M.selfadjointView<Eigen::Lower>().rankUpdate(Xbar.transpose(), a2);
  M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
  M.diagonal().array() += a_plus_lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("resolvent_traces: resolvent matrix is not positive definite");
  const Eigen::MatrixXd Minv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  double tr1 = 0.0, tr2 = 0.0;
  for (Eigen::Index k = 0; k < p; ++k) {
    tr1 += Minv(k, k) * sigma2[k];
    tr2 += Minv.col(k).squaredNorm() * sigma2[k];
  }
  const double dd = static_cast<double>(d);
  return {a2 * tr1, a2 * a_plus_lambda * tr2, 2.0 / (dd * dd) * tr2};
}

ResolventTraces resolvent_trace_limits(const RiskInputs& in, double lambda) {
  const RiskPrediction p = asymptotic_risk(in, lambda, 0.0, TeacherModel::Kind::pure_quadratic);
  const double lead = in.f2 * p.lambda_star / (4.0 * in.alpha * (in.a_star + lambda));
  return {lead - 1.0, lead - 1.0 / (1.0 - in.gamma() * p.J2), p.B};
}

}  // namespace qrlab
