#include "qrlab/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "qrlab/errors.hpp"

namespace qrlab {

std::vector<double> esd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw InvalidArgument("esd: matrix not square");
  if (M.size() == 0) return {};
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("esd: matrix is not symmetric within 1e-10");
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalFailure("esd: eigensolver failed");
  std::vector<double> ev(eig.eigenvalues().data(), eig.eigenvalues().data() + S.rows());
  std::sort(ev.begin(), ev.end());
  return ev;
}

double mp_density(double gamma, double x) {
  if (!(gamma > 0.0)) throw InvalidArgument("mp_density: gamma must be > 0");
  const double r = std::sqrt(gamma);
  const double lo = (1 - r) * (1 - r), hi = (1 + r) * (1 + r);
  if (x <= lo || x >= hi || x <= 0.0) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) / (2 * std::numbers::pi * gamma * x);
}

// ---------------------------------------------------------------------------
// Fixed-point solvers

namespace {

constexpr int kMaxSteps = 500;

void check_domain(cplx z, double alpha, const DiscreteLaw& nu, const char* who) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw InvalidArgument(std::string(who) + ": alpha must be >= 0");
  if (nu.empty()) throw InvalidArgument(std::string(who) + ": empty law");
  if (z.imag() < 0.0 || (z.imag() == 0.0 && !(z.real() < 0.0)))
    throw InvalidArgument(std::string(who) + ": need Im z > 0 or z real and negative");
  if (nu.min_atom() < 0.0)
    throw InvalidArgument(std::string(who) + ": population law must be nonnegative");
}

// Branch that the Stieltjes transform of a law on [0, inf) takes.
bool on_branch(cplx z, cplx m) {
  if (!std::isfinite(m.real()) || !std::isfinite(m.imag()) || m == cplx(0.0)) return false;
  if (z.imag() > 0.0) return m.imag() > 0.0;
  return m.real() > 0.0;
}

std::string describe_failure(const char* who, cplx z, double residual, int steps) {
  std::ostringstream os;
  os.precision(6);
  os << who << ": no convergence at z = (" << z.real() << ", " << z.imag() << ") after "
     << steps << " steps, residual " << residual;
  return os.str();
}

// Shared driver: damped fixed-point steps m <- (m + map(m))/2 until the
// Newton phase can take over. `eval` returns (F(m), F'(m), scale of F).
template <class Map, class Eval>
StieltjesEval solve_fixed_point(cplx z, cplx m, bool warm, Map&& map, Eval&& eval,
                                const char* who) {
  StieltjesEval out;
  out.z = z;
  int steps = 0;
  int damped = warm ? 0 : 20;
  double residual = INFINITY;
  while (steps < kMaxSteps) {
    for (int k = 0; k < damped && steps < kMaxSteps; ++k, ++steps) {
      const cplx next = 0.5 * m + 0.5 * map(m);
      if (!on_branch(z, next)) break;
      m = next;
    }
    cplx candidate = m;
    for (int k = 0; k < 40 && steps < kMaxSteps; ++k, ++steps) {
      const auto [F, dF, scale] = eval(candidate);
      residual = std::abs(F);
      if (residual <= 1e-12 * scale) {
        out.m_tilde = candidate;
        out.m_tilde_prime = dF;
        out.iterations = steps;
        out.residual = residual;
        return out;
      }
      const cplx next = candidate - F / dF;
      if (!on_branch(z, next)) break;
      candidate = next;
    }
    damped = 40;
  }
  throw NumericalFailure(describe_failure(who, z, residual, steps));
}

}  // namespace

namespace {

// One solve of the companion equation at z from m0.
StieltjesEval companion_at(cplx z, double alpha, const DiscreteLaw& nu, cplx m0, bool warm) {
  const auto& atoms = nu.atoms();
  const auto& weights = nu.weights();
  auto map = [&](cplx m) {
    cplx g1 = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) g1 += weights[k] * atoms[k] / (1.0 + atoms[k] * m);
    return -1.0 / (z - alpha * g1);
  };
  auto eval = [&](cplx m) {
    cplx g1 = 0.0, g2 = 0.0;
    double mag = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const cplx t = atoms[k] / (1.0 + atoms[k] * m);
      g1 += weights[k] * t;
      g2 += weights[k] * t * t;
      mag += weights[k] * std::abs(t);
    }
    const cplx inv = 1.0 / m;
    const cplx F = -inv + alpha * g1 - z;
    const cplx dzdm = inv * inv - alpha * g2;
    const double scale = std::max({1.0, std::abs(z), std::abs(inv), alpha * mag});
    return std::tuple<cplx, cplx, double>(F, dzdm, scale);
  };
  // The Newton derivative dz/dm is stored; callers invert it.
  return solve_fixed_point(z, m0, warm, map, eval, "companion_stieltjes");
}

StieltjesEval mp_side_at(cplx z, double alpha, const DiscreteLaw& nu, cplx m0, bool warm) {
  const auto& atoms = nu.atoms();
  const auto& weights = nu.weights();
  auto map = [&](cplx m) {
    const cplx shrink = 1.0 - alpha - alpha * z * m;
    cplx acc = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) acc += weights[k] / (atoms[k] * shrink - z);
    return acc;
  };
  auto eval = [&](cplx m) {
    const cplx shrink = 1.0 - alpha - alpha * z * m;
    cplx acc = 0.0, dacc = 0.0;
    double mag = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const cplx inv = 1.0 / (atoms[k] * shrink - z);
      acc += weights[k] * inv;
      dacc += weights[k] * atoms[k] * alpha * z * inv * inv;
      mag += weights[k] * std::abs(inv);
    }
    return std::tuple<cplx, cplx, double>(m - acc, 1.0 - dacc,
                                          std::max({1.0, std::abs(m), mag}));
  };
  return solve_fixed_point(z, m0, warm, map, eval, "mp_side_stieltjes");
}

// Direct solve, and if that stalls (near the support with small Im z),
// walk down from a height where it converges, warm-starting each level.
template <class Solve>
StieltjesEval with_continuation(cplx z, cplx m0, bool warm, Solve&& solve) {
  try {
    return solve(z, m0, warm);
  } catch (const NumericalFailure&) {
    if (z.imag() <= 0.0) throw;
  }
  const double top = std::max(1.0, std::abs(z));
  const int levels = 40;
  StieltjesEval out;
  for (int k = 0; k <= levels; ++k) {
    const double h = k == levels ? z.imag() : top * std::pow(z.imag() / top, double(k) / levels);
    const cplx zk(z.real(), h);
    out = solve(zk, k == 0 ? -1.0 / zk : out.m_tilde, k > 0);
  }
  return out;
}

}  // namespace

StieltjesEval companion_stieltjes(cplx z, double alpha, const DiscreteLaw& nu,
                                  std::optional<cplx> initial_guess) {
  check_domain(z, alpha, nu, "companion_stieltjes");
  if (alpha == 0.0) {
    StieltjesEval out;
    out.z = z;
    out.m_tilde = -1.0 / z;
    out.m_tilde_prime = 1.0 / (z * z);
    return out;
  }
  const cplx m0 = initial_guess.value_or(-1.0 / z);
  const bool warm = initial_guess.has_value() && on_branch(z, m0);
  StieltjesEval out = with_continuation(z, warm ? m0 : -1.0 / z, warm, [&](cplx zk, cplx m, bool w) {
    return companion_at(zk, alpha, nu, m, w);
  });
  out.m_tilde_prime = 1.0 / out.m_tilde_prime;
  return out;
}

StieltjesEval mp_side_stieltjes(cplx z, double alpha, const DiscreteLaw& nu) {
  check_domain(z, alpha, nu, "mp_side_stieltjes");
  StieltjesEval out = with_continuation(z, -1.0 / z, false, [&](cplx zk, cplx m, bool w) {
    return mp_side_at(zk, alpha, nu, m, w);
  });
  out.m_tilde_prime = 0.0;  // not tracked on the p-side
  return out;
}

// ---------------------------------------------------------------------------
// SpectralLaw

void SpectralLaw::ensure_cumulative() const {
  if (cumulative_.size() == grid.size()) return;
  cumulative_.assign(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
}

double SpectralLaw::total_mass() const {
  ensure_cumulative();
  return atom0_mass + (cumulative_.empty() ? 0.0 : cumulative_.back());
}

double SpectralLaw::density_at(double x) const {
  if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  if (it == grid.end()) return density.back();
  const auto i = static_cast<std::size_t>(it - grid.begin());
  const double t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
  return (1 - t) * density[i - 1] + t * density[i];
}

double SpectralLaw::cdf(double x) const {
  ensure_cumulative();
  const double span = grid.empty() ? 1.0 : std::max(std::abs(grid.front()), std::abs(grid.back()));
  double acc = (x >= -1e-8 * span) ? atom0_mass : 0.0;
  if (grid.empty() || x <= grid.front()) return acc;
  if (x >= grid.back()) return acc + cumulative_.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const auto i = static_cast<std::size_t>(it - grid.begin());
  const double h = x - grid[i - 1];
  const double slope = (density[i] - density[i - 1]) / (grid[i] - grid[i - 1]);
  return acc + cumulative_[i - 1] + h * density[i - 1] + 0.5 * slope * h * h;
}

void SpectralLaw::write_csv(std::ostream& out) const {
  out.precision(17);
  out << "# atom0_mass=" << atom0_mass << '\n';
  out << "x,density\n";
  for (std::size_t i = 0; i < grid.size(); ++i) out << grid[i] << ',' << density[i] << '\n';
}

namespace {

// Newton on -1/m + alpha E_nu[x/(1 + x m)] = x at real x, started from the
// root at x + i eta. Returns nullopt if it does not settle.
std::optional<cplx> real_axis_root(double x, double alpha, const DiscreteLaw& nu, cplx m) {
  const auto& atoms = nu.atoms();
  const auto& weights = nu.weights();
  for (int it = 0; it < 60; ++it) {
    cplx g1 = 0.0, g2 = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const cplx t = atoms[k] / (1.0 + atoms[k] * m);
      g1 += weights[k] * t;
      g2 += weights[k] * t * t;
    }
    const cplx inv = 1.0 / m;
    const cplx F = -inv + alpha * g1 - x;
    const cplx dF = inv * inv - alpha * g2;
    const cplx step = F / dF;
    cplx next = m - step;
    if (next.imag() < 0.0) next = std::conj(next);
    if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) return std::nullopt;
    m = next;
    if (std::abs(step) <= 1e-13 * std::abs(m)) return m;
  }
  return std::nullopt;
}

}  // namespace

SpectralLaw deformed_mp_law(double alpha, const DiscreteLaw& nu_in, const GridSpec& spec) {
  if (!(alpha > 0.0)) throw InvalidArgument("deformed_mp_law: alpha must be > 0");
  if (spec.interior_points < 16 || spec.tail_points < 1 || !(spec.padding > 0.0))
    throw InvalidArgument("deformed_mp_law: bad grid specification");
  const DiscreteLaw nu = nu_in.compressed();
  if (nu.min_atom() < 0.0) throw InvalidArgument("deformed_mp_law: negative atom");

  SpectralLaw law;
  law.alpha = alpha;
  law.nu = nu;
  law.atom0_mass = std::max(1.0 - alpha, 0.0);
  const double r = std::sqrt(alpha);
  const double scale = nu.max_atom() * (1 + r) * (1 + r);
  if (!(scale > 0.0)) {
    // nu = delta_0: the whole law is the atom at 0.
    law.atom0_mass = 1.0;
    return law;
  }
  law.eta = 1e-4 * scale;

  // The continuous part lives in [min(nu)(1 - sqrt a)^2, max(nu)(1 + sqrt a)^2].
  const double lo = nu.min_atom() * (1 - r) * (1 - r);
  const double hi = scale;
  const double pad = spec.padding * scale;
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(spec.interior_points + 2 * spec.tail_points + 2));
  const int N = spec.interior_points;
  for (int i = 0; i <= N; ++i) {
    // Chebyshev clustering towards both edges.
    const double t = 0.5 * (1 - std::cos(std::numbers::pi * i / N));
    g.push_back(lo + (hi - lo) * t);
  }
  // At alpha = 1 the density blows up like c/sqrt(x) at 0.
  const bool hard_edge = r == 1.0;
  const double first = std::min(law.eta, 0.5 * pad);
  const double ratio = std::pow(pad / first, 1.0 / std::max(1, spec.tail_points - 1));
  for (int k = 0; k < spec.tail_points; ++k) {
    const double off = first * std::pow(ratio, k);
    if (!hard_edge) g.push_back(lo - off);
    g.push_back(hi + off);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());

  law.grid = g;
  law.density.resize(g.size());
  std::optional<cplx> warm;
  const double inv_pi = 1.0 / std::numbers::pi;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cplx z(g[i], law.eta);
    StieltjesEval ev;
    try {
      ev = companion_stieltjes(z, alpha, nu, warm);
    } catch (const NumericalFailure& e) {
      std::ostringstream os;
      os << "deformed_mp_law: Stieltjes solve failed at grid point x = " << g[i] << " ("
         << e.what() << ")";
      throw NumericalFailure(os.str());
    }
    warm = ev.m_tilde;
    // The continuous part lives inside [lo, hi] and away from 0; outside it
    // only the Lorentzian tails of the smoothing would show.
    if (g[i] < lo || g[i] > hi || g[i] <= 0.0) {
      law.density[i] = 0.0;
      continue;
    }
    cplx continuous = ev.m_tilde;
    if (alpha < 1.0) continuous += (1.0 - alpha) / z;
    double dens = std::max(0.0, continuous.imag() * inv_pi);
    // Polish onto the real axis from the smoothed root.
    if (const auto root = real_axis_root(g[i], alpha, nu, ev.m_tilde))
      dens = std::max(0.0, root->imag() * inv_pi);
    law.density[i] = dens;
  }
  // Endpoint value for c/sqrt(x) on the quadratically spaced edge nodes
  // x_i = x1 i^2: the first panel holds 2 c sqrt(x1) and the trapezoid
  // overshoots the rest by c sqrt(x1)/2 in total, so f0 = 2 f1.
  if (hard_edge && g.size() > 1 && g[0] == 0.0) law.density[0] = 2.0 * law.density[1];
  return law;
}

LawIntegrals law_integrals(double alpha, const DiscreteLaw& nu, double s) {
  if (!(s > 0.0)) throw InvalidArgument("law_integrals: s must be > 0");
  const auto ev = companion_stieltjes(cplx(-s, 0.0), alpha, nu.compressed());
  LawIntegrals out;
  out.I0 = ev.m_tilde.real();
  out.I2 = ev.m_tilde_prime.real();
  out.I1 = out.I0 - s * out.I2;
  return out;
}

double ks_distance(std::span<const double> eigs, const SpectralLaw& law) {
  if (eigs.empty()) throw InvalidArgument("ks_distance: no eigenvalues");
  const double n = static_cast<double>(eigs.size());
  double dist = 0.0;
  for (std::size_t k = 0; k < eigs.size(); ++k) {
    const double F = law.cdf(eigs[k]);
    dist = std::max({dist, std::abs(F - static_cast<double>(k) / n),
                     std::abs(F - static_cast<double>(k + 1) / n)});
  }
  return std::min(dist, 1.0);
}

}  // namespace qrlab
