#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qrlab/discrete_law.hpp"

namespace qrlab {

using cplx = std::complex<double>;

/// Ascending eigenvalues of a symmetric matrix. The matrix must be
/// symmetric to 1e-10 (relative to its largest entry); it is symmetrised
/// before the solve.
std::vector<double> esd(const Eigen::MatrixXd& M);

/// Density of the Marchenko-Pastur component nu_gamma:
/// sqrt((g+ - x)(x - g-)) / (2 pi gamma x) on [g-, g+], g+- = (1 +- sqrt(gamma))^2.
/// Its total mass is min(1, 1/gamma).
double mp_density(double gamma, double x);

struct StieltjesEval {
  cplx z;
  cplx m_tilde;
  cplx m_tilde_prime;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves z = -1/m + alpha * E_nu[x / (1 + x m)] for the companion
/// Stieltjes transform m = m~(z): damped fixed-point steps (theta = 0.5)
/// followed by Newton. Requires Im z > 0, or z real and negative. The
/// derivative is m~'(z) = 1 / (1/m^2 - alpha E_nu[x^2 / (1 + x m)^2]).
/// alpha = 0 gives the transform of delta_0. Throws NumericalFailure after
/// 500 steps without reaching the residual tolerance.
StieltjesEval companion_stieltjes(cplx z, double alpha, const DiscreteLaw& nu,
                                  std::optional<cplx> initial_guess = std::nullopt);

/// Stieltjes transform m(z) of the p-side law, solved directly from
/// m = E_nu[1 / (x (1 - alpha - alpha z m) - z)].
/// Independent of companion_stieltjes; m~ = alpha m - (1 - alpha)/z.
StieltjesEval mp_side_stieltjes(cplx z, double alpha, const DiscreteLaw& nu);

/// The limiting law mu_{alpha, nu}: an atom at 0 of mass max(1 - alpha, 0)
/// plus a density on a grid.
class SpectralLaw {
 public:
  double atom0_mass = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
  double alpha = 0.0;
  DiscreteLaw nu;
  double eta = 0.0;

  /// atom0_mass + trapezoid(density).
  double total_mass() const;
  /// Linear interpolation, 0 outside the grid.
  double density_at(double x) const;
  /// atom0_mass 1{x >= 0} + cumulative trapezoid of the density up to x.
  double cdf(double x) const;
  /// atom0_mass fn(0) + trapezoid(density * fn).
  template <class Fn>
  double integrate(Fn&& fn) const {
    double acc = atom0_mass * fn(0.0);
    for (std::size_t i = 1; i < grid.size(); ++i)
      acc += 0.5 * (grid[i] - grid[i - 1]) *
             (density[i] * fn(grid[i]) + density[i - 1] * fn(grid[i - 1]));
    return acc;
  }
  /// CSV `x,density` preceded by `# atom0_mass=<v>`.
  void write_csv(std::ostream& out) const;

 private:
  mutable std::vector<double> cumulative_;
  void ensure_cumulative() const;
};

struct GridSpec {
  int interior_points = 3000;
  int tail_points = 24;
  /// Grid padding on each side of the support, in units of the support scale.
  double padding = 0.25;
};

/// Density by Stieltjes inversion: solved at height eta = 1e-4 * max(nu)
/// (1 + sqrt(alpha))^2, then polished by Newton onto the real axis. Zero
/// outside [min(nu)(1 - sqrt a)^2, max(nu)(1 + sqrt a)^2]; the atom at 0 is
/// handled analytically.
SpectralLaw deformed_mp_law(double alpha, const DiscreteLaw& nu, const GridSpec& grid = {});

struct LawIntegrals {
  double I0 = 0.0;  // E_mu[1/(x+s)]
  double I1 = 0.0;  // E_mu[x/(x+s)^2]
  double I2 = 0.0;  // E_mu[1/(x+s)^2]
};

/// Moments of mu_{alpha, nu} from the companion transform at z = -s:
/// I0 = m~(-s), I2 = m~'(-s), I1 = I0 - s I2. alpha = 0 is the delta_0 law.
LawIntegrals law_integrals(double alpha, const DiscreteLaw& nu, double s);

/// Kolmogorov-Smirnov distance between the empirical law of `eigs` (sorted
/// ascending) and `law`.
double ks_distance(std::span<const double> eigs, const SpectralLaw& law);

}  // namespace qrlab
