#pragma once

// Approximate Poincare-Korn fitting on a single cube: an infinitesimal rigid
// motion plus an exceptional set, following the simplex construction.

#include <cstdint>
#include <vector>

#include "gbdlab/field.hpp"
#include "gbdlab/slicing.hpp"

namespace gbd {

/// Global constant of the residual bound residual <= c * delta * mu_hat(Q \ J^1),
/// calibrated as twice the largest ratio observed on the seeded verification
/// suite (0.834, see tests/acceptance.cpp) and rounded up.
inline constexpr double kKornConstant = 0.84;

/// Jump density above which the fit exits early with omega = Q, a = 0.
double early_exit_density(int dim);

/// Constant of the exceptional-set bound |omega| <= c_omega * delta * H^{d-1}(J^1 cap Q)
/// used as the ray-blocking admissibility test.
double omega_constant(int dim);

/// True iff the closed segment [x, x + t xi] meets a facet with |[u]| >= 1.
/// Both endpoints must lie in the closed cube.
bool blocked(const DisplacementField& field, const Cube& cube, const Vec& x, const Vec& xi, double t);

/// Cells whose center lies in the half-open cube.
std::vector<std::size_t> cube_cells(const Domain& domain, const Cube& cube);

/// H^{d-1}(J^1 cap Q) with the half-open cube convention.
double j1_area_in_cube(const DisplacementField& field, const Cube& cube);

struct PkOptions {
  int budget = 256;
  std::uint64_t seed = 0;
  /// Slice densities of the whole field; built on demand when null.
  const SliceDensities* densities = nullptr;
  /// Directions for on-demand densities (empty: defaults).
  std::vector<Vec> directions;
  double omega_constant = 0;  ///< 0: omega_constant(d)
  bool compute_h = false;     ///< also evaluate the ray-variation functional H(z0)
  int jobs = 1;
};

struct PkDiagnostics {
  Vec z0;
  double t_star = 0;
  double F = 0;
  double F_bound = 0;
  double H = 0;
  double omega_fraction = 0;
  int candidates_tried = 0;
  int geometric_rejections = 0;
  int variation_rejections = 0;
  int blocking_rejections = 0;
};

struct CubeFit {
  Cube cube;
  RigidMotion motion;        ///< skew part of the affine fit, matched at the cube center
  Mat affine_A;              ///< full fitted affine map x -> A x + b
  Vec affine_b;
  std::vector<std::size_t> omega;  ///< exceptional cells
  std::size_t cell_count = 0;
  double cell_volume = 0;
  double residual = 0;       ///< sum over Q \ omega of |u - motion| h^d
  double j1_area = 0;        ///< H^{d-1}(J^1 cap Q)
  double jump_density = 0;   ///< j1_area / delta^{d-1}
  double mu_hat_diffuse = 0; ///< mu_hat(Q \ J^1)
  bool early_exit = false;
  PkDiagnostics diag;

  double omega_volume() const { return static_cast<double>(omega.size()) * cell_volume; }
  double omega_fraction() const { return cell_count ? static_cast<double>(omega.size()) / cell_count : 0.0; }
};

/// No admissible simplex base point was found within the sampling budget.
class SelectionFailure : public Error {
 public:
  SelectionFailure(const std::string& what, PkDiagnostics best) : Error(what), best_(std::move(best)) {}
  const PkDiagnostics& best_candidate() const { return best_; }

 private:
  PkDiagnostics best_;
};

CubeFit pk_fit(const DisplacementField& field, const Cube& cube, const PkOptions& options = {});

/// Early-exit fit (omega = Q, a = 0) for a cube.
CubeFit early_exit_fit(const DisplacementField& field, const Cube& cube, double j1_area);

struct PkVerdict {
  bool holds = false;
  double ratio = 0;
};

/// ratio = residual / (delta * mu_hat(Q \ J^1)); holds iff ratio <= c. Residuals
/// below 1e-10 count as exact (ratio 0).
PkVerdict pk_verify(const CubeFit& fit, double c);

/// Mixes a master seed with indices (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace gbd
