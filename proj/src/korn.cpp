#include "gbdlab/korn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gbd {

namespace {

std::vector<const JumpFacet*> j1_facets_near(const DisplacementField& field, const Cube& cube) {
  std::vector<const JumpFacet*> out;
  const Vec lo = cube.lo();
  const Vec hi = cube.hi();
  for (const auto& f : field.jumps()) {
    if (f.amplitude() < 1) continue;
    bool hit = true;
    for (int a = 0; a < f.dim(); ++a)
      if (f.hi[a] < lo[a] - 1e-12 || f.lo[a] > hi[a] + 1e-12) hit = false;
    if (hit) out.push_back(&f);
  }
  return out;
}

bool segment_hits(const std::vector<const JumpFacet*>& facets, const Vec& p, const Vec& q) {
  for (const JumpFacet* f : facets)
    if (f->segment_crossing(p, q)) return true;
  return false;
}

// Total variation of u.xi along the segment [p, q] (jumps at full amplitude).
double segment_variation(const DisplacementField& field, const Vec& p, const Vec& q) {
  const Vec diff = q - p;
  const double len = diff.norm();
  if (len <= 0) return 0;
  const Vec xi = diff / len;
  const Vec y = p - p.dot(xi) * xi;
  const double t0 = p.dot(xi);
  const SliceFunction sf = extract_slice(field, xi, y, t0, t0 + len);
  double v = sf.ac_variation();
  for (const auto& j : sf.jumps) v += std::abs(j.amplitude);
  return v;
}

// Variation of (u - a).xi along [p, q] for an affine map a.
double residual_variation(const DisplacementField& field, const Mat& A, const Vec& b, const Vec& p, const Vec& q) {
  const Vec diff = q - p;
  const double len = diff.norm();
  if (len <= 1e-14) return 0;
  const Vec xi = diff / len;
  const Vec y = p - p.dot(xi) * xi;
  const double t0 = p.dot(xi);
  const SliceFunction sf = extract_slice(field, xi, y, t0, t0 + len);
  double v = 0;
  for (const auto& s : sf.segments)
    for (std::size_t i = s.first; i < s.last; ++i) {
      const Vec x0 = y + sf.t[i] * xi;
      const Vec x1 = y + sf.t[i + 1] * xi;
      v += std::abs((sf.values[i + 1] - (A * x1 + b).dot(xi)) - (sf.values[i] - (A * x0 + b).dot(xi)));
    }
  for (const auto& j : sf.jumps) v += std::abs(j.amplitude);
  return v;
}

}  // namespace

double early_exit_density(int dim) { return 1.0 / (32.0 * dim * dim * dim); }

double omega_constant(int dim) { return 16.0 * dim * (dim + 1); }

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(master);
  s = mix(s ^ a);
  s = mix(s ^ (b + 0x51ed27ULL));
  s = mix(s ^ (c + 0xa5a5ULL));
  return s;
}

bool blocked(const DisplacementField& field, const Cube& cube, const Vec& x, const Vec& xi, double t) {
  const Vec end = x + t * xi;
  if (!cube.contains_closed(x) || !cube.contains_closed(end)) throw DomainError("segment endpoints must lie in the cube");
  for (const auto& f : field.jumps())
    if (f.amplitude() >= 1 && f.segment_crossing(x, end)) return true;
  return false;
}

std::vector<std::size_t> cube_cells(const Domain& domain, const Cube& cube) {
  std::vector<std::size_t> cells;
  const int d = domain.dim();
  const double h = domain.h();
  CellCoords from{0, 0, 0}, to{1, 1, 1};
  for (int a = 0; a < d; ++a) {
    const double lo = (cube.center[a] - cube.side / 2 - domain.lo()[a]) / h - 0.5;
    const double hi = (cube.center[a] + cube.side / 2 - domain.lo()[a]) / h - 0.5;
    // Centers strictly above lo and at most hi.
    from[static_cast<std::size_t>(a)] = std::max(0, static_cast<int>(std::floor(lo + 1e-9)) + 1);
    to[static_cast<std::size_t>(a)] = std::min(domain.count(a), static_cast<int>(std::floor(hi + 1e-9)) + 1);
  }
  CellCoords c{0, 0, 0};
  for (c[2] = from[2]; c[2] < to[2]; ++c[2])
    for (c[1] = from[1]; c[1] < to[1]; ++c[1])
      for (c[0] = from[0]; c[0] < to[0]; ++c[0]) cells.push_back(domain.cell_index(c));
  std::sort(cells.begin(), cells.end());
  return cells;
}

double j1_area_in_cube(const DisplacementField& field, const Cube& cube) {
  const Vec lo = cube.lo();
  const Vec hi = cube.hi();
  double area = 0;
  for (const auto& f : field.jumps())
    if (f.amplitude() >= 1) area += f.area_in_box(lo, hi);
  return area;
}

CubeFit early_exit_fit(const DisplacementField& field, const Cube& cube, double j1_area) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  CubeFit fit;
  fit.cube = cube;
  fit.motion = RigidMotion::zero(d);
  fit.affine_A = Mat::Zero(d, d);
  fit.affine_b = Vec::Zero(d);
  fit.omega = cube_cells(dom, cube);
  fit.cell_count = fit.omega.size();
  fit.cell_volume = dom.cell_volume();
  fit.residual = 0;
  fit.j1_area = j1_area;
  fit.jump_density = j1_area / std::pow(cube.side, d - 1);
  fit.early_exit = true;
  fit.diag.omega_fraction = 1;
  return fit;
}

CubeFit pk_fit(const DisplacementField& field, const Cube& cube, const PkOptions& options) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  const double delta = cube.side;
  if (delta < 4 * dom.h() * (1 - 1e-12)) throw ResolutionError("cube must contain at least 4^d cells");
  for (int a = 0; a < d; ++a)
    if (cube.lo()[a] < dom.lo()[a] - 1e-12 || cube.hi()[a] > dom.hi()[a] + 1e-12)
      throw DomainError("cube must lie inside the domain");

  const double j1 = j1_area_in_cube(field, cube);
  const double density = j1 / std::pow(delta, d - 1);
  if (density > early_exit_density(d)) return early_exit_fit(field, cube, j1);

  SliceDensities own;
  const SliceDensities* dens = options.densities;
  if (!dens) {
    const std::vector<Vec> dirs = options.directions.empty() ? default_directions(d) : options.directions;
    own = SliceDensities::build(field, dirs, SliceOptions{0, options.jobs});
    dens = &own;
  }
  const std::vector<std::size_t> cells = cube_cells(dom, cube);
  const double mu = dens->mu_hat_without_j1(cells);
  // Rescaled to the unit cube the measure is divided by delta^{d-1}.
  const double mu_rescaled = mu / std::pow(delta, d - 1);
  const double F_bound = 4 * std::sqrt(2.0) * (d + 1) * (d + 1) * mu_rescaled;
  const double c_omega = options.omega_constant > 0 ? options.omega_constant : omega_constant(d);
  const double omega_cap = c_omega * delta * j1;

  const auto j1_near = j1_facets_near(field, cube);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PkDiagnostics best;
  double best_score = std::numeric_limits<double>::infinity();
  PkDiagnostics diag;
  for (int attempt = 0; attempt < options.budget; ++attempt) {
    diag.candidates_tried = attempt + 1;
    const double t_star = 0.5 + 0.5 * unit(rng);
    Vec z0(d);
    for (int a = 0; a < d; ++a) z0[a] = cube.center[a] + delta * (unit(rng) - 0.5) * 0.5;
    std::vector<Vec> z(static_cast<std::size_t>(d) + 1, z0);
    for (int i = 1; i <= d; ++i) z[static_cast<std::size_t>(i)][i - 1] += t_star * delta;

    bool ok = true;
    for (const auto& p : z)
      if (!cube.contains_closed(p)) ok = false;
    if (ok) {
      for (std::size_t i = 0; i < z.size() && ok; ++i)
        for (std::size_t j = i + 1; j < z.size() && ok; ++j)
          if (segment_hits(j1_near, z[i], z[j])) ok = false;
    }
    std::vector<Vec> u(z.size());
    if (ok) {
      try {
        for (std::size_t i = 0; i < z.size(); ++i) u[i] = evaluate(field, z[i]);
      } catch (const AmbiguityError&) {
        ok = false;
      }
    }
    if (!ok) {
      ++diag.geometric_rejections;
      continue;
    }

    double F = 0;
    for (std::size_t i = 0; i < z.size(); ++i)
      for (std::size_t j = i + 1; j < z.size(); ++j) F += segment_variation(field, z[i], z[j]);
    const double tol = 1e-9 * (1 + u[0].norm());
    const double score = F / std::max(F_bound, 1e-300);
    if (score < best_score) {
      best_score = score;
      best = diag;
      best.z0 = z0;
      best.t_star = t_star;
      best.F = F;
      best.F_bound = F_bound;
    }
    if (F > F_bound + tol) {
      ++diag.variation_rejections;
      continue;
    }

    // Affine map through the simplex vertices: column i of A is the difference quotient along e_i.
    Mat A(d, d);
    for (int i = 1; i <= d; ++i) A.col(i - 1) = (u[static_cast<std::size_t>(i)] - u[0]) / (t_star * delta);
    const Vec b = u[0] - A * z0;

    std::vector<std::size_t> omega;
    if (!j1_near.empty()) {
      for (std::size_t c : cells) {
        const Vec y = dom.cell_center(c);
        for (const auto& zi : z)
          if (segment_hits(j1_near, zi, y)) {
            omega.push_back(c);
            break;
          }
      }
    }
    const double omega_volume = static_cast<double>(omega.size()) * dom.cell_volume();
    if (omega_volume > omega_cap + 1e-12) {
      ++diag.blocking_rejections;
      continue;
    }

    CubeFit fit;
    fit.cube = cube;
    fit.affine_A = A;
    fit.affine_b = b;
    const Mat W = 0.5 * (A - A.transpose());
    const Vec bw = A * cube.center + b - W * cube.center;
    fit.motion = RigidMotion(W, bw);
    fit.omega = std::move(omega);
    fit.cell_count = cells.size();
    fit.cell_volume = dom.cell_volume();
    fit.j1_area = j1;
    fit.jump_density = density;
    fit.mu_hat_diffuse = mu;
    fit.early_exit = false;

    std::vector<std::uint8_t> in_omega;
    if (!fit.omega.empty()) {
      in_omega.assign(dom.cell_count(), 0);
      for (std::size_t c : fit.omega) in_omega[c] = 1;
    }
    double residual = 0;
    for (std::size_t c : cells) {
      if (!in_omega.empty() && in_omega[c]) continue;
      residual += (field.cell_value(c) - fit.motion(dom.cell_center(c))).norm();
    }
    fit.residual = residual * dom.cell_volume();

    diag.z0 = z0;
    diag.t_star = t_star;
    diag.F = F;
    diag.F_bound = F_bound;
    diag.omega_fraction = fit.omega_fraction();
    if (options.compute_h) {
      double H = 0;
      for (std::size_t c : cells) {
        if (!in_omega.empty() && in_omega[c]) continue;
        const Vec y = dom.cell_center(c);
        for (const auto& zi : z) H += residual_variation(field, A, b, zi, y);
      }
      diag.H = H * dom.cell_volume();
    }
    fit.diag = diag;
    return fit;
  }
  best.candidates_tried = diag.candidates_tried;
  best.geometric_rejections = diag.geometric_rejections;
  best.variation_rejections = diag.variation_rejections;
  best.blocking_rejections = diag.blocking_rejections;
  throw SelectionFailure("no admissible simplex base point within the sampling budget", best);
}

PkVerdict pk_verify(const CubeFit& fit, double c) {
  PkVerdict v;
  if (fit.early_exit) {
    v.holds = true;
    v.ratio = 0;
    return v;
  }
  const double denom = fit.cube.side * fit.mu_hat_diffuse;
  if (fit.residual <= 1e-10) {
    v.holds = true;
    v.ratio = 0;
    return v;
  }
  if (denom <= 1e-14) {
    v.holds = fit.residual <= 1e-10;
    v.ratio = v.holds ? 0.0 : std::numeric_limits<double>::infinity();
    return v;
  }
  v.ratio = fit.residual / denom;
  v.holds = v.ratio <= c;
  return v;
}

}  // namespace gbd
