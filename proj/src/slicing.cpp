#include "gbdlab/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gbdlab/parallel.hpp"

namespace gbd {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

// Representative of the line through xi: first nonzero component positive.
Vec canonical(const Vec& xi) {
  for (Eigen::Index a = 0; a < xi.size(); ++a) {
    if (std::abs(xi[a]) > 1e-14) return xi[a] < 0 ? Vec(-xi) : xi;
  }
  return xi;
}

void require_unit(const Vec& xi, int d) {
  if (xi.size() != d) throw ParameterError("direction has the wrong dimension");
  if (std::abs(xi.norm() - 1) > 1e-9) throw ParameterError("direction must be a unit vector");
}

// Parameter range of the line y + t xi inside the box, or nullopt.
std::optional<std::pair<double, double>> clip_line(const Domain& dom, const Vec& xi, const Vec& y) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dom.dim(); ++a) {
    if (std::abs(xi[a]) < 1e-15) {
      if (y[a] < dom.lo()[a] || y[a] > dom.hi()[a]) return std::nullopt;
      continue;
    }
    double t0 = (dom.lo()[a] - y[a]) / xi[a];
    double t1 = (dom.hi()[a] - y[a]) / xi[a];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (!(hi - lo > 1e-12 * std::max(1.0, dom.diameter()))) return std::nullopt;
  return std::make_pair(lo, hi);
}

}  // namespace

// ---------------------------------------------------------------- families

std::vector<Vec> hyperplane_basis(const Vec& xi_in) {
  const Vec xi = canonical(xi_in);
  const auto d = xi.size();
  std::vector<Vec> basis;
  if (d == 2) {
    Vec b(2);
    b << -xi[1], xi[0];
    basis.push_back(b);
    return basis;
  }
  // Pick the coordinate axis least aligned with xi.
  Eigen::Index k = 0;
  for (Eigen::Index a = 1; a < d; ++a)
    if (std::abs(xi[a]) < std::abs(xi[k])) k = a;
  Eigen::Vector3d e = Eigen::Vector3d::Zero();
  e[k] = 1;
  const Eigen::Vector3d x3(xi[0], xi[1], xi[2]);
  Eigen::Vector3d b1 = (e - e.dot(x3) * x3).normalized();
  Eigen::Vector3d b2 = x3.cross(b1);
  basis.push_back(Vec(b1));
  basis.push_back(Vec(b2));
  return basis;
}

SliceFamily SliceFamily::build(const Domain& dom, const Vec& xi, double spacing) {
  require_unit(xi, dom.dim());
  if (!(spacing > 0)) throw ParameterError("slice spacing must be positive");
  SliceFamily fam;
  fam.xi = xi;
  fam.spacing = spacing;
  fam.weight = std::pow(spacing, dom.dim() - 1);
  const std::vector<Vec> basis = hyperplane_basis(xi);
  const int d = dom.dim();
  // Range of the box projected on each basis vector.
  std::vector<double> pmin(basis.size(), std::numeric_limits<double>::infinity());
  std::vector<double> pmax(basis.size(), -std::numeric_limits<double>::infinity());
  for (int corner = 0; corner < (1 << d); ++corner) {
    Vec x(d);
    for (int a = 0; a < d; ++a) x[a] = (corner >> a) & 1 ? dom.hi()[a] : dom.lo()[a];
    for (std::size_t m = 0; m < basis.size(); ++m) {
      const double p = x.dot(basis[m]);
      pmin[m] = std::min(pmin[m], p);
      pmax[m] = std::max(pmax[m], p);
    }
  }
  std::vector<int> counts(basis.size());
  for (std::size_t m = 0; m < basis.size(); ++m)
    counts[m] = std::max(1, static_cast<int>(std::ceil((pmax[m] - pmin[m]) / spacing - 1e-9)));
  const int n1 = basis.size() > 1 ? counts[1] : 1;
  for (int i0 = 0; i0 < counts[0]; ++i0)
    for (int i1 = 0; i1 < n1; ++i1) {
      Vec y = (pmin[0] + (i0 + 0.5) * spacing) * basis[0];
      if (basis.size() > 1) y += (pmin[1] + (i1 + 0.5) * spacing) * basis[1];
      const auto range = clip_line(dom, xi, y);
      if (!range) continue;
      fam.lines.push_back({y, range->first, range->second});
    }
  return fam;
}

// ---------------------------------------------------------------- slices

double SliceFunction::ac_variation() const {
  double v = 0;
  for (const auto& s : segments)
    for (std::size_t i = s.first; i < s.last; ++i) v += std::abs(values[i + 1] - values[i]);
  return v;
}

SliceFunction extract_slice(const DisplacementField& field, const Vec& xi, const Vec& y) {
  return extract_slice(field, xi, y, -std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity());
}

SliceFunction extract_slice(const DisplacementField& field, const Vec& xi, const Vec& y, double t_from, double t_to,
                            double max_step) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  require_unit(xi, d);
  if (y.size() != d) throw ParameterError("slice offset has the wrong dimension");
  const auto range = clip_line(dom, xi, y);
  if (!range) throw EmptySliceError("slice line does not meet the domain");
  const double t0 = std::max(range->first, t_from);
  const double t1 = std::min(range->second, t_to);
  const double scale = std::max(1.0, dom.diameter());
  if (!(t1 - t0 > 1e-12 * scale)) throw EmptySliceError("slice line does not meet the domain");
  const double h = dom.h();
  const double step = max_step > 0 ? max_step : h;
  const double tol = 1e-12 * scale;

  // Crossings of cell-face planes; each may hit a facet.
  std::vector<double> planes;
  std::vector<SliceJump> jumps;
  for (int a = 0; a < d; ++a) {
    if (std::abs(xi[a]) < 1e-15) continue;
    for (int m = 1; m < dom.count(a); ++m) {
      const double pos = dom.lo()[a] + m * h;
      const double t = (pos - y[a]) / xi[a];
      if (t <= t0 + tol || t >= t1 - tol) continue;
      planes.push_back(t);
      // Identify the face crossed: cell coords on the other axes at the point.
      const Vec p = y + t * xi;
      CellCoords c{0, 0, 0};
      bool ok = true;
      for (int b = 0; b < d; ++b) {
        if (b == a) {
          c[sz(b)] = m - 1;
          continue;
        }
        const double g = (p[b] - dom.lo()[b]) / h;
        const double r = std::round(g);
        const double gg = std::abs(g - r) < 1e-9 ? r : g;
        const int i = static_cast<int>(std::ceil(gg)) - 1;
        if (i < 0 || i >= dom.count(b)) ok = false;
        c[sz(b)] = std::clamp(i, 0, dom.count(b) - 1);
      }
      if (!ok) continue;
      const int fi = field.face_facet(dom.cell_index(c), a);
      if (fi < 0) continue;
      const JumpFacet& f = field.jumps()[sz(fi)];
      const double sign = (xi[a] * f.orientation > 0) ? 1.0 : -1.0;
      jumps.push_back({t, sign * f.jump.dot(xi), fi});
    }
  }
  // The interpolant bends on the planes through cell centers.
  for (int a = 0; a < d; ++a) {
    if (std::abs(xi[a]) < 1e-15) continue;
    for (int m = 0; m < dom.count(a); ++m) {
      const double t = (dom.lo()[a] + (m + 0.5) * h - y[a]) / xi[a];
      if (t > t0 + tol && t < t1 - tol) planes.push_back(t);
    }
  }
  std::sort(planes.begin(), planes.end());
  std::sort(jumps.begin(), jumps.end(), [](const SliceJump& l, const SliceJump& r) { return l.t < r.t; });
  // A line through a shared facet edge meets the same crossing twice.
  {
    std::vector<SliceJump> dedup;
    for (const auto& j : jumps)
      if (dedup.empty() || j.t - dedup.back().t > tol) dedup.push_back(j);
    jumps.swap(dedup);
  }

  SliceFunction sf;
  sf.xi = xi;
  sf.y = y;
  sf.jumps = jumps;
  const double inset = 1e-9 * h;
  std::vector<double> cuts;
  cuts.push_back(t0);
  for (const auto& j : jumps) cuts.push_back(j.t);
  cuts.push_back(t1);
  auto plane_it = planes.begin();
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s] + (s > 0 ? inset : 0.0);
    const double b = cuts[s + 1] - (s + 2 < cuts.size() ? inset : 0.0);
    std::vector<double> pts{a};
    while (plane_it != planes.end() && *plane_it < a + tol) ++plane_it;
    while (plane_it != planes.end() && *plane_it < b - tol) {
      if (*plane_it - pts.back() > tol) pts.push_back(*plane_it);
      ++plane_it;
    }
    if (b - pts.back() > tol || pts.size() == 1) pts.push_back(b);
    SliceSegment seg{sf.t.size(), 0};
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) {
        const double gap = pts[i] - pts[i - 1];
        const int pieces = static_cast<int>(std::ceil(gap / step - 1e-9));
        for (int k = 1; k < pieces; ++k) sf.t.push_back(pts[i - 1] + gap * k / pieces);
      }
      sf.t.push_back(pts[i]);
    }
    seg.last = sf.t.size() - 1;
    sf.segments.push_back(seg);
  }
  sf.values.resize(sf.t.size());
  for (std::size_t i = 0; i < sf.t.size(); ++i) sf.values[i] = evaluate(field, y + sf.t[i] * xi).dot(xi);
  return sf;
}

double mu_hat_line(const SliceFunction& sf) {
  double v = sf.ac_variation();
  for (const auto& j : sf.jumps) v += std::min(std::abs(j.amplitude), 1.0);
  return v;
}

double mu_hat_line(const SliceFunction& sf, std::span<const Interval> B) {
  auto overlap = [&](double a, double b) {
    double len = 0;
    for (const auto& iv : B) len += std::max(0.0, std::min(b, iv.b) - std::max(a, iv.a));
    return len;
  };
  double v = 0;
  for (const auto& s : sf.segments)
    for (std::size_t i = s.first; i < s.last; ++i) {
      const double dt = sf.t[i + 1] - sf.t[i];
      if (dt <= 0) continue;
      v += std::abs(sf.values[i + 1] - sf.values[i]) * std::min(1.0, overlap(sf.t[i], sf.t[i + 1]) / dt);
    }
  for (const auto& j : sf.jumps) {
    bool inside = false;
    for (const auto& iv : B)
      if (j.t >= iv.a - 1e-12 && j.t <= iv.b + 1e-12) inside = true;
    if (inside) v += std::min(std::abs(j.amplitude), 1.0);
  }
  return v;
}

double I_sigma_line(const SliceFunction& sf, double sigma) {
  if (!(sigma > 1)) throw ParameterError("I_sigma requires sigma > 1");
  double v = sf.ac_variation();
  for (const auto& j : sf.jumps)
    if (std::abs(j.amplitude) < sigma) v += std::abs(j.amplitude);
  return v;
}

double I_sigma(const DisplacementField& field, const Vec& xi, const Vec& y, double sigma) {
  if (!(sigma > 1)) throw ParameterError("I_sigma requires sigma > 1");
  return I_sigma_line(extract_slice(field, xi, y), sigma);
}

// ---------------------------------------------------------------- densities

namespace {

struct DirectionDensity {
  std::vector<double> diffuse;
  std::vector<double> capped;
};

DirectionDensity direction_density(const DisplacementField& field, const Vec& xi, double spacing) {
  const Domain& dom = field.domain();
  DirectionDensity out;
  out.diffuse.assign(dom.cell_count(), 0.0);
  out.capped.assign(dom.cell_count(), 0.0);
  const SliceFamily fam = SliceFamily::build(dom, xi, spacing);
  for (const auto& line : fam.lines) {
    const SliceFunction sf = extract_slice(field, xi, line.y);
    for (const auto& s : sf.segments)
      for (std::size_t i = s.first; i < s.last; ++i) {
        const double mid = 0.5 * (sf.t[i] + sf.t[i + 1]);
        const auto cell = dom.locate(line.y + mid * xi);
        if (cell) out.diffuse[*cell] += fam.weight * std::abs(sf.values[i + 1] - sf.values[i]);
      }
    for (const auto& j : sf.jumps) {
      const auto cell = dom.locate(line.y + j.t * xi);
      if (!cell) continue;
      const double amp = std::abs(j.amplitude);
      if (amp >= 1)
        out.capped[*cell] += fam.weight;
      else
        out.diffuse[*cell] += fam.weight * amp;
    }
  }
  return out;
}

}  // namespace

SliceDensities SliceDensities::build(const DisplacementField& field, std::span<const Vec> directions,
                                     const SliceOptions& options) {
  if (directions.empty()) throw ParameterError("at least one direction is required");
  const double spacing = options.spacing > 0 ? options.spacing : field.domain().h();
  SliceDensities out;
  out.directions_.assign(directions.begin(), directions.end());
  for (const auto& xi : out.directions_) require_unit(xi, field.dim());
  std::vector<DirectionDensity> dens(directions.size());
  parallel_for(directions.size(), options.jobs,
               [&](std::size_t i) { dens[i] = direction_density(field, out.directions_[i], spacing); });
  const std::size_t n = field.domain().cell_count();
  out.sup_all_.assign(n, 0.0);
  out.sup_diffuse_.assign(n, 0.0);
  for (auto& dd : dens) {
    for (std::size_t c = 0; c < n; ++c) {
      out.sup_all_[c] = std::max(out.sup_all_[c], dd.diffuse[c] + dd.capped[c]);
      out.sup_diffuse_[c] = std::max(out.sup_diffuse_[c], dd.diffuse[c]);
    }
    out.diffuse_.push_back(std::move(dd.diffuse));
    out.capped_.push_back(std::move(dd.capped));
  }
  return out;
}

double SliceDensities::directional(std::size_t i, const CellMask& mask) const {
  double v = 0;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) v += diffuse_[i][c] + capped_[i][c];
  return v;
}

double SliceDensities::mu_hat(const CellMask& mask) const {
  double v = 0;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) v += sup_all_[c];
  return v;
}

double SliceDensities::mu_hat_without_j1(const CellMask& mask) const {
  double v = 0;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) v += sup_diffuse_[c];
  return v;
}

double SliceDensities::mu_hat_without_j1(std::span<const std::size_t> cells) const {
  double v = 0;
  for (std::size_t c : cells) v += sup_diffuse_[c];
  return v;
}

std::vector<Vec> uniform_directions_2d(int n) {
  if (n < 1) throw ParameterError("direction count must be positive");
  std::vector<Vec> dirs;
  for (int m = 0; m < n; ++m) {
    const double th = std::numbers::pi * m / n;
    Vec v(2);
    v << std::cos(th), std::sin(th);
    // Exact zeros on the axes keep axis-aligned slices on the lattice.
    for (Eigen::Index a = 0; a < 2; ++a)
      if (std::abs(v[a]) < 1e-15) v[a] = 0;
    if (m * 2 == n) v << 0, 1;
    if (m == 0) v << 1, 0;
    dirs.push_back(v);
  }
  return dirs;
}

std::vector<Vec> default_directions(int dim) {
  if (dim == 2) return uniform_directions_2d(16);
  if (dim != 3) throw ParameterError("dimension must be 2 or 3");
  std::vector<Vec> dirs;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        Vec v(3);
        v << i, j, k;
        dirs.push_back(v.normalized());
      }
  return dirs;
}

CellMask full_mask(const Domain& domain) { return CellMask(domain.cell_count(), 1); }

double mu_hat_directional(const DisplacementField& field, const Vec& xi, const CellMask& B,
                          const SliceOptions& options) {
  const std::vector<Vec> one{xi};
  return SliceDensities::build(field, one, options).directional(0, B);
}

double mu_hat(const DisplacementField& field, std::span<const Vec> directions, const CellMask& B,
              const SliceOptions& options) {
  return SliceDensities::build(field, directions, options).mu_hat(B);
}

double jump_surface_measure(const DisplacementField& field, double sigma) {
  if (sigma < 0) throw ParameterError("sigma must be nonnegative");
  double area = 0;
  for (const auto& f : field.jumps()) {
    const double amp = f.amplitude();
    if (sigma == 0 ? amp > 0 : amp >= sigma) area += f.area();
  }
  return area;
}

// ---------------------------------------------------------------- gradient identity

GradientIdentityReport check_slice_gradient_identity(const DisplacementField& field, const Vec& xi, double tolerance,
                                                     const SliceOptions& options) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  const double h = dom.h();
  const double spacing = options.spacing > 0 ? options.spacing : h;
  const SliceFamily fam = SliceFamily::build(dom, xi, spacing);
  GradientIdentityReport rep;
  double sum_err = 0;

  // xi^T e(u) xi by centered differences, or nullopt near facets/boundary.
  auto directional_strain = [&](const Vec& x) -> std::optional<double> {
    Mat grad(d, d);
    for (int a = 0; a < d; ++a) {
      Vec p = x, q = x;
      p[a] += h;
      q[a] -= h;
      if (p[a] > dom.hi()[a] || q[a] < dom.lo()[a]) return std::nullopt;
      for (const auto& f : field.jumps())
        if (f.segment_crossing(q, p)) return std::nullopt;
      grad.col(a) = (evaluate(field, p) - evaluate(field, q)) / (2 * h);
    }
    return xi.dot(grad * xi);
  };

  for (const auto& line : fam.lines) {
    const SliceFunction sf = extract_slice(field, xi, line.y);
    for (const auto& s : sf.segments)
      for (std::size_t i = s.first; i < s.last; ++i) {
        const double dt = sf.t[i + 1] - sf.t[i];
        if (dt < 1e-3 * h) continue;
        const auto strain = directional_strain(line.y + sf.t[i] * xi);
        if (!strain) continue;
        const double slope = (sf.values[i + 1] - sf.values[i]) / dt;
        const double err = std::abs(slope - *strain);
        rep.max_error = std::max(rep.max_error, err);
        sum_err += err;
        rep.l1_discrepancy += fam.weight * err * dt;
        ++rep.samples;
      }
  }
  rep.mean_error = rep.samples ? sum_err / static_cast<double>(rep.samples) : 0.0;
  rep.within_tolerance = rep.max_error <= tolerance;
  return rep;
}

// ---------------------------------------------------------------- reports

SliceMeasureReport slice_measure_report(const DisplacementField& field, std::span<const Vec> directions,
                                        std::span<const double> sigmas, const SliceOptions& options) {
  for (double s : sigmas)
    if (!(s > 1)) throw ParameterError("I_sigma requires sigma > 1");
  const double spacing = options.spacing > 0 ? options.spacing : field.domain().h();
  SliceMeasureReport rep;
  rep.sigmas.assign(sigmas.begin(), sigmas.end());
  std::vector<std::vector<SliceReportRow>> rows(directions.size());
  std::vector<SliceDirectionSummary> sums(directions.size());
  parallel_for(directions.size(), options.jobs, [&](std::size_t di) {
    const Vec& xi = directions[di];
    const SliceFamily fam = SliceFamily::build(field.domain(), xi, spacing);
    SliceDirectionSummary sum;
    sum.xi = xi;
    sum.weight = fam.weight;
    sum.i_sigma_integral.assign(sigmas.size(), 0.0);
    for (const auto& line : fam.lines) {
      const SliceFunction sf = extract_slice(field, xi, line.y);
      SliceReportRow row;
      row.xi = xi;
      row.y = line.y;
      row.mu_hat_line = mu_hat_line(sf);
      row.ac_variation = sf.ac_variation();
      for (std::size_t s = 0; s < sigmas.size(); ++s) {
        row.i_sigma.push_back(I_sigma_line(sf, sigmas[s]));
        std::size_t count = 0;
        for (const auto& j : sf.jumps)
          if (std::abs(j.amplitude) >= sigmas[s]) ++count;
        row.jumps_at_least.push_back(count);
        sum.i_sigma_integral[s] += fam.weight * row.i_sigma.back();
      }
      sum.mu_hat_directional += fam.weight * row.mu_hat_line;
      rows[di].push_back(std::move(row));
    }
    sums[di] = std::move(sum);
  });
  for (auto& r : rows)
    for (auto& row : r) rep.rows.push_back(std::move(row));
  rep.directions = std::move(sums);
  return rep;
}

}  // namespace gbd
