#include "gbdlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gbd {

namespace {

constexpr double kLatticeTol = 1e-9;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

}  // namespace

// ---------------------------------------------------------------- Domain

Domain::Domain(int dim, const Vec& lo, const Vec& hi, double h) : dim_(dim), lo_(lo), hi_(hi), h_(h) {
  if (dim != 2 && dim != 3) throw ParameterError("domain dimension must be 2 or 3");
  if (lo.size() != dim || hi.size() != dim) throw ParameterError("domain bounds have wrong dimension");
  if (!(h > 0) || !std::isfinite(h)) throw ParameterError("grid spacing must be positive");
  cells_ = 1;
  for (int a = 0; a < dim; ++a) {
    const double side = hi[a] - lo[a];
    if (!(side > 0)) throw ParameterError("domain box has non-positive side");
    const double n = side / h;
    const double rounded = std::round(n);
    if (std::abs(n - rounded) > kLatticeTol * std::max(1.0, n))
      throw ParameterError("domain side is not an integer multiple of h");
    counts_[sz(a)] = static_cast<int>(rounded);
    cells_ *= static_cast<std::size_t>(rounded);
  }
}

Domain Domain::unit_square(double h) { return Domain(2, Vec::Zero(2), Vec::Ones(2), h); }
Domain Domain::unit_cube(double h) { return Domain(3, Vec::Zero(3), Vec::Ones(3), h); }

double Domain::cell_volume() const { return std::pow(h_, dim_); }
double Domain::face_area() const { return std::pow(h_, dim_ - 1); }
double Domain::volume() const { return (hi_ - lo_).prod(); }
double Domain::diameter() const { return (hi_ - lo_).norm(); }

std::size_t Domain::cell_index(const CellCoords& c) const {
  std::size_t idx = 0;
  for (int a = dim_ - 1; a >= 0; --a) idx = idx * sz(counts_[sz(a)]) + sz(c[sz(a)]);
  return idx;
}

CellCoords Domain::cell_coords(std::size_t index) const {
  CellCoords c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    c[sz(a)] = static_cast<int>(index % sz(counts_[sz(a)]));
    index /= sz(counts_[sz(a)]);
  }
  return c;
}

Vec Domain::cell_center(std::size_t index) const {
  const CellCoords c = cell_coords(index);
  Vec x(dim_);
  for (int a = 0; a < dim_; ++a) x[a] = lo_[a] + (c[sz(a)] + 0.5) * h_;
  return x;
}

bool Domain::contains(const Vec& x, double tol) const {
  if (x.size() != dim_) return false;
  const double s = tol * std::max(1.0, diameter());
  for (int a = 0; a < dim_; ++a)
    if (!(x[a] >= lo_[a] - s && x[a] <= hi_[a] + s)) return false;
  return true;
}

std::optional<std::size_t> Domain::locate(const Vec& x) const {
  if (!contains(x)) return std::nullopt;
  CellCoords c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const double f = (x[a] - lo_[a]) / h_;
    const double r = std::round(f);
    // Snap values within rounding noise of a lattice plane onto it.
    const double g = std::abs(f - r) < 1e-11 ? r : f;
    int i = static_cast<int>(std::ceil(g)) - 1;
    c[sz(a)] = std::clamp(i, 0, counts_[sz(a)] - 1);
  }
  return cell_index(c);
}

bool Domain::on_lattice(int axis, double value) const {
  const double f = (value - lo_[axis]) / h_;
  return std::abs(f - std::round(f)) < kLatticeTol;
}

bool Domain::operator==(const Domain& o) const {
  return dim_ == o.dim_ && lo_ == o.lo_ && hi_ == o.hi_ && h_ == o.h_;
}

// ---------------------------------------------------------------- JumpFacet

JumpFacet JumpFacet::axis_aligned(int axis, double position, const Vec& lo, const Vec& hi, const Vec& jump,
                                  int orientation) {
  const int d = static_cast<int>(lo.size());
  if (axis < 0 || axis >= d) throw ParameterError("facet axis out of range");
  if (hi.size() != d || jump.size() != d) throw ParameterError("facet vectors have inconsistent dimension");
  if (orientation != 1 && orientation != -1) throw ParameterError("facet orientation must be +1 or -1");
  JumpFacet f;
  f.axis = axis;
  f.position = position;
  f.lo = lo;
  f.hi = hi;
  f.lo[axis] = position;
  f.hi[axis] = position;
  f.jump = jump;
  f.orientation = orientation;
  if (!(f.area() > 0)) throw ParameterError("facet must have positive area");
  if (!jump.allFinite()) throw ParameterError("facet jump must be finite");
  return f;
}

Vec JumpFacet::normal() const {
  Vec n = Vec::Zero(dim());
  n[axis] = orientation;
  return n;
}

double JumpFacet::area() const {
  double a = 1;
  for (int i = 0; i < dim(); ++i)
    if (i != axis) a *= std::max(0.0, hi[i] - lo[i]);
  return a;
}

bool JumpFacet::covers(const Vec& x, double tol) const {
  for (int i = 0; i < dim(); ++i) {
    if (i == axis) continue;
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

bool JumpFacet::contains_point(const Vec& x, double tol) const {
  return std::abs(x[axis] - position) <= tol && covers(x, tol);
}

std::optional<double> JumpFacet::segment_crossing(const Vec& p, const Vec& q, double tol) const {
  const double dp = p[axis] - position;
  const double dq = q[axis] - position;
  if (std::abs(dq - dp) <= 0) return std::nullopt;
  if ((dp > tol && dq > tol) || (dp < -tol && dq < -tol)) return std::nullopt;
  double s = dp / (dp - dq);
  s = std::clamp(s, 0.0, 1.0);
  const Vec r = p + s * (q - p);
  if (!covers(r, tol)) return std::nullopt;
  return s;
}

double JumpFacet::area_in_box(const Vec& box_lo, const Vec& box_hi) const {
  if (!(position > box_lo[axis] && position <= box_hi[axis])) return 0;
  double a = 1;
  for (int i = 0; i < dim(); ++i) {
    if (i == axis) continue;
    a *= std::max(0.0, std::min(hi[i], box_hi[i]) - std::max(lo[i], box_lo[i]));
  }
  return a;
}

// ---------------------------------------------------------------- DisplacementField

DisplacementField::DisplacementField(Domain domain, std::vector<double> values, std::vector<JumpFacet> jumps,
                                     Sampler sampler)
    : domain_(std::move(domain)), values_(std::move(values)), jumps_(std::move(jumps)), sampler_(std::move(sampler)) {
  const std::size_t d = sz(domain_.dim());
  if (values_.size() != domain_.cell_count() * d)
    throw ParameterError("field value array does not match the domain");
  for (double v : values_)
    if (!std::isfinite(v)) throw ParameterError("field values must be finite");
  index_faces();
}

DisplacementField DisplacementField::from_function(const Domain& domain, const Sampler& f, std::vector<JumpFacet> jumps,
                                                   bool keep_sampler) {
  const std::size_t d = sz(domain.dim());
  std::vector<double> values(domain.cell_count() * d);
  for (std::size_t c = 0; c < domain.cell_count(); ++c) {
    const Vec v = f(domain.cell_center(c));
    for (std::size_t a = 0; a < d; ++a) values[c * d + a] = v[static_cast<Eigen::Index>(a)];
  }
  return DisplacementField(domain, std::move(values), std::move(jumps), keep_sampler ? f : Sampler{});
}

Vec DisplacementField::cell_value(std::size_t index) const {
  const int d = dim();
  Vec v(d);
  for (int a = 0; a < d; ++a) v[a] = values_[index * sz(d) + sz(a)];
  return v;
}

DisplacementField DisplacementField::without_sampler() const { return DisplacementField(domain_, values_, jumps_); }

void DisplacementField::index_faces() {
  const int d = dim();
  const Domain& dom = domain_;
  face_facet_.assign(dom.cell_count() * sz(d), -1);
  for (std::size_t fi = 0; fi < jumps_.size(); ++fi) {
    const JumpFacet& f = jumps_[fi];
    if (f.dim() != d) throw ParameterError("facet dimension does not match the domain");
    const int a = f.axis;
    if (!dom.on_lattice(a, f.position)) throw ParameterError("facet plane does not lie on a cell face");
    if (!(f.position > dom.lo()[a] + 0.5 * dom.h() && f.position < dom.hi()[a] - 0.5 * dom.h()))
      throw DomainError("facet plane must be interior to the domain box");
    std::array<int, 3> from{0, 0, 0}, to{1, 1, 1};
    for (int b = 0; b < d; ++b) {
      if (b == a) continue;
      if (!dom.on_lattice(b, f.lo[b]) || !dom.on_lattice(b, f.hi[b]))
        throw ParameterError("facet bounds do not snap to cell faces");
      if (f.lo[b] < dom.lo()[b] - 1e-12 || f.hi[b] > dom.hi()[b] + 1e-12)
        throw DomainError("facet extends outside the domain box");
      from[sz(b)] = static_cast<int>(std::lround((f.lo[b] - dom.lo()[b]) / dom.h()));
      to[sz(b)] = static_cast<int>(std::lround((f.hi[b] - dom.lo()[b]) / dom.h()));
    }
    const int plane = static_cast<int>(std::lround((f.position - dom.lo()[a]) / dom.h()));
    from[sz(a)] = plane - 1;
    to[sz(a)] = plane;
    CellCoords c{0, 0, 0};
    for (c[2] = from[2]; c[2] < (d > 2 ? to[2] : 1); ++c[2])
      for (c[1] = from[1]; c[1] < to[1]; ++c[1])
        for (c[0] = from[0]; c[0] < to[0]; ++c[0]) {
          const std::size_t slot = dom.cell_index(c) * sz(d) + sz(a);
          if (face_facet_[slot] >= 0) throw ParameterError("jump facets overlap");
          face_facet_[slot] = static_cast<int>(fi);
        }
  }
}

// ---------------------------------------------------------------- evaluate

namespace {

// True when the straight segment from x (inside cell `from`) to the center of
// cell `to` (a lattice neighbor within one step per axis) crosses a facet.
bool path_blocked(const DisplacementField& field, const Vec& x, const CellCoords& from, const CellCoords& to) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  std::array<int, 3> axes{};
  std::array<double, 3> s{};
  int n = 0;
  for (int a = 0; a < d; ++a) {
    if (from[sz(a)] == to[sz(a)]) continue;
    const int upper = std::max(from[sz(a)], to[sz(a)]);
    const double plane = dom.lo()[a] + upper * dom.h();
    const double target = dom.lo()[a] + (to[sz(a)] + 0.5) * dom.h();
    axes[sz(n)] = a;
    s[sz(n)] = (plane - x[a]) / (target - x[a]);
    ++n;
  }
  if (n == 0) return false;
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.begin() + n);
  do {
    bool consistent = true;
    for (int i = 0; i + 1 < n; ++i)
      if (s[sz(order[sz(i)])] > s[sz(order[sz(i + 1)])] + 1e-12) consistent = false;
    if (!consistent) continue;
    CellCoords cur = from;
    for (int i = 0; i < n; ++i) {
      const int a = axes[sz(order[sz(i)])];
      CellCoords low = cur;
      low[sz(a)] = std::min(cur[sz(a)], to[sz(a)]);
      if (field.face_facet(dom.cell_index(low), a) >= 0) return true;
      cur[sz(a)] = to[sz(a)];
    }
  } while (std::next_permutation(order.begin(), order.begin() + n));
  return false;
}

void check_not_on_facet(const DisplacementField& field, const Vec& x) {
  if (field.jumps().empty()) return;
  const Domain& dom = field.domain();
  const int d = dom.dim();
  for (int a = 0; a < d; ++a) {
    const double f = (x[a] - dom.lo()[a]) / dom.h();
    const double m = std::round(f);
    if (std::abs(f - m) > 1e-11 || m < 1 || m > dom.count(a) - 1) continue;
    // Candidate cell ranges on the other axes (both sides when on a plane).
    std::array<std::array<int, 2>, 3> range{};
    for (int b = 0; b < d; ++b) {
      if (b == a) {
        range[sz(b)] = {static_cast<int>(m) - 1, static_cast<int>(m) - 1};
        continue;
      }
      const double g = (x[b] - dom.lo()[b]) / dom.h();
      const double r = std::round(g);
      if (std::abs(g - r) < 1e-9)
        range[sz(b)] = {std::max(0, static_cast<int>(r) - 1), std::min(dom.count(b) - 1, static_cast<int>(r))};
      else {
        const int i = std::clamp(static_cast<int>(std::floor(g)), 0, dom.count(b) - 1);
        range[sz(b)] = {i, i};
      }
    }
    if (d == 2) range[2] = {0, 0};
    CellCoords c{0, 0, 0};
    for (c[2] = range[2][0]; c[2] <= range[2][1]; ++c[2])
      for (c[1] = range[1][0]; c[1] <= range[1][1]; ++c[1])
        for (c[0] = range[0][0]; c[0] <= range[0][1]; ++c[0])
          if (field.face_facet(dom.cell_index(c), a) >= 0) {
            std::ostringstream msg;
            msg << "point lies on a jump facet; query a one-sided value instead";
            throw AmbiguityError(msg.str());
          }
  }
}

}  // namespace

Vec evaluate(const DisplacementField& field, const Vec& x) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  if (x.size() != d || !dom.contains(x)) throw DomainError("evaluation point outside the domain");
  check_not_on_facet(field, x);
  if (field.has_sampler()) return field.sampler()(x);

  const CellCoords home = dom.cell_coords(*dom.locate(x));
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> t{0, 0, 0};
  std::array<int, 3> span{1, 1, 1};
  for (int a = 0; a < d; ++a) {
    const int n = dom.count(a);
    if (n == 1) continue;
    const double f = (x[a] - dom.lo()[a]) / dom.h() - 0.5;
    const int i = std::clamp(static_cast<int>(std::floor(f)), 0, n - 2);
    base[sz(a)] = i;
    t[sz(a)] = f - i;
    span[sz(a)] = 2;
  }
  Vec acc = Vec::Zero(d);
  double wsum = 0;
  bool masked = false;
  CellCoords c{0, 0, 0};
  for (int k2 = 0; k2 < (d > 2 ? span[2] : 1); ++k2)
    for (int k1 = 0; k1 < span[1]; ++k1)
      for (int k0 = 0; k0 < span[0]; ++k0) {
        const std::array<int, 3> k{k0, k1, k2};
        double w = 1;
        for (int a = 0; a < d; ++a) {
          c[sz(a)] = base[sz(a)] + k[sz(a)];
          if (span[sz(a)] == 2) w *= k[sz(a)] ? t[sz(a)] : 1 - t[sz(a)];
        }
        if (w == 0) continue;
        if (!field.jumps().empty() && path_blocked(field, x, home, c)) {
          masked = true;
          continue;
        }
        acc += w * field.cell_value(dom.cell_index(c));
        wsum += w;
      }
  if (!masked) return acc;
  if (wsum < 1e-6) return field.cell_value(dom.cell_index(home));
  return acc / wsum;
}

// ---------------------------------------------------------------- RigidMotion

RigidMotion::RigidMotion(const Mat& W, const Vec& b) : W_(W), b_(b) {
  if (W.rows() != b.size() || W.cols() != b.size()) throw ParameterError("rigid motion dimensions mismatch");
  const Mat sym = W + W.transpose();
  if (sym.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, W.cwiseAbs().maxCoeff()))
    throw ParameterError("rigid motion gradient must be skew-symmetric");
  W_ = 0.5 * (W - W.transpose());
}

RigidMotion RigidMotion::zero(int dim) { return RigidMotion(Mat::Zero(dim, dim), Vec::Zero(dim)); }
RigidMotion RigidMotion::translation(const Vec& b) {
  const auto d = b.size();
  return RigidMotion(Mat::Zero(d, d), b);
}
RigidMotion RigidMotion::planar(double omega, const Vec& b) {
  Mat W(2, 2);
  W << 0, omega, -omega, 0;
  return RigidMotion(W, b);
}

RigidMotion RigidMotion::operator+(const RigidMotion& o) const { return RigidMotion(W_ + o.W_, b_ + o.b_); }
RigidMotion RigidMotion::operator-(const RigidMotion& o) const { return RigidMotion(W_ - o.W_, b_ - o.b_); }
RigidMotion RigidMotion::scaled(double s) const { return RigidMotion(s * W_, s * b_); }

// ---------------------------------------------------------------- partitions

double perimeter(const Domain& dom, std::span<const int> labels) {
  const int d = dom.dim();
  std::size_t faces = 0;
  for (std::size_t i = 0; i < dom.cell_count(); ++i) {
    const CellCoords c = dom.cell_coords(i);
    for (int a = 0; a < d; ++a) {
      if (c[sz(a)] + 1 >= dom.count(a)) continue;
      CellCoords n = c;
      ++n[sz(a)];
      if (labels[i] != labels[dom.cell_index(n)]) ++faces;
    }
  }
  return static_cast<double>(faces) * dom.face_area();
}

CaccioppoliPartition::CaccioppoliPartition(Domain domain, std::vector<int> labels)
    : domain_(std::move(domain)), labels_(std::move(labels)) {
  if (labels_.size() != domain_.cell_count()) throw ParameterError("label grid does not match the domain");
  int maxl = 0;
  for (int l : labels_) {
    if (l < 1) throw ParameterError("labels must be >= 1");
    maxl = std::max(maxl, l);
  }
  std::vector<char> used(sz(maxl) + 1, 0);
  for (int l : labels_) used[sz(l)] = 1;
  for (int l = 1; l <= maxl; ++l)
    if (!used[sz(l)]) throw ParameterError("label " + std::to_string(l) + " is not used by any cell");
  pieces_ = maxl;
  perimeter_ = gbd::perimeter(domain_, labels_);
}

int CaccioppoliPartition::label_at(const Vec& x) const {
  const auto c = domain_.locate(x);
  if (!c) throw DomainError("point outside the partition domain");
  return labels_[*c];
}

double perimeter(const CaccioppoliPartition& p) { return perimeter(p.domain(), p.labels()); }

PiecewiseRigidMotion::PiecewiseRigidMotion(CaccioppoliPartition partition, std::vector<RigidMotion> motions)
    : partition_(std::move(partition)), motions_(std::move(motions)) {
  if (static_cast<int>(motions_.size()) != partition_.pieces())
    throw ParameterError("one rigid motion per partition label is required");
}

Vec PiecewiseRigidMotion::operator()(const Vec& x) const { return motion(partition_.label_at(x))(x); }

Vec PiecewiseRigidMotion::at_cell(std::size_t cell) const {
  return motion(partition_.label_at(cell))(partition_.domain().cell_center(cell));
}

// ---------------------------------------------------------------- dyadic cubes

Vec Cube::lo() const { return center - Vec::Constant(center.size(), side / 2); }
Vec Cube::hi() const { return center + Vec::Constant(center.size(), side / 2); }
double Cube::volume() const { return std::pow(side, static_cast<double>(center.size())); }

bool Cube::contains(const Vec& x) const {
  for (Eigen::Index a = 0; a < center.size(); ++a)
    if (!(x[a] > center[a] - side / 2 && x[a] <= center[a] + side / 2)) return false;
  return true;
}

bool Cube::contains_closed(const Vec& x, double tol) const {
  const double s = tol * std::max(1.0, side);
  for (Eigen::Index a = 0; a < center.size(); ++a)
    if (x[a] < center[a] - side / 2 - s || x[a] > center[a] + side / 2 + s) return false;
  return true;
}

DyadicGrid dyadic_cubes(const Domain& dom, double delta0, int level) {
  if (!(delta0 > 0) || level < 0) throw ParameterError("dyadic scale must be positive");
  DyadicGrid g;
  g.delta0 = delta0;
  g.level = level;
  g.delta = std::ldexp(delta0, -level);
  if (g.delta < 2 * dom.h() * (1 - 1e-12))
    throw ResolutionError("dyadic cube side is below two grid cells");
  const int d = dom.dim();
  std::array<int, 3> per{1, 1, 1};
  for (int a = 0; a < d; ++a) {
    const double n = (dom.hi()[a] - dom.lo()[a]) / g.delta;
    per[sz(a)] = static_cast<int>(std::floor(n + 1e-9));
  }
  g.band.assign(dom.cell_count(), 1);
  // Lexicographic by center with axis 0 most significant.
  std::array<int, 3> m{0, 0, 0};
  const int n2 = d > 2 ? per[2] : 1;
  for (m[0] = 0; m[0] < per[0]; ++m[0])
    for (m[1] = 0; m[1] < per[1]; ++m[1])
      for (m[2] = 0; m[2] < n2; ++m[2]) {
        Cube q;
        q.side = g.delta;
        q.center = Vec(d);
        for (int a = 0; a < d; ++a) q.center[a] = dom.lo()[a] + (m[sz(a)] + 0.5) * g.delta;
        g.cubes.push_back(q);
      }
  g.cells.resize(g.cubes.size());
  // Cell membership by center, half-open cubes.
  std::array<int, 3> cube_of{0, 0, 0};
  for (std::size_t c = 0; c < dom.cell_count(); ++c) {
    const Vec x = dom.cell_center(c);
    bool inside = true;
    for (int a = 0; a < d; ++a) {
      const double f = (x[a] - dom.lo()[a]) / g.delta;
      const int i = static_cast<int>(std::ceil(f)) - 1;
      if (i < 0 || i >= per[sz(a)]) inside = false;
      cube_of[sz(a)] = i;
    }
    if (!inside) continue;
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * sz(per[sz(a)]) + sz(cube_of[sz(a)]);
    g.cells[idx].push_back(c);
    g.band[c] = 0;
  }
  return g;
}

// ---------------------------------------------------------------- symmetric gradient

bool face_blocked(const DisplacementField& field, std::size_t cell, int axis) {
  return field.face_facet(cell, axis) >= 0;
}

Mat cell_symmetric_gradient(const DisplacementField& field, std::size_t cell) {
  const Domain& dom = field.domain();
  const int d = dom.dim();
  const double h = dom.h();
  const CellCoords c = dom.cell_coords(cell);
  Mat grad = Mat::Zero(d, d);  // grad(i, a) = d u_i / d x_a
  for (int a = 0; a < d; ++a) {
    std::optional<std::size_t> plus, minus;
    if (c[sz(a)] + 1 < dom.count(a) && !face_blocked(field, cell, a)) {
      CellCoords n = c;
      ++n[sz(a)];
      plus = dom.cell_index(n);
    }
    if (c[sz(a)] > 0) {
      CellCoords n = c;
      --n[sz(a)];
      const std::size_t ni = dom.cell_index(n);
      if (!face_blocked(field, ni, a)) minus = ni;
    }
    Vec diff = Vec::Zero(d);
    if (plus && minus)
      diff = (field.cell_value(*plus) - field.cell_value(*minus)) / (2 * h);
    else if (plus)
      diff = (field.cell_value(*plus) - field.cell_value(cell)) / h;
    else if (minus)
      diff = (field.cell_value(cell) - field.cell_value(*minus)) / h;
    grad.col(a) = diff;
  }
  return 0.5 * (grad + grad.transpose());
}

}  // namespace gbd
