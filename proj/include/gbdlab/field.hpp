#pragma once

// Discrete domains, displacement fields with explicit jump facets, rigid
// motions, label partitions and dyadic cube grids.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gbdlab/errors.hpp"

namespace gbd {

/// Small fixed-capacity vector (d <= 3), no heap allocation.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
/// Small fixed-capacity matrix (d x d, d <= 3).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

/// One byte per cell; nonzero means "in the set".
using CellMask = std::vector<std::uint8_t>;

using CellCoords = std::array<int, 3>;

/// Axis-aligned box discretized by a regular lattice of cubic cells of side h.
/// Cells are indexed with axis 0 varying fastest.
class Domain {
 public:
  Domain(int dim, const Vec& lo, const Vec& hi, double h);

  static Domain unit_square(double h);
  static Domain unit_cube(double h);

  int dim() const { return dim_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  double h() const { return h_; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  std::size_t cell_count() const { return cells_; }

  double cell_volume() const;
  double face_area() const;
  double volume() const;
  double diameter() const;

  std::size_t cell_index(const CellCoords& c) const;
  CellCoords cell_coords(std::size_t index) const;
  Vec cell_center(std::size_t index) const;

  /// Closed-box membership with a small tolerance.
  bool contains(const Vec& x, double tol = 1e-12) const;

  /// Cell containing x using the half-open convention (lo, hi] per axis, so a
  /// point on a shared face belongs to the lower cell. Points on the lower
  /// domain boundary go to the first cell.
  std::optional<std::size_t> locate(const Vec& x) const;

  /// True when `value` lies on the lattice lo[axis] + m*h (within tolerance).
  bool on_lattice(int axis, double value) const;

  bool operator==(const Domain& other) const;

 private:
  int dim_;
  Vec lo_;
  Vec hi_;
  double h_;
  std::array<int, 3> counts_{1, 1, 1};
  std::size_t cells_ = 0;
};

/// Axis-aligned planar facet carrying a jump [u] = u(+side) - u(-side), where
/// the + side is the one the normal points to.
struct JumpFacet {
  int axis = 0;          ///< normal axis
  double position = 0;   ///< coordinate of the facet plane along `axis`
  Vec lo;                ///< facet bounds (lo[axis] == hi[axis] == position)
  Vec hi;
  Vec jump;
  int orientation = 1;   ///< +1: normal = +e_axis, -1: normal = -e_axis

  static JumpFacet axis_aligned(int axis, double position, const Vec& lo, const Vec& hi,
                                const Vec& jump, int orientation = 1);

  int dim() const { return static_cast<int>(lo.size()); }
  Vec normal() const;
  double area() const;
  double amplitude() const { return jump.norm(); }

  /// Closed-rectangle test for a point already on the facet plane.
  bool covers(const Vec& x, double tol = 1e-12) const;
  /// True when x lies on the facet (plane and rectangle).
  bool contains_point(const Vec& x, double tol = 1e-12) const;
  /// Parameter s in [0,1] where the closed segment p->q meets the facet, if any.
  /// Segments parallel to the facet plane never cross.
  std::optional<double> segment_crossing(const Vec& p, const Vec& q, double tol = 1e-12) const;
  /// Area of the part of this facet inside the half-open box (lo, hi].
  double area_in_box(const Vec& box_lo, const Vec& box_hi) const;
};

using Sampler = std::function<Vec(const Vec&)>;

/// Cell-centred samples of a vector field plus its explicit jump set.
class DisplacementField {
 public:
  /// `values` holds dim() components per cell, interleaved.
  DisplacementField(Domain domain, std::vector<double> values, std::vector<JumpFacet> jumps = {},
                    Sampler sampler = {});

  /// Samples `f` at every cell center; `f` is kept as the exact sampler.
  static DisplacementField from_function(const Domain& domain, const Sampler& f,
                                         std::vector<JumpFacet> jumps = {}, bool keep_sampler = true);

  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<JumpFacet>& jumps() const { return jumps_; }
  bool has_sampler() const { return static_cast<bool>(sampler_); }
  const Sampler& sampler() const { return sampler_; }

  Vec cell_value(std::size_t index) const;

  /// Copy without the analytic sampler (values and facets only).
  DisplacementField without_sampler() const;

  /// Facet index covering the face between `cell` and its +axis neighbor, or -1.
  int face_facet(std::size_t cell, int axis) const {
    return face_facet_[cell * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(axis)];
  }

 private:
  void index_faces();

  Domain domain_;
  std::vector<double> values_;
  std::vector<JumpFacet> jumps_;
  Sampler sampler_;
  std::vector<int> face_facet_;
};

/// Point evaluation: the exact sampler when present, otherwise multilinear
/// interpolation over the cell centers reachable from x without crossing a
/// facet. Throws DomainError outside the box and AmbiguityError on a facet.
Vec evaluate(const DisplacementField& field, const Vec& x);

/// Infinitesimal rigid motion x -> W x + b with W skew-symmetric.
class RigidMotion {
 public:
  RigidMotion() = default;
  /// Throws ParameterError unless W + W^T vanishes (to 1e-12 relative);
  /// the stored W is the exact skew part.
  RigidMotion(const Mat& W, const Vec& b);

  static RigidMotion zero(int dim);
  static RigidMotion translation(const Vec& b);
  /// 2D rotation rate: W = [[0, omega], [-omega, 0]].
  static RigidMotion planar(double omega, const Vec& b);

  int dim() const { return static_cast<int>(b_.size()); }
  const Mat& W() const { return W_; }
  const Vec& b() const { return b_; }
  Vec operator()(const Vec& x) const { return W_ * x + b_; }

  RigidMotion operator+(const RigidMotion& o) const;
  RigidMotion operator-(const RigidMotion& o) const;
  RigidMotion scaled(double s) const;

 private:
  Mat W_;
  Vec b_;
};

/// Integer label per cell, labels 1..N all used.
class CaccioppoliPartition {
 public:
  CaccioppoliPartition(Domain domain, std::vector<int> labels);

  const Domain& domain() const { return domain_; }
  const std::vector<int>& labels() const { return labels_; }
  int pieces() const { return pieces_; }
  double perimeter() const { return perimeter_; }
  int label_at(std::size_t cell) const { return labels_[cell]; }
  /// Label of the cell containing x (half-open convention).
  int label_at(const Vec& x) const;

 private:
  Domain domain_;
  std::vector<int> labels_;
  int pieces_ = 0;
  double perimeter_ = 0;
};

/// h^{d-1} times the number of interior cell faces separating different labels.
double perimeter(const CaccioppoliPartition& p);
double perimeter(const Domain& domain, std::span<const int> labels);

/// One rigid motion per partition label.
class PiecewiseRigidMotion {
 public:
  PiecewiseRigidMotion(CaccioppoliPartition partition, std::vector<RigidMotion> motions);

  const CaccioppoliPartition& partition() const { return partition_; }
  const std::vector<RigidMotion>& motions() const { return motions_; }
  const RigidMotion& motion(int label) const { return motions_[static_cast<std::size_t>(label - 1)]; }

  Vec operator()(const Vec& x) const;
  Vec at_cell(std::size_t cell) const;

 private:
  CaccioppoliPartition partition_;
  std::vector<RigidMotion> motions_;
};

/// Half-open cube center + (-side/2, side/2]^d.
struct Cube {
  Vec center;
  double side = 0;

  Vec lo() const;
  Vec hi() const;
  double volume() const;
  /// Half-open membership.
  bool contains(const Vec& x) const;
  bool contains_closed(const Vec& x, double tol = 1e-12) const;
};

/// Dyadic cubes of side delta0 * 2^-level whose open interior lies in the box.
struct DyadicGrid {
  double delta0 = 0;
  int level = 0;
  double delta = 0;
  std::vector<Cube> cubes;
  std::vector<std::vector<std::size_t>> cells;  ///< cells whose center lies in each cube
  CellMask band;                                ///< cells covered by no cube
};

/// Lattice anchored at the lower box corner; cubes ordered lexicographically
/// by center (axis 0 most significant). Throws ResolutionError if delta < 2h.
DyadicGrid dyadic_cubes(const Domain& domain, double delta0, int level);

/// Discrete symmetric gradient by centered differences at a cell (one-sided
/// next to facets and the boundary). Exact for affine data.
Mat cell_symmetric_gradient(const DisplacementField& field, std::size_t cell);

/// True when the face shared by `cell` and its +axis neighbor is covered by a facet.
bool face_blocked(const DisplacementField& field, std::size_t cell, int axis);

}  // namespace gbd
