#pragma once

// One-dimensional restrictions of a field along lines y + t xi and the
// variation measures built from them.

#include <cstddef>
#include <span>
#include <vector>

#include "gbdlab/field.hpp"

namespace gbd {

struct SliceLine {
  Vec y;         ///< offset, y . xi == 0
  double t_min;  ///< clipped parameter range of the line inside the box
  double t_max;
};

/// Lattice of parallel lines covering the box for one direction.
struct SliceFamily {
  Vec xi;
  double spacing = 0;
  double weight = 0;  ///< spacing^(d-1)
  std::vector<SliceLine> lines;

  /// Offsets are laid out on a basis of the hyperplane orthogonal to xi that
  /// depends only on the line through xi, so xi and -xi give the same lines.
  static SliceFamily build(const Domain& domain, const Vec& xi, double spacing);
};

/// Orthonormal basis of the hyperplane orthogonal to xi (invariant under xi -> -xi).
std::vector<Vec> hyperplane_basis(const Vec& xi);

struct SliceJump {
  double t;          ///< crossing parameter
  double amplitude;  ///< jump of u.xi along increasing t
  int facet;         ///< index into the field's facet list
};

/// Inclusive range of sample indices forming one jump-free piece.
struct SliceSegment {
  std::size_t first;
  std::size_t last;
};

struct SliceFunction {
  Vec xi;
  Vec y;
  std::vector<double> t;
  std::vector<double> values;  ///< u(y + t xi) . xi
  std::vector<SliceJump> jumps;
  std::vector<SliceSegment> segments;

  /// Sum of |increments| inside segments (the absolutely continuous variation).
  double ac_variation() const;
};

/// Restriction of the field to the line y + t xi, clipped to the box and
/// optionally to [t_from, t_to]. Samples include every crossing of a cell face
/// or cell center plane and are at most `max_step` apart (default h). Jump-free pieces are
/// sampled slightly inside their ends so that facets are never straddled.
SliceFunction extract_slice(const DisplacementField& field, const Vec& xi, const Vec& y);
SliceFunction extract_slice(const DisplacementField& field, const Vec& xi, const Vec& y, double t_from, double t_to,
                            double max_step = 0);

struct Interval {
  double a;
  double b;
};

/// Slice measure: AC variation on B plus, for each jump in B, min(|amplitude|, 1).
double mu_hat_line(const SliceFunction& sf, std::span<const Interval> B);
double mu_hat_line(const SliceFunction& sf);

/// Variation with jumps of amplitude >= sigma removed (sigma > 1).
double I_sigma_line(const SliceFunction& sf, double sigma);
double I_sigma(const DisplacementField& field, const Vec& xi, const Vec& y, double sigma);

struct SliceOptions {
  double spacing = 0;  ///< line spacing; 0 means h
  int jobs = 1;
};

/// Per-direction cell densities of the slice measure. Each sample interval of
/// each line lies in a single cell and is credited there; each jump is
/// credited to the cell containing the crossing point.
class SliceDensities {
 public:
  static SliceDensities build(const DisplacementField& field, std::span<const Vec> directions,
                              const SliceOptions& options = {});

  const std::vector<Vec>& directions() const { return directions_; }
  std::size_t direction_count() const { return directions_.size(); }
  /// AC variation plus jumps with |amplitude| < 1, per cell, for direction i.
  const std::vector<double>& diffuse(std::size_t i) const { return diffuse_[i]; }
  /// Capped contribution (1 per crossing) of jumps with |amplitude| >= 1.
  const std::vector<double>& capped(std::size_t i) const { return capped_[i]; }

  /// Directional measure of a cell set.
  double directional(std::size_t i, const CellMask& mask) const;
  /// Cellwise sup over directions, summed over the mask.
  double mu_hat(const CellMask& mask) const;
  /// Same with the J^1 crossings removed (the measure of B \ J^1).
  double mu_hat_without_j1(const CellMask& mask) const;
  double mu_hat_without_j1(std::span<const std::size_t> cells) const;

  const std::vector<double>& cell_sup() const { return sup_all_; }
  const std::vector<double>& cell_sup_without_j1() const { return sup_diffuse_; }

 private:
  std::vector<Vec> directions_;
  std::vector<std::vector<double>> diffuse_;
  std::vector<std::vector<double>> capped_;
  std::vector<double> sup_all_;
  std::vector<double> sup_diffuse_;
};

/// 16 uniform angles on the half circle in 2D; the 26 normalized lattice
/// neighbor directions in 3D.
std::vector<Vec> default_directions(int dim);
/// n uniform angles on the half circle (2D only).
std::vector<Vec> uniform_directions_2d(int n);

CellMask full_mask(const Domain& domain);

double mu_hat_directional(const DisplacementField& field, const Vec& xi, const CellMask& B,
                          const SliceOptions& options = {});
double mu_hat(const DisplacementField& field, std::span<const Vec> directions, const CellMask& B,
              const SliceOptions& options = {});

/// Total area of facets with |[u]| >= sigma (sigma == 0: the whole jump set).
double jump_surface_measure(const DisplacementField& field, double sigma);

struct GradientIdentityReport {
  double max_error = 0;
  double mean_error = 0;
  double l1_discrepancy = 0;  ///< sum over lines of weight * sum |error| dt
  std::size_t samples = 0;
  bool within_tolerance = true;
};

/// Compares first differences of u.xi along slices with xi^T e(u) xi from
/// centered differences of the full field, away from facets and the boundary.
GradientIdentityReport check_slice_gradient_identity(const DisplacementField& field, const Vec& xi, double tolerance,
                                                     const SliceOptions& options = {});

struct SliceReportRow {
  Vec xi;
  Vec y;
  double mu_hat_line = 0;
  std::vector<double> i_sigma;
  std::vector<std::size_t> jumps_at_least;  ///< jump counts with |amp| >= each threshold
  double ac_variation = 0;
};

struct SliceDirectionSummary {
  Vec xi;
  double weight = 0;
  double mu_hat_directional = 0;
  std::vector<double> i_sigma_integral;
};

struct SliceMeasureReport {
  std::vector<double> sigmas;
  std::vector<SliceReportRow> rows;
  std::vector<SliceDirectionSummary> directions;
};

SliceMeasureReport slice_measure_report(const DisplacementField& field, std::span<const Vec> directions,
                                        std::span<const double> sigmas, const SliceOptions& options = {});

}  // namespace gbd
