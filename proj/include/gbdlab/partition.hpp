#pragma once

// Multiscale good/bad cube classification, per-cube rigid fits across a
// sequence of fields, clustering of the fitted motions and assembly of the
// limit partition.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gbdlab/field.hpp"
#include "gbdlab/korn.hpp"

namespace gbd {

struct ScaleClassification {
  int level = 0;
  double delta = 0;
  double eta = 0;
  DyadicGrid grid;
  std::vector<std::uint8_t> bad;  ///< per cube
  std::vector<double> j1_area;    ///< per cube, H^{d-1}(J^1 cap Q)
  int stable_from = 1;            ///< first k (1-based) from which the bad set is constant
  bool unstable = false;          ///< union-of-bad fallback was used

  std::vector<std::size_t> good_cubes() const;
  std::vector<std::size_t> bad_cubes() const;
  /// Cells of the band and of all bad cubes.
  CellMask bad_mask(const Domain& domain) const;
  /// Volume of the union of bad cubes.
  double bad_volume() const;
};

/// Classification on the lattice of side delta anchored at the lower corner.
ScaleClassification classify_cubes(const DisplacementField& field, double delta, double eta);
ScaleClassification classify_cubes(const DisplacementField& field, double delta0, int level, double eta);

/// Bad sets per k; stable when constant on at least the last ceil(K/2)
/// indices, otherwise the union over k is returned with `unstable` set.
ScaleClassification stabilize_classification(std::span<const DisplacementField> sequence, double delta0, int level,
                                             double eta);

/// sup over |x| <= 1 of |a(x) - b(x)|, exact for infinitesimal rigid motions.
double unit_ball_distance(const RigidMotion& a, const RigidMotion& b);

enum class PairVerdict { Bounded, Diverging, Indeterminate };

const char* to_string(PairVerdict v);

struct PairProfile {
  std::size_t first = 0;
  std::size_t second = 0;
  std::vector<double> distance;  ///< D(k), k = 1..K
  PairVerdict verdict = PairVerdict::Indeterminate;
};

/// Bounded when D varies by at most tau_bound over k; diverging when D(K) exceeds
/// min D by at least tau_div and D is nondecreasing (within tau_bound) on the
/// last ceil(K/2) indices.
PairVerdict classify_pair(std::span<const double> distance, double tau_bound, double tau_div);

class ClusteringAmbiguity : public Error {
 public:
  ClusteringAmbiguity(const std::string& what, PairProfile pair) : Error(what), pair_(std::move(pair)) {}
  const PairProfile& pair() const { return pair_; }

 private:
  PairProfile pair_;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

struct MotionClass {
  std::vector<std::size_t> members;  ///< node indices, ascending
};

struct Clustering {
  std::vector<int> node_class;  ///< 0-based class per node
  std::vector<MotionClass> classes;
  /// One profile per pair of classes: the pair of members with the smallest final distance.
  std::vector<PairProfile> class_pairs;
};

/// `motions[node][k]`. Nodes joined by a bounded profile or a forced edge share
/// a class; every pair of nodes in different classes must be diverging and no
/// pair inside a class may diverge (ClusteringAmbiguity otherwise).
Clustering cluster_motions(const std::vector<std::vector<RigidMotion>>& motions, double tau_bound, double tau_div,
                           std::span<const std::pair<std::size_t, std::size_t>> forced = {});
/// Same, from fits indexed `fits[node][k]`.
Clustering cluster_motions(const std::vector<std::vector<CubeFit>>& fits, double tau_bound, double tau_div);

/// Integral over Q' \ (omega u omega') of |a - a'| against c * delta * mu_hat(Q \ J^1).
bool fits_consistent(const Domain& domain, const CubeFit& fit, const CubeFit& other, double c);

struct PartitionOptions {
  double delta0 = 0;   ///< 0: shortest box side / 4
  int j_max = -1;      ///< -1: finest scale delta = 4h
  double eta = 0;      ///< 0: min(0.05, 2^-d / (8c))
  double c = kKornConstant;
  double tau_bound = 0;  ///< 0: 10 x median fit residual per unit volume, at least 1e-3
  double tau_div = 0;    ///< 0: 100 x tau_bound
  std::uint64_t seed = 0;
  int budget = 256;
  int jobs = 1;
  std::vector<Vec> directions;  ///< slice directions for mu_hat (empty: defaults)
};

struct ScaleSummary {
  int level = 0;
  double delta = 0;
  std::size_t cubes = 0;
  std::size_t bad = 0;
  std::size_t fitted = 0;
  std::size_t early_exits = 0;
  std::size_t selection_failures = 0;
  int stable_from = 1;
  bool unstable = false;
  double bad_volume = 0;
  double bad_volume_bound = 0;  ///< (delta / eta) * max_k H^{d-1}(J^1_{u_k})
  double B_volume = 0;
};

struct PartitionReport {
  double delta0 = 0;
  int j_max = 0;
  double eta = 0;
  double c = 0;
  double tau_bound = 0;
  double tau_div = 0;
  std::vector<ScaleSummary> scales;
  std::vector<CellMask> B;  ///< B_j masks
  std::size_t nodes = 0;
  std::size_t residual_cells = 0;
  std::vector<PairProfile> class_pairs;
  std::vector<std::string> warnings;
};

/// A good cube fitted at every k.
struct FittedCube {
  int level = 0;
  std::size_t cube = 0;  ///< index in the level's dyadic grid
  int label = 0;         ///< partition label of its class (0 if the class received no cells)
  std::vector<CubeFit> fits;
};

struct PartitionResult {
  CaccioppoliPartition partition;
  std::vector<PiecewiseRigidMotion> motions;  ///< one per k
  PartitionReport report;
  std::vector<FittedCube> fitted;
  std::vector<DyadicGrid> grids;  ///< per level
};

PartitionResult build_partition(std::span<const DisplacementField> sequence, const PartitionOptions& options = {});

struct DivergenceFlag {
  int first = 0;   ///< labels
  int second = 0;
  Vec x;
  Vec xi;
  double directional = 0;  ///< |(a^n - a^n')(x) . xi| at the last k
};

struct DivergenceReport {
  double min_growth = 0;              ///< min over pairs and x of |a_K^n(x) - a_K^n'(x)| - |a_1^n(x) - a_1^n'(x)|
  double min_final_distance = 0;      ///< min over pairs and x of |a_K^n(x) - a_K^n'(x)|
  double min_directional_growth = 0;  ///< same for the projection on xi
  std::size_t samples = 0;            ///< (pair, x, xi) triples tested
  std::size_t passed = 0;
  std::vector<DivergenceFlag> flagged;
};

DivergenceReport verify_divergence(std::span<const PiecewiseRigidMotion> motions, std::span<const Vec> xis,
                                   std::span<const Vec> xs, double tau_div);

}  // namespace gbd
