#pragma once

// Synthetic sequences with diverging piecewise rigid parts, and the checks run
// on them: truncated Cauchy bounds, convergence of u_k - a_k, energy
// accounting and lower semicontinuity of the jump measures.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gbdlab/field.hpp"
#include "gbdlab/partition.hpp"
#include "gbdlab/slicing.hpp"

namespace gbd {

enum class EnergyMode { GBD, GSBDp };

const char* to_string(EnergyMode m);

/// u_k = base + k * rate[label] + eps * k^-alpha * phi, with phi a fixed
/// seeded combination of low-frequency sine modes, |phi| <= 1 per component.
struct SequenceSpec {
  std::string name;
  Domain domain = Domain::unit_square(1.0 / 128);
  Sampler base;                       ///< empty: zero
  std::vector<JumpFacet> base_cracks; ///< geometry of the base's own discontinuities (jumps are measured)
  std::vector<int> labels;            ///< ground-truth partition, one label per cell
  std::vector<RigidMotion> rates;     ///< per label
  double noise = 0;
  double noise_decay = 1;
  std::uint64_t noise_seed = 1;
  int K = 20;
  EnergyMode mode = EnergyMode::GBD;
  double p = 2;
  double energy_bound = 0;  ///< 0: unchecked

  CaccioppoliPartition ground_truth() const { return {domain, labels}; }
  double noise_amplitude(int k) const;
};

/// Pointwise sampler of u_k (off the jump set).
Vec sequence_value(const SequenceSpec& spec, int k, const Vec& x);

/// Field u_k, k in 1..K. Facets are the base cracks and the partition
/// interfaces, one per cell face with the measured jump, merged along runs of
/// equal jumps; zero jumps are dropped. Throws SpecError(k) when the energy
/// bound is exceeded.
DisplacementField generate_sequence(const SequenceSpec& spec, int k);
std::vector<DisplacementField> generate_all(const SequenceSpec& spec, int jobs = 1);

/// sigma * tanh(x / sigma).
double truncate(double x, double sigma);

struct EnergyReport {
  double mu_hat_total = 0;
  double mu_hat_diffuse = 0;  ///< mu_hat(Omega \ J^1)
  double p_energy = 0;        ///< sum over cells of |e(u)|_F^p h^d
  double jump_area = 0;
  double j1_area = 0;
};

EnergyReport energy_report(const DisplacementField& field, double p, std::span<const Vec> directions = {},
                           int jobs = 1);
std::vector<EnergyReport> energy_reports(std::span<const DisplacementField> sequence, double p,
                                         std::span<const Vec> directions = {}, int jobs = 1);

struct CauchyResult {
  int level = 0;
  double sigma = 0;
  Vec e;
  double delta = 0;
  double eta_j = 0;    ///< |B_j| + c delta_j sup_k H^{d-1}(J^1_{u_k})
  double C = 0;        ///< c sup_k mu_hat(Omega \ J^1_{u_k})
  double bound = 0;    ///< sigma eta_j + C delta_j
  std::vector<double> lhs;     ///< per k
  std::vector<double> matrix;  ///< K x K, integral of |u^{e,sigma}_k - u^{e,sigma}_l|
  bool holds = true;
};

/// Requires the fitted cubes of `result` (DependencyError otherwise).
CauchyResult cauchy_check(std::span<const DisplacementField> sequence, const PartitionResult& result,
                          std::span<const EnergyReport> energies, const Vec& e, double sigma, int level);

struct DeviationQuantiles {
  int k = 0;
  double q50 = 0;
  double q90 = 0;
  double q99 = 0;
  double max = 0;
};

struct ConvergenceOptions {
  double growth_threshold = 1.0;  ///< tail increase of |u_k - a_k| marking a cell as escaping
  double slack = 0.01;            ///< allowed |A| above min_j eta_j
};

struct ConvergenceReport {
  std::vector<double> limit;  ///< estimated u, dim components per cell
  std::vector<DeviationQuantiles> quantiles;
  std::vector<std::vector<double>> deviation;  ///< per k, |u_k - a_k - u| per cell
  CellMask escape;
  double escape_volume = 0;
  double escape_bound = 0;
  bool escape_ok = true;
};

/// Limit estimated as the cellwise median of u_k - a_k over the last ceil(K/3) k.
ConvergenceReport convergence_check(std::span<const DisplacementField> sequence,
                                    std::span<const PiecewiseRigidMotion> motions, std::span<const double> eta,
                                    const ConvergenceOptions& options = {});

/// Face between `cell` and its +axis neighbor.
struct FaceRef {
  std::size_t cell = 0;
  int axis = 0;
  bool operator==(const FaceRef&) const = default;
};

/// Faces where the jump of u_K differs from the jump of a_K by more than tol.
std::vector<FaceRef> limit_jump_set(const DisplacementField& u_last, const PiecewiseRigidMotion& a_last,
                                    double tol = 1e-9);

struct LscRow {
  double sigma = 0;
  std::vector<double> measure;  ///< H^{d-1}(J^sigma_{u_k}) per k
  double tail_min = 0;
  bool resolved = false;
};

struct LscResult {
  EnergyMode mode = EnergyMode::GBD;
  double perimeter = 0;
  double limit_jump_area = 0;  ///< H^{d-1}(J_u \ dP), GSBD^p only
  double lhs = 0;
  double rhs = 0;
  double sigma_used = 0;
  double slack = 0.05;
  bool holds = true;
  std::vector<LscRow> rows;
};

/// GBD: perimeter <= tail-min of H^{d-1}(J^sigma_{u_k}) at the largest sigma in
/// the list not exceeding the smallest J^1 jump amplitude reached on the tail.
/// GSBD^p: H^{d-1}(dP u J_u) <= tail-min of H^{d-1}(J_{u_k}). Both with a
/// relative slack.
LscResult lsc_check(std::span<const DisplacementField> sequence, const CaccioppoliPartition& partition,
                    std::span<const FaceRef> limit_jumps, std::span<const double> sigmas, EnergyMode mode,
                    double slack = 0.05);

/// Built-in synthetic suites on the unit square.
SequenceSpec two_piece_suite(double h = 1.0 / 128, int K = 20);
SequenceSpec three_stripe_suite(double h = 1.0 / 128, int K = 20);
SequenceSpec rotation_suite(double h = 1.0 / 128, int K = 20);
SequenceSpec noisy_suite(double h = 1.0 / 128, int K = 20);
SequenceSpec smooth_suite(double h = 1.0 / 128, int K = 20);
SequenceSpec gsbd_suite(double h = 1.0 / 128, int K = 20);
std::vector<std::string> suite_names();
SequenceSpec suite_by_name(const std::string& name, double h = 1.0 / 128, int K = 20);

struct CompactnessOptions {
  PartitionOptions partition;
  std::vector<double> sigmas{2, 4, 8, 16, 32};
  ConvergenceOptions convergence;
  double lsc_slack = 0.05;
  std::vector<Vec> cauchy_directions;  ///< e vectors; empty: the coordinate axes
  int jobs = 1;
};

struct CompactnessResult {
  std::vector<EnergyReport> energies;
  PartitionResult partition;
  ConvergenceReport convergence;
  std::vector<CauchyResult> cauchy;
  LscResult lsc;
  double limit_mu_hat = 0;  ///< mu_hat of the estimated limit
  bool ok() const;
};

CompactnessResult run_compactness(std::span<const DisplacementField> sequence, EnergyMode mode, double p,
                                  const CompactnessOptions& options = {});

}  // namespace gbd
