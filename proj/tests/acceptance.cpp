// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "generators.hpp"
#include "oracles.hpp"
#include "gbdlab/compactness.hpp"
#include "gbdlab/korn.hpp"
#include "gbdlab/partition.hpp"
#include "gbdlab/slicing.hpp"

using namespace gbd;

namespace {

constexpr double kH = 1.0 / 128;
constexpr int kK = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- suites

struct SuiteRun {
  SequenceSpec spec;
  std::vector<DisplacementField> seq;
  CompactnessResult result;
};

const std::vector<SuiteRun>& suite_runs() {
  static const std::vector<SuiteRun> runs = [] {
    std::vector<SuiteRun> out;
    for (const auto& name : suite_names()) {
      SequenceSpec spec = suite_by_name(name, kH, kK);
      auto seq = generate_all(spec);
      CompactnessResult r = run_compactness(seq, spec.mode, spec.p);
      out.push_back({std::move(spec), std::move(seq), std::move(r)});
    }
    return out;
  }();
  return runs;
}

// ---------------------------------------------------------------- criteria

Outcome rigid_recovery() {
  std::mt19937_64 rng(101);
  double worst_motion = 0, worst_residual = 0;
  std::size_t omega_cells = 0;
  for (int i = 0; i < 20; ++i) {
    const int d = i < 16 ? 2 : 3;
    const double h = d == 2 ? kH : 1.0 / 32;
    const Domain dom = d == 2 ? Domain::unit_square(h) : Domain::unit_cube(h);
    const RigidMotion r = gen::rigid(rng, d);
    const DisplacementField u = DisplacementField::from_function(dom, r, {}, false);
    const int cells = 8 + static_cast<int>(rng() % static_cast<std::uint64_t>(dom.count(0) - 7));
    const double side = cells * h;
    Vec center(d);
    for (int a = 0; a < d; ++a) {
      const int start = static_cast<int>(rng() % static_cast<std::uint64_t>(dom.count(a) - cells + 1));
      center[a] = (start + cells / 2.0) * h;
    }
    PkOptions po;
    po.seed = derive_seed(101, static_cast<std::uint64_t>(i));
    const CubeFit fit = pk_fit(u, Cube{center, side}, po);
    worst_motion = std::max({worst_motion, (fit.motion.W() - r.W()).cwiseAbs().maxCoeff(),
                             (fit.motion.b() - r.b()).cwiseAbs().maxCoeff()});
    worst_residual = std::max(worst_residual, fit.residual);
    omega_cells += fit.omega.size();
  }
  return {worst_motion <= 1e-9 && worst_residual <= 1e-10 && omega_cells == 0,
          "max |(W,b) error| " + fmt(worst_motion) + ", max residual " + fmt(worst_residual) + ", omega cells " +
              std::to_string(omega_cells)};
}

// Smooth field plus up to three full-length facets with sub-unit jumps; the
// J^1 density is zero, so every cube stays below the early-exit threshold.
struct CalibrationField {
  gen::SmoothField smooth;
  std::vector<std::pair<int, double>> planes;  // axis, position
  std::vector<Vec> jumps;

  Vec operator()(const Vec& x) const {
    Vec v = smooth(x);
    for (std::size_t i = 0; i < planes.size(); ++i)
      if (x[planes[i].first] > planes[i].second) v += jumps[i];
    return v;
  }

  DisplacementField sample(const Domain& dom) const {
    std::vector<JumpFacet> facets;
    for (std::size_t i = 0; i < planes.size(); ++i)
      facets.push_back(gen::full_facet(dom, planes[i].first, planes[i].second, jumps[i]));
    return DisplacementField::from_function(dom, *this, facets, false);
  }
};

Outcome korn_inequality() {
  std::mt19937_64 rng(202);
  const double side = 0.5;
  const Domain coarse(2, v2(0, 0), v2(side, side), kH);
  const Domain fine(2, v2(0, 0), v2(side, side), kH / 2);
  const Cube cube{v2(side / 2, side / 2), side};
  double max_coarse = 0, max_fine = 0;
  bool finite = true;
  std::size_t holds = 0;
  for (int i = 0; i < 100; ++i) {
    CalibrationField f;
    f.smooth = gen::smooth(rng, 2, 0.2);
    const int n = static_cast<int>(rng() % 4);
    for (int j = 0; j < n; ++j) {
      const int axis = static_cast<int>(rng() % 2);
      const double pos = static_cast<double>(8 + rng() % 48) * kH;
      if (std::find(f.planes.begin(), f.planes.end(), std::make_pair(axis, pos)) != f.planes.end()) continue;
      f.planes.emplace_back(axis, pos);
      f.jumps.push_back(gen::unit(rng, 2) * gen::uniform(rng, 0.05, 0.9));
    }
    PkOptions po;
    po.seed = derive_seed(202, static_cast<std::uint64_t>(i));
    for (const Domain* dom : {&coarse, &fine}) {
      const CubeFit fit = pk_fit(f.sample(*dom), cube, po);
      const PkVerdict v = pk_verify(fit, kKornConstant);
      finite = finite && std::isfinite(v.ratio);
      holds += v.holds ? 1 : 0;
      (dom == &coarse ? max_coarse : max_fine) = std::max(dom == &coarse ? max_coarse : max_fine, v.ratio);
    }
  }
  const double calibrated = 2 * std::max(max_coarse, max_fine);
  const double drift = max_fine / max_coarse;
  const bool stable = drift >= 0.5 && drift <= 2;
  return {finite && stable && calibrated <= kKornConstant && holds == 200,
          "max ratio h " + fmt(max_coarse) + ", h/2 " + fmt(max_fine) + " (factor " + fmt(drift) + "), calibrated c " +
              fmt(calibrated) + ", frozen c " + fmt(kKornConstant) + ", holds " + std::to_string(holds) + "/200"};
}

Outcome early_exit() {
  std::mt19937_64 rng(303);
  int exits = 0;
  for (int i = 0; i < 20; ++i) {
    const int d = i < 15 ? 2 : 3;
    const double h = d == 2 ? kH : 1.0 / 32;
    const Domain dom = d == 2 ? Domain::unit_square(h) : Domain::unit_cube(h);
    const auto smooth = gen::smooth(rng, d, 0.3);
    const double side = (d == 2 ? 32 + rng() % 97 : 8 + rng() % 25) * h;
    Vec center = Vec::Constant(d, 0.5);
    for (int a = 0; a < d; ++a) center[a] = side / 2 + std::floor(gen::uniform(rng, 0, 1 - side) / h) * h;
    const Cube cube{center, side};
    // One crack on a lattice plane through the cube, sized just above or well
    // above the threshold.
    const int axis = static_cast<int>(rng() % static_cast<std::uint64_t>(d));
    const double pos = cube.lo()[axis] + std::ceil(side / (2 * h)) * h;
    const double threshold = early_exit_density(d) * std::pow(side, d - 1);
    const double target = threshold * (i % 2 ? 1.05 : gen::uniform(rng, 2, 50));
    Vec lo = cube.lo(), hi = cube.hi();
    lo[axis] = hi[axis] = pos;
    const double extent = std::min(side, std::ceil(std::pow(target, 1.0 / (d - 1)) / h) * h);
    for (int a = 0; a < d; ++a)
      if (a != axis) hi[a] = lo[a] + extent;
    const JumpFacet crack =
        JumpFacet::axis_aligned(axis, pos, lo, hi, gen::unit(rng, d) * gen::uniform(rng, 1, 5));
    const DisplacementField u = DisplacementField::from_function(dom, smooth, {crack}, false);
    PkOptions po;
    po.seed = static_cast<std::uint64_t>(i);
    const CubeFit fit = pk_fit(u, cube, po);
    const bool ok = fit.jump_density > early_exit_density(d) && fit.early_exit &&
                    fit.omega.size() == fit.cell_count && fit.motion.W().norm() == 0 && fit.motion.b().norm() == 0;
    exits += ok ? 1 : 0;
  }
  return {exits == 20, std::to_string(exits) + "/20 cubes returned omega = Q, a = 0"};
}

Outcome bad_volume() {
  std::mt19937_64 rng(404);
  const Domain dom = Domain::unit_square(kH);
  std::size_t runs = 0, violations = 0;
  double tightest = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<JumpFacet> facets;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int f = 0; f < n; ++f) {
      const int axis = static_cast<int>(rng() % 2);
      const double pos = static_cast<double>(1 + rng() % 127) * kH;
      const double a = static_cast<double>(rng() % 128) * kH;
      const double b = std::min(1.0, a + static_cast<double>(1 + rng() % 64) * kH);
      Vec lo(2), hi(2);
      lo[axis] = hi[axis] = pos;
      lo[1 - axis] = a;
      hi[1 - axis] = b;
      const double amp = gen::uniform(rng, 0.2, 4);
      const bool clash = std::any_of(facets.begin(), facets.end(), [&](const JumpFacet& g) {
        return g.axis == axis && std::abs(g.position - pos) < kH / 2 && g.lo[1 - axis] < b && a < g.hi[1 - axis];
      });
      if (!clash) facets.push_back(JumpFacet::axis_aligned(axis, pos, lo, hi, v2(amp, 0)));
    }
    const DisplacementField u(dom, std::vector<double>(dom.cell_count() * 2, 0.0), facets);
    const double j1 = jump_surface_measure(u, 1);
    const double eta = gen::uniform(rng, 0.005, 0.5);
    const int level = static_cast<int>(rng() % 4);
    const ScaleClassification cls = classify_cubes(u, 0.25, level, eta);
    const double bound = cls.delta / eta * j1;
    ++runs;
    if (cls.bad_volume() > bound * (1 + 1e-12)) ++violations;
    if (bound > 0) tightest = std::max(tightest, cls.bad_volume() / bound);
  }
  for (const auto& run : suite_runs())
    for (const auto& s : run.result.partition.report.scales) {
      ++runs;
      if (s.bad_volume > s.bad_volume_bound * (1 + 1e-12)) ++violations;
      if (s.bad_volume_bound > 0) tightest = std::max(tightest, s.bad_volume / s.bad_volume_bound);
    }
  return {violations == 0, std::to_string(runs) + " classifications, " + std::to_string(violations) +
                               " violations, largest |bad| / bound " + fmt(tightest)};
}

Outcome partition_recovery() {
  bool pass = true;
  std::string detail;
  const std::map<std::string, double> interface{{"two-piece", 1.0}, {"three-stripe", 2.0}};
  for (const auto& run : suite_runs()) {
    const auto it = interface.find(run.spec.name);
    if (it == interface.end()) continue;
    const auto& P = run.result.partition.partition;
    const double agree = oracle::best_label_agreement(run.spec.labels, P.labels());
    const double perim = P.perimeter();
    const bool ok = agree >= 0.99 && std::abs(perim - it->second) <= 0.1 * it->second;
    pass = pass && ok;
    detail += run.spec.name + ": agreement " + fmt(agree) + ", perimeter " + fmt(perim) + " vs " + fmt(it->second) +
              "; ";
  }
  return {pass, detail};
}

// h^2 times the largest second difference of the base inside pieces and away
// from base cracks.
double interpolation_bound(const SuiteRun& run) {
  if (!run.spec.base) return 0;
  const DisplacementField& u = run.seq.front();
  const Domain& dom = u.domain();
  const int d = dom.dim();
  double m = 0;
  for (std::size_t c = 0; c < dom.cell_count(); ++c) {
    const CellCoords cc = dom.cell_coords(c);
    for (int a = 0; a < d; ++a) {
      if (cc[static_cast<std::size_t>(a)] == 0 || cc[static_cast<std::size_t>(a)] + 1 == dom.count(a)) continue;
      CellCoords lo = cc, hi = cc;
      --lo[static_cast<std::size_t>(a)];
      ++hi[static_cast<std::size_t>(a)];
      const std::size_t cl = dom.cell_index(lo), ch = dom.cell_index(hi);
      if (run.spec.labels[cl] != run.spec.labels[c] || run.spec.labels[ch] != run.spec.labels[c]) continue;
      if (face_blocked(u, cl, a) || face_blocked(u, c, a)) continue;
      const Vec second = run.spec.base(dom.cell_center(ch)) - 2 * run.spec.base(dom.cell_center(c)) +
                         run.spec.base(dom.cell_center(cl));
      m = std::max(m, second.norm());
    }
  }
  return m;  // already h^2 times the second derivative
}

Outcome convergence() {
  bool pass = true;
  std::string detail;
  for (const auto& run : suite_runs()) {
    const auto& seq = run.seq;
    const auto& motions = run.result.partition.motions;
    const Domain& dom = seq.front().domain();
    const int d = dom.dim();
    const int K = static_cast<int>(seq.size());
    const int tail = (K + 2) / 3;
    std::vector<std::vector<double>> v(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      v[static_cast<std::size_t>(k)].resize(dom.cell_count() * static_cast<std::size_t>(d));
      for (std::size_t c = 0; c < dom.cell_count(); ++c) {
        const Vec r = seq[static_cast<std::size_t>(k)].cell_value(c) - motions[static_cast<std::size_t>(k)].at_cell(c);
        for (int a = 0; a < d; ++a) v[static_cast<std::size_t>(k)][c * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] = r[a];
      }
    }
    std::vector<double> limit(dom.cell_count() * static_cast<std::size_t>(d));
    std::vector<double> buf(static_cast<std::size_t>(tail));
    for (std::size_t i = 0; i < limit.size(); ++i) {
      for (int t = 0; t < tail; ++t) buf[static_cast<std::size_t>(t)] = v[static_cast<std::size_t>(K - tail + t)][i];
      std::sort(buf.begin(), buf.end());
      limit[i] = tail % 2 ? buf[static_cast<std::size_t>(tail / 2)]
                          : 0.5 * (buf[static_cast<std::size_t>(tail / 2 - 1)] + buf[static_cast<std::size_t>(tail / 2)]);
    }
    const double interp = interpolation_bound(run);
    double worst = 0;
    bool ok = true;
    for (int k = K - tail; k < K; ++k) {
      std::vector<double> dev(dom.cell_count());
      for (std::size_t c = 0; c < dom.cell_count(); ++c) {
        double s = 0;
        for (int a = 0; a < d; ++a) {
          const std::size_t i = c * static_cast<std::size_t>(d) + static_cast<std::size_t>(a);
          s += std::pow(v[static_cast<std::size_t>(k)][i] - limit[i], 2);
        }
        dev[c] = std::sqrt(s);
      }
      const double q99 = quantile(dev, 0.99);
      const double bound = 3 * (interp + run.spec.noise_amplitude(k + 1));
      worst = std::max(worst, bound > 0 ? q99 / bound : (q99 > 1e-9 ? INFINITY : 0.0));
      if (q99 > bound + 1e-9) ok = false;
    }
    pass = pass && ok;
    detail += run.spec.name + " " + fmt(worst) + "; ";
  }
  return {pass, "largest q99 / bound per suite: " + detail};
}

Outcome lower_semicontinuity() {
  bool pass = true;
  std::string detail;
  for (const auto& run : suite_runs()) {
    const LscResult& l = run.result.lsc;
    // Independent right-hand side: tail minimum of the facet measure of u_k.
    const std::size_t K = run.seq.size();
    const std::size_t tail = (K + 1) / 2;
    double rhs = INFINITY;
    for (std::size_t k = K - tail; k < K; ++k)
      rhs = std::min(rhs, jump_surface_measure(run.seq[k], l.mode == EnergyMode::GBD ? l.sigma_used : 0.0));
    const bool ok = l.holds && l.lhs <= rhs * 1.05 + 1e-12 && std::abs(rhs - l.rhs) <= 1e-9 * std::max(1.0, rhs);
    pass = pass && ok;
    detail += run.spec.name + " (" + to_string(l.mode) + ") " + fmt(l.lhs) + " <= " + fmt(rhs) + "; ";
  }
  return {pass, detail};
}

Outcome slice_oracle() {
  std::mt19937_64 rng(808);
  double worst = 0;
  std::size_t largest = 0;
  for (int i = 0; i < 1000; ++i) {
    const oracle::Row1D r = oracle::random_row(rng, 24);
    const SliceFunction sf = extract_slice(r.field(), v2(1, 0), v2(0, 0.5 / r.n));
    largest = std::max(largest, sf.t.size());
    const double a = gen::uniform(rng, 0, 1), b = gen::uniform(rng, 0, 1);
    const std::vector<Interval> B{{std::min(a, b), std::max(a, b)}};
    const std::vector<Interval> all{{0, 1}};
    const double sigma = gen::uniform(rng, 1.01, 4);
    worst = std::max({worst, std::abs(mu_hat_line(sf) - r.mu_hat(all)) / std::max(1.0, r.mu_hat(all)),
                      std::abs(mu_hat_line(sf, B) - r.mu_hat(B)) / std::max(1.0, r.mu_hat(B)),
                      std::abs(I_sigma_line(sf, sigma) - r.i_sigma(sigma)) / std::max(1.0, r.i_sigma(sigma))});
  }
  return {worst <= 1e-12 && largest <= 64,
          "1000 slices (at most " + std::to_string(largest) + " samples), max relative error " + fmt(worst)};
}

Outcome gradient_identity() {
  std::mt19937_64 rng(909);
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 5; ++i) {
    const auto f = gen::smooth(rng, 2, 0.5);
    const Vec xi = gen::unit(rng, 2);
    const double coarse =
        check_slice_gradient_identity(DisplacementField::from_function(Domain::unit_square(1.0 / 64), f, {}, false), xi,
                                      1)
            .l1_discrepancy;
    const double fine =
        check_slice_gradient_identity(DisplacementField::from_function(Domain::unit_square(kH), f, {}, false), xi, 1)
            .l1_discrepancy;
    const double ratio = coarse / fine;
    pass = pass && ratio >= 2 * 0.7 && ratio <= 2 * 1.3;
    detail += fmt(ratio) + " ";
  }
  return {pass, "discrepancy ratios h/(h/2): " + detail};
}

Outcome cauchy() {
  bool pass = true;
  std::size_t tested = 0, failed = 0;
  double worst = 0;
  for (const auto& run : suite_runs())
    for (const auto& c : run.result.cauchy) {
      for (std::size_t k = 0; k < c.lhs.size(); ++k) {
        ++tested;
        if (c.lhs[k] > c.bound) ++failed;
        worst = std::max(worst, c.lhs[k] / c.bound);
      }
      pass = pass && c.holds;
    }
  return {pass && failed == 0, std::to_string(tested) + " (k, j, sigma, e) cases over all suites, " +
                                   std::to_string(failed) + " above the bound, largest lhs / bound " + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rigid recovery", rigid_recovery},
      {"Poincare-Korn inequality", korn_inequality},
      {"early exit", early_exit},
      {"bad-cube volume", bad_volume},
      {"partition recovery", partition_recovery},
      {"convergence of u_k - a_k", convergence},
      {"lower semicontinuity", lower_semicontinuity},
      {"slice oracle equivalence", slice_oracle},
      {"slice-gradient identity", gradient_identity},
      {"Cauchy bound", cauchy},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int n = std::atoi(argv[a]);
    if (n >= 1 && n <= static_cast<int>(criteria.size())) selected[static_cast<std::size_t>(n - 1)] = true;
  }
  int failures = 0, run = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++run;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2zu %s  %s  [%s] (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %d criteria passed\n", run - failures, run);
  return failures == 0 ? 0 : 1;
}
