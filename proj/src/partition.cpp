#include "gbdlab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "gbdlab/parallel.hpp"
#include "gbdlab/slicing.hpp"

namespace gbd {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

std::vector<std::size_t> cell_to_cube(const Domain& dom, const DyadicGrid& grid) {
  std::vector<std::size_t> map(dom.cell_count(), std::numeric_limits<std::size_t>::max());
  for (std::size_t q = 0; q < grid.cells.size(); ++q)
    for (std::size_t c : grid.cells[q]) map[c] = q;
  return map;
}

std::string describe_cube(int level, const Cube& q) {
  std::ostringstream os;
  os << "level " << level << " cube centered at (";
  for (Eigen::Index a = 0; a < q.center.size(); ++a) os << (a ? ", " : "") << q.center[a];
  os << ")";
  return os.str();
}

}  // namespace

std::vector<std::size_t> ScaleClassification::good_cubes() const {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < bad.size(); ++q)
    if (!bad[q]) out.push_back(q);
  return out;
}

std::vector<std::size_t> ScaleClassification::bad_cubes() const {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < bad.size(); ++q)
    if (bad[q]) out.push_back(q);
  return out;
}

CellMask ScaleClassification::bad_mask(const Domain& domain) const {
  CellMask m = grid.band;
  m.resize(domain.cell_count(), 1);
  for (std::size_t q = 0; q < bad.size(); ++q)
    if (bad[q])
      for (std::size_t c : grid.cells[q]) m[c] = 1;
  return m;
}

double ScaleClassification::bad_volume() const {
  const double n = static_cast<double>(std::count(bad.begin(), bad.end(), std::uint8_t{1}));
  return n * (grid.cubes.empty() ? 0.0 : grid.cubes.front().volume());
}

ScaleClassification classify_cubes(const DisplacementField& field, double delta0, int level, double eta) {
  if (!(eta > 0)) throw ParameterError("eta must be positive");
  ScaleClassification s;
  s.level = level;
  s.eta = eta;
  s.grid = dyadic_cubes(field.domain(), delta0, level);
  s.delta = s.grid.delta;
  const double threshold = eta * std::pow(s.delta, field.dim() - 1);
  s.bad.resize(s.grid.cubes.size());
  s.j1_area.resize(s.grid.cubes.size());
  for (std::size_t q = 0; q < s.grid.cubes.size(); ++q) {
    s.j1_area[q] = j1_area_in_cube(field, s.grid.cubes[q]);
    s.bad[q] = s.j1_area[q] > threshold * (1 + 1e-12) ? 1 : 0;
  }
  return s;
}

ScaleClassification classify_cubes(const DisplacementField& field, double delta, double eta) {
  return classify_cubes(field, delta, 0, eta);
}

ScaleClassification stabilize_classification(std::span<const DisplacementField> sequence, double delta0, int level,
                                             double eta) {
  if (sequence.empty()) throw ParameterError("empty sequence");
  std::vector<ScaleClassification> per_k;
  per_k.reserve(sequence.size());
  for (const auto& u : sequence) per_k.push_back(classify_cubes(u, delta0, level, eta));
  const std::size_t K = per_k.size();
  std::size_t from = K - 1;
  while (from > 0 && per_k[from - 1].bad == per_k[K - 1].bad) --from;
  ScaleClassification out = per_k.back();
  out.stable_from = static_cast<int>(from) + 1;
  const std::size_t tail = (K + 1) / 2;
  if (from + tail <= K) return out;
  out.unstable = true;
  for (const auto& s : per_k)
    for (std::size_t q = 0; q < out.bad.size(); ++q) {
      out.bad[q] = out.bad[q] | s.bad[q];
      out.j1_area[q] = std::max(out.j1_area[q], s.j1_area[q]);
    }
  return out;
}

double unit_ball_distance(const RigidMotion& a, const RigidMotion& b) {
  const Mat dW = a.W() - b.W();
  const Vec db = a.b() - b.b();
  if (a.dim() == 2) return std::abs(dW(0, 1)) + db.norm();
  if (a.dim() == 3) {
    Vec w(3);
    w << dW(2, 1), dW(0, 2), dW(1, 0);
    const double wn = w.norm();
    if (wn == 0) return db.norm();
    const double par = db.dot(w) / wn;
    const double perp = std::sqrt(std::max(0.0, db.squaredNorm() - par * par));
    return std::hypot(wn + perp, par);
  }
  return db.norm();
}

const char* to_string(PairVerdict v) {
  switch (v) {
    case PairVerdict::Bounded: return "bounded";
    case PairVerdict::Diverging: return "diverging";
    default: return "indeterminate";
  }
}

PairVerdict classify_pair(std::span<const double> D, double tau_bound, double tau_div) {
  if (D.empty()) return PairVerdict::Indeterminate;
  const auto [lo, hi] = std::minmax_element(D.begin(), D.end());
  // A constant offset between two fits is bounded in k, whatever its size.
  if (*hi - *lo <= tau_bound) return PairVerdict::Bounded;
  const std::size_t K = D.size();
  if (D[K - 1] - *lo < tau_div) return PairVerdict::Indeterminate;
  const std::size_t tail = (K + 1) / 2;
  for (std::size_t i = K - tail; i + 1 < K; ++i)
    if (D[i + 1] < D[i] - tau_bound) return PairVerdict::Indeterminate;
  return PairVerdict::Diverging;
}

Clustering cluster_motions(const std::vector<std::vector<RigidMotion>>& motions, double tau_bound, double tau_div,
                           std::span<const std::pair<std::size_t, std::size_t>> forced) {
  const std::size_t n = motions.size();
  const std::size_t K = n ? motions.front().size() : 0;
  for (const auto& m : motions)
    if (m.size() != K) throw ParameterError("every node needs one motion per k");

  auto profile = [&](std::size_t i, std::size_t j) {
    PairProfile p;
    p.first = i;
    p.second = j;
    p.distance.resize(K);
    for (std::size_t k = 0; k < K; ++k) p.distance[k] = unit_ball_distance(motions[i][k], motions[j][k]);
    p.verdict = classify_pair(p.distance, tau_bound, tau_div);
    return p;
  };

  UnionFind uf(n);
  std::vector<std::uint8_t> verdict(n * (n - (n ? 1 : 0)) / 2 + 1, 0);
  auto pair_slot = [n](std::size_t i, std::size_t j) { return i * n - i * (i + 1) / 2 + (j - i - 1); };
  std::vector<double> D(K);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = 0; k < K; ++k) D[k] = unit_ball_distance(motions[i][k], motions[j][k]);
      const PairVerdict v = classify_pair(D, tau_bound, tau_div);
      verdict[pair_slot(i, j)] = static_cast<std::uint8_t>(v);
      if (v == PairVerdict::Bounded) uf.unite(i, j);
    }
  for (const auto& [a, b] : forced) {
    if (a >= n || b >= n) throw ParameterError("forced edge refers to an unknown node");
    uf.unite(a, b);
  }

  Clustering out;
  out.node_class.assign(n, -1);
  std::vector<int> root_class(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uf.find(i);
    if (root_class[r] < 0) {
      root_class[r] = static_cast<int>(out.classes.size());
      out.classes.emplace_back();
    }
    out.node_class[i] = root_class[r];
    out.classes[sz(root_class[r])].members.push_back(i);
  }

  const std::size_t N = out.classes.size();
  std::vector<std::optional<PairProfile>> best(N * N);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int ci = out.node_class[i];
      const int cj = out.node_class[j];
      const auto v = static_cast<PairVerdict>(verdict[pair_slot(i, j)]);
      if (ci == cj) {
        if (v != PairVerdict::Diverging) continue;
        PairProfile p = profile(i, j);
        std::ostringstream os;
        os << "nodes " << i << " and " << j << " share a class but their motions diverge (D(K) = "
           << p.distance.back() << ")";
        throw ClusteringAmbiguity(os.str(), std::move(p));
      }
      if (v != PairVerdict::Diverging) {
        PairProfile p = profile(i, j);
        std::ostringstream os;
        os << "nodes " << i << " and " << j << " are in different classes but their motion distance is "
           << to_string(v) << " (D(K) = " << p.distance.back() << ", tau_bound = " << tau_bound
           << ", tau_div = " << tau_div << ")";
        throw ClusteringAmbiguity(os.str(), std::move(p));
      }
      const std::size_t a = sz(std::min(ci, cj));
      const std::size_t b = sz(std::max(ci, cj));
      auto& slot = best[a * N + b];
      const double last = K ? unit_ball_distance(motions[i][K - 1], motions[j][K - 1]) : 0.0;
      if (!slot || last < slot->distance.back()) slot = profile(i, j);
    }
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = a + 1; b < N; ++b)
      if (best[a * N + b]) out.class_pairs.push_back(*best[a * N + b]);
  return out;
}

Clustering cluster_motions(const std::vector<std::vector<CubeFit>>& fits, double tau_bound, double tau_div) {
  std::vector<std::vector<RigidMotion>> motions(fits.size());
  for (std::size_t i = 0; i < fits.size(); ++i)
    for (const auto& f : fits[i]) motions[i].push_back(f.motion);
  return cluster_motions(motions, tau_bound, tau_div);
}

bool fits_consistent(const Domain& domain, const CubeFit& fit, const CubeFit& other, double c) {
  std::vector<std::size_t> skip = fit.omega;
  skip.insert(skip.end(), other.omega.begin(), other.omega.end());
  std::sort(skip.begin(), skip.end());
  double integral = 0;
  for (std::size_t cell : cube_cells(domain, other.cube)) {
    if (!skip.empty() && std::binary_search(skip.begin(), skip.end(), cell)) continue;
    const Vec x = domain.cell_center(cell);
    integral += (fit.motion(x) - other.motion(x)).norm();
  }
  integral *= domain.cell_volume();
  return integral <= c * fit.cube.side * fit.mu_hat_diffuse + 1e-12;
}

PartitionResult build_partition(std::span<const DisplacementField> sequence, const PartitionOptions& options) {
  if (sequence.empty()) throw ParameterError("empty sequence");
  const Domain& dom = sequence.front().domain();
  for (const auto& u : sequence)
    if (!(u.domain() == dom)) throw ParameterError("all fields of a sequence must share the domain");
  const int d = dom.dim();
  const double h = dom.h();
  const std::size_t K = sequence.size();

  PartitionReport report;
  double side = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) side = std::min(side, dom.hi()[a] - dom.lo()[a]);
  report.delta0 = options.delta0 > 0 ? options.delta0 : side / 4;
  if (options.j_max >= 0) {
    report.j_max = options.j_max;
  } else {
    int j = 0;
    while (std::ldexp(report.delta0, -(j + 1)) >= 4 * h * (1 - 1e-9)) ++j;
    report.j_max = j;
  }
  if (std::ldexp(report.delta0, -report.j_max) < 2 * h * (1 - 1e-9))
    throw ResolutionError("finest cube side is below two grid cells");
  report.c = options.c;
  const double eta_limit = std::ldexp(1.0, -d) / (4 * report.c);
  report.eta = options.eta > 0 ? options.eta : std::min(0.05, std::ldexp(1.0, -d) / (8 * report.c));
  if (!(report.eta < eta_limit)) {
    std::ostringstream os;
    os << "eta = " << report.eta << " must be below 2^-d / (4c) = " << eta_limit;
    throw ParameterError(os.str());
  }

  const std::vector<Vec> dirs = options.directions.empty() ? default_directions(d) : options.directions;
  std::vector<SliceDensities> densities(K);
  parallel_for(K, options.jobs, [&](std::size_t k) { densities[k] = SliceDensities::build(sequence[k], dirs); });
  double j1_max = 0;
  for (const auto& u : sequence) j1_max = std::max(j1_max, jump_surface_measure(u, 1.0));

  const int levels = report.j_max + 1;
  std::vector<ScaleClassification> scales;
  std::vector<std::vector<std::size_t>> cube_map;
  std::vector<CellMask> level_bad;
  // Nodes are good, fitted cubes ordered by (level, cube index).
  struct Node {
    int level;
    std::size_t cube;
  };
  std::vector<Node> nodes;
  std::vector<std::vector<CubeFit>> node_fits;
  std::vector<std::vector<long>> node_of(sz(levels));

  for (int j = 0; j < levels; ++j) {
    ScaleClassification cls = stabilize_classification(sequence, report.delta0, j, report.eta);
    ScaleSummary summary;
    summary.level = j;
    summary.delta = cls.delta;
    summary.cubes = cls.grid.cubes.size();
    summary.stable_from = cls.stable_from;
    summary.unstable = cls.unstable;
    summary.bad_volume = cls.bad_volume();
    summary.bad_volume_bound = cls.delta / report.eta * j1_max;
    if (cls.unstable) {
      std::ostringstream os;
      os << "level " << j << ": bad cubes change with k; using the union over k";
      report.warnings.push_back(os.str());
    }

    const std::vector<std::size_t> good = cls.good_cubes();
    const bool fittable = cls.delta >= 4 * h * (1 - 1e-9);
    std::vector<std::vector<CubeFit>> fits(good.size(), std::vector<CubeFit>(K));
    std::vector<std::uint8_t> failed(good.size() * K, 0);
    if (fittable) {
      parallel_for(good.size() * K, options.jobs, [&](std::size_t task) {
        const std::size_t g = task / K;
        const std::size_t k = task % K;
        PkOptions po;
        po.budget = options.budget;
        po.seed = derive_seed(options.seed, sz(j), good[g]);
        po.densities = &densities[k];
        try {
          fits[g][k] = pk_fit(sequence[k], cls.grid.cubes[good[g]], po);
        } catch (const SelectionFailure&) {
          failed[task] = 1;
        }
      });
    }
    node_of[sz(j)].assign(cls.grid.cubes.size(), -1);
    for (std::size_t g = 0; g < good.size(); ++g) {
      bool usable = fittable;
      bool early = false;
      bool failure = false;
      for (std::size_t k = 0; k < K && fittable; ++k) {
        if (failed[g * K + k]) failure = true;
        else if (fits[g][k].early_exit) early = true;
      }
      if (early || failure) usable = false;
      if (early) ++summary.early_exits;
      if (failure) ++summary.selection_failures;
      if (!usable) {
        cls.bad[good[g]] = 1;
        continue;
      }
      ++summary.fitted;
      node_of[sz(j)][good[g]] = static_cast<long>(nodes.size());
      nodes.push_back({j, good[g]});
      node_fits.push_back(std::move(fits[g]));
    }
    summary.bad = cls.bad_cubes().size();
    if (summary.selection_failures) {
      std::ostringstream os;
      os << "level " << j << ": " << summary.selection_failures << " cube(s) without an admissible simplex";
      report.warnings.push_back(os.str());
    }
    level_bad.push_back(cls.bad_mask(dom));
    cube_map.push_back(cell_to_cube(dom, cls.grid));
    report.scales.push_back(summary);
    scales.push_back(std::move(cls));
  }

  // B_j: band and bad cubes at all levels >= j.
  report.B.assign(sz(levels), CellMask());
  for (int j = levels - 1; j >= 0; --j) {
    CellMask m = level_bad[sz(j)];
    if (j + 1 < levels)
      for (std::size_t c = 0; c < m.size(); ++c) m[c] = m[c] | report.B[sz(j) + 1][c];
    report.B[sz(j)] = std::move(m);
    report.scales[sz(j)].B_volume =
        static_cast<double>(std::count(report.B[sz(j)].begin(), report.B[sz(j)].end(), std::uint8_t{1})) *
        dom.cell_volume();
  }
  report.nodes = nodes.size();

  // Thresholds from the typical residual level of the fits.
  if (options.tau_bound > 0) {
    report.tau_bound = options.tau_bound;
  } else {
    std::vector<double> scale;
    for (const auto& fs : node_fits)
      for (const auto& f : fs) scale.push_back(f.residual / f.cube.volume());
    double med = 0;
    if (!scale.empty()) {
      std::nth_element(scale.begin(), scale.begin() + static_cast<long>(scale.size() / 2), scale.end());
      med = scale[scale.size() / 2];
    }
    report.tau_bound = std::max(10 * med, 1e-3);
  }
  report.tau_div = options.tau_div > 0 ? options.tau_div : 100 * report.tau_bound;

  // Nested and face-adjacent good cubes whose fits agree in the integral sense share a class.
  const double c_adj = 2 * report.c;
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    const auto& cls = scales[sz(nd.level)];
    const std::size_t first = cls.grid.cells[nd.cube].front();
    if (nd.level > 0) {
      const std::size_t parent = cube_map[sz(nd.level) - 1][first];
      if (parent < node_of[sz(nd.level) - 1].size() && node_of[sz(nd.level) - 1][parent] >= 0)
        candidates.emplace_back(static_cast<std::size_t>(node_of[sz(nd.level) - 1][parent]), i);
    }
    const int span = static_cast<int>(std::lround(cls.delta / h));
    const CellCoords cc = dom.cell_coords(first);
    for (int a = 0; a < d; ++a) {
      CellCoords nc = cc;
      nc[sz(a)] += span;
      if (nc[sz(a)] >= dom.count(a)) continue;
      const std::size_t q = cube_map[sz(nd.level)][dom.cell_index(nc)];
      if (q < node_of[sz(nd.level)].size() && node_of[sz(nd.level)][q] >= 0)
        candidates.emplace_back(i, static_cast<std::size_t>(node_of[sz(nd.level)][q]));
    }
  }
  std::vector<std::uint8_t> keep(candidates.size(), 0);
  parallel_for(candidates.size(), options.jobs, [&](std::size_t e) {
    const auto [a, b] = candidates[e];
    bool ok = true;
    for (std::size_t k = 0; k < K && ok; ++k)
      ok = fits_consistent(dom, node_fits[a][k], node_fits[b][k], c_adj);
    keep[e] = ok ? 1 : 0;
  });
  std::vector<std::pair<std::size_t, std::size_t>> forced;
  for (std::size_t e = 0; e < candidates.size(); ++e)
    if (keep[e]) forced.push_back(candidates[e]);

  std::vector<std::vector<RigidMotion>> motions(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (const auto& f : node_fits[i]) motions[i].push_back(f.motion);
  const Clustering clustering = cluster_motions(motions, report.tau_bound, report.tau_div, forced);
  report.class_pairs = clustering.class_pairs;

  // Labels per level on the complement of B_j, checking nesting between consecutive levels.
  const std::size_t ncell = dom.cell_count();
  std::vector<int> cls_of(ncell, -1);
  std::vector<int> prev(ncell, -1);
  std::vector<std::size_t> prev_node(ncell, 0);
  for (int j = 0; j < levels; ++j) {
    std::vector<int> cur(ncell, -1);
    std::vector<std::size_t> cur_node(ncell, 0);
    for (std::size_t c = 0; c < ncell; ++c) {
      if (report.B[sz(j)][c]) continue;
      const std::size_t q = cube_map[sz(j)][c];
      const long node = node_of[sz(j)][q];
      if (node < 0) throw ConstructionError("cell outside B_j is not covered by a fitted cube");
      cur[c] = clustering.node_class[sz(node)];
      cur_node[c] = sz(node);
      if (prev[c] >= 0 && prev[c] != cur[c]) {
        const auto& pa = nodes[prev_node[c]];
        const auto& ch = nodes[sz(node)];
        std::ostringstream os;
        os << "nesting violated between " << describe_cube(pa.level, scales[sz(pa.level)].grid.cubes[pa.cube])
           << " and " << describe_cube(ch.level, scales[sz(ch.level)].grid.cubes[ch.cube])
           << "; the clustering thresholds are inconsistent";
        throw ConstructionError(os.str());
      }
      if (cls_of[c] < 0) cls_of[c] = cur[c];
    }
    prev = std::move(cur);
    prev_node = std::move(cur_node);
  }

  // Remaining cells: nearest labeled cell through faces not carried by J^1 of the last field.
  const DisplacementField& last = sequence.back();
  auto face_open = [&](std::size_t c, int axis) {
    const int f = last.face_facet(c, axis);
    return f < 0 || last.jumps()[sz(f)].amplitude() < 1;
  };
  std::vector<std::size_t> frontier;
  for (std::size_t c = 0; c < ncell; ++c)
    if (cls_of[c] >= 0) frontier.push_back(c);
  const bool any_labeled = !frontier.empty();
  for (std::size_t c = 0; c < ncell; ++c)
    if (cls_of[c] < 0) ++report.residual_cells;
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    std::vector<int> proposal(ncell, -1);
    for (std::size_t c : frontier) {
      const CellCoords cc = dom.cell_coords(c);
      for (int a = 0; a < d; ++a) {
        for (int s : {-1, 1}) {
          CellCoords nc = cc;
          nc[sz(a)] += s;
          if (nc[sz(a)] < 0 || nc[sz(a)] >= dom.count(a)) continue;
          const std::size_t n = dom.cell_index(nc);
          if (cls_of[n] >= 0) continue;
          const bool open = s > 0 ? face_open(c, a) : face_open(n, a);
          if (!open) continue;
          if (proposal[n] < 0) next.push_back(n);
          if (proposal[n] < 0 || cls_of[c] < proposal[n]) proposal[n] = cls_of[c];
        }
      }
    }
    for (std::size_t n : next) cls_of[n] = proposal[n];
    frontier = std::move(next);
  }
  if (any_labeled) {
    std::vector<std::size_t> labeled;
    for (std::size_t c = 0; c < ncell; ++c)
      if (cls_of[c] >= 0) labeled.push_back(c);
    std::vector<int> fill(ncell, -1);
    for (std::size_t c = 0; c < ncell; ++c) {
      if (cls_of[c] >= 0) continue;
      const Vec x = dom.cell_center(c);
      double best = std::numeric_limits<double>::infinity();
      int label = -1;
      for (std::size_t l : labeled) {
        const double dist = (dom.cell_center(l) - x).squaredNorm();
        if (dist < best - 1e-15 || (std::abs(dist - best) <= 1e-15 && cls_of[l] < label)) {
          best = dist;
          label = cls_of[l];
        }
      }
      fill[c] = label;
    }
    for (std::size_t c = 0; c < ncell; ++c)
      if (fill[c] >= 0) cls_of[c] = fill[c];
  } else {
    report.warnings.push_back("no fitted cube at any scale; the partition is the whole domain");
    std::fill(cls_of.begin(), cls_of.end(), 0);
  }

  // Labels 1..N in class order, dropping classes without cells.
  const std::size_t nclass = std::max<std::size_t>(clustering.classes.size(), 1);
  std::vector<int> used(nclass, 0);
  for (int c : cls_of) used[sz(c)] = 1;
  std::vector<int> label_of(nclass, 0);
  int next_label = 0;
  for (std::size_t n = 0; n < nclass; ++n)
    if (used[n]) label_of[n] = ++next_label;
  std::vector<int> labels(ncell);
  for (std::size_t c = 0; c < ncell; ++c) labels[c] = label_of[sz(cls_of[c])];
  CaccioppoliPartition partition(dom, labels);

  // Representative: first member, i.e. the lexicographically first cube at the coarsest level of the class.
  std::vector<PiecewiseRigidMotion> per_k;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<RigidMotion> reps;
    for (std::size_t n = 0; n < nclass; ++n) {
      if (!used[n]) continue;
      if (clustering.classes.empty()) reps.push_back(RigidMotion::zero(d));
      else reps.push_back(node_fits[clustering.classes[n].members.front()][k].motion);
    }
    per_k.emplace_back(partition, std::move(reps));
  }
  std::vector<FittedCube> fitted(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    fitted[i].level = nodes[i].level;
    fitted[i].cube = nodes[i].cube;
    fitted[i].label = label_of[sz(clustering.node_class[i])];
    fitted[i].fits = std::move(node_fits[i]);
  }
  std::vector<DyadicGrid> grids;
  for (auto& s : scales) grids.push_back(std::move(s.grid));
  return PartitionResult{std::move(partition), std::move(per_k), std::move(report), std::move(fitted),
                         std::move(grids)};
}

DivergenceReport verify_divergence(std::span<const PiecewiseRigidMotion> motions, std::span<const Vec> xis,
                                   std::span<const Vec> xs, double tau_div) {
  if (motions.empty()) throw ParameterError("no motions");
  const int N = motions.front().partition().pieces();
  if (N < 2) throw ParameterError("divergence needs at least two pieces");
  const auto& first = motions.front();
  const auto& lastm = motions.back();
  DivergenceReport r;
  r.min_growth = std::numeric_limits<double>::infinity();
  r.min_final_distance = std::numeric_limits<double>::infinity();
  r.min_directional_growth = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= N; ++n)
    for (int m = n + 1; m <= N; ++m)
      for (const Vec& x : xs) {
        const Vec d1 = first.motion(n)(x) - first.motion(m)(x);
        const Vec dK = lastm.motion(n)(x) - lastm.motion(m)(x);
        r.min_growth = std::min(r.min_growth, dK.norm() - d1.norm());
        r.min_final_distance = std::min(r.min_final_distance, dK.norm());
        for (const Vec& xi : xis) {
          const double a1 = std::abs(d1.dot(xi));
          const double aK = std::abs(dK.dot(xi));
          r.min_directional_growth = std::min(r.min_directional_growth, aK - a1);
          ++r.samples;
          if (aK >= tau_div) {
            ++r.passed;
          } else {
            r.flagged.push_back({n, m, x, xi, aK});
          }
        }
      }
  return r;
}

}  // namespace gbd
