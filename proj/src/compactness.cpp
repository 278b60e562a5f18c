#include "gbdlab/compactness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "gbdlab/parallel.hpp"

namespace gbd {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

struct NoiseMode {
  Vec freq;
  double weight;
  double phase;
};

// Per component, a convex combination of sine modes: |phi_i| <= 1.
std::vector<std::vector<NoiseMode>> noise_modes(int d, std::uint64_t seed) {
  std::vector<Vec> freqs;
  for (int a = 0; a < d; ++a) {
    Vec f = Vec::Zero(d);
    f[a] = 1;
    freqs.push_back(f);
  }
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      Vec f = Vec::Zero(d);
      f[a] = 1;
      f[b] = 1;
      freqs.push_back(f);
      f[b] = -1;
      freqs.push_back(f);
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<NoiseMode>> modes(sz(d));
  for (int i = 0; i < d; ++i) {
    double total = 0;
    for (const Vec& f : freqs) {
      const double w = unit(rng);
      const double ph = 2 * std::numbers::pi * unit(rng);
      modes[sz(i)].push_back({f, w, ph});
      total += w;
    }
    for (auto& m : modes[sz(i)]) m.weight /= total;
  }
  return modes;
}

Vec noise_at(const std::vector<std::vector<NoiseMode>>& modes, const Vec& x) {
  Vec out = Vec::Zero(x.size());
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (const auto& m : modes[i])
      out[static_cast<Eigen::Index>(i)] += m.weight * std::sin(2 * std::numbers::pi * m.freq.dot(x) + m.phase);
  return out;
}

struct SequenceContext {
  SequenceSpec spec;
  std::vector<std::vector<NoiseMode>> modes;
};

Vec value_with(const SequenceContext& ctx, int k, const Vec& x) {
  const SequenceSpec& s = ctx.spec;
  Vec u = s.base ? s.base(x) : Vec(Vec::Zero(s.domain.dim()));
  const auto cell = s.domain.locate(x);
  if (!cell) throw DomainError("point outside the domain");
  const int label = s.labels[*cell];
  u += s.rates[sz(label - 1)].scaled(k)(x);
  if (s.noise > 0) u += s.noise_amplitude(k) * noise_at(ctx.modes, x);
  return u;
}

std::vector<double> tail_values(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

std::size_t tail_length(std::size_t K) { return (K + 2) / 3; }

}  // namespace

const char* to_string(EnergyMode m) { return m == EnergyMode::GBD ? "GBD" : "GSBDp"; }

double SequenceSpec::noise_amplitude(int k) const { return noise * std::pow(static_cast<double>(k), -noise_decay); }

Vec sequence_value(const SequenceSpec& spec, int k, const Vec& x) {
  SequenceContext ctx{spec, noise_modes(spec.domain.dim(), spec.noise_seed)};
  return value_with(ctx, k, x);
}

DisplacementField generate_sequence(const SequenceSpec& spec, int k) {
  if (k < 1 || k > spec.K) throw ParameterError("k must lie in 1..K");
  const Domain& dom = spec.domain;
  const int d = dom.dim();
  if (spec.labels.size() != dom.cell_count()) throw ParameterError("one label per cell is required");
  const int pieces = *std::max_element(spec.labels.begin(), spec.labels.end());
  if (static_cast<int>(spec.rates.size()) < pieces) throw ParameterError("one rate per piece is required");

  auto ctx = std::make_shared<SequenceContext>(SequenceContext{spec, noise_modes(d, spec.noise_seed)});
  Sampler sampler = [ctx, k](const Vec& x) { return value_with(*ctx, k, x); };

  // Faces carrying a jump: partition interfaces and base cracks.
  const std::size_t ncell = dom.cell_count();
  std::vector<std::uint8_t> marked(ncell * sz(d), 0);
  for (std::size_t c = 0; c < ncell; ++c) {
    const CellCoords cc = dom.cell_coords(c);
    for (int a = 0; a < d; ++a) {
      if (cc[sz(a)] + 1 >= dom.count(a)) continue;
      CellCoords nc = cc;
      ++nc[sz(a)];
      if (spec.labels[c] != spec.labels[dom.cell_index(nc)]) marked[c * sz(d) + sz(a)] = 1;
    }
  }
  const double h = dom.h();
  for (const auto& crack : spec.base_cracks) {
    const int a = crack.axis;
    for (std::size_t c = 0; c < ncell; ++c) {
      const CellCoords cc = dom.cell_coords(c);
      if (cc[sz(a)] + 1 >= dom.count(a)) continue;
      const Vec x = dom.cell_center(c);
      if (std::abs(x[a] + h / 2 - crack.position) > 1e-9 * h) continue;
      Vec face = x;
      face[a] = crack.position;
      if (crack.covers(face, 1e-9 * h)) marked[c * sz(d) + sz(a)] = 1;
    }
  }

  struct FaceJump {
    CellCoords cell;
    Vec jump;
  };
  // Group faces by (axis, plane, other coordinates except the merge axis), ordered along the merge axis.
  std::map<std::array<int, 4>, std::vector<FaceJump>> runs;
  const double eps = 1e-7 * h;
  for (std::size_t c = 0; c < ncell; ++c)
    for (int a = 0; a < d; ++a) {
      if (!marked[c * sz(d) + sz(a)]) continue;
      Vec x = dom.cell_center(c);
      x[a] += h / 2;
      Vec up = x, down = x;
      up[a] += eps;
      down[a] -= eps;
      const Vec jump = sampler(up) - sampler(down);
      if (jump.norm() <= 1e-12) continue;
      const CellCoords cc = dom.cell_coords(c);
      const int t = a == 0 ? 1 : 0;  // merge axis
      std::array<int, 4> key{a, cc[sz(a)], 0, 0};
      int slot = 2;
      for (int b = 0; b < d; ++b)
        if (b != a && b != t) key[sz(slot++)] = cc[sz(b)];
      runs[key].push_back({cc, jump});
    }

  std::vector<JumpFacet> facets;
  for (auto& [key, faces] : runs) {
    const int a = key[0];
    const int t = a == 0 ? 1 : 0;
    std::sort(faces.begin(), faces.end(),
              [t](const FaceJump& x, const FaceJump& y) { return x.cell[sz(t)] < y.cell[sz(t)]; });
    std::size_t i = 0;
    while (i < faces.size()) {
      std::size_t j = i + 1;
      const double tol = 1e-10 * std::max(1.0, faces[i].jump.norm());
      while (j < faces.size() && faces[j].cell[sz(t)] == faces[j - 1].cell[sz(t)] + 1 &&
             (faces[j].jump - faces[i].jump).norm() <= tol)
        ++j;
      Vec lo(d), hi(d);
      for (int b = 0; b < d; ++b) {
        lo[b] = dom.lo()[b] + faces[i].cell[sz(b)] * h;
        hi[b] = lo[b] + h;
      }
      hi[t] = dom.lo()[t] + (faces[j - 1].cell[sz(t)] + 1) * h;
      const double pos = dom.lo()[a] + (faces[i].cell[sz(a)] + 1) * h;
      lo[a] = hi[a] = pos;
      facets.push_back(JumpFacet::axis_aligned(a, pos, lo, hi, faces[i].jump, 1));
      i = j;
    }
  }

  DisplacementField u = DisplacementField::from_function(dom, sampler, std::move(facets), true);

  if (spec.energy_bound > 0) {
    double energy = 0;
    if (spec.mode == EnergyMode::GBD) {
      const auto dirs = default_directions(d);
      energy = mu_hat(u, dirs, full_mask(dom));
    } else {
      const EnergyReport r = energy_report(u, spec.p);
      energy = r.p_energy + r.jump_area;
    }
    if (energy > spec.energy_bound) {
      std::ostringstream os;
      os << "energy " << energy << " of u_" << k << " exceeds the bound " << spec.energy_bound;
      throw SpecError(os.str(), k);
    }
  }
  return u;
}

std::vector<DisplacementField> generate_all(const SequenceSpec& spec, int jobs) {
  std::vector<std::optional<DisplacementField>> slots(sz(spec.K));
  parallel_for(sz(spec.K), jobs, [&](std::size_t i) { slots[i].emplace(generate_sequence(spec, static_cast<int>(i) + 1)); });
  std::vector<DisplacementField> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double truncate(double x, double sigma) {
  if (!(sigma > 0)) throw ParameterError("sigma must be positive");
  return sigma * std::tanh(x / sigma);
}

EnergyReport energy_report(const DisplacementField& field, double p, std::span<const Vec> directions, int jobs) {
  if (!(p >= 1)) throw ParameterError("p must be at least 1");
  const Domain& dom = field.domain();
  const std::vector<Vec> dirs = directions.empty() ? default_directions(dom.dim())
                                                   : std::vector<Vec>(directions.begin(), directions.end());
  const SliceDensities dens = SliceDensities::build(field, dirs, SliceOptions{0, jobs});
  const CellMask all = full_mask(dom);
  EnergyReport r;
  r.mu_hat_total = dens.mu_hat(all);
  r.mu_hat_diffuse = dens.mu_hat_without_j1(all);
  double e = 0;
  for (std::size_t c = 0; c < dom.cell_count(); ++c) e += std::pow(cell_symmetric_gradient(field, c).norm(), p);
  r.p_energy = e * dom.cell_volume();
  r.jump_area = jump_surface_measure(field, 0);
  r.j1_area = jump_surface_measure(field, 1);
  return r;
}

std::vector<EnergyReport> energy_reports(std::span<const DisplacementField> sequence, double p,
                                         std::span<const Vec> directions, int jobs) {
  std::vector<EnergyReport> out(sequence.size());
  parallel_for(sequence.size(), jobs, [&](std::size_t k) { out[k] = energy_report(sequence[k], p, directions, 1); });
  return out;
}

CauchyResult cauchy_check(std::span<const DisplacementField> sequence, const PartitionResult& result,
                          std::span<const EnergyReport> energies, const Vec& e, double sigma, int level) {
  const std::size_t K = sequence.size();
  if (K == 0) throw ParameterError("empty sequence");
  if (result.fitted.empty() || level < 0 || sz(level) >= result.grids.size() || result.motions.size() != K)
    throw DependencyError("cube fits for this level and sequence are not available");
  if (energies.size() != K) throw DependencyError("one energy report per k is required");
  const Domain& dom = sequence.front().domain();
  const std::size_t ncell = dom.cell_count();
  const double vol = dom.cell_volume();

  CauchyResult r;
  r.level = level;
  r.sigma = sigma;
  r.e = e.normalized();
  r.delta = result.grids[sz(level)].delta;
  const CellMask& B = result.report.B[sz(level)];
  double sup_j1 = 0, sup_mu = 0;
  for (const auto& en : energies) {
    sup_j1 = std::max(sup_j1, en.j1_area);
    sup_mu = std::max(sup_mu, en.mu_hat_diffuse);
  }
  const double B_volume = static_cast<double>(std::count(B.begin(), B.end(), std::uint8_t{1})) * vol;
  const double c = result.report.c;
  r.eta_j = B_volume + c * r.delta * sup_j1;
  r.C = c * sup_mu;
  r.bound = sigma * r.eta_j + r.C * r.delta;

  // Fitted cube covering each cell at this level.
  std::vector<long> cover(ncell, -1);
  const DyadicGrid& grid = result.grids[sz(level)];
  for (std::size_t i = 0; i < result.fitted.size(); ++i) {
    const auto& f = result.fitted[i];
    if (f.level != level) continue;
    for (std::size_t cell : grid.cells[f.cube]) cover[cell] = static_cast<long>(i);
  }

  std::vector<std::vector<double>> truncated(K, std::vector<double>(ncell));
  r.lhs.assign(K, 0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& v = result.motions[k];
    double lhs = 0;
    for (std::size_t cell = 0; cell < ncell; ++cell) {
      const Vec x = dom.cell_center(cell);
      const Vec vk = v.at_cell(cell);
      const double tu = truncate(r.e.dot(sequence[k].cell_value(cell) - vk), sigma);
      truncated[k][cell] = tu;
      double tw = 0;
      if (!B[cell]) {
        if (cover[cell] < 0) throw DependencyError("a cell outside B_j has no fitted cube");
        const Vec w = result.fitted[sz(static_cast<int>(cover[cell]))].fits[k].motion(x) - vk;
        tw = truncate(r.e.dot(w), sigma);
      }
      lhs += std::abs(tu - tw);
    }
    r.lhs[k] = lhs * vol;
    if (r.lhs[k] > r.bound * (1 + 1e-12) + 1e-12) r.holds = false;
  }
  r.matrix.assign(K * K, 0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = k + 1; l < K; ++l) {
      double s = 0;
      for (std::size_t cell = 0; cell < ncell; ++cell) s += std::abs(truncated[k][cell] - truncated[l][cell]);
      r.matrix[k * K + l] = r.matrix[l * K + k] = s * vol;
    }
  return r;
}

ConvergenceReport convergence_check(std::span<const DisplacementField> sequence,
                                    std::span<const PiecewiseRigidMotion> motions, std::span<const double> eta,
                                    const ConvergenceOptions& options) {
  const std::size_t K = sequence.size();
  if (K == 0) throw ParameterError("empty sequence");
  if (motions.size() != K) throw DependencyError("one piecewise rigid motion per k is required");
  const Domain& dom = sequence.front().domain();
  const std::size_t ncell = dom.cell_count();
  const int d = dom.dim();
  const std::size_t T = tail_length(K);

  std::vector<std::vector<Vec>> r(K, std::vector<Vec>(ncell));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < ncell; ++c) r[k][c] = sequence[k].cell_value(c) - motions[k].at_cell(c);

  ConvergenceReport out;
  out.limit.assign(ncell * sz(d), 0);
  std::vector<double> buf(T);
  for (std::size_t c = 0; c < ncell; ++c)
    for (int i = 0; i < d; ++i) {
      for (std::size_t t = 0; t < T; ++t) buf[t] = r[K - T + t][c][i];
      out.limit[c * sz(d) + sz(i)] = median_of(buf);
    }

  out.deviation.assign(K, std::vector<double>(ncell));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < ncell; ++c) {
      const Vec u = Eigen::Map<const Eigen::VectorXd>(&out.limit[c * sz(d)], d);
      out.deviation[k][c] = (r[k][c] - u).norm();
    }
    const std::vector<double> sorted = tail_values(out.deviation[k]);
    out.quantiles.push_back({static_cast<int>(k) + 1, quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.9),
                             quantile_sorted(sorted, 0.99), sorted.back()});
  }

  out.escape.assign(ncell, 0);
  std::size_t escaping = 0;
  for (std::size_t c = 0; c < ncell; ++c) {
    bool monotone = true;
    for (std::size_t k = K - T; k + 1 < K && monotone; ++k) {
      const double a = r[k][c].norm();
      const double b = r[k + 1][c].norm();
      if (b < a - 1e-9 * (1 + a)) monotone = false;
    }
    const double growth = r[K - 1][c].norm() - r[K - T][c].norm();
    if (monotone && growth >= options.growth_threshold) {
      out.escape[c] = 1;
      ++escaping;
    }
  }
  out.escape_volume = static_cast<double>(escaping) * dom.cell_volume();
  const double eta_min = eta.empty() ? 0.0 : *std::min_element(eta.begin(), eta.end());
  out.escape_bound = eta_min + options.slack * dom.volume();
  out.escape_ok = out.escape_volume <= out.escape_bound;
  return out;
}

std::vector<FaceRef> limit_jump_set(const DisplacementField& u_last, const PiecewiseRigidMotion& a_last, double tol) {
  const Domain& dom = u_last.domain();
  const int d = dom.dim();
  const double h = dom.h();
  std::vector<FaceRef> out;
  for (std::size_t c = 0; c < dom.cell_count(); ++c) {
    const CellCoords cc = dom.cell_coords(c);
    for (int a = 0; a < d; ++a) {
      if (cc[sz(a)] + 1 >= dom.count(a)) continue;
      CellCoords nc = cc;
      ++nc[sz(a)];
      const std::size_t n = dom.cell_index(nc);
      Vec ju = Vec::Zero(d);
      const int f = u_last.face_facet(c, a);
      if (f >= 0) {
        const JumpFacet& facet = u_last.jumps()[sz(f)];
        ju = facet.orientation * facet.jump;
      }
      Vec x = dom.cell_center(c);
      x[a] += h / 2;
      const auto& P = a_last.partition();
      const Vec ja = a_last.motion(P.label_at(n))(x) - a_last.motion(P.label_at(c))(x);
      const double scale = std::max({1.0, ju.norm(), ja.norm()});
      if ((ju - ja).norm() > tol * scale) out.push_back({c, a});
    }
  }
  return out;
}

LscResult lsc_check(std::span<const DisplacementField> sequence, const CaccioppoliPartition& partition,
                    std::span<const FaceRef> limit_jumps, std::span<const double> sigmas, EnergyMode mode,
                    double slack) {
  const std::size_t K = sequence.size();
  if (K == 0) throw ParameterError("empty sequence");
  for (std::size_t i = 1; i < sigmas.size(); ++i)
    if (!(sigmas[i] > sigmas[i - 1])) throw ParameterError("sigma list must be increasing");
  const Domain& dom = partition.domain();
  const int d = dom.dim();
  const std::size_t T = tail_length(K);
  LscResult r;
  r.mode = mode;
  r.slack = slack;
  r.perimeter = partition.perimeter();

  auto make_row = [&](double sigma) {
    LscRow row;
    row.sigma = sigma;
    for (const auto& u : sequence) row.measure.push_back(jump_surface_measure(u, sigma));
    row.tail_min = *std::min_element(row.measure.end() - static_cast<long>(T), row.measure.end());
    return row;
  };

  if (mode == EnergyMode::GBD) {
    if (sigmas.empty()) throw ParameterError("GBD mode needs a sigma list");
    // Smallest J^1 amplitude reached on the tail.
    double a_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = K - T; k < K; ++k) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& f : sequence[k].jumps())
        if (f.amplitude() >= 1) m = std::min(m, f.amplitude());
      a_min = std::min(a_min, std::isfinite(m) ? m : 0.0);
    }
    std::size_t used = 0;
    bool any = false;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      LscRow row = make_row(sigmas[i]);
      row.resolved = sigmas[i] <= a_min;
      if (row.resolved) {
        used = i;
        any = true;
      }
      r.rows.push_back(std::move(row));
    }
    if (!any) used = 0;
    r.sigma_used = sigmas[used];
    r.lhs = r.perimeter;
    r.rhs = r.rows[used].tail_min;
  } else {
    r.rows.push_back(make_row(0));
    for (double s : sigmas) r.rows.push_back(make_row(s));
    std::vector<std::uint8_t> face(dom.cell_count() * sz(d), 0);
    std::size_t boundary = 0, extra = 0;
    for (std::size_t c = 0; c < dom.cell_count(); ++c) {
      const CellCoords cc = dom.cell_coords(c);
      for (int a = 0; a < d; ++a) {
        if (cc[sz(a)] + 1 >= dom.count(a)) continue;
        CellCoords nc = cc;
        ++nc[sz(a)];
        if (partition.label_at(c) != partition.label_at(dom.cell_index(nc))) {
          face[c * sz(d) + sz(a)] = 1;
          ++boundary;
        }
      }
    }
    for (const auto& f : limit_jumps) {
      auto& slot = face[f.cell * sz(d) + sz(f.axis)];
      if (!slot) {
        slot = 1;
        ++extra;
      }
    }
    r.limit_jump_area = static_cast<double>(extra) * dom.face_area();
    r.sigma_used = 0;
    r.lhs = static_cast<double>(boundary + extra) * dom.face_area();
    r.rhs = r.rows.front().tail_min;
  }
  r.holds = r.lhs <= r.rhs * (1 + slack) + 1e-12;
  return r;
}

namespace {

std::vector<int> labels_from(const Domain& dom, const std::function<int(const Vec&)>& f) {
  std::vector<int> labels(dom.cell_count());
  for (std::size_t c = 0; c < dom.cell_count(); ++c) labels[c] = f(dom.cell_center(c));
  return labels;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Sampler smooth_base(double amplitude) {
  return [amplitude](const Vec& x) {
    const double pi = std::numbers::pi;
    return Vec(amplitude * v2(std::sin(pi * x[0]) * std::cos(pi * x[1]), 0.5 * std::sin(2 * pi * x[1] + x[0])));
  };
}

SequenceSpec two_piece_base(double h, int K) {
  SequenceSpec s;
  s.domain = Domain::unit_square(h);
  s.labels = labels_from(s.domain, [](const Vec& x) { return x[0] > 0.5 ? 2 : 1; });
  s.rates = {RigidMotion::zero(2), RigidMotion::translation(v2(1, 0))};
  s.K = K;
  s.energy_bound = 10;
  return s;
}

}  // namespace

SequenceSpec two_piece_suite(double h, int K) {
  SequenceSpec s = two_piece_base(h, K);
  s.name = "two-piece";
  return s;
}

SequenceSpec three_stripe_suite(double h, int K) {
  SequenceSpec s;
  s.name = "three-stripe";
  s.domain = Domain::unit_square(h);
  const double x1 = std::round(43.0 / 128 / h) * h;
  const double x2 = std::round(85.0 / 128 / h) * h;
  s.labels = labels_from(s.domain, [x1, x2](const Vec& x) { return x[0] < x1 ? 1 : (x[0] < x2 ? 2 : 3); });
  s.rates = {RigidMotion::zero(2), RigidMotion::translation(v2(1, 0)), RigidMotion::translation(v2(0, 1))};
  s.K = K;
  s.energy_bound = 10;
  return s;
}

SequenceSpec rotation_suite(double h, int K) {
  SequenceSpec s = two_piece_base(h, K);
  s.name = "rotation";
  const Vec center = v2(0.75, 0.5);
  const RigidMotion spin = RigidMotion::planar(1.0, Vec::Zero(2));
  s.rates[1] = RigidMotion::planar(1.0, -(spin.W() * center));
  s.base = smooth_base(0.05);
  return s;
}

SequenceSpec noisy_suite(double h, int K) {
  SequenceSpec s = two_piece_base(h, K);
  s.name = "noisy";
  s.base = smooth_base(0.05);
  s.noise = 0.05;
  s.noise_decay = 1;
  s.noise_seed = 7;
  return s;
}

SequenceSpec smooth_suite(double h, int K) {
  SequenceSpec s;
  s.name = "smooth";
  s.domain = Domain::unit_square(h);
  s.labels.assign(s.domain.cell_count(), 1);
  s.rates = {RigidMotion::planar(0.5, v2(0.2, -0.1))};
  s.base = smooth_base(0.1);
  s.noise = 0.02;
  s.noise_decay = 1;
  s.noise_seed = 11;
  s.K = K;
  s.energy_bound = 10;
  return s;
}

SequenceSpec gsbd_suite(double h, int K) {
  SequenceSpec s = two_piece_base(h, K);
  s.name = "gsbd";
  const double start = std::round(0.2 / h) * h;
  s.base = [start](const Vec& x) {
    Vec u = Vec::Zero(2);
    if (x[1] > 0.5 && x[0] > start && x[0] <= 0.5) u[1] = 0.5 * (x[0] - start) / (0.5 - start);
    return u;
  };
  s.base_cracks = {JumpFacet::axis_aligned(1, 0.5, v2(start, 0.5), v2(0.5, 0.5), v2(0, 1), 1)};
  s.mode = EnergyMode::GSBDp;
  s.p = 2;
  s.energy_bound = 5;
  return s;
}

std::vector<std::string> suite_names() { return {"two-piece", "three-stripe", "rotation", "noisy", "smooth", "gsbd"}; }

SequenceSpec suite_by_name(const std::string& name, double h, int K) {
  if (name == "two-piece") return two_piece_suite(h, K);
  if (name == "three-stripe") return three_stripe_suite(h, K);
  if (name == "rotation") return rotation_suite(h, K);
  if (name == "noisy") return noisy_suite(h, K);
  if (name == "smooth") return smooth_suite(h, K);
  if (name == "gsbd") return gsbd_suite(h, K);
  throw ParameterError("unknown suite: " + name);
}

bool CompactnessResult::ok() const {
  if (!lsc.holds || !convergence.escape_ok) return false;
  for (const auto& c : cauchy)
    if (!c.holds) return false;
  return true;
}

CompactnessResult run_compactness(std::span<const DisplacementField> sequence, EnergyMode mode, double p,
                                  const CompactnessOptions& options) {
  if (sequence.empty()) throw ParameterError("empty sequence");
  const Domain& dom = sequence.front().domain();
  const int d = dom.dim();
  PartitionOptions po = options.partition;
  po.jobs = options.jobs;
  CompactnessResult out{energy_reports(sequence, p, options.partition.directions, options.jobs),
                        build_partition(sequence, po), {}, {}, {}, 0};

  double sup_j1 = 0;
  for (const auto& e : out.energies) sup_j1 = std::max(sup_j1, e.j1_area);
  std::vector<double> eta;
  for (std::size_t j = 0; j < out.partition.report.B.size(); ++j) {
    const auto& B = out.partition.report.B[j];
    const double volume = static_cast<double>(std::count(B.begin(), B.end(), std::uint8_t{1})) * dom.cell_volume();
    eta.push_back(volume + out.partition.report.c * out.partition.grids[j].delta * sup_j1);
  }
  out.convergence = convergence_check(sequence, out.partition.motions, eta, options.convergence);

  std::vector<Vec> dirs = options.cauchy_directions;
  if (dirs.empty())
    for (int a = 0; a < d; ++a) {
      Vec e = Vec::Zero(d);
      e[a] = 1;
      dirs.push_back(e);
    }
  if (!out.partition.fitted.empty()) {
    std::vector<std::tuple<int, double, Vec>> tasks;
    for (int j = 0; j < static_cast<int>(out.partition.grids.size()); ++j)
      for (double s : options.sigmas)
        for (const Vec& e : dirs) tasks.emplace_back(j, s, e);
    out.cauchy.resize(tasks.size());
    parallel_for(tasks.size(), options.jobs, [&](std::size_t i) {
      const auto& [j, s, e] = tasks[i];
      out.cauchy[i] = cauchy_check(sequence, out.partition, out.energies, e, s, j);
    });
  }

  const auto limit_faces = limit_jump_set(sequence.back(), out.partition.motions.back());
  out.lsc = lsc_check(sequence, out.partition.partition, limit_faces, options.sigmas, mode, options.lsc_slack);

  // Limit field with the jumps of u_K - a_K on the limit jump set.
  std::vector<JumpFacet> facets;
  const double h = dom.h();
  for (const auto& f : limit_faces) {
    const CellCoords cc = dom.cell_coords(f.cell);
    CellCoords nc = cc;
    ++nc[sz(f.axis)];
    const std::size_t n = dom.cell_index(nc);
    const Vec xl = Eigen::Map<const Eigen::VectorXd>(&out.convergence.limit[f.cell * sz(d)], d);
    const Vec xu = Eigen::Map<const Eigen::VectorXd>(&out.convergence.limit[n * sz(d)], d);
    const Vec jump = xu - xl;
    if (jump.norm() <= 1e-12) continue;
    Vec lo(d), hi(d);
    for (int b = 0; b < d; ++b) {
      lo[b] = dom.lo()[b] + cc[sz(b)] * h;
      hi[b] = lo[b] + h;
    }
    const double pos = dom.lo()[f.axis] + (cc[sz(f.axis)] + 1) * h;
    lo[f.axis] = hi[f.axis] = pos;
    facets.push_back(JumpFacet::axis_aligned(f.axis, pos, lo, hi, jump, 1));
  }
  const DisplacementField limit(dom, out.convergence.limit, std::move(facets));
  const std::vector<Vec> mdirs = default_directions(d);
  out.limit_mu_hat = mu_hat(limit, mdirs, full_mask(dom));
  return out;
}

}  // namespace gbd
