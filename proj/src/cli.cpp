#include "gbdlab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gbdlab/compactness.hpp"
#include "gbdlab/io.hpp"
#include "gbdlab/korn.hpp"
#include "gbdlab/partition.hpp"
#include "gbdlab/slicing.hpp"

namespace gbd::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw UsageError("value of '" + key + "' is not a number: " + text);
  return v;
}

const std::vector<std::string>& common_keys() {
  static const std::vector<std::string> keys{"out", "seed", "jobs"};
  return keys;
}

const std::map<std::string, std::vector<std::string>>& command_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"slice-measure", {"field", "suite", "h", "K", "k", "directions", "sigma", "spacing"}},
      {"pk-fit", {"field", "suite", "h", "K", "k", "cube_center", "cube_side", "budget", "c", "directions"}},
      {"partition",
       {"fields", "suite", "h", "K", "delta0", "jmax", "eta", "tau_bound", "tau_div", "budget", "c", "directions"}},
      {"compactness",
       {"fields", "suite", "h", "K", "delta0", "jmax", "eta", "tau_bound", "tau_div", "budget", "c", "directions",
        "sigma", "p", "mode", "slack", "growth"}},
      {"lsc-check", {"fields", "suite", "h", "K", "partition", "motions", "sigma", "mode", "slack"}},
      {"energy", {"field", "suite", "h", "K", "k", "p", "directions"}},
      {"generate", {"suite", "h", "K", "payload"}},
  };
  return keys;
}

std::optional<SequenceSpec> suite_spec(const Config& cfg) {
  if (!cfg.has("suite")) return std::nullopt;
  const double h = cfg.number("h", 1.0 / 128);
  const int K = static_cast<int>(cfg.integer("K", 20));
  if (K < 1) throw UsageError("K must be at least 1");
  return suite_by_name(cfg.text("suite", ""), h, K);
}

DisplacementField load_single(const Config& cfg) {
  if (cfg.has("field")) {
    if (cfg.has("suite")) throw UsageError("give either 'field' or 'suite', not both");
    return read_field(cfg.text("field", ""));
  }
  const auto spec = suite_spec(cfg);
  if (!spec) throw UsageError("an input is required: set 'field' or 'suite'");
  const int k = static_cast<int>(cfg.integer("k", spec->K));
  return generate_sequence(*spec, k);
}

std::vector<DisplacementField> load_sequence(const Config& cfg, int jobs) {
  if (cfg.has("fields")) {
    if (cfg.has("suite")) throw UsageError("give either 'fields' or 'suite', not both");
    std::vector<DisplacementField> seq;
    for (const auto& p : cfg.list("fields")) seq.push_back(read_field(p));
    if (seq.empty()) throw UsageError("'fields' is empty");
    return seq;
  }
  const auto spec = suite_spec(cfg);
  if (!spec) throw UsageError("an input sequence is required: set 'fields' or 'suite'");
  return generate_all(*spec, jobs);
}

std::vector<Vec> directions_for(const Config& cfg, int d) {
  if (!cfg.has("directions")) return default_directions(d);
  const long long n = cfg.integer("directions", 0);
  if (n < 1) throw UsageError("'directions' must be positive");
  if (d == 2) return uniform_directions_2d(static_cast<int>(n));
  if (n != 26) throw UsageError("in 3D only the 26 lattice directions are available");
  return default_directions(d);
}

EnergyMode mode_for(const Config& cfg, const std::optional<SequenceSpec>& spec) {
  const std::string fallback = spec ? to_string(spec->mode) : "GBD";
  const std::string m = cfg.text("mode", fallback);
  if (m == "GBD") return EnergyMode::GBD;
  if (m == "GSBDp") return EnergyMode::GSBDp;
  throw UsageError("'mode' must be GBD or GSBDp");
}

std::vector<std::string> vec_header(const std::string& name, int d) {
  std::vector<std::string> h;
  for (int i = 0; i < d; ++i) h.push_back(name + "_" + std::to_string(i));
  return h;
}

std::vector<std::string> motion_header(int d) {
  std::vector<std::string> h;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) h.push_back("W_" + std::to_string(i) + std::to_string(j));
  for (auto& s : vec_header("b", d)) h.push_back(s);
  return h;
}

void put_vec(CsvWriter& w, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w << v[i];
}

void put_motion(CsvWriter& w, const RigidMotion& m) {
  const int d = m.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) w << m.W()(i, j);
  put_vec(w, m.b());
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

PartitionOptions partition_options(const Config& cfg, int d, int jobs) {
  PartitionOptions po;
  po.delta0 = cfg.number("delta0", 0);
  po.j_max = static_cast<int>(cfg.integer("jmax", -1));
  po.eta = cfg.number("eta", 0);
  po.c = cfg.number("c", kKornConstant);
  po.tau_bound = cfg.number("tau_bound", 0);
  po.tau_div = cfg.number("tau_div", 0);
  po.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  po.budget = static_cast<int>(cfg.integer("budget", 256));
  po.jobs = jobs;
  if (cfg.has("directions")) po.directions = directions_for(cfg, d);
  return po;
}

void write_motions(const fs::path& path, const std::vector<PiecewiseRigidMotion>& motions) {
  if (motions.empty()) return;
  const int d = motions.front().partition().domain().dim();
  CsvWriter w(path, concat({"k", "label"}, motion_header(d)));
  for (std::size_t k = 0; k < motions.size(); ++k)
    for (int n = 1; n <= motions[k].partition().pieces(); ++n) {
      w << static_cast<long long>(k + 1) << n;
      put_motion(w, motions[k].motion(n));
      w.end_row();
    }
}

std::vector<PiecewiseRigidMotion> read_motions(const fs::path& path, const CaccioppoliPartition& partition,
                                               std::size_t K) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot open motions file " + path.string());
  const int d = partition.domain().dim();
  const std::size_t N = static_cast<std::size_t>(partition.pieces());
  std::vector<std::vector<std::optional<RigidMotion>>> table(K, std::vector<std::optional<RigidMotion>>(N));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> v;
    for (const auto& cell : split(line, ',')) v.push_back(parse_number("motions", cell));
    if (v.size() != static_cast<std::size_t>(2 + d * d + d)) throw FormatError("bad row in " + path.string());
    const auto k = static_cast<std::size_t>(v[0]);
    const auto n = static_cast<std::size_t>(v[1]);
    if (k < 1 || k > K || n < 1 || n > N) throw FormatError("motion index out of range in " + path.string());
    Mat W(d, d);
    Vec b(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) W(i, j) = v[static_cast<std::size_t>(2 + i * d + j)];
    for (int i = 0; i < d; ++i) b[i] = v[static_cast<std::size_t>(2 + d * d + i)];
    table[k - 1][n - 1] = RigidMotion(W, b);
  }
  std::vector<PiecewiseRigidMotion> out;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<RigidMotion> m;
    for (std::size_t n = 0; n < N; ++n) {
      if (!table[k][n]) throw DependencyError("motions file lacks an entry for k=" + std::to_string(k + 1));
      m.push_back(*table[k][n]);
    }
    out.emplace_back(partition, std::move(m));
  }
  return out;
}

// Partition outputs shared by `partition` and `compactness`; returns true when
// the bad-volume bound holds on every level.
bool write_partition_outputs(const fs::path& out, const PartitionResult& r) {
  const Domain& dom = r.partition.domain();
  write_partition(out / "partition.part", r.partition);
  std::vector<double> labels(r.partition.labels().begin(), r.partition.labels().end());
  write_cell_image(out / "labels.pgm", dom, labels);
  bool ok = true;
  {
    CsvWriter w(out / "scales.csv", {"level", "delta", "cubes", "bad", "fitted", "early_exits", "selection_failures",
                                     "stable_from", "unstable", "bad_volume", "bad_volume_bound", "B_volume"});
    for (const auto& s : r.report.scales) {
      w << s.level << s.delta << s.cubes << s.bad << s.fitted << s.early_exits << s.selection_failures
        << s.stable_from << s.unstable << s.bad_volume << s.bad_volume_bound << s.B_volume;
      w.end_row();
      if (s.bad_volume > s.bad_volume_bound * (1 + 1e-12)) ok = false;
    }
  }
  for (std::size_t j = 0; j < r.report.B.size(); ++j) {
    std::vector<double> m(r.report.B[j].begin(), r.report.B[j].end());
    write_cell_image(out / ("B_" + std::to_string(j) + ".pgm"), dom, m);
  }
  {
    const std::size_t K = r.motions.size();
    std::vector<std::string> header{"class_a", "class_b", "node_a", "node_b", "verdict"};
    for (std::size_t k = 1; k <= K; ++k) header.push_back("D_" + std::to_string(k));
    CsvWriter w(out / "clustering.csv", header);
    for (const auto& p : r.report.class_pairs) {
      const int la = r.fitted[p.first].label;
      const int lb = r.fitted[p.second].label;
      w << la << lb << p.first << p.second << to_string(p.verdict);
      for (double v : p.distance) w << v;
      w.end_row();
    }
  }
  write_motions(out / "motions.csv", r.motions);
  {
    CsvWriter w(out / "partition_summary.csv", {"key", "value"});
    auto row = [&](const std::string& k, double v) {
      w << k << v;
      w.end_row();
    };
    row("pieces", r.partition.pieces());
    row("perimeter", r.partition.perimeter());
    row("delta0", r.report.delta0);
    row("j_max", r.report.j_max);
    row("eta", r.report.eta);
    row("c", r.report.c);
    row("tau_bound", r.report.tau_bound);
    row("tau_div", r.report.tau_div);
    row("fitted_cubes", static_cast<double>(r.report.nodes));
    row("residual_cells", static_cast<double>(r.report.residual_cells));
  }
  for (const auto& w : r.report.warnings) std::cerr << "gbdlab: warning: " << w << '\n';
  return ok;
}

LscResult write_lsc(const fs::path& out, const LscResult& lsc) {
  CsvWriter w(out / "lsc.csv", {"sigma", "k", "measure", "tail_min", "resolved"});
  for (const auto& row : lsc.rows)
    for (std::size_t k = 0; k < row.measure.size(); ++k) {
      w << row.sigma << static_cast<long long>(k + 1) << row.measure[k] << row.tail_min << row.resolved;
      w.end_row();
    }
  CsvWriter s(out / "lsc_summary.csv",
              {"mode", "perimeter", "limit_jump_area", "lhs", "rhs", "sigma_used", "slack", "holds"});
  s << to_string(lsc.mode) << lsc.perimeter << lsc.limit_jump_area << lsc.lhs << lsc.rhs << lsc.sigma_used
    << lsc.slack << lsc.holds;
  s.end_row();
  return lsc;
}

int cmd_slice_measure(const Config& cfg, const fs::path& out, int jobs) {
  const DisplacementField u = load_single(cfg);
  const int d = u.dim();
  const auto dirs = directions_for(cfg, d);
  const auto sigmas = cfg.numbers("sigma", {2, 4, 8, 16, 32});
  SliceOptions so{cfg.number("spacing", 0), jobs};
  const SliceMeasureReport rep = slice_measure_report(u, dirs, sigmas, so);
  std::vector<std::string> header = concat(concat({"direction"}, vec_header("xi", d)), vec_header("y", d));
  header.push_back("mu_hat_line");
  header.push_back("ac_variation");
  for (double s : sigmas) header.push_back("I_sigma_" + format_double(s));
  for (double s : sigmas) header.push_back("jumps_ge_" + format_double(s));
  {
    CsvWriter w(out / "slices.csv", header);
    std::size_t di = 0;
    for (std::size_t r = 0; r < rep.rows.size(); ++r) {
      const auto& row = rep.rows[r];
      while (di + 1 < dirs.size() && row.xi != dirs[di]) ++di;
      w << di;
      put_vec(w, row.xi);
      put_vec(w, row.y);
      w << row.mu_hat_line << row.ac_variation;
      for (double v : row.i_sigma) w << v;
      for (std::size_t c : row.jumps_at_least) w << c;
      w.end_row();
    }
  }
  {
    std::vector<std::string> h = concat(concat({"direction"}, vec_header("xi", d)), {"weight", "mu_hat_directional"});
    for (double s : sigmas) h.push_back("I_sigma_integral_" + format_double(s));
    CsvWriter w(out / "directions.csv", h);
    for (std::size_t i = 0; i < rep.directions.size(); ++i) {
      const auto& s = rep.directions[i];
      w << i;
      put_vec(w, s.xi);
      w << s.weight << s.mu_hat_directional;
      for (double v : s.i_sigma_integral) w << v;
      w.end_row();
    }
  }
  {
    const SliceDensities dens = SliceDensities::build(u, dirs, so);
    const CellMask all = full_mask(u.domain());
    CsvWriter w(out / "summary.csv", {"mu_hat_total", "mu_hat_diffuse", "jump_area", "j1_area"});
    w << dens.mu_hat(all) << dens.mu_hat_without_j1(all) << jump_surface_measure(u, 0) << jump_surface_measure(u, 1);
    w.end_row();
    write_cell_image(out / "mu_hat_density.pgm", u.domain(), dens.cell_sup());
  }
  return kOk;
}

int cmd_pk_fit(const Config& cfg, const fs::path& out, int jobs) {
  const DisplacementField u = load_single(cfg);
  const Domain& dom = u.domain();
  const int d = dom.dim();
  Cube cube;
  if (cfg.has("cube_center")) {
    const auto c = cfg.numbers("cube_center", {});
    if (static_cast<int>(c.size()) != d) throw UsageError("'cube_center' needs one coordinate per dimension");
    cube.center = Vec(d);
    for (int a = 0; a < d; ++a) cube.center[a] = c[static_cast<std::size_t>(a)];
  } else {
    cube.center = 0.5 * (dom.lo() + dom.hi());
  }
  double side = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) side = std::min(side, dom.hi()[a] - dom.lo()[a]);
  cube.side = cfg.number("cube_side", side);
  const double c = cfg.number("c", kKornConstant);

  const auto dirs = directions_for(cfg, d);
  const SliceDensities dens = SliceDensities::build(u, dirs, SliceOptions{0, jobs});
  PkOptions po;
  po.budget = static_cast<int>(cfg.integer("budget", 256));
  po.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  po.densities = &dens;
  po.compute_h = true;
  CubeFit fit;
  try {
    fit = pk_fit(u, cube, po);
  } catch (const SelectionFailure& e) {
    std::ostringstream os;
    os << e.what() << " (best candidate F = " << e.best_candidate().F << ", bound " << e.best_candidate().F_bound
       << ", tried " << e.best_candidate().candidates_tried << ")";
    throw Error(os.str());
  }
  if (fit.early_exit) fit.mu_hat_diffuse = dens.mu_hat_without_j1(cube_cells(dom, cube));
  const PkVerdict v = pk_verify(fit, c);
  std::vector<std::string> header = vec_header("center", d);
  for (const char* s : {"delta", "jump_density", "early_exit", "residual", "ratio", "holds", "c", "omega_fraction",
                        "mu_hat_diffuse", "F", "F_bound", "H", "t_star"})
    header.push_back(s);
  header = concat(concat(header, vec_header("z0", d)), motion_header(d));
  CsvWriter w(out / "fit.csv", header);
  put_vec(w, cube.center);
  w << cube.side << fit.jump_density << fit.early_exit << fit.residual << v.ratio << v.holds << c
    << fit.omega_fraction() << fit.mu_hat_diffuse << fit.diag.F << fit.diag.F_bound << fit.diag.H << fit.diag.t_star;
  put_vec(w, fit.early_exit ? Vec(Vec::Zero(d)) : fit.diag.z0);
  put_motion(w, fit.motion);
  w.end_row();
  return v.holds ? kOk : kViolation;
}

int cmd_partition(const Config& cfg, const fs::path& out, int jobs) {
  const auto seq = load_sequence(cfg, jobs);
  const PartitionResult r = build_partition(seq, partition_options(cfg, seq.front().dim(), jobs));
  return write_partition_outputs(out, r) ? kOk : kViolation;
}

int cmd_compactness(const Config& cfg, const fs::path& out, int jobs) {
  const auto spec = suite_spec(cfg);
  const auto seq = load_sequence(cfg, jobs);
  const int d = seq.front().dim();
  const EnergyMode mode = mode_for(cfg, spec);
  const double p = cfg.number("p", spec ? spec->p : 2.0);
  CompactnessOptions co;
  co.partition = partition_options(cfg, d, jobs);
  co.sigmas = cfg.numbers("sigma", co.sigmas);
  co.lsc_slack = cfg.number("slack", co.lsc_slack);
  co.convergence.growth_threshold = cfg.number("growth", co.convergence.growth_threshold);
  co.jobs = jobs;
  const CompactnessResult r = run_compactness(seq, mode, p, co);
  bool ok = write_partition_outputs(out, r.partition);
  {
    CsvWriter w(out / "energies.csv", {"k", "mu_hat_total", "mu_hat_diffuse", "p_energy", "jump_area", "j1_area"});
    for (std::size_t k = 0; k < r.energies.size(); ++k) {
      const auto& e = r.energies[k];
      w << static_cast<long long>(k + 1) << e.mu_hat_total << e.mu_hat_diffuse << e.p_energy << e.jump_area
        << e.j1_area;
      w.end_row();
    }
  }
  {
    CsvWriter w(out / "convergence.csv", {"k", "q50", "q90", "q99", "max"});
    for (const auto& q : r.convergence.quantiles) {
      w << q.k << q.q50 << q.q90 << q.q99 << q.max;
      w.end_row();
    }
    write_cell_image(out / "deviation.pgm", seq.front().domain(), r.convergence.deviation.back());
    std::vector<double> esc(r.convergence.escape.begin(), r.convergence.escape.end());
    write_cell_image(out / "escape.pgm", seq.front().domain(), esc);
  }
  {
    CsvWriter w(out / "cauchy.csv", concat(concat({"level", "sigma"}, vec_header("e", d)),
                                           {"delta", "eta_j", "C", "bound", "max_lhs", "holds"}));
    for (const auto& c : r.cauchy) {
      w << c.level << c.sigma;
      put_vec(w, c.e);
      w << c.delta << c.eta_j << c.C << c.bound << *std::max_element(c.lhs.begin(), c.lhs.end()) << c.holds;
      w.end_row();
    }
    CsvWriter m(out / "cauchy_matrix.csv", {"level", "sigma", "e_index", "k", "l", "lhs_k", "distance"});
    const std::size_t K = seq.size();
    for (std::size_t i = 0; i < r.cauchy.size(); ++i) {
      const auto& c = r.cauchy[i];
      const std::size_t e_index = i % static_cast<std::size_t>(d);
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < K; ++l) {
          m << c.level << c.sigma << e_index << static_cast<long long>(k + 1) << static_cast<long long>(l + 1)
            << c.lhs[k] << c.matrix[k * K + l];
          m.end_row();
        }
    }
  }
  write_lsc(out, r.lsc);
  {
    CsvWriter w(out / "summary.csv", {"key", "value"});
    auto row = [&](const std::string& k, double v) {
      w << k << v;
      w.end_row();
    };
    double sup_mu = 0;
    for (const auto& e : r.energies) sup_mu = std::max(sup_mu, e.mu_hat_total);
    row("sup_mu_hat", sup_mu);
    row("limit_mu_hat", r.limit_mu_hat);
    row("escape_volume", r.convergence.escape_volume);
    row("escape_bound", r.convergence.escape_bound);
    row("escape_ok", r.convergence.escape_ok);
    std::size_t failing = 0;
    for (const auto& c : r.cauchy) failing += c.holds ? 0 : 1;
    row("cauchy_failures", static_cast<double>(failing));
    row("lsc_holds", r.lsc.holds);
  }
  ok = ok && r.ok();
  return ok ? kOk : kViolation;
}

int cmd_lsc_check(const Config& cfg, const fs::path& out, int jobs) {
  if (!cfg.has("partition")) throw DependencyError("lsc-check needs a partition file ('partition' key)");
  const auto spec = suite_spec(cfg);
  const auto seq = load_sequence(cfg, jobs);
  const CaccioppoliPartition partition = read_partition(cfg.text("partition", ""));
  if (!(partition.domain() == seq.front().domain()))
    throw DependencyError("partition and fields live on different grids");
  const EnergyMode mode = mode_for(cfg, spec);
  std::vector<FaceRef> limit;
  if (mode == EnergyMode::GSBDp) {
    if (!cfg.has("motions")) throw DependencyError("GSBDp mode needs the motions file ('motions' key)");
    const auto motions = read_motions(cfg.text("motions", ""), partition, seq.size());
    limit = limit_jump_set(seq.back(), motions.back());
  }
  const auto sigmas = cfg.numbers("sigma", {2, 4, 8, 16, 32});
  const LscResult r = lsc_check(seq, partition, limit, sigmas, mode, cfg.number("slack", 0.05));
  write_lsc(out, r);
  return r.holds ? kOk : kViolation;
}

int cmd_energy(const Config& cfg, const fs::path& out, int jobs) {
  const DisplacementField u = load_single(cfg);
  const auto dirs = directions_for(cfg, u.dim());
  const EnergyReport e = energy_report(u, cfg.number("p", 2), dirs, jobs);
  CsvWriter w(out / "energy.csv", {"mu_hat_total", "p_energy", "jump_area"});
  w << e.mu_hat_total << e.p_energy << e.jump_area;
  w.end_row();
  return kOk;
}

int cmd_generate(const Config& cfg, const fs::path& out, int jobs) {
  const auto spec = suite_spec(cfg);
  if (!spec) throw UsageError("generate needs 'suite'");
  const std::string payload = cfg.text("payload", "binary");
  if (payload != "binary" && payload != "csv") throw UsageError("'payload' must be binary or csv");
  const auto seq = generate_all(*spec, jobs);
  CsvWriter w(out / "sequence.csv", {"k", "path"});
  for (std::size_t k = 0; k < seq.size(); ++k) {
    std::ostringstream name;
    name << "u_" << std::setw(3) << std::setfill('0') << (k + 1) << ".field";
    write_field(out / name.str(), seq[k], payload == "csv" ? Payload::Csv : Payload::Binary);
    w << static_cast<long long>(k + 1) << name.str();
    w.end_row();
  }
  write_partition(out / "ground_truth.part", spec->ground_truth());
  return kOk;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(number) + ": empty key");
    if (cfg.has(key)) throw UsageError(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    cfg.set(key, value);
  }
  if (cfg.text("schema", "") != kConfigSchema)
    throw UsageError(source + ": missing or unsupported schema tag (expected 'schema = " + kConfigSchema + "')");
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot open config file " + path);
  return parse(in, path);
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number(key, it->second);
}

long long Config::integer(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v = 0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw UsageError("value of '" + key + "' is not an integer: " + s);
  return v;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& s : list(key)) out.push_back(parse_number(key, s));
  return out;
}

std::vector<std::string> Config::list(const std::string& key) const { return split(text(key, ""), ','); }

std::vector<std::string> commands() {
  std::vector<std::string> out;
  for (const auto& [name, keys] : command_keys()) out.push_back(name);
  return out;
}

std::vector<std::string> allowed_keys(const std::string& command) {
  const auto it = command_keys().find(command);
  if (it == command_keys().end()) throw UsageError("unknown command: " + command);
  return concat(common_keys(), it->second);
}

int run_command(const std::string& command, const Config& config) {
  const auto keys = allowed_keys(command);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : config.values())
    if (key != "schema" && !allowed.count(key)) throw UsageError("unknown key '" + key + "' for " + command);
  const int jobs = static_cast<int>(config.integer("jobs", 1));
  if (jobs < 1) throw UsageError("'jobs' must be at least 1");
  const fs::path out = config.text("out", "gbdlab-out");
  fs::create_directories(out);
  if (command == "slice-measure") return cmd_slice_measure(config, out, jobs);
  if (command == "pk-fit") return cmd_pk_fit(config, out, jobs);
  if (command == "partition") return cmd_partition(config, out, jobs);
  if (command == "compactness") return cmd_compactness(config, out, jobs);
  if (command == "lsc-check") return cmd_lsc_check(config, out, jobs);
  if (command == "energy") return cmd_energy(config, out, jobs);
  return cmd_generate(config, out, jobs);
}

int main(int argc, char** argv) {
  CLI::App app{"Slicing measures, Poincare-Korn fits and piecewise rigid compactness experiments"};
  app.require_subcommand(1);
  struct Flags {
    std::string config, out, seed, jobs, directions, sigma, eta, delta0, jmax, p;
  };
  std::map<std::string, Flags> flags;
  const std::map<std::string, std::string> about{
      {"slice-measure", "slice a field along sampled directions and report mu_hat"},
      {"pk-fit", "fit an infinitesimal rigid motion on one cube and check the residual bound"},
      {"partition", "build the piecewise rigid partition of a sequence"},
      {"compactness", "partition, energies, convergence, escape set, Cauchy and lsc reports"},
      {"lsc-check", "lower semicontinuity of the jump energy against a stored partition"},
      {"energy", "mu_hat, p-energy and jump area of one field"},
      {"generate", "write a synthetic sequence and its ground-truth partition"}};
  for (const auto& name : commands()) {
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    Flags& f = flags[name];
    sub->add_option("--config", f.config, "flat key = value configuration file");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--jobs", f.jobs, "worker threads");
    sub->add_option("--directions", f.directions, "number of slice directions (2D)");
    sub->add_option("--sigma", f.sigma, "comma-separated sigma list");
    sub->add_option("--eta", f.eta, "bad-cube density threshold");
    sub->add_option("--delta0", f.delta0, "coarsest cube side");
    sub->add_option("--jmax", f.jmax, "finest level");
    sub->add_option("--p", f.p, "energy exponent");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFailure;
  }
  try {
    for (const auto& [name, f] : flags) {
      if (!app.got_subcommand(name)) continue;
      Config cfg = f.config.empty() ? Config() : Config::load(f.config);
      const std::pair<const char*, const std::string*> overrides[] = {
          {"out", &f.out},     {"seed", &f.seed},     {"jobs", &f.jobs},     {"directions", &f.directions},
          {"sigma", &f.sigma}, {"eta", &f.eta},       {"delta0", &f.delta0}, {"jmax", &f.jmax},
          {"p", &f.p}};
      for (const auto& [key, value] : overrides)
        if (!value->empty()) cfg.set(key, *value);
      return run_command(name, cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "gbdlab: error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace gbd::cli
