#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gbdlab/cli.hpp"
#include "gbdlab/compactness.hpp"
#include "gbdlab/io.hpp"

using namespace gbd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gbdlab_test_cli";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

cli::Config config(const std::string& text) {
  std::istringstream in("schema = gbdlab-config/1\n" + text);
  return cli::Config::parse(in);
}

int run_exe(const std::string& args) {
  const char* exe = std::getenv("GBDLAB_EXE");
  if (!exe) return -1;
  const int status = std::system((std::string(exe) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const cli::Config c = config("# comment\n  suite = two-piece \nsigma = 2, 4,8\n\nK=5\n");
  CHECK(c.text("suite", "") == "two-piece");
  CHECK(c.integer("K", 0) == 5);
  CHECK(c.numbers("sigma", {}) == std::vector<double>{2, 4, 8});
  CHECK(c.number("eta", 0.5) == 0.5);
  CHECK_THROWS_AS(config("K = five\n").integer("K", 0), cli::UsageError);
  CHECK_THROWS_AS(config("K = 1\nK = 2\n"), cli::UsageError);
  CHECK_THROWS_AS(config("no equals sign\n"), cli::UsageError);
  std::istringstream unversioned("suite = two-piece\n");
  CHECK_THROWS_AS(cli::Config::parse(unversioned), cli::UsageError);
}

TEST_CASE("unknown keys name the key") {
  cli::Config c = config("bogus = 1\n");
  c.set("out", scratch("unknown").string());
  try {
    cli::run_command("energy", c);
    FAIL("expected a usage error");
  } catch (const cli::UsageError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(cli::run_command("fly", c), cli::UsageError);
}

TEST_CASE("energy of the zero field") {
  const Domain dom = Domain::unit_square(1.0 / 16);
  write_field(scratch("zero.field"), DisplacementField(dom, std::vector<double>(dom.cell_count() * 2, 0.0)));
  cli::Config c = config("field = " + scratch("zero.field").string() + "\n");
  c.set("out", scratch("energy").string());
  CHECK(cli::run_command("energy", c) == cli::kOk);
  CHECK(slurp(scratch("energy") / "energy.csv") == "mu_hat_total,p_energy,jump_area\n0,0,0\n");
}

TEST_CASE("partition of the two-piece suite") {
  cli::Config c = config("suite = two-piece\nh = 0.015625\nK = 6\n");
  c.set("out", scratch("partition").string());
  CHECK(cli::run_command("partition", c) == cli::kOk);
  const CaccioppoliPartition p = read_partition(scratch("partition") / "partition.part");
  CHECK(p.pieces() == 2);
  CHECK(p.perimeter() == doctest::Approx(1).epsilon(0.1));
  CHECK(fs::exists(scratch("partition") / "labels.pgm"));
  CHECK(fs::exists(scratch("partition") / "motions.csv"));
}

TEST_CASE("pk-fit on a dense-jump cube exits early") {
  cli::Config c = config("suite = two-piece\nh = 0.015625\nK = 3\ncube_center = 0.5, 0.5\ncube_side = 0.5\n");
  c.set("out", scratch("pk").string());
  CHECK(cli::run_command("pk-fit", c) == cli::kOk);
  const std::string csv = slurp(scratch("pk") / "fit.csv");
  const auto header_end = csv.find('\n');
  std::istringstream head(csv.substr(0, header_end)), row(csv.substr(header_end + 1));
  std::string name, value;
  bool found = false;
  while (std::getline(head, name, ',') && std::getline(row, value, ','))
    if (name == "early_exit") {
      CHECK(value == "true");
      found = true;
    }
  CHECK(found);
}

TEST_CASE("lsc-check needs its dependencies") {
  cli::Config c = config("suite = two-piece\nh = 0.015625\nK = 3\n");
  c.set("out", scratch("lsc").string());
  CHECK_THROWS_AS(cli::run_command("lsc-check", c), DependencyError);
  cli::Config g = config("suite = gsbd\nh = 0.015625\nK = 3\n");
  g.set("out", scratch("lsc").string());
  g.set("partition", (scratch("partition") / "partition.part").string());
  CHECK_THROWS_AS(cli::run_command("lsc-check", g), DependencyError);
}

TEST_CASE("compactness outputs are deterministic") {
  for (const char* dir : {"det_a", "det_b"}) {
    cli::Config c = config("suite = noisy\nh = 0.03125\nK = 10\nseed = 4\n");
    c.set("out", scratch(dir).string());
    CHECK(cli::run_command("compactness", c) == cli::kOk);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(scratch("det_a"))) {
    if (entry.path().extension() != ".csv") continue;
    CHECK(slurp(entry.path()) == slurp(scratch("det_b") / entry.path().filename()));
    ++compared;
  }
  CHECK(compared >= 8);
}

TEST_CASE("executable exit codes") {
  if (!std::getenv("GBDLAB_EXE")) return;
  {
    std::ofstream cfg(scratch("ok.cfg"));
    cfg << "schema = gbdlab-config/1\nsuite = two-piece\nh = 0.03125\nK = 3\n";
  }
  {
    std::ofstream cfg(scratch("bad.cfg"));
    cfg << "schema = gbdlab-config/1\nbogus = 1\n";
  }
  const std::string out = " --out " + scratch("exe").string();
  CHECK(run_exe("energy --config " + scratch("ok.cfg").string() + out) == 0);
  CHECK(run_exe("energy --config " + scratch("bad.cfg").string() + out) == 1);
  CHECK(run_exe("energy --config " + scratch("missing.cfg").string() + out) == 1);
  CHECK(run_exe("energy --no-such-flag") == 1);
  CHECK(run_exe("partition --config " + scratch("ok.cfg").string() + " --eta 0.9" + out) == 1);
  // A violated inequality exits with 2: an impossible Korn constant.
  CHECK(run_exe("pk-fit --config " + scratch("ok.cfg").string() + out) == 0);
  {
    std::ofstream cfg(scratch("tight.cfg"));
    cfg << "schema = gbdlab-config/1\nsuite = smooth\nh = 0.03125\nK = 3\ncube_side = 0.5\nc = 1e-9\n";
  }
  CHECK(run_exe("pk-fit --config " + scratch("tight.cfg").string() + out) == 2);
}
