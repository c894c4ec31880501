#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nsergo/cli.hpp"

using namespace nsergo;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
  fs::path dir;
};

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "nsergo_cli_test";
  fs::create_directories(p);
  return p;
}

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nsergo");
  if (args.size() > 1 && args[1] != "replay") {
    args.push_back("--out");
    args.push_back(scratch().string());
  }
  std::ostringstream out, err;
  Run r{run_cli(args, out, err), out.str(), err.str(), {}};
  const auto pos = r.out.find("run directory: ");
  if (pos != std::string::npos) {
    std::string line = r.out.substr(pos + 15);
    r.dir = line.substr(0, line.find('\n'));
  }
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults are a valid minimal config") {
  ConfigTable t;
  t.parse("N = 1\n");
  const RunConfig c = build_run_config(t);
  CHECK(c.N == 1);
  CHECK(c.forced.size() == 3);
  CHECK(c.sim.nu == 1.0);
  CHECK(c.sim.scheme == Scheme::exponential_euler);
  CHECK(c.noise().sigma_sq() == doctest::Approx(12.0));
}

TEST_CASE("sections, comments and overrides") {
  ConfigTable t;
  t.parse("# header\nseed = 9   # trailing\n\n[steer]\nknots = 12\n[mixing]\nenergy_b = 3.5\n");
  t.set("steer.T=2");
  const RunConfig c = build_run_config(t);
  CHECK(c.sim.seed == 9);
  CHECK(c.steer.intervals == 12);
  CHECK(c.steer.T == 2.0);
  CHECK(c.mixing_energy_b == 3.5);

  ConfigTable again;
  again.parse(t.echo());
  CHECK(again.echo() == t.echo());
}

TEST_CASE("config diagnostics carry the line and key") {
  ConfigTable t;
  CHECK_THROWS_WITH_AS(t.parse("N = 1\n\n[steer]\nknotz = 3\n"), doctest::Contains("line 4"), ConfigError);
  CHECK_THROWS_WITH_AS(t.parse("N = 1\n\n[steer]\nknotz = 3\n"), doctest::Contains("steer.knotz"), ConfigError);
  CHECK_THROWS_WITH_AS(t.parse("N 1\n"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_AS(t.set("nokey"), ConfigError);

  ConfigTable bad;
  bad.set("forced=(5,0,0)");
  CHECK_THROWS_WITH_AS(build_run_config(bad), doctest::Contains("not in K_N"), ConfigError);
  ConfigTable fast;
  fast.set("dt=1.5");
  CHECK_THROWS_WITH_AS(build_run_config(fast), doctest::Contains("dt*nu*N^2"), ConfigError);
  ConfigTable num;
  num.set("ensemble=ten");
  CHECK_THROWS_WITH_AS(build_run_config(num), doctest::Contains("ensemble"), ConfigError);
  ConfigTable q;
  q.set("forced=(0,0,1)");
  q.set("noise.qr=0 0 1; 0 0 0; 0 0 0");
  q.set("noise.qs=1 0 0; 0 1 0; 0 0 0");
  CHECK_THROWS_WITH_AS(build_run_config(q), doctest::Contains("noise"), ConfigError);
}

TEST_CASE("explicit noise matrices") {
  ConfigTable t;
  t.set("forced=(0,0,1)");
  t.set("noise.qr=1 0 0; 0 2 0; 0 0 0");
  t.set("noise.qs=0 1 0; 1 0 0; 0 0 0");
  const NoiseSpec spec = build_run_config(t).noise();
  REQUIRE(spec.modes.size() == 1);
  CHECK(spec.modes[0].qr(1, 1) == 2.0);
  CHECK(spec.sigma_sq() == doctest::Approx(7.0));
}

TEST_CASE("check-determining writes a self-describing run directory") {
  const Run r = cli({"check-determining"});
  CHECK(r.code == exit_pass);
  REQUIRE(fs::exists(r.dir / "verdict.json"));
  const auto v = nlohmann::json::parse(slurp(r.dir / "verdict.json"));
  CHECK(v["is_determining"] == true);
  CHECK(v.contains("schema_version"));
  CHECK(fs::exists(r.dir / "series.csv"));
  CHECK(fs::exists(r.dir / "meta.json"));
  CHECK(slurp(r.dir / "config.echo").find("forced = (1,0,0) (0,1,0) (0,0,1)") != std::string::npos);

  const Run neg = cli({"check-determining", "--set", "forced=(1,0,0)"});
  CHECK(neg.code == exit_probe);
}

TEST_CASE("drift-selftest passes") {
  const Run r = cli({"drift-selftest", "--set", "selftest.states=200", "--set", "selftest.pairs=200"});
  CHECK(r.code == exit_pass);
}

TEST_CASE("mixing under non-determining noise is a hypothesis violation") {
  const Run r = cli({"mixing", "--set", "N=2", "--set", "forced=(2,0,0) (0,2,0) (0,0,2)", "--set", "ensemble=10"});
  CHECK(r.code == exit_probe);
  CHECK(r.out.find("hypothesis violated") != std::string::npos);
  const auto v = nlohmann::json::parse(slurp(r.dir / "verdict.json"));
  CHECK(v["hypothesis_ok"] == false);
}

TEST_CASE("usage errors") {
  CHECK(cli({"no-such-command"}).code == exit_usage);
  CHECK(cli({"simulate", "--set", "bogus=1"}).code == exit_usage);
  CHECK(cli({"simulate", "--set", "dt=3"}).err.find("dt*nu*N^2") != std::string::npos);
  const Run warn = cli({"simulate", "--set", "dt=0.6", "--set", "horizon=0.6"});
  CHECK(warn.code == exit_pass);
  CHECK(warn.err.find("warning") != std::string::npos);
  CHECK(cli({"lyapunov", "--set", "ensemble=10"}).code == exit_usage);
}

TEST_CASE("replay reproduces artifacts bit for bit") {
  const Run sim = cli({"simulate", "--set", "initial.energy=2", "--set", "horizon=0.3", "--set", "sigma0=0.5"});
  REQUIRE(sim.code == exit_pass);
  const Run rep = cli({"replay", "--run", sim.dir.string()});
  CHECK(rep.code == exit_pass);
  CHECK(rep.out.find("verdict.json identical, series.csv identical") != std::string::npos);

  // Tampering is detected.
  {
    std::ofstream f(sim.dir / "series.csv", std::ios::app);
    f << "extra\n";
  }
  CHECK(cli({"replay", "--run", sim.dir.string()}).code == exit_probe);

  const Run steer = cli({"steer"});
  REQUIRE(steer.code == exit_pass);
  const Run rs = cli({"replay", "--run", steer.dir.string()});
  CHECK(rs.code == exit_pass);
}
