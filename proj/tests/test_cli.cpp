#include <doctest.h>

#include "hemicontrol/config.hpp"
#include "hemicontrol/runner.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace hemicontrol;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hemicontrol_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

// Runs the binary; returns its exit status and leaves stderr in `err`.
int run_cli(const std::string& args, const fs::path& dir, std::string& err) {
  const fs::path errfile = dir / "stderr.txt";
  const std::string cmd = std::string(HEMICONTROL_CLI) + " " + args + " 2> " + errfile.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  err = slurp(errfile);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_CASE("config parsing: values, comments, defaults") {
  const RunConfig c = parse("# comment\n\nmesh.n = 8   # trailing\n"
                            "data.g = constant:2.5\ndata.b = 1\ncontrol.M = 0.5\n"
                            "j.kind = kinked\nexperiment.alphas = 1, 10, 100\nseed = 7\n");
  CHECK(c.mesh_n == 8);
  CHECK(c.g.kind == FieldSpec::Kind::Constant);
  CHECK(c.g.value == 2.5);
  CHECK(c.q.kind == FieldSpec::Kind::Zero);
  CHECK(*c.b == 1.0);
  CHECK(*c.M == 0.5);
  CHECK(*c.j_kind == "kinked");
  CHECK(c.alphas == std::vector<double>{1, 10, 100});
  CHECK(c.seed == 7);
  CHECK(c.threads == 1);
  CHECK(c.opt.tol == 1e-8);
  CHECK(c.opt.max_iters == 500);
  CHECK(c.solver.epsilon_schedule == HviSolverConfig{}.epsilon_schedule);
}

TEST_CASE("config parsing: diagnostics carry the line number") {
  CHECK(parse_error("mesh.n = 8\nmesh.bogus = 1\n").find("test.cfg:2:") != std::string::npos);
  CHECK(parse_error("mesh.n = 8\nmesh.n = 9\n").find("test.cfg:2:") != std::string::npos);
  CHECK(parse_error("\n\nno equals sign\n").find("test.cfg:3:") != std::string::npos);
  CHECK(parse_error("mesh.n = eight\n").find("test.cfg:1:") != std::string::npos);
  CHECK(parse_error("data.g = expr:nope\n").find("test.cfg:1:") != std::string::npos);
  CHECK(parse_error("data.g = wobble\n").find("test.cfg:1:") != std::string::npos);
  CHECK(parse_error("mesh.n =\n").find("test.cfg:1:") != std::string::npos);
  CHECK(parse_error("mesh.n = 8\n").empty());
}

TEST_CASE("field specs round trip") {
  for (const char* s : {"zero", "constant:0.5", "expr:manufactured_u", "expr:limit_state"})
    CHECK(FieldSpec::parse(s).str() == s);
  CHECK_THROWS_AS(FieldSpec::parse("constant:"), std::invalid_argument);
  CHECK(evaluate_catalog("x", 0.25, 0.9) == 0.25);
  CHECK_THROWS_AS(evaluate_catalog("limit_state", 0, 0), std::invalid_argument);
}

TEST_CASE("command requirements") {
  auto missing = [](const std::string& text, const std::string& command) -> std::string {
    try {
      parse(text).require_for(command);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(missing("data.b = 1\n", "optimize-limit").find("control.M") != std::string::npos);
  CHECK(missing("data.b = 1\n", "solve-hvi").find("j.kind") != std::string::npos);
  CHECK(missing("control.M = 1\n", "solve-state").find("data.b") != std::string::npos);
  CHECK(missing("data.b = 1\nj.kind = abs\nj.b = 2\n", "solve-hvi").find("j.b") != std::string::npos);
  CHECK(missing("data.b = 1\nj.kind = abs\nexperiment.alphas = 1, 10\n", "sweep-state") != "");
  CHECK(missing("data.b = 1\ndata.g = expr:limit_state\n", "solve-state") != "");
  CHECK(missing("j.kind = kinked\n", "verify-j").find("j.b") != std::string::npos);
  CHECK(missing("j.kind = kinked\nj.b = 1\n", "verify-j").empty());
  CHECK(missing("data.b = 1\nj.kind = abs\n", "solve-hvi").empty());
}

TEST_CASE("config hash ignores layout and tracks content") {
  const std::string h1 = parse("mesh.n = 8\ndata.b = 1\n").hash();
  const std::string h2 = parse("# x\ndata.b=1\n\n  mesh.n   =   8\n").hash();
  const std::string h3 = parse("mesh.n = 8\ndata.b = 2\n").hash();
  CHECK(h1.size() == 16);
  CHECK(h1 == h2);
  CHECK(h1 != h3);
}

TEST_CASE("solve-state on zero data writes zero nodal values") {
  const fs::path dir = scratch("zero");
  std::ostringstream err;
  const int code = run("solve-state", std::string(HEMICONTROL_CONFIGS) + "/zero_state.cfg", dir.string(), err);
  REQUIRE(code == kExitOk);
  const auto rows = csv_rows(dir / "result.csv");
  REQUIRE(rows.size() == 146);  // header and 145 nodes of the n = 8 crossed mesh
  CHECK(rows[0] == std::vector<std::string>{"node", "x", "y", "u", "g", "p"});
  for (std::size_t r = 1; r < rows.size(); ++r)
    CHECK(std::stod(rows[r][3]) == 0.0);
}

TEST_CASE("every output file starts with the config hash and version") {
  const fs::path dir = scratch("header");
  const RunConfig cfg = parse("mesh.n = 4\ndata.b = 1\ndata.g = constant:1\nj.kind = quadratic\n"
                              "experiment.alphas = 1, 10, 100\n");
  std::ostringstream err;
  REQUIRE(run("sweep-state", cfg, dir.string(), err) == kExitOk);
  const std::string header = "# config " + cfg.hash() + " hemicontrol " + kVersion;
  for (const char* f : {"result.csv", "summary.txt", "sweep.csv"})
    CHECK(first_line(dir / f) == header);
  CHECK(first_line(dir / "plot.svg") == "<!-- " + header + " -->");
}

TEST_CASE("verify-j: kinked passes, the counterexample fails certification") {
  const fs::path dir = scratch("verify");
  std::ostringstream err;
  REQUIRE(run("verify-j", std::string(HEMICONTROL_CONFIGS) + "/verify_kinked.cfg", dir.string(), err) == kExitOk);
  const std::string summary = slurp(dir / "summary.txt");
  for (const char* key : {"growth_margin = ", "sign_max = ", "uniqueness_margin = ", "passed = true"})
    CHECK(summary.find(key) != std::string::npos);
  CHECK(run("verify-j", parse("j.kind = negative_abs\nj.b = 0\n"), dir.string(), err) == kExitCertificationFailure);
}

TEST_CASE("binary: exit codes and diagnostics") {
  const fs::path dir = scratch("binary");
  std::string err;
  const fs::path no_m = write_file(dir, "no_m.cfg", "mesh.n = 4\ndata.b = 1\n");
  CHECK(run_cli("optimize-limit --config " + no_m.string() + " --out " + dir.string(), dir, err) == 3);
  CHECK(err.find("control.M") != std::string::npos);

  const fs::path bad = write_file(dir, "bad.cfg", "mesh.n = 4\nmesh.colour = red\n");
  CHECK(run_cli("solve-state --config " + bad.string(), dir, err) == 3);
  CHECK(err.find(":2:") != std::string::npos);

  CHECK(run_cli("solve-state --config " + (dir / "absent.cfg").string(), dir, err) == 3);
  CHECK(run_cli("frobnicate --config " + no_m.string(), dir, err) == 3);
  CHECK(run_cli("--version", dir, err) == 0);

  const std::string zero = std::string(HEMICONTROL_CONFIGS) + "/zero_state.cfg";
  CHECK(run_cli("solve-state --config " + zero + " --out " + (dir / "out").string(), dir, err) == 0);
  CHECK(fs::exists(dir / "out" / "result.csv"));
}

TEST_CASE("binary: repeated sweeps are byte-identical") {
  const fs::path dir = scratch("repro");
  const fs::path cfg = write_file(dir, "sweep.cfg",
                                  "mesh.n = 6\ndata.b = 1\ndata.z_d = expr:limit_state\ncontrol.M = 1\n"
                                  "j.kind = kinked\nseed = 3\n");
  std::string err;
  REQUIRE(run_cli("sweep-control --config " + cfg.string() + " --out " + (dir / "a").string(), dir, err) == 0);
  REQUIRE(run_cli("sweep-control --config " + cfg.string() + " --out " + (dir / "b").string(), dir, err) == 0);
  for (const char* f : {"sweep.csv", "summary.txt", "result.csv", "plot.svg"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}
