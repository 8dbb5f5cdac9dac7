#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mnqp/bench.hpp"
#include "mnqp/qps_io.hpp"

using namespace mnqp;
namespace fs = std::filesystem;

namespace {

fs::path data(const char* name) { return fs::path(MNQP_DATA_DIR) / (std::string(name) + ".qps"); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

fs::path scratch_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("mnqp_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("method specs parse and label") {
  CHECK(parse_method_spec("newton") == MethodSpec{});
  CHECK(parse_method_spec("Newton").label() == "Newton");
  const auto a = parse_method_spec("mn-r(2)");
  CHECK(a == MethodSpec{Method::ModifiedNewton, 2, HeuristicMode::None});
  CHECK(a.label() == "mN-r(2)");
  CHECK(parse_method_spec("mN-r4-H1") == MethodSpec{Method::ModifiedNewton, 4, HeuristicMode::H1});
  CHECK(parse_method_spec("mn-r(16)-h2").label() == "mN-r(16)-H2");
  for (const char* bad : {"", "bogus", "mn", "mn-r", "mn-rx", "mn-r2-h3", "newton-h1"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS((void)parse_method_spec(bad), std::invalid_argument);
  }
  CHECK(parse_table_format("CSV") == TableFormat::Csv);
  CHECK_THROWS_AS((void)parse_table_format("xml"), std::invalid_argument);
}

TEST_CASE("default tolerance per class") {
  CHECK(default_tolerance(SizeClass::S) == 1e-6);
  CHECK(default_tolerance(SizeClass::M) == 1e-6);
  CHECK(default_tolerance(SizeClass::L) == 1e-5);
}

TEST_CASE("empty suite gives a header-only table") {
  BenchConfig config;
  const auto rows = run_suite(config);
  CHECK(rows.empty());
  const auto table = format_table(rows, config.methods, TableFormat::Csv);
  CHECK(lines(table).size() == 1);
}

TEST_CASE("missing paths are harness errors") {
  BenchConfig config;
  config.paths = {"/nonexistent/problem.qps"};
  CHECK_THROWS_AS((void)run_suite(config), std::runtime_error);
}

TEST_CASE("Newton-only suite over hs53 and hs76") {
  BenchConfig config;
  config.paths = {data("hs53"), data("hs76")};
  config.methods = {MethodSpec{}};
  const auto rows = run_suite(config);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].status == RunStatus::Converged);
    CHECK(r.cells[0].iterations > 0);
  }
}

TEST_CASE("default method list gives seven numeric cells per row") {
  BenchConfig config;
  config.paths = {data("hs53")};
  const auto table = format_table(run_suite(config), config.methods, TableFormat::Csv);
  const auto ls = lines(table);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == "Problem,Newton F/It,mN-r(2) F,mN-r(2) It,mN-r(2)-H1 F,mN-r(2)-H1 It,mN-r(2)-H2 F,mN-r(2)-H2 It");
  const auto cells = split(ls[1], ',');
  REQUIRE(cells.size() == 8);
  CHECK(cells[0] == "hs53");
  for (std::size_t j = 1; j < cells.size(); ++j) {
    CAPTURE(j);
    CHECK(cells[j].find_first_not_of("0123456789") == std::string::npos);
  }
}

TEST_CASE("tables are deterministic across runs and thread counts") {
  BenchConfig config;
  config.paths = {data("hs53"), data("hs76"), data("hs21"), data("hs35")};
  config.mu0 = {1.0, 1e-3};
  const auto once = format_table(run_suite(config), config.methods, TableFormat::Csv);
  config.jobs = 3;
  const auto threaded = format_table(run_suite(config), config.methods, TableFormat::Csv);
  CHECK(once == threaded);
  CHECK(split(lines(once)[0], ',')[1] == "mu0");
  CHECK(lines(once).size() == 9);
}

TEST_CASE("failures show '-' and unusable problems are skipped") {
  std::vector<TableRow> rows{{"ok", 1.0, {{RunStatus::Converged, 3, 8, {}}, {RunStatus::Converged, 2, 9, {}}}, {}},
                             {"bad", 1.0, {{RunStatus::MaxIterations, 5, 5, {}}, {RunStatus::Singular, 1, 2, {}}}, {}},
                             {"big", 1.0, {}, "skipped: too large"}};
  const std::vector<MethodSpec> methods{{}, {Method::ModifiedNewton, 2, HeuristicMode::None}};
  const auto ls = lines(format_table(rows, methods, TableFormat::Tsv));
  REQUIRE(ls.size() == 4);
  CHECK(ls[1] == "ok\t8\t2\t9");
  CHECK(ls[2] == "bad\t-\t-\t-");
  CHECK(ls[3] == "big\tskipped\tskipped\tskipped");
  const auto pretty = lines(format_table(rows, methods, TableFormat::Pretty));
  CHECK(pretty.size() == 4);
  CHECK(pretty[0].size() == pretty[1].size());
}

TEST_CASE("filtered and oversized problems become skipped rows") {
  const auto dir = scratch_dir("skip");
  std::ofstream(dir / "tiny.qps") << "NAME TINY\nROWS\n N obj\n G r\nCOLUMNS\n    x r 1\nENDATA\n";
  BenchConfig config;
  config.paths = {dir / "tiny.qps", data("qafiro")};
  config.max_dimension = 100;
  config.methods = {MethodSpec{}};
  const auto rows = run_suite(config);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].cells.empty());
  CHECK(rows[0].note.starts_with("skipped"));
  CHECK(rows[1].cells.empty());
  CHECK(rows[1].note.find("exceeds") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("step traces") {
  const auto p = load_problem(data("hs76"));
  SolverConfig<double> config;
  const auto newton = solve(p, config);
  const auto csv = lines(step_trace_csv(newton));
  REQUIRE(csv.size() == static_cast<std::size_t>(newton.iterations) + 1);
  CHECK(csv[0] == "k,mu,merit_mu,merit_0,alpha_P,alpha_D,E_F,eta,refactorized");
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto cells = split(csv[i], ',');
    REQUIRE(cells.size() == 9);
    CHECK(std::stod(cells[6]) == 0.0);
    CHECK(cells[8] == "1");
  }

  config.method = Method::ModifiedNewton;
  const auto mn = solve(p, config);
  bool saw_patched = false;
  const auto mn_csv = lines(step_trace_csv(mn));
  for (std::size_t i = 1; i < mn_csv.size(); ++i) {
    const auto cells = split(mn_csv[i], ',');
    if (cells[8] == "1") {
      CHECK(std::stod(cells[6]) == 0.0);
    } else {
      saw_patched = true;
    }
  }
  CHECK(saw_patched);

  const auto dir = scratch_dir("trace");
  BenchConfig bc;
  bc.paths = {data("hs76")};
  bc.trace_dir = dir;
  const auto rows = run_suite(bc);
  REQUIRE(rows.size() == 1);
  for (const auto& cell : rows[0].cells) {
    CHECK(fs::exists(dir / cell.trace_file));
  }
  CHECK(fs::exists(dir / "hs76_mu1_mN-r_2_-H1.csv"));
  fs::remove_all(dir);
}
