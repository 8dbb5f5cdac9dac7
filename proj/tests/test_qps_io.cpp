#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "mnqp/error.hpp"
#include "mnqp/qps_io.hpp"
#include "oracles.hpp"

using namespace mnqp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t error_line(std::string_view text) {
  try {
    (void)parse_qps(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

const char* kSmall = R"(NAME          SMALL
* comment line
ROWS
 N  obj
 G  c1
 L  c2
 E  c3
COLUMNS
    x1        obj       1.5          c1        1.0
    x1        c2        2.0
    x2        obj       -1           c3        1D0
    x2        c2        +3
RHS
    rhs       c1        1.0          c2        4
    rhs       c3        2            obj       -7.5
RANGES
    rng       c2        2.5
BOUNDS
 UP bnd       x1        4
 MI bnd       x2
QUADOBJ
    x1        x1        2.0
    x2        x1        0.5
ENDATA
)";

}  // namespace

TEST_CASE("parse_qps reads every section of a free-format file") {
  const RawQp qp = parse_qps(kSmall);
  CHECK(qp.name == "SMALL");
  CHECK(qp.objective_row == "obj");
  CHECK(qp.objective_constant == 7.5);
  REQUIRE(qp.rows.size() == 3);
  CHECK(qp.rows[0].sense == RowSense::GreaterEqual);
  CHECK(qp.rows[1].sense == RowSense::LessEqual);
  CHECK(qp.rows[1].rhs == 4.0);
  CHECK(qp.rows[1].range == 2.5);
  CHECK(qp.rows[2].sense == RowSense::Equal);
  REQUIRE(qp.columns.size() == 2);
  CHECK(qp.columns[0].cost == 1.5);
  CHECK(qp.columns[0].upper == 4.0);
  CHECK(qp.columns[1].cost == -1.0);
  CHECK(qp.columns[1].lower == -kInf);
  REQUIRE(qp.entries.size() == 4);
  CHECK(qp.entries[2].value == 1.0);  // 1D0
  CHECK(qp.entries[3].value == 3.0);  // +3
  CHECK(qp.quad_convention == QuadConvention::LowerTriangle);
  CHECK(qp.quadratic.size() == 2);
}

TEST_CASE("fixed-format lines with blanks inside names") {
  const std::string text =
      "NAME          FIXED\n"
      "ROWS\n"
      " N  COST\n"
      " G  ROW A\n"
      "COLUMNS\n"
      "    COL 1     COST      1.0            ROW A     2.0\n"
      "RHS\n"
      "    RHS       ROW A     3.0\n"
      "BOUNDS\n"
      " UP BND       COL 1     5.0\n"
      "ENDATA\n";
  const RawQp qp = parse_qps(text);
  REQUIRE(qp.rows.size() == 1);
  CHECK(qp.rows[0].name == "ROW A");
  CHECK(qp.rows[0].rhs == 3.0);
  REQUIRE(qp.columns.size() == 1);
  CHECK(qp.columns[0].name == "COL 1");
  CHECK(qp.columns[0].upper == 5.0);
  CHECK(qp.entries.front().value == 2.0);
}

TEST_CASE("bound types") {
  const std::string text =
      "NAME B\nROWS\n N obj\nCOLUMNS\n"
      "    a obj 1\n    b obj 1\n    c obj 1\n    d obj 1\n    e obj 1\n    f obj 1\n"
      "BOUNDS\n"
      " FX BND a 2\n FR BND b\n UP BND c -1\n LO BND d -3\n UP BND d -1\n BV BND e\n MI BND f\n PL BND f\n"
      "ENDATA\n";
  const RawQp qp = parse_qps(text);
  CHECK(qp.columns[0].lower == 2.0);
  CHECK(qp.columns[0].upper == 2.0);
  CHECK(qp.columns[1].lower == -kInf);
  CHECK(qp.columns[1].upper == kInf);
  CHECK(qp.columns[2].lower == -kInf);  // negative UP without LO
  CHECK(qp.columns[2].upper == -1.0);
  CHECK(qp.columns[3].lower == -3.0);  // explicit LO survives a negative UP
  CHECK(qp.columns[4].upper == 1.0);
  CHECK(qp.columns[5].lower == -kInf);
  CHECK(qp.columns[5].upper == kInf);
}

TEST_CASE("QMATRIX, OBJSENSE and extra N rows") {
  const std::string text =
      "NAME Q\nOBJSENSE\n    MAX\nROWS\n N obj\n N spare\n G r\nCOLUMNS\n"
      "    x obj 1 r 1\n    x spare 9\n    y r 1\nRHS\n    rhs spare 4\nQMATRIX\n"
      "    x x 2\n    x y 1\n    y x 1\nENDATA\n";
  const RawQp qp = parse_qps(text);
  CHECK(qp.maximize);
  CHECK(qp.rows.size() == 1);
  CHECK(qp.entries.size() == 2);
  CHECK(qp.quad_convention == QuadConvention::Full);
  CHECK(qp.quadratic.size() == 3);
}

TEST_CASE("only the first RHS set is used") {
  const std::string text =
      "NAME S\nROWS\n N obj\n G r\nCOLUMNS\n    x r 1\nRHS\n    first r 1\n    second r 5\nENDATA\n";
  CHECK(parse_qps(text).rows[0].rhs == 1.0);
}

TEST_CASE("errors carry the line number") {
  CHECK(error_line("NAME X\nROWS\n N obj\nBOGUS\nENDATA\n") == 4);
  CHECK(error_line("NAME X\nROWS\n N obj\n G r\nCOLUMNS\n    x r abc\nENDATA\n") == 6);
  CHECK(error_line("NAME X\nROWS\n N obj\n G r\nCOLUMNS\n    x nope 1\nENDATA\n") == 6);
  CHECK(error_line("NAME X\nROWS\n N obj\n G r\nCOLUMNS\n    x r 1\n    x r 2\nENDATA\n") == 7);
  CHECK(error_line("NAME X\nROWS\n N obj\n G r\n G r\nENDATA\n") == 5);
  CHECK(error_line("NAME X\nROWS\n Q r\nENDATA\n") == 3);
  CHECK(error_line("NAME X\nROWS\n N obj\nCOLUMNS\n    x obj 1\nBOUNDS\n XX BND x 1\nENDATA\n") == 7);
  CHECK(error_line("NAME X\nROWS\n N obj\nCOLUMNS\n    x obj 1\nQUADOBJ\n    x x 1\n    x x 2\nENDATA\n") == 8);
  CHECK(error_line("NAME X\nROWS\n N obj\n") == 3);  // missing ENDATA
  CHECK(error_line("NAME X\nROWS\n N obj\n G r\nCOLUMNS\n    x r 1e999x\nENDATA\n") == 6);
}

TEST_CASE("golden files survive a serialize/parse round trip") {
  int count = 0;
  for (const char* name : {"hs21", "hs35", "hs53", "hs76", "hs118", "hs268", "qafiro", "lotschd", "qadlittl",
                           "qpcblend", "dual1", "cvxqp1_s", "qscagr7"}) {
    CAPTURE(name);
    const auto path = std::filesystem::path(MNQP_DATA_DIR) / (std::string(name) + ".qps");
    const RawQp original = parse_qps(read_file(path));
    const std::string text = serialize_qps(original);
    const RawQp again = parse_qps(text);
    CHECK(again == original);
    CHECK(serialize_qps(again) == text);
    ++count;
  }
  CHECK(count >= 5);
}

TEST_CASE("random raw problems round-trip") {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    RawQp qp;
    qp.name = "R" + std::to_string(trial);
    qp.objective_row = "COST";
    qp.maximize = oracle::integer(rng, 0, 1) == 1;
    qp.objective_constant = oracle::integer(rng, 0, 1) ? oracle::uniform(rng, -5, 5) : 0.0;
    const long m = oracle::integer(rng, 0, 5);
    const long n = oracle::integer(rng, 1, 6);
    for (long i = 0; i < m; ++i) {
      RawRow row{"R" + std::to_string(i), static_cast<RowSense>(oracle::integer(rng, 0, 2)),
                 oracle::integer(rng, 0, 1) ? oracle::uniform(rng, -3, 3) : 0.0, {}};
      if (oracle::integer(rng, 0, 2) == 0) row.range = oracle::uniform(rng, -2, 2);
      qp.rows.push_back(row);
    }
    for (long j = 0; j < n; ++j) {
      RawColumn c{"C" + std::to_string(j), oracle::integer(rng, 0, 1) ? oracle::uniform(rng, -1, 1) : 0.0, 0.0, kInf};
      switch (oracle::integer(rng, 0, 5)) {
        case 0: c.lower = -kInf; break;
        case 1: c.lower = -kInf; c.upper = kInf; break;
        case 2: c.lower = c.upper = oracle::uniform(rng, -1, 1); break;
        case 3: c.lower = oracle::uniform(rng, -2, 0); c.upper = oracle::uniform(rng, 0.5, 3); break;
        case 4: c.upper = -1.0; c.lower = -4.0; break;
        default: break;
      }
      qp.columns.push_back(c);
      for (long i = 0; i < m; ++i) {
        if (oracle::integer(rng, 0, 1)) qp.entries.push_back({i, j, oracle::uniform(rng, -2, 2)});
      }
    }
    qp.quad_convention = static_cast<QuadConvention>(oracle::integer(rng, 0, 1));
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j <= i; ++j) {
        if (oracle::integer(rng, 0, 2) == 0) qp.quadratic.push_back({i, j, oracle::uniform(rng, -1, 1)});
      }
    }
    // Without entries no Hessian section is written, so the convention is moot.
    if (qp.quadratic.empty()) qp.quad_convention = QuadConvention::LowerTriangle;
    const RawQp again = parse_qps(serialize_qps(qp));
    CHECK(again == qp);
  }
}

TEST_CASE("serializer rejects names it cannot write") {
  RawQp qp;
  qp.columns.push_back({"has space", 1.0, 0.0, kInf});
  CHECK_THROWS_AS((void)serialize_qps(qp), std::invalid_argument);
}

TEST_CASE("the parser is total on mangled input") {
  // Mutations of a valid file either parse or raise ParseError, nothing else.
  oracle::Rng rng(5);
  const std::string base = kSmall;
  const std::string alphabet = " \t\nABCDEFGNLRUPXQ019.-+eD*'";
  int parsed = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text = base;
    const long edits = oracle::integer(rng, 1, 6);
    for (long e = 0; e < edits; ++e) {
      const auto pos = static_cast<std::size_t>(oracle::integer(rng, 0, static_cast<long>(text.size()) - 1));
      const char ch = alphabet[static_cast<std::size_t>(oracle::integer(rng, 0, static_cast<long>(alphabet.size()) - 1))];
      switch (oracle::integer(rng, 0, 2)) {
        case 0: text[pos] = ch; break;
        case 1: text.insert(pos, 1, ch); break;
        default: text.erase(pos, 1); break;
      }
    }
    try {
      (void)parse_qps(text);
      ++parsed;
    } catch (const ParseError&) {
    } catch (const std::exception& e) {
      FAIL("unexpected exception: " << e.what());
    }
  }
  CHECK(parsed > 0);
}

TEST_CASE("load_problem reports missing files") {
  CHECK_THROWS_AS((void)load_problem("/nonexistent/file.qps"), std::runtime_error);
}
