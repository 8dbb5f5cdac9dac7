#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mnqp/heuristics.hpp"
#include "mnqp/ipm.hpp"
#include "mnqp/kkt.hpp"

namespace mnqp {

struct MethodSpec {
  Method method = Method::Newton;
  Index rank = 0;
  HeuristicMode heuristic = HeuristicMode::None;

  /// "Newton", "mN-r(2)", "mN-r(4)-H1", ...
  std::string label() const;
  bool operator==(const MethodSpec&) const = default;
};

/// Accepts "newton" and "mn-r(R)" or "mn-rR" with an optional "-h1"/"-h2"
/// suffix, case-insensitively. Throws std::invalid_argument otherwise.
MethodSpec parse_method_spec(std::string_view text);

enum class TableFormat { Csv, Tsv, Pretty };

TableFormat parse_table_format(std::string_view text);

struct BenchConfig {
  /// Files or directories (directories contribute their *.qps / *.sif files).
  std::vector<std::filesystem::path> paths;
  std::vector<MethodSpec> methods = {
      {Method::Newton, 0, HeuristicMode::None},
      {Method::ModifiedNewton, 2, HeuristicMode::None},
      {Method::ModifiedNewton, 2, HeuristicMode::H1},
      {Method::ModifiedNewton, 2, HeuristicMode::H2},
  };
  std::vector<double> mu0 = {1.0};
  double sigma = 0.1;
  /// Overrides the per-class tolerance (1e-6 for S and M, 1e-5 for L).
  std::optional<double> eps_tol;
  KktFormulation formulation = KktFormulation::Unreduced;
  /// Overrides l from the problem class when set.
  std::optional<RefactorSchedule> schedule;
  /// Problems whose primal-dual dimension exceeds this are skipped.
  Index max_dimension = 5000;
  Index max_iterations = 5000;
  std::optional<std::filesystem::path> trace_dir;
  int jobs = 1;
};

struct TableCell {
  RunStatus status = RunStatus::MaxIterations;
  Index factorizations = 0;
  Index iterations = 0;
  /// Empty trace file name when no trace was written.
  std::string trace_file;
};

struct TableRow {
  std::string problem;
  double mu0 = 1.0;
  /// One entry per method; empty when the problem was skipped.
  std::vector<TableCell> cells;
  /// Reason for skipping ("skipped: ..."), empty otherwise.
  std::string note;
};

double default_tolerance(SizeClass c);

/// Expands directories into their QPS files, sorted by name. Throws
/// std::runtime_error for a path that does not exist.
std::vector<std::filesystem::path> collect_problem_paths(const std::vector<std::filesystem::path>& paths);

/// One row per (problem, μ0) in input order. Failing runs become "-" cells
/// and problems that cannot be loaded or are too large become skipped rows.
std::vector<TableRow> run_suite(const BenchConfig& config);

/// Problem, [μ0,] Newton (F = It), then F and It per modified method.
std::string format_table(const std::vector<TableRow>& rows, const std::vector<MethodSpec>& methods, TableFormat format);

/// CSV with columns k, mu, merit_mu, merit_0, alpha_P, alpha_D, E_F, eta, refactorized.
std::string step_trace_csv(const RunReport<double>& report);

void emit_step_trace(const RunReport<double>& report, const std::filesystem::path& path);

}  // namespace mnqp
