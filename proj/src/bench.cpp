#include "mnqp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "mnqp/error.hpp"
#include "mnqp/qps_io.hpp"

namespace mnqp {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_problem_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext == ".qps" || ext == ".sif" || ext == ".mps";
}

std::string mu_label(double mu) { return fmt::format("{:g}", mu); }

std::string safe_file_part(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.' && c != '_') c = '_';
  }
  return s;
}

std::string trace_name(const std::string& problem, double mu0, const MethodSpec& m) {
  return safe_file_part(fmt::format("{}_mu{}_{}.csv", lower(problem), mu_label(mu0), m.label()));
}

std::vector<TableRow> run_problem(const fs::path& path, const BenchConfig& config) {
  std::vector<TableRow> rows;
  auto skipped = [&](const std::string& name, const std::string& why) {
    for (double mu0 : config.mu0) rows.push_back({name, mu0, {}, "skipped: " + why});
    return rows;
  };
  const std::string fallback = path.stem().string();
  std::optional<QpProblem<double>> loaded;
  try {
    loaded.emplace(load_problem(path));
  } catch (const std::exception& e) {
    return skipped(fallback, e.what());
  }
  const auto& p = *loaded;
  const auto pc = classify(p);
  if (pc.total_pd_vars > config.max_dimension) {
    return skipped(p.name(), fmt::format("dimension {} exceeds {}", pc.total_pd_vars, config.max_dimension));
  }

  for (double mu0 : config.mu0) {
    TableRow row{p.name(), mu0, {}, {}};
    for (const auto& m : config.methods) {
      SolverConfig<double> sc;
      sc.mu0 = mu0;
      sc.sigma = config.sigma;
      sc.eps_tol = config.eps_tol.value_or(default_tolerance(pc.size));
      sc.method = m.method;
      sc.rank = m.rank;
      sc.heuristic = m.heuristic;
      sc.formulation = config.formulation;
      sc.schedule = config.schedule;
      sc.max_total_iterations = config.max_iterations;
      sc.diagnostics = config.trace_dir.has_value();

      TableCell cell;
      if (m.method == Method::ModifiedNewton && m.rank > p.m_in()) {
        cell.status = RunStatus::Singular;
        row.cells.push_back(cell);
        continue;
      }
      RunReport<double> report;
      try {
        report = solve(p, sc);
      } catch (const std::exception&) {
        report.status = RunStatus::Singular;
      }
      cell.status = report.status;
      cell.factorizations = report.factorizations;
      cell.iterations = report.iterations;
      if (config.trace_dir) {
        cell.trace_file = trace_name(p.name(), mu0, m);
        emit_step_trace(report, *config.trace_dir / cell.trace_file);
      }
      row.cells.push_back(cell);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string join(const std::vector<std::string>& cells, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += sep;
    out += cells[i];
  }
  return out;
}

}  // namespace

std::string MethodSpec::label() const {
  if (method == Method::Newton) return "Newton";
  std::string s = fmt::format("mN-r({})", rank);
  if (heuristic == HeuristicMode::H1) s += "-H1";
  if (heuristic == HeuristicMode::H2) s += "-H2";
  return s;
}

MethodSpec parse_method_spec(std::string_view text) {
  std::string s;
  for (char c : lower(text)) {
    if (c != '(' && c != ')') s += c;
  }
  if (s == "newton") return {};
  MethodSpec m{Method::ModifiedNewton, 0, HeuristicMode::None};
  if (s.size() >= 3 && s.ends_with("-h1")) {
    m.heuristic = HeuristicMode::H1;
    s.resize(s.size() - 3);
  } else if (s.size() >= 3 && s.ends_with("-h2")) {
    m.heuristic = HeuristicMode::H2;
    s.resize(s.size() - 3);
  }
  if (!s.starts_with("mn-r") || s.size() == 4) throw std::invalid_argument(fmt::format("unknown method '{}'", text));
  const std::string digits = s.substr(4);
  if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }) || digits.size() > 9) {
    throw std::invalid_argument(fmt::format("unknown method '{}'", text));
  }
  m.rank = std::stol(digits);
  return m;
}

TableFormat parse_table_format(std::string_view text) {
  const auto s = lower(text);
  if (s == "csv") return TableFormat::Csv;
  if (s == "tsv") return TableFormat::Tsv;
  if (s == "pretty") return TableFormat::Pretty;
  throw std::invalid_argument(fmt::format("unknown format '{}'", text));
}

double default_tolerance(SizeClass c) { return c == SizeClass::L ? 1e-5 : 1e-6; }

std::vector<fs::path> collect_problem_paths(const std::vector<fs::path>& paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && is_problem_file(entry.path())) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw std::runtime_error(fmt::format("no such file or directory: {}", p.string()));
    }
  }
  return out;
}

std::vector<TableRow> run_suite(const BenchConfig& config) {
  const auto paths = collect_problem_paths(config.paths);
  if (config.trace_dir) fs::create_directories(*config.trace_dir);
  std::vector<std::vector<TableRow>> per_problem(paths.size());
  std::vector<std::exception_ptr> errors(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) {
      try {
        per_problem[i] = run_problem(paths[i], config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto jobs = static_cast<std::size_t>(std::max(1, config.jobs));
  if (jobs == 1 || paths.size() <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(jobs, paths.size()); ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<TableRow> rows;
  for (auto& group : per_problem) {
    for (auto& row : group) rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_table(const std::vector<TableRow>& rows, const std::vector<MethodSpec>& methods, TableFormat format) {
  bool several_mu = false;
  for (const auto& r : rows) several_mu |= r.mu0 != rows.front().mu0;

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Problem"};
  if (several_mu) header.push_back("mu0");
  for (const auto& m : methods) {
    if (m.method == Method::Newton) {
      header.push_back("Newton F/It");
    } else {
      header.push_back(m.label() + " F");
      header.push_back(m.label() + " It");
    }
  }
  grid.push_back(header);

  for (const auto& r : rows) {
    std::vector<std::string> line{lower(r.problem)};
    if (several_mu) line.push_back(mu_label(r.mu0));
    for (std::size_t j = 0; j < methods.size(); ++j) {
      const int width = methods[j].method == Method::Newton ? 1 : 2;
      if (r.cells.empty()) {
        for (int w = 0; w < width; ++w) line.push_back("skipped");
        continue;
      }
      const auto& c = r.cells[j];
      const bool ok = c.status == RunStatus::Converged;
      if (width == 1) {
        line.push_back(ok ? std::to_string(c.iterations) : "-");
      } else {
        line.push_back(ok ? std::to_string(c.factorizations) : "-");
        line.push_back(ok ? std::to_string(c.iterations) : "-");
      }
    }
    grid.push_back(std::move(line));
  }

  std::string out;
  if (format == TableFormat::Pretty) {
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& line : grid) {
      for (std::size_t j = 0; j < line.size(); ++j) widths[j] = std::max(widths[j], line[j].size());
    }
    for (const auto& line : grid) {
      std::string text;
      for (std::size_t j = 0; j < line.size(); ++j) {
        if (j == 0) {
          text += fmt::format("{:<{}}", line[j], widths[j]);
        } else {
          text += fmt::format("  {:>{}}", line[j], widths[j]);
        }
      }
      out += text + "\n";
    }
    return out;
  }
  const std::string_view sep = format == TableFormat::Csv ? "," : "\t";
  for (const auto& line : grid) out += join(line, sep) + "\n";
  return out;
}

std::string step_trace_csv(const RunReport<double>& report) {
  std::string out = "k,mu,merit_mu,merit_0,alpha_P,alpha_D,E_F,eta,refactorized\n";
  for (const auto& t : report.trace) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", t.k, t.mu, t.merit_mu,
                       t.merit_0, t.alpha_P, t.alpha_D, t.jacobian_error, t.eta, t.refactorized ? 1 : 0);
  }
  return out;
}

void emit_step_trace(const RunReport<double>& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write trace file {}", path.string()));
  out << step_trace_csv(report);
  if (!out) throw std::runtime_error(fmt::format("error while writing {}", path.string()));
}

}  // namespace mnqp
