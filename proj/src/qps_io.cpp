#include "mnqp/qps_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "mnqp/error.hpp"

namespace mnqp {
namespace {

enum class Section { None, Rows, Columns, Rhs, Ranges, Bounds, Quadratic, ObjSense, End };

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Fixed MPS fields (1-based columns): 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
std::vector<std::string_view> fixed_fields(std::string_view line) {
  constexpr std::pair<std::size_t, std::size_t> kFields[] = {
      {1, 2}, {4, 8}, {14, 8}, {24, 12}, {39, 8}, {49, 12}};
  std::vector<std::string_view> fields;
  for (auto [start, len] : kFields) {
    if (start >= line.size()) {
      fields.emplace_back();
      continue;
    }
    fields.push_back(trim(line.substr(start, std::min(len, line.size() - start))));
  }
  return fields;
}

class LineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double parse_number(std::string_view token) {
  std::string buf(token);
  for (char& ch : buf) {
    if (ch == 'D' || ch == 'd') ch = 'E';
  }
  std::string_view view = buf;
  if (!view.empty() && view.front() == '+') view.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
  if (view.empty() || ec != std::errc{} || ptr != view.data() + view.size()) {
    throw LineError(fmt::format("malformed numeric field '{}'", token));
  }
  return value;
}

class QpsReader {
 public:
  RawQp read(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty() || line.front() == '*') continue;
      try {
        if (line.front() != ' ' && line.front() != '\t') {
          header(line);
        } else {
          data_line(line);
        }
      } catch (const LineError& e) {
        throw ParseError(line_no, e.what());
      }
      if (section_ == Section::End) break;
    }
    if (section_ != Section::End) throw ParseError(line_no, "missing ENDATA");
    if (!have_objective_) qp_.objective_row = "OBJ";
    std::stable_sort(qp_.entries.begin(), qp_.entries.end(),
                     [](const MatrixEntry& a, const MatrixEntry& b) { return a.col < b.col; });
    return std::move(qp_);
  }

 private:
  void header(std::string_view line) {
    auto tokens = split(line);
    std::string_view key = tokens.front();
    if (key == "NAME") {
      qp_.name = std::string(trim(line.substr(4)));
      section_ = Section::None;
    } else if (key == "ROWS") {
      section_ = Section::Rows;
    } else if (key == "COLUMNS") {
      section_ = Section::Columns;
    } else if (key == "RHS") {
      section_ = Section::Rhs;
    } else if (key == "RANGES") {
      section_ = Section::Ranges;
    } else if (key == "BOUNDS") {
      section_ = Section::Bounds;
    } else if (key == "QUADOBJ") {
      start_quadratic(QuadConvention::LowerTriangle);
    } else if (key == "QMATRIX" || key == "QSECTION") {
      start_quadratic(QuadConvention::Full);
    } else if (key == "OBJSENSE" || key == "OBJSENS") {
      section_ = Section::ObjSense;
      if (tokens.size() > 1) objective_sense(tokens[1]);
    } else if (key == "ENDATA") {
      section_ = Section::End;
    } else {
      throw LineError(fmt::format("unknown section '{}'", key));
    }
  }

  void start_quadratic(QuadConvention convention) {
    if (saw_quadratic_ && qp_.quad_convention != convention) {
      throw LineError("both QUADOBJ and QMATRIX sections present");
    }
    saw_quadratic_ = true;
    qp_.quad_convention = convention;
    section_ = Section::Quadratic;
  }

  void objective_sense(std::string_view token) {
    if (token == "MAX" || token == "MAXIMIZE") {
      qp_.maximize = true;
    } else if (token == "MIN" || token == "MINIMIZE") {
      qp_.maximize = false;
    } else {
      throw LineError(fmt::format("unknown objective sense '{}'", token));
    }
  }

  // Free-format first; a line that does not fit is retried as fixed columns
  // (names with embedded blanks only parse that way).
  void data_line(std::string_view line) {
    auto tokens = split(line);
    try {
      dispatch(tokens);
    } catch (const LineError&) {
      auto fixed = fixed_tokens(line);
      if (!fixed || *fixed == tokens) throw;
      auto original = std::current_exception();
      try {
        dispatch(*fixed);
      } catch (const LineError&) {
        std::rethrow_exception(original);
      }
    }
  }

  std::optional<std::vector<std::string_view>> fixed_tokens(std::string_view line) const {
    auto fields = fixed_fields(line);
    const bool typed = section_ == Section::Rows || section_ == Section::Bounds;
    if (!typed && !fields.front().empty()) return std::nullopt;
    std::vector<std::string_view> packed;
    for (std::size_t k = typed ? 0 : 1; k < fields.size(); ++k) {
      if (!fields[k].empty()) packed.push_back(fields[k]);
    }
    return packed;
  }

  void dispatch(const std::vector<std::string_view>& t) {
    switch (section_) {
      case Section::Rows: return row_line(t);
      case Section::Columns: return column_line(t);
      case Section::Rhs: return rhs_line(t, false);
      case Section::Ranges: return rhs_line(t, true);
      case Section::Bounds: return bound_line(t);
      case Section::Quadratic: return quad_line(t);
      case Section::ObjSense:
        if (t.size() != 1) throw LineError("expected MIN or MAX");
        return objective_sense(t[0]);
      case Section::None:
      case Section::End: throw LineError("data line outside of a section");
    }
  }

  void row_line(const std::vector<std::string_view>& t) {
    if (t.size() != 2) throw LineError("ROWS line needs a type and a name");
    std::string name(t[1]);
    if (row_index_.count(name) || free_rows_.count(name) || (have_objective_ && name == qp_.objective_row)) {
      throw LineError(fmt::format("duplicate row '{}'", name));
    }
    if (t[0] == "N") {
      if (!have_objective_) {
        qp_.objective_row = name;
        have_objective_ = true;
      } else {
        free_rows_.insert(name);
      }
      return;
    }
    RawRow row;
    row.name = name;
    if (t[0] == "E") {
      row.sense = RowSense::Equal;
    } else if (t[0] == "L") {
      row.sense = RowSense::LessEqual;
    } else if (t[0] == "G") {
      row.sense = RowSense::GreaterEqual;
    } else {
      throw LineError(fmt::format("unknown row type '{}'", t[0]));
    }
    row_index_.emplace(name, static_cast<std::int64_t>(qp_.rows.size()));
    qp_.rows.push_back(std::move(row));
  }

  enum class RowRef { Objective, Free, Constraint };

  std::pair<RowRef, std::int64_t> resolve_row(std::string_view name) const {
    std::string key(name);
    if (have_objective_ && key == qp_.objective_row) return {RowRef::Objective, -1};
    if (free_rows_.count(key)) return {RowRef::Free, -1};
    auto it = row_index_.find(key);
    if (it == row_index_.end()) throw LineError(fmt::format("unknown row '{}'", name));
    return {RowRef::Constraint, it->second};
  }

  std::int64_t resolve_column(std::string_view name) const {
    auto it = col_index_.find(std::string(name));
    if (it == col_index_.end()) throw LineError(fmt::format("unknown column '{}'", name));
    return it->second;
  }

  void column_line(const std::vector<std::string_view>& t) {
    if (std::find(t.begin(), t.end(), "'MARKER'") != t.end()) return;
    if (t.size() != 3 && t.size() != 5) throw LineError("COLUMNS line needs 3 or 5 fields");
    // Validate the whole line before mutating anything.
    std::vector<std::pair<std::pair<RowRef, std::int64_t>, double>> items;
    for (std::size_t k = 1; k + 1 < t.size(); k += 2) {
      items.push_back({resolve_row(t[k]), parse_number(t[k + 1])});
    }
    std::string name(t[0]);
    auto it = col_index_.find(name);
    std::int64_t col = 0;
    if (it == col_index_.end()) {
      col = static_cast<std::int64_t>(qp_.columns.size());
      col_index_.emplace(name, col);
      RawColumn column;
      column.name = name;
      qp_.columns.push_back(std::move(column));
    } else {
      col = it->second;
    }
    for (const auto& [ref, value] : items) {
      switch (ref.first) {
        case RowRef::Free: break;
        case RowRef::Objective:
          if (!objective_seen_.insert(col).second) {
            throw LineError(fmt::format("duplicate objective entry for '{}'", name));
          }
          qp_.columns[col].cost = value;
          break;
        case RowRef::Constraint:
          if (!entry_seen_.insert({ref.second, col}).second) {
            throw LineError(fmt::format("duplicate entry ('{}', '{}')", qp_.rows[ref.second].name, name));
          }
          qp_.entries.push_back({ref.second, col, value});
          break;
      }
    }
  }

  void rhs_line(const std::vector<std::string_view>& t, bool ranges) {
    std::size_t first = 0;
    if (t.size() == 3 || t.size() == 5) {
      first = 1;
    } else if (t.size() != 2 && t.size() != 4) {
      throw LineError(ranges ? "RANGES line needs 2 to 5 fields" : "RHS line needs 2 to 5 fields");
    }
    std::vector<std::pair<std::pair<RowRef, std::int64_t>, double>> items;
    for (std::size_t k = first; k + 1 < t.size(); k += 2) {
      items.push_back({resolve_row(t[k]), parse_number(t[k + 1])});
    }
    std::string& set = ranges ? range_set_ : rhs_set_;
    std::string this_set = first == 1 ? std::string(t[0]) : std::string();
    if (!set_seen(ranges)) {
      set = this_set;
      mark_set_seen(ranges);
    } else if (this_set != set) {
      return;  // only the first set is used
    }
    for (const auto& [ref, value] : items) {
      if (ref.first == RowRef::Free) continue;
      if (ref.first == RowRef::Objective) {
        if (ranges) throw LineError("range on the objective row");
        qp_.objective_constant = -value;
        continue;
      }
      if (ranges) {
        qp_.rows[ref.second].range = value;
      } else {
        qp_.rows[ref.second].rhs = value;
      }
    }
  }

  bool set_seen(bool ranges) const { return ranges ? range_set_seen_ : rhs_set_seen_; }
  void mark_set_seen(bool ranges) { (ranges ? range_set_seen_ : rhs_set_seen_) = true; }

  void bound_line(const std::vector<std::string_view>& t) {
    if (t.size() < 2) throw LineError("BOUNDS line too short");
    std::string_view type = t[0];
    static const std::set<std::string_view> kValued = {"UP", "LO", "FX", "LI", "UI"};
    static const std::set<std::string_view> kUnvalued = {"FR", "MI", "PL", "BV"};
    bool valued = kValued.count(type) > 0;
    if (!valued && !kUnvalued.count(type)) throw LineError(fmt::format("unknown bound type '{}'", type));

    std::string_view col_name;
    std::optional<double> value;
    if (valued) {
      if (t.size() == 4) {
        col_name = t[2];
      } else if (t.size() == 3) {
        col_name = t[1];
      } else {
        throw LineError("bound needs a column and a value");
      }
      value = parse_number(t.back());
    } else {
      if (t.size() == 3 && type != "BV") {
        col_name = t[2];
      } else if (t.size() == 2) {
        col_name = t[1];
      } else if (type == "BV" && (t.size() == 3 || t.size() == 4)) {
        col_name = t.size() == 4 ? t[2] : t[1];
        if (t.size() == 4) parse_number(t[3]);
        if (t.size() == 3 && col_index_.count(std::string(t[1])) == 0) col_name = t[2];
      } else {
        throw LineError("malformed bound line");
      }
    }
    std::int64_t col = resolve_column(col_name);
    RawColumn& c = qp_.columns[col];
    if (type == "UP" || type == "UI") {
      c.upper = *value;
      if (*value < 0.0 && c.lower == 0.0 && !explicit_lower_.count(col)) c.lower = -kInf;
    } else if (type == "LO" || type == "LI") {
      c.lower = *value;
      explicit_lower_.insert(col);
    } else if (type == "FX") {
      c.lower = c.upper = *value;
      explicit_lower_.insert(col);
    } else if (type == "FR") {
      c.lower = -kInf;
      c.upper = kInf;
      explicit_lower_.insert(col);
    } else if (type == "MI") {
      c.lower = -kInf;
      explicit_lower_.insert(col);
    } else if (type == "PL") {
      c.upper = kInf;
    } else if (type == "BV") {
      c.lower = 0.0;
      c.upper = 1.0;
      explicit_lower_.insert(col);
    }
  }

  void quad_line(const std::vector<std::string_view>& t) {
    if (t.size() != 3) throw LineError("quadratic line needs two columns and a value");
    std::int64_t i = resolve_column(t[0]);
    std::int64_t j = resolve_column(t[1]);
    double v = parse_number(t[2]);
    if (!quad_seen_.insert({i, j}).second) {
      throw LineError(fmt::format("duplicate quadratic entry ('{}', '{}')", t[0], t[1]));
    }
    qp_.quadratic.push_back({i, j, v});
  }

  RawQp qp_;
  Section section_ = Section::None;
  bool have_objective_ = false;
  bool saw_quadratic_ = false;
  bool rhs_set_seen_ = false;
  bool range_set_seen_ = false;
  std::string rhs_set_;
  std::string range_set_;
  std::unordered_map<std::string, std::int64_t> row_index_;
  std::unordered_map<std::string, std::int64_t> col_index_;
  std::set<std::string> free_rows_;
  std::set<std::int64_t> objective_seen_;
  std::set<std::int64_t> explicit_lower_;
  std::set<std::pair<std::int64_t, std::int64_t>> entry_seen_;
  std::set<std::pair<std::int64_t, std::int64_t>> quad_seen_;
};

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" \t") != std::string::npos) {
    throw std::invalid_argument(fmt::format("name '{}' cannot be written in free format", name));
  }
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

RawQp parse_qps(std::istream& in) { return QpsReader{}.read(in); }

RawQp parse_qps(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_qps(in);
}

std::string serialize_qps(const RawQp& qp) {
  std::string out;
  auto line = [&out](auto&&... parts) {
    (out.append(parts), ...);
    out.push_back('\n');
  };
  check_name(qp.objective_row);
  line("NAME          ", qp.name);
  if (qp.maximize) {
    line("OBJSENSE");
    line("    MAX");
  }
  line("ROWS");
  line(" N  ", qp.objective_row);
  for (const auto& row : qp.rows) {
    check_name(row.name);
    const char* type = row.sense == RowSense::Equal ? " E  " : row.sense == RowSense::LessEqual ? " L  " : " G  ";
    line(type, row.name);
  }

  std::vector<std::vector<const MatrixEntry*>> by_column(qp.columns.size());
  for (const auto& e : qp.entries) by_column.at(static_cast<std::size_t>(e.col)).push_back(&e);
  line("COLUMNS");
  for (std::size_t j = 0; j < qp.columns.size(); ++j) {
    const auto& col = qp.columns[j];
    check_name(col.name);
    if (col.cost != 0.0 || by_column[j].empty()) line("    ", col.name, "  ", qp.objective_row, "  ", num(col.cost));
    for (const auto* e : by_column[j]) {
      line("    ", col.name, "  ", qp.rows.at(static_cast<std::size_t>(e->row)).name, "  ", num(e->value));
    }
  }

  line("RHS");
  if (qp.objective_constant != 0.0) line("    RHS  ", qp.objective_row, "  ", num(-qp.objective_constant));
  for (const auto& row : qp.rows) {
    if (row.rhs != 0.0) line("    RHS  ", row.name, "  ", num(row.rhs));
  }
  bool any_range = std::any_of(qp.rows.begin(), qp.rows.end(), [](const RawRow& r) { return r.range.has_value(); });
  if (any_range) {
    line("RANGES");
    for (const auto& row : qp.rows) {
      if (row.range) line("    RNG  ", row.name, "  ", num(*row.range));
    }
  }

  line("BOUNDS");
  for (const auto& col : qp.columns) {
    const bool free_lower = std::isinf(col.lower) && col.lower < 0;
    const bool free_upper = std::isinf(col.upper) && col.upper > 0;
    if (free_lower && free_upper) {
      line(" FR BND  ", col.name);
      continue;
    }
    if (col.lower == col.upper) {
      line(" FX BND  ", col.name, "  ", num(col.lower));
      continue;
    }
    if (free_lower) {
      line(" MI BND  ", col.name);
    } else if (col.lower != 0.0 || col.upper < 0.0 || std::signbit(col.lower)) {
      line(" LO BND  ", col.name, "  ", num(col.lower));
    }
    if (!free_upper) line(" UP BND  ", col.name, "  ", num(col.upper));
  }

  if (!qp.quadratic.empty()) {
    line(qp.quad_convention == QuadConvention::LowerTriangle ? "QUADOBJ" : "QMATRIX");
    for (const auto& q : qp.quadratic) {
      line("    ", qp.columns.at(static_cast<std::size_t>(q.row)).name, "  ",
           qp.columns.at(static_cast<std::size_t>(q.col)).name, "  ", num(q.value));
    }
  }
  line("ENDATA");
  return out;
}

QpProblem<double> load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  RawQp raw = parse_qps(in);
  if (raw.name.empty()) raw.name = path.stem().string();
  return preprocess<double>(raw);
}

}  // namespace mnqp
