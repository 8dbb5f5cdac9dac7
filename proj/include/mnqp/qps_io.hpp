#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>

#include "mnqp/problem.hpp"
#include "mnqp/raw_qp.hpp"

namespace mnqp {

/// Reads fixed- or free-format MPS text with an optional QUADOBJ/QMATRIX
/// section. Throws ParseError carrying the offending line number.
RawQp parse_qps(std::istream& in);
RawQp parse_qps(std::string_view text);

/// Free-format QPS text that `parse_qps` reads back to an equal RawQp.
std::string serialize_qps(const RawQp& qp);

/// parse_qps followed by preprocess. Throws std::runtime_error when the file
/// cannot be opened.
QpProblem<double> load_problem(const std::filesystem::path& path);

}  // namespace mnqp
