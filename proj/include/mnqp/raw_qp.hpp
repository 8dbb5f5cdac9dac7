#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mnqp {

enum class RowSense { Equal, LessEqual, GreaterEqual };

/// QUADOBJ lists one triangle of the Hessian, QMATRIX lists every nonzero.
enum class QuadConvention { LowerTriangle, Full };

struct MatrixEntry {
  std::int64_t row = 0;
  std::int64_t col = 0;
  double value = 0.0;

  bool operator==(const MatrixEntry&) const = default;
};

struct RawRow {
  std::string name;
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;
  std::optional<double> range;

  bool operator==(const RawRow&) const = default;
};

struct RawColumn {
  std::string name;
  double cost = 0.0;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  bool operator==(const RawColumn&) const = default;
};

/// A QP exactly as written in a QPS file, before any rewriting.
///
/// `entries` hold the constraint matrix ordered by column (stable within a
/// column); `quadratic` holds the Hessian triplets as listed, interpreted
/// per `quad_convention`. Values of magnitude >= 1e20 are kept verbatim and
/// only read as infinite by `preprocess`.
struct RawQp {
  std::string name;
  std::string objective_row = "OBJ";
  /// Constant term of the objective; the file stores its negation as the
  /// RHS entry of the objective row.
  double objective_constant = 0.0;
  bool maximize = false;
  std::vector<RawRow> rows;
  std::vector<RawColumn> columns;
  std::vector<MatrixEntry> entries;
  QuadConvention quad_convention = QuadConvention::LowerTriangle;
  std::vector<MatrixEntry> quadratic;

  bool operator==(const RawQp&) const = default;
};

}  // namespace mnqp
