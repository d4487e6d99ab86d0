#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "causalattr/graph.hpp"

namespace causalattr {

// Column-major sample table whose columns line up with a Dag's nodes:
// column j holds node j's values. Continuous cells are stored as-is;
// categorical cells are stored as category indices cast to double.
// Rows with missing cells are dropped at ingestion, so a constructed
// table is always complete.
class Table {
 public:
  Table() = default;
  Table(std::vector<NodeDecl> schema, std::size_t rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_.size(); }
  const std::vector<NodeDecl>& schema() const { return schema_; }

  double real(std::size_t col, std::size_t row) const { return columns_[col][row]; }
  int32_t code(std::size_t col, std::size_t row) const {
    return static_cast<int32_t>(columns_[col][row]);
  }
  void set(std::size_t col, std::size_t row, double x) { columns_[col][row] = x; }

  const std::vector<double>& column(std::size_t col) const { return columns_[col]; }
  std::vector<double>& column(std::size_t col) { return columns_[col]; }

  bool same_schema(const Table& other) const { return schema_matches(other.schema_); }
  bool schema_matches(const std::vector<NodeDecl>& other) const;

  // Keeps the given rows in the given order; duplicates allowed
  // (bootstrap resampling draws with replacement).
  Table select_rows(const std::vector<std::size_t>& rows) const;

 private:
  std::size_t rows_ = 0;
  std::vector<NodeDecl> schema_;
  std::vector<std::vector<double>> columns_;
};

// Pooled sample with the source marker: +1 for rows that came from the
// old table, -1 for rows from the new one. The marker lives beside the
// data rather than in it so it can never leak into a regression design.
struct IndexedTable {
  Table table;
  std::vector<int8_t> index;
};

struct LoadStats {
  std::size_t rows_kept = 0;
  std::size_t rows_dropped = 0;
  std::vector<std::string> ignored_columns;
};

// CSV with a header row. Every dag node must appear as a column (any
// order); extra columns are ignored with a warning. Continuous cells are
// decimal numbers; categorical cells must be declared labels; an empty
// cell marks the row incomplete and the row is dropped.
Table load_csv(const std::string& path, const Dag& dag, LoadStats* stats = nullptr);
Table parse_csv(std::istream& in, const Dag& dag, LoadStats* stats = nullptr);

IndexedTable concat_with_index(const Table& old_table, const Table& new_table);
Table pool(const Table& old_table, const Table& new_table);

}  // namespace causalattr
