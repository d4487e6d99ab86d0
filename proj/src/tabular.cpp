#include "causalattr/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "causalattr/errors.hpp"
#include "causalattr/warnings.hpp"

namespace causalattr {

Table::Table(std::vector<NodeDecl> schema, std::size_t rows)
    : rows_(rows), schema_(std::move(schema)) {
  columns_.assign(schema_.size(), std::vector<double>(rows_, 0.0));
}

bool Table::schema_matches(const std::vector<NodeDecl>& other) const {
  if (schema_.size() != other.size()) return false;
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name != other[i].name) return false;
    if (schema_[i].kind != other[i].kind) return false;
    if (schema_[i].categories != other[i].categories) return false;
  }
  return true;
}

Table Table::select_rows(const std::vector<std::size_t>& rows) const {
  Table out(schema_, rows.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& src = columns_[c];
    auto& dst = out.columns_[c];
    for (std::size_t r = 0; r < rows.size(); ++r) dst[r] = src[rows[r]];
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ' || cur.back() == '\t'))
      cur.pop_back();
    std::size_t b = 0;
    while (b < cur.size() && (cur[b] == ' ' || cur[b] == '\t')) ++b;
    cells.push_back(cur.substr(b));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_real(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

Table parse_csv(std::istream& in, const Dag& dag, LoadStats* stats) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyTable("no header row");
  const std::vector<std::string> header = split_csv_line(line);

  // Map each dag node to its file column; remember which file columns to skip.
  std::vector<std::ptrdiff_t> node_to_col(dag.size(), -1);
  std::vector<bool> used(header.size(), false);
  for (std::size_t j = 0; j < dag.size(); ++j) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == dag.node(j).name) {
        node_to_col[j] = static_cast<std::ptrdiff_t>(c);
        used[c] = true;
        break;
      }
    }
    if (node_to_col[j] < 0)
      throw MissingColumn("column '" + dag.node(j).name + "' not in CSV header");
  }
  std::vector<std::string> ignored;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (!used[c]) ignored.push_back(header[c]);
  if (!ignored.empty()) {
    std::string msg = "ignoring columns:";
    for (const auto& name : ignored) msg += " " + name;
    warn(msg);
  }

  // Category label -> code, per categorical node.
  std::vector<std::unordered_map<std::string, int32_t>> codebooks(dag.size());
  for (std::size_t j = 0; j < dag.size(); ++j) {
    const auto& decl = dag.node(j);
    if (decl.kind != NodeKind::Categorical) continue;
    for (std::size_t c = 0; c < decl.categories.size(); ++c)
      codebooks[j].emplace(decl.categories[c], static_cast<int32_t>(c));
  }

  std::vector<std::vector<double>> columns(dag.size());
  std::size_t dropped = 0;
  std::size_t lineno = 1;
  std::vector<double> row(dag.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(lineno, "expected " + std::to_string(header.size()) +
                                   " cells, found " + std::to_string(cells.size()));
    bool missing = false;
    for (std::size_t j = 0; j < dag.size() && !missing; ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(node_to_col[j])];
      if (cell.empty()) {
        missing = true;
        break;
      }
      if (dag.node(j).kind == NodeKind::Continuous) {
        double x;
        if (!parse_real(cell, x))
          throw TypeMismatch("line " + std::to_string(lineno) + ": '" + cell +
                             "' is not a number (column " + dag.node(j).name + ")");
        row[j] = x;
      } else {
        const auto it = codebooks[j].find(cell);
        if (it == codebooks[j].end())
          throw TypeMismatch("line " + std::to_string(lineno) + ": '" + cell +
                             "' is not a declared category of " + dag.node(j).name);
        row[j] = static_cast<double>(it->second);
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t j = 0; j < dag.size(); ++j) columns[j].push_back(row[j]);
  }
  const std::size_t kept = columns.empty() ? 0 : columns[0].size();
  if (kept == 0) throw EmptyTable("no usable rows");
  if (dropped > 0)
    warn("dropped " + std::to_string(dropped) + " rows with missing cells");
  if (stats) {
    stats->rows_kept = kept;
    stats->rows_dropped = dropped;
    stats->ignored_columns = std::move(ignored);
  }

  Table out(dag.nodes(), kept);
  for (std::size_t j = 0; j < dag.size(); ++j) out.column(j) = std::move(columns[j]);
  return out;
}

Table load_csv(const std::string& path, const Dag& dag, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path + "'");
  return parse_csv(in, dag, stats);
}

namespace {

Table stack(const Table& a, const Table& b) {
  if (!a.same_schema(b)) throw SchemaMismatch("tables have different schemas");
  Table out(a.schema(), a.rows() + b.rows());
  for (std::size_t c = 0; c < a.cols(); ++c) {
    auto& dst = out.column(c);
    const auto& ca = a.column(c);
    const auto& cb = b.column(c);
    std::copy(ca.begin(), ca.end(), dst.begin());
    std::copy(cb.begin(), cb.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.rows()));
  }
  return out;
}

}  // namespace

IndexedTable concat_with_index(const Table& old_table, const Table& new_table) {
  IndexedTable out;
  out.table = stack(old_table, new_table);
  out.index.assign(out.table.rows(), -1);
  std::fill(out.index.begin(), out.index.begin() + static_cast<std::ptrdiff_t>(old_table.rows()), 1);
  return out;
}

Table pool(const Table& old_table, const Table& new_table) {
  return stack(old_table, new_table);
}

}  // namespace causalattr
