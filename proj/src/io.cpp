#include "featspace/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace featspace::io {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  return out;
}

std::size_t parse_index(const std::string& cell, std::size_t line, std::size_t column) {
  std::size_t value = 0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || cell.empty()) {
    throw ParseError(line, column, "expected a non-negative integer, got '" + cell + "'");
  }
  return value;
}

int parse_int(const std::string& cell, std::size_t line, std::size_t column) {
  int value = 0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || cell.empty()) {
    throw ParseError(line, column, "expected an integer, got '" + cell + "'");
  }
  return value;
}

// Reads the next non-empty line; returns false at end of input.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

void check_width(const std::vector<std::string>& cells, std::size_t expected, std::size_t line) {
  if (cells.size() != expected) {
    throw ParseError(line, std::min(cells.size(), expected) + 1,
                     "expected " + std::to_string(expected) + " fields, found " + std::to_string(cells.size()));
  }
}

void flush_or_throw(std::ostream& out) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed");
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& cell, std::size_t line, std::size_t column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw ParseError(line, column, "expected a number, got '" + cell + "'");
  }
  if (!std::isfinite(value)) throw ParseError(line, column, "non-finite number '" + cell + "'");
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

LabeledFeatureSet read_feature_set(std::istream& in, std::optional<std::size_t> num_classes) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) throw ParseError(1, 1, "missing header row");
  const auto header = split_csv_line(line);

  std::size_t dim = 0;
  while (dim < header.size() && header[dim] == "f" + std::to_string(dim)) ++dim;
  if (dim == 0) throw ParseError(line_no, 1, "header must start with f0");
  if (dim >= header.size() || header[dim] != "label") {
    throw ParseError(line_no, dim + 1, "expected column 'label' after f" + std::to_string(dim - 1));
  }
  const bool has_group = header.size() == dim + 2;
  if (has_group && header[dim + 1] != "group") throw ParseError(line_no, dim + 2, "expected column 'group'");
  if (header.size() > dim + 2) throw ParseError(line_no, dim + 3, "unexpected extra header column");

  LabeledFeatureSet set;
  set.vectors = Matrix(0, dim);
  std::vector<double> row(dim);
  while (next_line(in, line, line_no)) {
    const auto cells = split_csv_line(line);
    check_width(cells, header.size(), line_no);
    for (std::size_t c = 0; c < dim; ++c) row[c] = parse_double(cells[c], line_no, c + 1);
    const std::size_t label = parse_index(cells[dim], line_no, dim + 1);
    if (num_classes && label >= *num_classes) {
      throw Error(ErrorCode::UnknownLabel, "line " + std::to_string(line_no) + ": label " + std::to_string(label) +
                                               " is outside the declared " + std::to_string(*num_classes) +
                                               " classes");
    }
    set.vectors.append_row(row);
    set.labels.push_back(label);
    if (has_group) set.groups.push_back(parse_int(cells[dim + 1], line_no, dim + 2));
  }
  std::size_t inferred = 0;
  for (std::size_t l : set.labels) inferred = std::max(inferred, l + 1);
  set.num_classes = num_classes.value_or(inferred);
  set.validate(true);
  return set;
}

LabeledFeatureSet read_feature_set(const std::string& path, std::optional<std::size_t> num_classes) {
  auto in = open_in(path);
  return read_feature_set(in, num_classes);
}

void write_feature_set(std::ostream& out, const LabeledFeatureSet& set) {
  set.validate(true);
  for (std::size_t c = 0; c < set.dim(); ++c) out << 'f' << c << ',';
  out << "label";
  if (!set.groups.empty()) out << ",group";
  out << '\n';
  for (std::size_t r = 0; r < set.size(); ++r) {
    for (double v : set.vectors.row(r)) out << format_double(v) << ',';
    out << set.labels[r];
    if (!set.groups.empty()) out << ',' << set.groups[r];
    out << '\n';
  }
  flush_or_throw(out);
}

void write_feature_set(const std::string& path, const LabeledFeatureSet& set) {
  auto out = open_out(path);
  write_feature_set(out, set);
}

ClassifierHead read_head(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) throw ParseError(1, 1, "missing header row");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "class") throw ParseError(line_no, 1, "header must start with 'class'");
  std::size_t dim = 0;
  while (dim + 1 < header.size() && header[dim + 1] == "w" + std::to_string(dim)) ++dim;
  if (dim == 0) throw ParseError(line_no, 2, "header needs weight columns w0, w1, ...");
  const bool has_bias = header.size() == dim + 2;
  if (has_bias && header[dim + 1] != "bias") throw ParseError(line_no, dim + 2, "expected column 'bias'");
  if (header.size() > dim + 2) throw ParseError(line_no, dim + 3, "unexpected extra header column");

  Matrix weights(0, dim);
  std::vector<double> bias;
  std::vector<std::string> names;
  std::set<std::string> seen;
  std::vector<double> row(dim);
  while (next_line(in, line, line_no)) {
    const auto cells = split_csv_line(line);
    check_width(cells, header.size(), line_no);
    if (cells[0].empty()) throw ParseError(line_no, 1, "empty class name");
    if (!seen.insert(cells[0]).second) {
      throw Error(ErrorCode::DuplicateClassName,
                  "line " + std::to_string(line_no) + ": class '" + cells[0] + "' appears twice");
    }
    names.push_back(cells[0]);
    for (std::size_t c = 0; c < dim; ++c) row[c] = parse_double(cells[c + 1], line_no, c + 2);
    weights.append_row(row);
    if (has_bias) bias.push_back(parse_double(cells[dim + 1], line_no, dim + 2));
  }
  std::optional<std::vector<double>> b;
  if (has_bias) b = std::move(bias);
  return ClassifierHead(std::move(weights), std::move(b), std::move(names));
}

ClassifierHead read_head(const std::string& path) {
  auto in = open_in(path);
  return read_head(in);
}

void write_head(std::ostream& out, const ClassifierHead& head) {
  out << "class";
  for (std::size_t c = 0; c < head.dim(); ++c) out << ",w" << c;
  if (head.has_bias()) out << ",bias";
  out << '\n';
  for (std::size_t i = 0; i < head.num_classes(); ++i) {
    out << head.class_names()[i];
    for (double v : head.weight(i)) out << ',' << format_double(v);
    if (head.has_bias()) out << ',' << format_double((*head.bias())[i]);
    out << '\n';
  }
  flush_or_throw(out);
}

void write_head(const std::string& path, const ClassifierHead& head) {
  auto out = open_out(path);
  write_head(out, head);
}

std::vector<double> Table::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] != name) continue;
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
  throw Error(ErrorCode::InvalidArgument, "table has no column '" + name + "'");
}

Table read_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) throw ParseError(1, 1, "missing header row");
  Table t;
  t.columns = split_csv_line(line);
  while (next_line(in, line, line_no)) {
    const auto cells = split_csv_line(line);
    check_width(cells, t.columns.size(), line_no);
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) row.push_back(parse_double(cells[c], line_no, c + 1));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table read_table(const std::string& path) {
  auto in = open_in(path);
  return read_table(in);
}

void write_table(std::ostream& out, const Table& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& r : table.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
    out << '\n';
  }
  flush_or_throw(out);
}

std::vector<PointCloudInstance> read_point_clouds(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) throw ParseError(1, 1, "missing header row");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"instance", "x", "y", "z", "part"};
  if (header != expected) throw ParseError(line_no, 1, "header must be instance,x,y,z,part");

  std::vector<PointCloudInstance> clouds;
  std::map<std::string, std::size_t> index;
  while (next_line(in, line, line_no)) {
    const auto cells = split_csv_line(line);
    check_width(cells, 5, line_no);
    auto [it, inserted] = index.try_emplace(cells[0], clouds.size());
    if (inserted) clouds.push_back({cells[0], Matrix(0, 3), {}});
    PointCloudInstance& cloud = clouds[it->second];
    const double p[3] = {parse_double(cells[1], line_no, 2), parse_double(cells[2], line_no, 3),
                         parse_double(cells[3], line_no, 4)};
    cloud.points.append_row(p);
    cloud.part_labels.push_back(parse_index(cells[4], line_no, 5));
  }
  return clouds;
}

std::vector<PointCloudInstance> read_point_clouds(const std::string& path) {
  auto in = open_in(path);
  return read_point_clouds(in);
}

void write_point_clouds(std::ostream& out, const std::vector<PointCloudInstance>& clouds) {
  out << "instance,x,y,z,part\n";
  for (const auto& c : clouds) {
    for (std::size_t r = 0; r < c.points.rows(); ++r) {
      out << c.id;
      for (double v : c.points.row(r)) out << ',' << format_double(v);
      out << ',' << c.part_labels[r] << '\n';
    }
  }
  flush_or_throw(out);
}

std::string read_file(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  auto out = open_out(path);
  out << contents;
  flush_or_throw(out);
}

}  // namespace featspace::io
