#pragma once

// Comma-separated text formats. Numbers are written with 17 significant
// digits so every double survives a write/read cycle unchanged.
//
// Feature sets:  f0,...,f{n-1},label[,group]   (label is a class index)
// Heads:         class,w0,...,w{n-1}[,bias]    (the header declares the bias)
// Tables:        any header of column names, numeric cells
// Point clouds:  instance,x,y,z,part

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "featspace/geometry.hpp"
#include "featspace/metrics.hpp"

namespace featspace::io {

std::string format_double(double x);

/// Strict parse of a whole cell; throws ParseError at (line, column).
double parse_double(const std::string& cell, std::size_t line, std::size_t column);

/// Splits one line on commas. A trailing '\r' is dropped.
std::vector<std::string> split_csv_line(const std::string& line);

/// `num_classes` declares the class count; labels at or above it raise
/// UnknownLabel. When absent the count is the largest label plus one.
LabeledFeatureSet read_feature_set(std::istream& in, std::optional<std::size_t> num_classes = std::nullopt);
LabeledFeatureSet read_feature_set(const std::string& path, std::optional<std::size_t> num_classes = std::nullopt);
void write_feature_set(std::ostream& out, const LabeledFeatureSet& set);
void write_feature_set(const std::string& path, const LabeledFeatureSet& set);

ClassifierHead read_head(std::istream& in);
ClassifierHead read_head(const std::string& path);
void write_head(std::ostream& out, const ClassifierHead& head);
void write_head(const std::string& path, const ClassifierHead& head);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws InvalidArgument if the column does not exist.
  std::vector<double> column(const std::string& name) const;
};

Table read_table(std::istream& in);
Table read_table(const std::string& path);
void write_table(std::ostream& out, const Table& table);

/// Rows sharing an instance name form one cloud, in order of first appearance.
std::vector<PointCloudInstance> read_point_clouds(std::istream& in);
std::vector<PointCloudInstance> read_point_clouds(const std::string& path);
void write_point_clouds(std::ostream& out, const std::vector<PointCloudInstance>& clouds);

/// Whole-file helpers; throw Io on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace featspace::io
