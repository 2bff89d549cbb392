#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "featspace/io.hpp"
#include "featspace/manifest.hpp"

namespace featspace {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("featspace_io_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  fs::create_directories(p);
  return p;
}

TEST(FormatDouble, RoundTripsAwkwardValues) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  std::vector<double> values{0.1, -0.0, 1e-308, 5e-324, std::numeric_limits<double>::max(), 1.0 / 3.0};
  while (values.size() < 2000) {
    const std::uint64_t b = bits(rng);
    double d;
    std::memcpy(&d, &b, sizeof d);
    if (std::isfinite(d)) values.push_back(d);
  }
  for (double v : values) {
    const double back = io::parse_double(io::format_double(v), 1, 1);
    EXPECT_EQ(std::memcmp(&back, &v, sizeof v), 0) << io::format_double(v);
  }
}

TEST(ParseDouble, Strictness) {
  EXPECT_EQ(io::parse_double("+2.5", 1, 1), 2.5);
  EXPECT_THROW(io::parse_double("2.5x", 1, 1), ParseError);
  EXPECT_THROW(io::parse_double("", 1, 1), ParseError);
  EXPECT_THROW(io::parse_double("nan", 1, 1), ParseError);
  EXPECT_THROW(io::parse_double("inf", 1, 1), ParseError);
  try {
    io::parse_double("abc", 7, 3);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_EQ(e.column(), 3u);
  }
}

TEST(SplitCsv, DropsCarriageReturn) {
  EXPECT_EQ(io::split_csv_line("a,b,,c\r"), (std::vector<std::string>{"a", "b", "", "c"}));
}

TEST(FeatureSet, RoundTripIsBitExact) {
  LabeledFeatureSet s;
  s.num_classes = 3;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int r = 0; r < 30; ++r) {
    s.vectors.append_row(std::vector<double>{g(rng), std::abs(g(rng)), g(rng) * 1e-9});
    s.labels.push_back(r % 3);
    s.groups.push_back(r % 2);
  }
  std::stringstream buf;
  io::write_feature_set(buf, s);
  const auto back = io::read_feature_set(buf);
  EXPECT_EQ(back.vectors, s.vectors);
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.groups, s.groups);
  EXPECT_EQ(back.num_classes, 3u);
}

TEST(FeatureSet, ParseErrorsCarryLine) {
  std::istringstream in("f0,f1,label\n1,2,0\n3,oops,1\n");
  try {
    io::read_feature_set(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 2u);
  }
  std::istringstream bad_header("x,y,label\n1,2,0\n");
  EXPECT_THROW(io::read_feature_set(bad_header), ParseError);
  std::istringstream ragged("f0,f1,label\n1,2\n");
  EXPECT_THROW(io::read_feature_set(ragged), ParseError);
}

TEST(FeatureSet, UnknownLabel) {
  std::istringstream in("f0,f1,label\n1,2,0\n3,4,5\n");
  try {
    io::read_feature_set(in, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLabel);
  }
  std::istringstream ok("f0,f1,label\n1,2,0\n3,4,2\n");
  EXPECT_EQ(io::read_feature_set(ok).num_classes, 3u);
}

TEST(Head, RoundTripWithBiasAndNames) {
  const ClassifierHead head({{0.1, 0.2}, {-1.0 / 3.0, 7e-12}}, std::vector<double>{0.5, -2.0},
                            std::vector<std::string>{"happy", "sad"});
  std::stringstream buf;
  io::write_head(buf, head);
  EXPECT_TRUE(io::read_head(buf) == head);
  const ClassifierHead plain({{1, 0}, {0, 1}, {-1, -1}});
  std::stringstream buf2;
  io::write_head(buf2, plain);
  EXPECT_TRUE(io::read_head(buf2) == plain);
}

TEST(Head, DuplicateClassName) {
  std::istringstream in("class,w0,w1\na,1,0\na,0,1\n");
  try {
    io::read_head(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateClassName);
  }
}

TEST(Table, RoundTripAndColumn) {
  io::Table t;
  t.columns = {"C_R", "S_R", "L_R"};
  t.rows = {{1.1, 0.9, 2.0}, {1.3, 0.7, 3.25}};
  std::stringstream buf;
  io::write_table(buf, t);
  const auto back = io::read_table(buf);
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("L_R"), (std::vector<double>{2.0, 3.25}));
  EXPECT_THROW(back.column("nope"), Error);
}

TEST(PointClouds, RoundTripGroupsByInstance) {
  std::istringstream in("instance,x,y,z,part\nA,0,0,0,1\nB,1,1,1,0\nA,2,0,0,1\n");
  const auto clouds = io::read_point_clouds(in);
  ASSERT_EQ(clouds.size(), 2u);
  EXPECT_EQ(clouds[0].id, "A");
  EXPECT_EQ(clouds[0].points.rows(), 2u);
  EXPECT_EQ(clouds[0].points(1, 0), 2.0);
  std::stringstream buf;
  io::write_point_clouds(buf, clouds);
  const auto back = io::read_point_clouds(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].points, clouds[0].points);
  EXPECT_EQ(back[1].part_labels, clouds[1].part_labels);
}

TEST(Files, MissingFileIsIo) {
  try {
    io::read_file("/nonexistent/definitely/missing.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Manifest, DigestAndRoundTrip) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = scratch_dir("manifest");
  const std::string input = (dir / "in.txt").string();
  io::write_file(input, "hello\n");
  ExperimentManifest m;
  m.subcommand = "correlate";
  m.args = {"--table", input};
  m.inputs = {{input, file_sha256(input)}};
  m.seeds = {0, 42};
  m.params["x"] = "C_R";
  const std::string path = (dir / "m.json").string();
  save_manifest(path, m);
  const auto back = load_manifest(path);
  EXPECT_EQ(to_json(back), to_json(m));
  EXPECT_NO_THROW(verify_inputs(back));
  io::write_file(input, "changed\n");
  try {
    verify_inputs(back);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DigestMismatch);
  }
  fs::remove_all(dir);
}

TEST(Manifest, RejectsUnsupportedSchema) {
  auto j = to_json(ExperimentManifest{});
  j["schema_version"] = 99;
  EXPECT_THROW(manifest_from_json(j), Error);
}

}  // namespace
}  // namespace featspace
