#include <indistack/artifacts.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace indistack;
using indistack::testing::QuadraticValue;
using indistack::testing::vec;

TEST(Artifacts, NumbersRoundTripExactly)
{
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = normal(rng);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(-2.0), "-2");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Artifacts, ValueGridLayout)
{
  const QuadraticValue j(Matrix::Zero(2, 2), vec({1.0, 10.0}));
  const ValueGrid g = value_grid(j, -1.0, 1.0, 3);
  ASSERT_EQ(g.values.rows(), 3);
  ASSERT_EQ(g.values.cols(), 3);
  // values(i, j) = xs(j) + 10 ys(i)
  EXPECT_DOUBLE_EQ(g.values(0, 2), 1.0 - 10.0);
  EXPECT_DOUBLE_EQ(g.values(2, 0), -1.0 + 10.0);
  EXPECT_THROW(value_grid(QuadraticValue(Matrix::Zero(3, 3), Vector::Zero(3)), -1, 1, 3), ShapeError);
  EXPECT_THROW(value_grid(j, 1, -1, 3), ConfigError);
  EXPECT_THROW(value_grid(j, -1, 1, 1), ConfigError);
}

TEST(Artifacts, HeatmapHasOneCellPerGridPoint)
{
  const QuadraticValue j(Matrix::Identity(2, 2), Vector::Zero(2));
  const std::string svg = heatmap_svg(value_grid(j, -3, 3, 10), {Rect::centered(0, 0, 1)}, "J");
  std::size_t cells = 0;
  for (std::size_t p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++cells;
  EXPECT_EQ(cells, 100u + 1u); // grid plus the region outline
  EXPECT_NE(svg.find("<title>J</title>"), std::string::npos);
}

TEST(Artifacts, TrajectorySvgDrawsEveryRobot)
{
  std::vector<Vector> run{vec({0, 0, 1, 1}), vec({0.5, 0, 1, 0.5})};
  const std::string svg = trajectory_svg({run}, {}, -2, 2, {vec({-2, 0})});
  std::size_t lines = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  EXPECT_EQ(lines, 2u);
}

TEST(Artifacts, ManifestRecordsModelDigests)
{
  const auto dir = std::filesystem::temp_directory_path();
  const std::string model = (dir / "indistack_manifest_model.json").string();
  write_file(model, "{}\n");
  RunManifest m;
  m.command = "train";
  m.add_model(model);
  const auto j = m.to_json();
  EXPECT_EQ(j.at("command"), "train");
  EXPECT_EQ(j.at("model_digests").at(model), hex64(fnv1a64("{}\n")));
  EXPECT_THROW(m.add_model((dir / "indistack_missing_model.json").string()), ConfigError);
  std::filesystem::remove(model);
}
