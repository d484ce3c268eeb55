#include <gtest/gtest.h>

#include <random>

#include "fusenet/visualize.hpp"
#include "oracles.hpp"

using namespace fusenet;

namespace {

std::array<std::uint8_t, 3> pixel(const Image& img, std::size_t x, std::size_t y) {
  const auto* p = &img.rgb[(y * img.width + x) * 3];
  return {p[0], p[1], p[2]};
}

}  // namespace

TEST(FilterGrid, NinetySixFiltersTileTwelveByEight) {
  const auto g = filter_grid_shape(96);
  EXPECT_EQ(g.columns, 12u);
  EXPECT_EQ(g.rows, 8u);
  std::mt19937_64 rng(1);
  const auto img = filter_grid(fusenet::testing::random_tensor<float>({96, 3, 11, 11}, rng, -1, 1));
  EXPECT_EQ(img.width, 12u * 11 + 11);
  EXPECT_EQ(img.height, 8u * 11 + 7);
  // Separator column after the first tile.
  for (std::size_t y = 0; y < img.height; ++y) EXPECT_EQ(pixel(img, 11, y), (std::array<std::uint8_t, 3>{255, 255, 255}));
}

TEST(FilterGrid, SingleFilterIsOneTile) {
  const auto g = filter_grid_shape(1);
  EXPECT_EQ(g.columns, 1u);
  EXPECT_EQ(g.rows, 1u);
  Tensor<double> w({1, 3, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const auto img = filter_grid(w);
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.height, 2u);
  // Per-filter min-max: 0 -> 0, 11 -> 255; pixel (0,0) is (w[0], w[4], w[8]).
  EXPECT_EQ(pixel(img, 0, 0), (std::array<std::uint8_t, 3>{0, 93, 185}));
  EXPECT_EQ(pixel(img, 1, 1), (std::array<std::uint8_t, 3>{70, 162, 255}));
}

TEST(FilterGrid, ConstantFilterIsUniformGray) {
  Tensor<float> w({2, 3, 3, 3}, 0.7f);
  for (std::size_t i = 27; i < 54; ++i) w[i] = static_cast<float>(i);
  const auto img = filter_grid(w, 2);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) EXPECT_EQ(pixel(img, x, y), (std::array<std::uint8_t, 3>{128, 128, 128}));
  EXPECT_EQ(img.width, 2u * 6 + 1);
}

TEST(FilterGrid, NormalizationIsPerFilter) {
  Tensor<float> w({2, 1, 1, 2}, {0.f, 1.f, 100.f, 300.f});
  const auto img = filter_grid(w);
  EXPECT_EQ(pixel(img, 0, 0)[0], 0);
  EXPECT_EQ(pixel(img, 1, 0)[0], 255);
  EXPECT_EQ(pixel(img, 3, 0)[0], 0);
  EXPECT_EQ(pixel(img, 4, 0)[0], 255);
  EXPECT_THROW(filter_grid(Tensor<float>({2, 2})), DimensionError);
}

TEST(Curves, MergeAlignsEpochs) {
  const std::string a = "epoch,loss,test_accuracy\n1,0.9,0.5\n2,0.5,0.75\n";
  const std::string b = "epoch,loss,test_accuracy\n1,1.1,0.25\n";
  EXPECT_EQ(merge_curves({{"image", a}, {"net1", b}}),
            "epoch,image_loss,image_test_accuracy,net1_loss,net1_test_accuracy\n"
            "1,0.9,0.5,1.1,0.25\n"
            "2,0.5,0.75,,\n");
  EXPECT_THROW(merge_curves({{"x", "epoch,loss\n1,2\n"}}), FormatError);
}
