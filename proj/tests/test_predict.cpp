#include <gtest/gtest.h>

#include "mitonet/predict.hpp"
#include "oracles.hpp"

using namespace mito;

namespace {

UNet tiny_model(std::uint64_t seed = 3) {
  UNetConfig c;
  c.filters = {2, 4, 8, 16, 32};
  c.input_size = 32;
  return UNet(c, seed);
}

}  // namespace

TEST(Tiling, PlanFor1024x768Slice) {
  const auto t = plan_tiles(768, 1024, 512);
  const std::vector<TileOrigin> expected{{0, 0}, {0, 512}, {256, 0}, {256, 512}};
  EXPECT_EQ(t, expected);
}

TEST(Tiling, ExactMultiplesAndShortAxes) {
  EXPECT_EQ(plan_tiles(1024, 512, 512), (std::vector<TileOrigin>{{0, 0}, {512, 0}}));
  EXPECT_EQ(plan_tiles(100, 700, 512), (std::vector<TileOrigin>{{0, 0}, {0, 188}}));
  EXPECT_EQ(plan_tiles(5, 5, 512), (std::vector<TileOrigin>{{0, 0}}));
  EXPECT_THROW((void)plan_tiles(0, 5, 512), Error);
}

TEST(Tiling, CoversEveryPixel) {
  for (int h : {31, 32, 33, 64, 90})
    for (int w : {17, 32, 65}) {
      std::vector<int> hits(static_cast<std::size_t>(h * w), 0);
      for (const auto& o : plan_tiles(h, w, 32))
        for (int y = o.y; y < std::min(o.y + 32, h); ++y)
          for (int x = o.x; x < std::min(o.x + 32, w); ++x) ++hits[static_cast<std::size_t>(y * w + x)];
      for (int v : hits) ASSERT_GE(v, 1);
    }
}

TEST(Tiling, StitchedSliceEqualsOwningTileForward) {
  const UNet model = tiny_model();
  Rng rng(4);
  const int h = 70, w = 45;
  std::vector<float> slice(static_cast<std::size_t>(h * w));
  for (auto& v : slice) v = static_cast<float>(rng.uniform());
  int tiles = 0;
  const auto out = predict_slice(model, slice, h, w, [&](double) { ++tiles; });
  const auto plan = plan_tiles(h, w, 32);
  EXPECT_EQ(tiles, static_cast<int>(plan.size()));
  // Independent stitching: the last tile (in scan order) covering a pixel owns it.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      TileOrigin owner{-1, -1};
      for (const auto& o : plan)
        if (y >= o.y && y < o.y + 32 && x >= o.x && x < o.x + 32) owner = o;
      Tensor in({1, 1, 32, 32});
      for (int ty = 0; ty < 32; ++ty)
        for (int tx = 0; tx < 32; ++tx)
          in.at(0, 0, ty, tx) = slice[static_cast<std::size_t>(std::min(owner.y + ty, h - 1) * w +
                                                              std::min(owner.x + tx, w - 1))];
      // Only spot-check a sparse lattice plus the seams to bound runtime.
      const bool seam = y == 31 || y == 32 || y == 38 || y == 39 || x == 12 || x == 13 || x == 31 || x == 32;
      if (!seam && (y * w + x) % 97 != 0) continue;
      const auto logits = model.forward(in);
      ASSERT_EQ(out.at(y, x), sigmoid(logits.at(0, 0, y - owner.y, x - owner.x))) << y << "," << x;
    }
}

TEST(Predict, WorkerCountDoesNotChangeOutput) {
  const UNet model = tiny_model();
  ImageVolume v(5, 40, 36);
  Rng rng(5);
  for (auto& x : v.data) x = static_cast<float>(rng.uniform());
  const auto a = predict_volume(model, v, {1, {}});
  const auto b = predict_volume(model, v, {3, {}});
  EXPECT_EQ(a, b);
  for (float p : a.data) ASSERT_TRUE(p >= 0.0f && p <= 1.0f);
  EXPECT_THROW((void)predict_volume(model, ImageVolume(0, 4, 4)), Error);
  EXPECT_THROW((void)predict_volume(model, v, {0, {}}), Error);
}
