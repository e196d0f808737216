#include <gtest/gtest.h>

#include "mitonet/zfilter.hpp"
#include "oracles.hpp"

using namespace mito;

namespace {

template <class T>
Volume<T> random_volume(Rng& rng, int d, int h, int w, bool binary) {
  Volume<T> v(d, h, w);
  for (auto& x : v.data) x = binary ? static_cast<T>(rng.bernoulli(0.4)) : static_cast<T>(rng.uniform());
  return v;
}

template <class T>
Volume<T> run_stream(const Volume<T>& v, int depth, std::size_t* peak = nullptr) {
  ZFilterStream<T> s(v.height, v.width, ZFilterSpec{depth});
  Volume<T> out(v.depth, v.height, v.width);
  int z = 0;
  auto take = [&](std::vector<Raster<T>> ready) {
    for (auto& r : ready) std::copy(r.data.begin(), r.data.end(), out.slice(z++).begin());
  };
  for (int k = 0; k < v.depth; ++k) {
    take(s.push(v.slice(k)));
    if (peak) *peak = std::max(*peak, s.buffered());
  }
  take(s.finish());
  EXPECT_EQ(z, v.depth);
  return out;
}

}  // namespace

TEST(ZFilter, MatchesSortingOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(12));
    const int depth = 1 + 2 * static_cast<int>(rng.below(5));
    const bool binary = trial % 2 == 0;
    if (binary) {
      const auto v = random_volume<std::uint8_t>(rng, d, 3, 4, true);
      ASSERT_EQ(zfilter(v, ZFilterSpec{depth}), oracle::zmedian(v, depth));
    } else {
      const auto v = random_volume<float>(rng, d, 3, 4, false);
      ASSERT_EQ(zfilter(v, ZFilterSpec{depth}), oracle::zmedian(v, depth));
    }
  }
}

TEST(ZFilter, StreamingAgreesWithWholeVolume) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(20));
    const int depth = 1 + 2 * static_cast<int>(rng.below(8));
    const auto v = random_volume<float>(rng, d, 4, 5, false);
    std::size_t peak = 0;
    EXPECT_EQ(run_stream(v, depth, &peak), zfilter(v, ZFilterSpec{depth}));
    EXPECT_LE(peak, static_cast<std::size_t>(depth + 1));
  }
}

TEST(ZFilter, DepthOneIsIdentity) {
  Rng rng(3);
  const auto v = random_volume<float>(rng, 6, 5, 5, false);
  EXPECT_EQ(zfilter(v, ZFilterSpec{1}), v);
  EXPECT_EQ(run_stream(v, 1), v);
}

TEST(ZFilter, RejectsEvenOrNonPositiveDepth) {
  Volume<float> v(3, 2, 2);
  EXPECT_THROW((void)zfilter(v, ZFilterSpec{4}), Error);
  EXPECT_THROW((void)zfilter(v, ZFilterSpec{0}), Error);
  EXPECT_THROW((void)zfilter(v, ZFilterSpec{-3}), Error);
}

TEST(ZFilter, EdgesReplicateEndSlices) {
  // Column 1,0,0 with d=3: first slice sees {1,1,0} -> 1.
  Volume<std::uint8_t> v(3, 1, 1);
  v.data = {1, 0, 0};
  EXPECT_EQ(zfilter(v, ZFilterSpec{3}).data, (std::vector<std::uint8_t>{1, 0, 0}));
  v.data = {0, 1, 0};
  EXPECT_EQ(zfilter(v, ZFilterSpec{3}).data, (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(ZFilter, RemovesTransientKeepsPersistent) {
  LabelVolume v(10, 12, 12);
  for (int z = 2; z < 7; ++z)
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) v.at(z, y, x) = 1;
  v.at(4, 9, 9) = v.at(4, 9, 10) = v.at(4, 10, 9) = 1;
  const auto f = zfilter(v, ZFilterSpec{3});
  EXPECT_EQ(f.at(4, 9, 9), 0);
  EXPECT_EQ(f.at(4, 10, 9), 0);
  for (int z = 0; z < 10; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) EXPECT_EQ(f.at(z, y, x), v.at(z, y, x));
}
