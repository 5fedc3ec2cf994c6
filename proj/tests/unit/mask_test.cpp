#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "jitwin/image_io.hpp"
#include "jitwin/mask.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace jitwin;

namespace {

BinaryMask grid(int w, int h, std::vector<std::uint8_t> bits) { return BinaryMask(w, h, std::move(bits)); }

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no jitwin::Error thrown";
  return ErrorCode::kIoError;
}

}  // namespace

TEST(BinaryMask, RejectsBadDimensions) {
  EXPECT_EQ(code_of([] { BinaryMask(0, 4); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([] { BinaryMask(3, 3, std::vector<std::uint8_t>(8)); }), ErrorCode::kDimensionMismatch);
}

TEST(RleEncode, AllBackground) {
  EXPECT_EQ(rle_encode(BinaryMask(4, 4)).counts, (std::vector<std::uint32_t>{16}));
}

TEST(RleEncode, SingleTopLeftPixel) {
  BinaryMask m(4, 4);
  m.set(0, 0);
  EXPECT_EQ(rle_encode(m).counts, (std::vector<std::uint32_t>{0, 1, 15}));
}

TEST(RleEncode, DiagonalTwoByTwo) {
  EXPECT_EQ(rle_encode(grid(2, 2, {1, 0, 0, 1})).counts, (std::vector<std::uint32_t>{0, 1, 2, 1}));
}

TEST(RleDecode, Examples) {
  EXPECT_EQ(rle_decode({4, 4, {16}}), BinaryMask(4, 4));
  EXPECT_EQ(rle_decode({4, 4, {0, 16}}), BinaryMask(4, 4, true));
  BinaryMask one(4, 4);
  one.set(0, 0);
  EXPECT_EQ(rle_decode({4, 4, {0, 1, 15}}), one);
}

TEST(RleDecode, SumMismatch) {
  EXPECT_EQ(code_of([] { rle_decode({4, 4, {15}}); }), ErrorCode::kSumMismatch);
  EXPECT_EQ(code_of([] { rle_decode({4, 4, {10, 7}}); }), ErrorCode::kSumMismatch);
}

TEST(RleProperty, RoundTripAndMatchesHandWalk) {
  std::mt19937 rng(11);
  for (int i = 0; i < 1000; ++i) {
    auto [w, h] = oracle::random_dims(rng);
    const BinaryMask m = oracle::random_mask(rng, w, h);
    const RleMask r = rle_encode(m);
    ASSERT_EQ(r.counts, oracle::rle(m));
    ASSERT_TRUE(rle_is_canonical(r));
    ASSERT_EQ(rle_decode(r), m);
  }
}

TEST(RleJson, RoundTripAndSchema) {
  RleMask r{3, 2, {1, 2, 3}};
  nlohmann::json j = r;
  EXPECT_EQ(j.dump(), R"({"counts":[1,2,3],"h":2,"w":3})");
  EXPECT_EQ(j.get<RleMask>().counts, r.counts);
  EXPECT_EQ(code_of([] { nlohmann::json::parse(R"({"w":1})").get<RleMask>(); }), ErrorCode::kSchemaError);
  EXPECT_EQ(code_of([] { nlohmann::json::parse(R"({"w":1,"h":1,"counts":[-1,2]})").get<RleMask>(); }),
            ErrorCode::kSchemaError);
}

TEST(MaskIou, Examples) {
  BinaryMask a(4, 4);
  a.fill_rect(0, 0, 2, 2);
  EXPECT_EQ(mask_iou(a, a), 1.0);
  BinaryMask far(4, 4);
  far.fill_rect(2, 2, 2, 2);
  EXPECT_EQ(mask_iou(a, far), 0.0);
  BinaryMask shifted(4, 4);
  shifted.fill_rect(1, 0, 2, 2);
  EXPECT_DOUBLE_EQ(mask_iou(a, shifted), 2.0 / 6.0);
  EXPECT_EQ(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
}

TEST(MaskIou, DimensionMismatch) {
  EXPECT_EQ(code_of([] { mask_iou(BinaryMask(2, 2), BinaryMask(2, 3)); }), ErrorCode::kDimensionMismatch);
}

TEST(MaskIouProperty, MatchesOracleAndIsSymmetric) {
  std::mt19937 rng(12);
  for (int i = 0; i < 500; ++i) {
    auto [w, h] = oracle::random_dims(rng);
    const BinaryMask a = oracle::random_mask(rng, w, h);
    const BinaryMask b = oracle::random_mask(rng, w, h);
    ASSERT_EQ(mask_iou(a, b), oracle::iou(a, b));
    ASSERT_EQ(mask_iou(a, b), mask_iou(b, a));
    if (!a.empty()) ASSERT_EQ(mask_iou(a, a), 1.0);
  }
}

TEST(MaskUnion, Examples) {
  BinaryMask m(3, 3);
  m.fill_rect(0, 0, 2, 1);
  std::vector<BinaryMask> one{m};
  EXPECT_EQ(mask_union(one, 3, 3), m);
  std::vector<BinaryMask> both{m, m.complement()};
  EXPECT_EQ(mask_union(both, 3, 3), BinaryMask(3, 3, true));
  BinaryMask p(3, 3), q(3, 3);
  p.set(0, 0);
  q.set(2, 2);
  std::vector<BinaryMask> pq{p, q};
  EXPECT_EQ(mask_union(pq, 3, 3).count(), 2u);
  EXPECT_EQ(mask_union({}, 3, 3), BinaryMask(3, 3));
  std::vector<BinaryMask> bad{BinaryMask(2, 2)};
  EXPECT_EQ(code_of([&] { mask_union(bad, 3, 3); }), ErrorCode::kDimensionMismatch);
}

TEST(MaskUnionProperty, AtLeastLargestMember) {
  std::mt19937 rng(13);
  for (int i = 0; i < 200; ++i) {
    auto [w, h] = oracle::random_dims(rng, 16);
    std::vector<BinaryMask> set;
    std::size_t largest = 0;
    for (int k = 0; k < 4; ++k) {
      set.push_back(oracle::random_mask(rng, w, h));
      largest = std::max(largest, set.back().count());
    }
    ASSERT_GE(mask_union(set, w, h).count(), largest);
  }
}

TEST(BboxIntersects, Examples) {
  EXPECT_TRUE(bbox_intersects({1, 1, 3, 3}, {1, 1, 3, 3}));
  EXPECT_FALSE(bbox_intersects({0, 0, 2, 2}, {2, 0, 2, 2}));
  EXPECT_TRUE(bbox_intersects({0, 0, 4, 4}, {2, 2, 4, 4}));
  EXPECT_FALSE(bbox_intersects({0, 0, 0, 4}, {0, 0, 4, 4}));
}

TEST(BboxIntersectsProperty, MatchesPixelOracle) {
  std::mt19937 rng(14);
  std::uniform_int_distribution<int> pos(0, 10), ext(0, 6);
  for (int i = 0; i < 2000; ++i) {
    Bbox a{pos(rng), pos(rng), ext(rng), ext(rng)};
    Bbox b{pos(rng), pos(rng), ext(rng), ext(rng)};
    ASSERT_EQ(bbox_intersects(a, b), oracle::rects_share_pixel(a, b));
  }
}

TEST(TightBbox, AndCentroid) {
  BinaryMask m(10, 8);
  m.fill_rect(2, 3, 5, 3);
  EXPECT_EQ(*tight_bbox(m), (Bbox{2, 3, 5, 3}));
  EXPECT_EQ(*mask_centroid(m), (Point{4.0, 4.0}));
  EXPECT_FALSE(tight_bbox(BinaryMask(2, 2)));
}

TEST(MaskFiles, PngAndJsonRoundTrip) {
  fixture::TempDir dir;
  std::mt19937 rng(15);
  const BinaryMask m = oracle::random_mask(rng, 17, 9);
  write_mask_file(dir / "m.png", m);
  write_mask_file(dir / "m.json", m);
  EXPECT_EQ(read_mask_file(dir / "m.png"), m);
  EXPECT_EQ(read_mask_file(dir / "m.json"), m);
  const Image img = read_png(dir / "m.png", 1);
  for (std::size_t i = 0; i < m.size(); ++i) ASSERT_EQ(img.pixels[i], m[i] ? 255 : 0);
}

TEST(Overlay, EmptyFullAndHalfMasks) {
  Image frame{4, 2, 3, std::vector<std::uint8_t>(24, 100)};
  EXPECT_EQ(overlay(frame, BinaryMask(4, 2), {255, 0, 0}, 0.5).pixels, frame.pixels);
  const Image full = overlay(frame, BinaryMask(4, 2, true), {255, 0, 0}, 0.5);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(full.at(x, y)[0], 178);
      EXPECT_EQ(full.at(x, y)[1], 50);
    }
  BinaryMask half(4, 2);
  half.fill_rect(0, 0, 2, 2);
  const Image h = overlay(frame, half, {255, 0, 0}, 0.5);
  int tinted = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) tinted += h.at(x, y)[0] != 100;
  EXPECT_EQ(tinted, 4);
}
