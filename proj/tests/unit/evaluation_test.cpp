#include <gtest/gtest.h>

#include <random>

#include "jitwin/evaluation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace jitwin;

namespace {

BinaryMask square(int w, int h, int x, int y, int side) {
  BinaryMask m(w, h);
  m.fill_rect(x, y, side, side);
  return m;
}

BinaryMask upscale2(const BinaryMask& m) {
  BinaryMask out(m.width() * 2, m.height() * 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(x, y, m.at(x / 2, y / 2));
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no jitwin::Error thrown";
  return ErrorCode::kIoError;
}

}  // namespace

TEST(RegionSimilarity, Examples) {
  const std::vector<BinaryMask> gt{square(8, 8, 1, 1, 4), square(8, 8, 2, 2, 3)};
  EXPECT_EQ(region_similarity(gt, gt), 1.0);
  const std::vector<BinaryMask> empty{BinaryMask(8, 8), BinaryMask(8, 8)};
  EXPECT_EQ(region_similarity(empty, gt), 0.0);
  // Second frame: 2x2 square against a 2x2 shifted by one column, IoU 2/6.
  BinaryMask a(4, 4), b(4, 4);
  a.fill_rect(0, 0, 2, 2);
  b.fill_rect(1, 0, 2, 2);
  const std::vector<BinaryMask> p2{a, a}, g2{a, b};
  EXPECT_DOUBLE_EQ(region_similarity(p2, g2), (1.0 + 1.0 / 3.0) / 2.0);
}

TEST(RegionSimilarity, LengthMismatch) {
  const std::vector<BinaryMask> one{BinaryMask(2, 2)};
  const std::vector<BinaryMask> two{BinaryMask(2, 2), BinaryMask(2, 2)};
  EXPECT_EQ(code_of([&] { region_similarity(one, two); }), ErrorCode::kLengthMismatch);
  EXPECT_EQ(code_of([&] { contour_accuracy(one, two); }), ErrorCode::kLengthMismatch);
  const std::vector<BinaryMask> none;
  EXPECT_EQ(code_of([&] { region_similarity(none, none); }), ErrorCode::kLengthMismatch);
}

TEST(ContourAccuracy, Examples) {
  const std::vector<BinaryMask> gt{square(32, 32, 5, 5, 10)};
  EXPECT_EQ(contour_accuracy(gt, gt), 1.0);
  const std::vector<BinaryMask> empty{BinaryMask(32, 32)};
  EXPECT_EQ(contour_accuracy(empty, gt), 0.0);
  const std::vector<BinaryMask> shifted{square(32, 32, 6, 5, 10)};
  EXPECT_EQ(contour_accuracy(shifted, gt, 2), 1.0);
  EXPECT_EQ(frame_contour_f(shifted[0], gt[0], 2), oracle::contour_f(shifted[0], gt[0], 2));
}

TEST(ContourAccuracy, RadiusFromDiagonal) {
  EXPECT_EQ(boundary_radius(32, 32), 1);    // 0.008 * 45.25 = 0.36
  EXPECT_EQ(boundary_radius(854, 480), 8);  // 0.008 * 979.6 = 7.84
}

TEST(Boundary, FrameEdgeCountsAsBackground) {
  const BinaryMask full(3, 3, true);
  const BinaryMask b = boundary(full);
  EXPECT_EQ(b.count(), 8u);
  EXPECT_FALSE(b.at(1, 1));
}

TEST(MetricProperty, OracleEquivalence) {
  std::mt19937 rng(61);
  for (int i = 0; i < 1000; ++i) {
    auto [w, h] = oracle::random_dims(rng);
    const BinaryMask a = oracle::random_mask(rng, w, h);
    const BinaryMask b = oracle::random_mask(rng, w, h);
    ASSERT_EQ(mask_iou(a, b), oracle::iou(a, b));
    const int r = boundary_radius(w, h);
    ASSERT_NEAR(frame_contour_f(a, b), oracle::contour_f(a, b, r), 1e-12);
    const int r3 = std::uniform_int_distribution<int>(0, 4)(rng);
    ASSERT_NEAR(frame_contour_f(a, b, r3), oracle::contour_f(a, b, r3), 1e-12);
  }
}

TEST(MetricProperty, SymmetricUnderSwap) {
  std::mt19937 rng(62);
  for (int i = 0; i < 300; ++i) {
    auto [w, h] = oracle::random_dims(rng);
    const std::vector<BinaryMask> a{oracle::random_mask(rng, w, h)};
    const std::vector<BinaryMask> b{oracle::random_mask(rng, w, h)};
    ASSERT_EQ(region_similarity(a, b), region_similarity(b, a));
    ASSERT_DOUBLE_EQ(contour_accuracy(a, b), contour_accuracy(b, a));
  }
}

TEST(MetricProperty, DoublingResolutionKeepsJ) {
  std::mt19937 rng(63);
  for (int i = 0; i < 300; ++i) {
    auto [w, h] = oracle::random_dims(rng, 20);
    const BinaryMask a = oracle::random_mask(rng, w, h);
    const BinaryMask b = oracle::random_mask(rng, w, h);
    ASSERT_EQ(mask_iou(upscale2(a), upscale2(b)), mask_iou(a, b));
  }
}

TEST(Aggregate, CellMeans) {
  auto r = aggregate({{"a", Category::kSemantic, 1, 0.8, 0.5, 3}});
  EXPECT_DOUBLE_EQ(r.cell(Category::kSemantic, 1)->j, 0.8);
  r = aggregate({{"a", Category::kSpatial, 2, 0.6, 0.1, 3}, {"b", Category::kSpatial, 2, 0.8, 0.3, 9}});
  EXPECT_DOUBLE_EQ(r.cell(Category::kSpatial, 2)->j, 0.7);
  EXPECT_DOUBLE_EQ(r.cell(Category::kSpatial, 2)->f, 0.2);
  EXPECT_EQ(r.cell(Category::kSpatial, 2)->count, 2);
  EXPECT_FALSE(r.cell(Category::kTemporal, 3));
}

TEST(RenderTable, ColumnOrder) {
  const auto r = aggregate({{"a", Category::kTemporal, 3, 0.25, 0.5, 1}, {"b", Category::kSemantic, 1, 1.0, 1.0, 1}});
  const auto table = render_table(r);
  const auto sem = table.find("Semantic");
  const auto spa = table.find("Spatial");
  const auto tem = table.find("Temporal");
  ASSERT_NE(sem, std::string::npos);
  EXPECT_LT(sem, spa);
  EXPECT_LT(spa, tem);
  const auto j_row = table.substr(table.find("\nJ") + 1);
  const std::string first_line = j_row.substr(0, j_row.find('\n'));
  EXPECT_LT(first_line.find("1.000"), first_line.find("0.250"));
  EXPECT_EQ(std::count(first_line.begin(), first_line.end(), '-'), 7);
}

TEST(Manifest, RoundTripAndErrors) {
  Manifest m{"/data", {{"s1", "frames/s1", 4, "segment the cup", Category::kSpatial, 2, "masks/s1"}}};
  const auto again = parse_manifest(manifest_to_json(m), "/data");
  EXPECT_EQ(manifest_to_json(again), manifest_to_json(m));
  auto bad = manifest_to_json(m);
  bad["samples"][0]["category"] = "vibes";
  EXPECT_EQ(code_of([&] { parse_manifest(bad, "/"); }), ErrorCode::kSchemaError);
  bad = manifest_to_json(m);
  bad["samples"][0]["level"] = 4;
  EXPECT_EQ(code_of([&] { parse_manifest(bad, "/"); }), ErrorCode::kSchemaError);
  bad = manifest_to_json(m);
  bad["samples"].push_back(bad["samples"][0]);
  EXPECT_EQ(code_of([&] { parse_manifest(bad, "/"); }), ErrorCode::kSchemaError);
  EXPECT_EQ(code_of([&] { parse_manifest(nlohmann::json::object(), "/"); }), ErrorCode::kSchemaError);
}

TEST(PredictionIndex, PrefixesAndFrames) {
  PredictionIndex idx;
  EXPECT_EQ(idx.prefix_for("x"), "q0000");
  EXPECT_EQ(idx.prefix_for("y"), "q0001");
  EXPECT_EQ(idx.prefix_for("x"), "q0000");
  idx.queries["x"] = {"q0000_f0000.json"};
  const auto back = index_from_json(index_to_json(idx));
  EXPECT_EQ(back.order, idx.order);
  EXPECT_EQ(back.queries.at("x"), idx.queries.at("x"));
  EXPECT_EQ(frame_of_file("q0003_f0012.png"), 12);
  EXPECT_FALSE(frame_of_file("readme.txt"));
}

TEST(EvaluateDataset, MissingPredictionsCountAsEmpty) {
  fixture::TempDir dir;
  const BinaryMask gt = square(16, 16, 2, 2, 6);
  std::filesystem::create_directories(dir / "masks/s1");
  for (int f = 0; f < 2; ++f) write_mask_file(dir / ("masks/s1/" + frame_file_stem(f) + ".json"), gt);
  Manifest m{dir.path(), {{"s1", "", 3, "q", Category::kSemantic, 1, "masks/s1"}}};
  std::filesystem::create_directories(dir / "pred");
  write_mask_file(dir / "pred/q0000_f0000.json", gt);
  PredictionIndex idx;
  idx.prefix_for("s1");
  idx.queries["s1"] = {"q0000_f0000.json"};
  write_json_file(dir / "pred/predictions.json", index_to_json(idx));
  const auto r = evaluate_dataset(m, dir / "pred");
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].frames, 2);  // frame 2 has no annotation
  EXPECT_DOUBLE_EQ(r.samples[0].j, 0.5);
  EXPECT_DOUBLE_EQ(r.samples[0].f, 0.5);
}
