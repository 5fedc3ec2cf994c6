#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jitwin/synth.hpp"
#include "jitwin/twin.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace jitwin;
using fixture::rect_detection;
using fixture::unit;

namespace {

ObjectNode node_at(double x, double y, std::vector<double> emb) {
  ObjectNode n;
  n.h_spa.centroid = {x, y};
  n.h_vis.embedding = std::move(emb);
  return n;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FrameObservation frame(int t, std::vector<Detection> dets, int w = 64, int h = 48) {
  return {t, w, h, std::move(dets)};
}

std::map<std::string, TrackId> ids_by_category(const SceneGraph& g) {
  std::map<std::string, TrackId> out;
  for (const auto& [id, n] : g.nodes) out[n.category] = id;
  return out;
}

}  // namespace

TEST(Corr, IdenticalNodes) {
  const auto a = node_at(10, 10, {1, 0});
  EXPECT_NEAR(corr(a, a, 0.5, 100.0), 0.8176, 5e-5);
  EXPECT_DOUBLE_EQ(corr(a, a, 0.5, 100.0), logistic(1.5));
}

TEST(Corr, OrthogonalOneDiagonalApart) {
  // 3-4-5 frame so the diagonal is exactly 5.
  const auto a = node_at(0, 0, {1, 0});
  const auto b = node_at(3, 4, {0, 1});
  EXPECT_NEAR(corr(a, b, 0.5, 5.0), 0.5459, 5e-5);
  EXPECT_DOUBLE_EQ(corr(a, b, 0.5, 5.0), logistic(0.5 * std::exp(-1.0)));
}

TEST(Corr, LambdaZeroIsLogisticOfCosine) {
  const auto a = node_at(0, 0, {1, 1});
  const auto b = node_at(40, 9, {1, 0});
  EXPECT_DOUBLE_EQ(corr(a, b, 0.0, 50.0), logistic(1.0 / std::sqrt(2.0)));
}

TEST(Corr, DimensionMismatch) {
  try {
    corr(node_at(0, 0, {1}), node_at(0, 0, {1, 0}), 0.5, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(CorrProperty, OpenUnitIntervalAndSymmetric) {
  std::mt19937 rng(21);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> pos(0, 100), lam(0, 2);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> ea(4), eb(4);
    for (auto& v : ea) v = g(rng);
    for (auto& v : eb) v = g(rng);
    const auto a = node_at(pos(rng), pos(rng), ea);
    const auto b = node_at(pos(rng), pos(rng), eb);
    const double l = lam(rng);
    const double s = corr(a, b, l, 141.0);
    ASSERT_GT(s, 0.0);
    ASSERT_LT(s, 1.0);
    ASSERT_EQ(s, corr(b, a, l, 141.0));
  }
}

TEST(MatchObjects, SmallMotionKeepsId) {
  TwinState twin;
  twin.update(frame(0, {rect_detection(0, "cup", {10, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  twin.update(frame(1, {rect_detection(0, "cup", {12, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  ASSERT_EQ(twin.current().nodes.size(), 1u);
  const auto& n = twin.current().nodes.begin()->second;
  EXPECT_EQ(n.track_id, 0);
  EXPECT_EQ(n.h_temp.age, 2);
  EXPECT_EQ(n.h_temp.velocity.x, 2.0);
  EXPECT_EQ(n.h_temp.velocity.y, 0.0);
}

TEST(MatchObjects, CrossingObjectsFollowEmbeddings) {
  TwinState twin;
  // "a" starts left moving right, "b" starts right moving left; at frame 1
  // each sits closer to the other's old position.
  twin.update(frame(0, {rect_detection(0, "a", {10, 20, 5, 5}, 64, 48, 1.0, unit(2, 0)),
                        rect_detection(1, "b", {40, 20, 5, 5}, 64, 48, 1.0, unit(2, 1))}));
  const auto before = ids_by_category(twin.current());
  twin.update(frame(1, {rect_detection(0, "b", {14, 20, 5, 5}, 64, 48, 1.0, unit(2, 1)),
                        rect_detection(1, "a", {36, 20, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  EXPECT_EQ(ids_by_category(twin.current()), before);
}

TEST(MatchObjects, EmptyPreviousGivesFreshIdsInDetOrder) {
  SceneGraph empty;
  SceneGraph curr = build_frame_graph(frame(0, {rect_detection(0, "x", {0, 0, 2, 2}, 64, 48),
                                                rect_detection(1, "y", {9, 9, 2, 2}, 64, 48),
                                                rect_detection(2, "z", {30, 9, 2, 2}, 64, 48)}));
  TrackId next = 0;
  const auto g = match_objects(empty, curr, TwinConfig{}, next);
  EXPECT_EQ(next, 3);
  for (const auto& [id, n] : g.nodes) EXPECT_EQ(id, n.det_id);
}

TEST(MatchObjects, BelowThresholdGetsFreshId) {
  TwinConfig cfg;
  cfg.tau_match = 0.9;  // identical nodes only reach logistic(1.5)
  TwinState twin(cfg);
  twin.update(frame(0, {rect_detection(0, "cup", {10, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  twin.update(frame(1, {rect_detection(0, "cup", {10, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  EXPECT_EQ(twin.current().nodes.begin()->first, 1);
}

TEST(ComputeRelations, BehindPair) {
  SceneGraph g = build_frame_graph(frame(0, {rect_detection(0, "A", {10, 10, 10, 10}, 64, 48, 5.0),
                                             rect_detection(1, "B", {15, 15, 10, 10}, 64, 48, 3.0)}));
  g = compute_relations(g, {RelationLabel::kBehind, RelationLabel::kInFrontOf});
  std::vector<RelationEdge> want{{0, 1, RelationLabel::kBehind, 1.0}, {1, 0, RelationLabel::kInFrontOf, 1.0}};
  EXPECT_EQ(g.edges, want);
}

TEST(ComputeRelations, FarApartAndSingleNode) {
  SceneGraph g = build_frame_graph(frame(0, {rect_detection(0, "A", {0, 0, 5, 5}, 64, 48, 2.0),
                                             rect_detection(1, "B", {50, 40, 5, 5}, 64, 48, 2.0)}));
  g = compute_relations(g, all_relation_labels());
  for (const auto& e : g.edges) {
    EXPECT_NE(e.label, RelationLabel::kBehind);
    EXPECT_NE(e.label, RelationLabel::kOverlaps);
  }
  SceneGraph one = build_frame_graph(frame(0, {rect_detection(0, "A", {0, 0, 5, 5}, 64, 48)}));
  EXPECT_TRUE(compute_relations(one, all_relation_labels()).edges.empty());
}

TEST(ComputeRelations, DepthLabelWithoutDepth) {
  SceneGraph g = build_frame_graph(frame(0, {rect_detection(0, "A", {0, 0, 5, 5}, 64, 48, std::nullopt)}));
  try {
    compute_relations(g, {RelationLabel::kBehind});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingCapability);
  }
  EXPECT_NO_THROW(compute_relations(g, {RelationLabel::kNear, RelationLabel::kLeftOf}));
}

TEST(TwinUpdate, WindowAfterTenFrames) {
  TwinState twin;
  EXPECT_TRUE(twin.empty());
  twin.update(frame(0, {}));
  EXPECT_EQ(twin.window().size(), 1u);
  for (int t = 1; t < 10; ++t) twin.update(frame(t, {}));
  ASSERT_EQ(twin.window().size(), 7u);
  EXPECT_EQ(twin.window().front().frame_index, 3);
  EXPECT_EQ(twin.window().back().frame_index, 9);
  EXPECT_EQ(twin.graph_at(3), &twin.window().front());
  EXPECT_EQ(twin.graph_at(2), nullptr);
}

TEST(TwinUpdate, NonContiguousFrame) {
  TwinState twin;
  twin.update(frame(0, {}));
  try {
    twin.update(frame(2, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonContiguousFrame);
  }
}

TEST(TwinUpdate, DtUpdateOffGivesFreshIds) {
  TwinConfig cfg;
  cfg.dt_update = false;
  TwinState twin(cfg);
  twin.update(frame(0, {rect_detection(0, "cup", {10, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  twin.update(frame(1, {rect_detection(0, "cup", {10, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
  EXPECT_EQ(twin.window()[0].nodes.begin()->first, 0);
  EXPECT_EQ(twin.window()[1].nodes.begin()->first, 1);
}

TEST(TwinUpdate, TemporalIntegrationOffKeepsOneGraph) {
  TwinConfig cfg;
  cfg.temporal_integration = false;
  TwinState twin(cfg);
  for (int t = 0; t < 5; ++t) {
    twin.update(frame(t, {rect_detection(0, "cup", {10 + t, 10, 5, 5}, 64, 48, 1.0, unit(2, 0))}));
    ASSERT_EQ(twin.window().size(), 1u);
  }
  // Identity still carries across frames; only the history is truncated.
  EXPECT_EQ(twin.current().nodes.begin()->first, 0);
}

TEST(TwinProperty, WindowBoundHolds) {
  for (int w = 0; w <= 8; ++w) {
    TwinConfig cfg;
    cfg.window = w;
    TwinState twin(cfg);
    for (int t = 0; t < 30; ++t) {
      twin.update(frame(t, {}));
      ASSERT_EQ(twin.window().size(), static_cast<std::size_t>(std::min(t, w) + 1));
      ASSERT_EQ(twin.window().front().frame_index, std::max(0, t - w));
    }
  }
}

TEST(TwinProperty, LinearMotionIdentityPreserved) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const auto r = synth_scenario(random_tracking_scenario(seed));
    TwinState twin;
    std::map<std::string, TrackId> first_id;  // synthetic object -> track
    for (std::size_t t = 0; t < r.trace.frames.size(); ++t) {
      twin.update(r.trace.frames[t]);
      for (const auto& [id, n] : twin.current().nodes) {
        const std::string owner = r.det_owner[t].at(n.det_id);
        auto [it, fresh] = first_id.emplace(owner, id);
        ASSERT_EQ(it->second, id) << "seed " << seed << " frame " << t;
      }
    }
  }
}

TEST(TwinProperty, EmbeddingScaleDoesNotChangeAssignment) {
  for (unsigned seed = 30; seed < 40; ++seed) {
    const auto r = synth_scenario(random_tracking_scenario(seed));
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> k(0.1, 10.0);
    TwinState plain, scaled;
    for (auto obs : r.trace.frames) {
      plain.update(obs);
      for (auto& d : obs.detections)
        for (auto& v : d.embedding) v *= k(rng);
      scaled.update(obs);
      ASSERT_EQ(plain.current().ids(), scaled.current().ids());
      for (const auto& [id, n] : plain.current().nodes) ASSERT_EQ(scaled.current().nodes.at(id).det_id, n.det_id);
    }
  }
}

TEST(TwinProperty, BehindAntisymmetry) {
  std::mt19937 rng(22);
  for (int i = 0; i < 200; ++i) {
    const auto g = compute_relations(oracle::random_graph(rng), all_relation_labels());
    auto has = [&](TrackId s, TrackId d, RelationLabel l) {
      return std::find(g.edges.begin(), g.edges.end(), RelationEdge{s, d, l, 1.0}) != g.edges.end();
    };
    for (const auto& [a, na] : g.nodes)
      for (const auto& [b, nb] : g.nodes) {
        if (a == b) continue;
        ASSERT_EQ(has(a, b, RelationLabel::kBehind), oracle::behind(na, nb));
        if (has(a, b, RelationLabel::kBehind)) {
          ASSERT_TRUE(has(b, a, RelationLabel::kInFrontOf));
          ASSERT_FALSE(has(b, a, RelationLabel::kBehind));
        }
      }
  }
}

TEST(Snapshot, Shape) {
  SceneGraph g = build_frame_graph(frame(4, {rect_detection(0, "cup", {0, 0, 3, 3}, 64, 48, std::nullopt)}));
  const auto j = snapshot_json(g);
  EXPECT_EQ(j["frame_index"], 4);
  EXPECT_TRUE(j["nodes"][0]["z"].is_null());
  EXPECT_EQ(j["nodes"][0]["centroid"], nlohmann::json({1.0, 1.0}));
}
