#include <gtest/gtest.h>

#include <random>

#include "roadsurvey/geoalign.hpp"
#include "support.hpp"

using namespace roadsurvey;

namespace {

GpsTrack two_fix_track() { return GpsTrack({{0.0, {35.0, 135.0}}, {10.0, {35.0, 135.001}}}); }

ImageRecord located(std::string id, double t, GeoPoint p) { return {std::move(id), t, p, {}, {}}; }

}  // namespace

TEST(GpsTrack, RejectsNonIncreasingTimes) {
  EXPECT_THROW(GpsTrack({{1.0, {0, 0}}, {1.0, {0, 0}}}), InvalidArgument);
  EXPECT_THROW(GpsTrack({{1.0, {0, 0}}, {NAN, {0, 0}}}), InvalidArgument);
  EXPECT_THROW(GpsTrack(std::vector<GpsFix>{{1.0, {95, 0}}}), InvalidArgument);
}

TEST(SmoothTrack, ZeroSigmaIsIdentity) {
  GpsTrack t({{0, {35.0, 135.0}}, {1, {35.0001, 135.0003}}, {2, {35.0, 135.0}}});
  auto s = smooth_track(t, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(s.fixes()[i].point, t.fixes()[i].point);
  EXPECT_THROW(smooth_track(t, -1.0), InvalidArgument);
}

TEST(SmoothTrack, ConstantTrackUnchanged) {
  std::vector<GpsFix> fixes;
  for (int i = 0; i < 20; ++i) fixes.push_back({i * 0.7, {34.6913, 135.1956}});
  GpsTrack t(fixes);
  for (double sigma : {0.3, 1.0, 2.0, 50.0}) {
    auto s = smooth_track(t, sigma);
    for (const auto& f : s.fixes()) EXPECT_EQ(f.point, (GeoPoint{34.6913, 135.1956}));
  }
}

TEST(SmoothTrack, ThreeFixKernel) {
  GpsTrack t({{0, {0.0, 0.0}}, {1, {0.0, 0.001}}, {2, {0.0, 0.0}}});
  auto s = smooth_track(t, 1.0);
  // Oracle: 0.001 / (1 + 2 exp(-1/2)), evaluated with mpmath at 40 digits.
  EXPECT_NEAR(s.fixes()[1].point.lon, 4.518627618776060e-4, 1e-18);
  // End fixes: window {0,1,2} with weights 1, e^-0.5, e^-2.
  const double w1 = std::exp(-0.5), w2 = std::exp(-2.0);
  EXPECT_NEAR(s.fixes()[0].point.lon, 0.001 * w1 / (1 + w1 + w2), 1e-18);
  EXPECT_EQ(s.fixes()[1].t, 1.0);
}

TEST(SmoothTrack, TruncatesAtThreeSigma) {
  // Fix at dt = 3.5 sigma must not contribute.
  GpsTrack t({{0, {0.0, 0.0}}, {3.5, {0.0, 1.0}}});
  auto s = smooth_track(t, 1.0);
  EXPECT_EQ(s.fixes()[0].point.lon, 0.0);
  EXPECT_EQ(s.fixes()[1].point.lon, 1.0);
}

TEST(SmoothTrack, PreservesCountTimesAndHull) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 2e-5);
  std::vector<GpsFix> fixes;
  double t = 0;
  for (int i = 0; i < 300; ++i) {
    t += std::uniform_real_distribution<double>(0.2, 1.5)(rng);
    fixes.push_back({t, {35.0 + i * 1e-5 + noise(rng), 135.0 + noise(rng)}});
  }
  GpsTrack track(fixes);
  const double sigma = 2.0;
  auto s = smooth_track(track, sigma);
  ASSERT_EQ(s.size(), track.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s.fixes()[i].t, fixes[i].t);
    double lo_lat = 1e9, hi_lat = -1e9, lo_lon = 1e9, hi_lon = -1e9;
    for (const auto& f : fixes)
      if (std::abs(f.t - fixes[i].t) <= 3 * sigma) {
        lo_lat = std::min(lo_lat, f.point.lat);
        hi_lat = std::max(hi_lat, f.point.lat);
        lo_lon = std::min(lo_lon, f.point.lon);
        hi_lon = std::max(hi_lon, f.point.lon);
      }
    EXPECT_GE(s.fixes()[i].point.lat, lo_lat - 1e-12);
    EXPECT_LE(s.fixes()[i].point.lat, hi_lat + 1e-12);
    EXPECT_GE(s.fixes()[i].point.lon, lo_lon - 1e-12);
    EXPECT_LE(s.fixes()[i].point.lon, hi_lon + 1e-12);
  }
}

TEST(InterpolatePosition, Examples) {
  auto t = two_fix_track();
  auto mid = interpolate_position(t, 5.0, 1.0);
  EXPECT_DOUBLE_EQ(mid.lat, 35.0);
  EXPECT_NEAR(mid.lon, 135.0005, 1e-12);
  EXPECT_EQ(interpolate_position(t, 0.0, 1.0), (GeoPoint{35.0, 135.0}));
  EXPECT_THROW(interpolate_position(t, 12.0, 1.0), OutOfTrackSpan);
  EXPECT_EQ(interpolate_position(t, 10.5, 1.0), (GeoPoint{35.0, 135.001}));
  EXPECT_EQ(interpolate_position(t, -1.0, 1.0), (GeoPoint{35.0, 135.0}));
  EXPECT_THROW(interpolate_position(t, -1.01, 1.0), OutOfTrackSpan);
  EXPECT_THROW(interpolate_position(GpsTrack{}, 0.0, 1.0), OutOfTrackSpan);
}

TEST(InterpolatePosition, ReproducesFixesExactly) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1e-3, 1e-3);
  std::vector<GpsFix> fixes;
  for (int i = 0; i < 100; ++i) fixes.push_back({1.6e9 + i * 0.37, {34.7 + d(rng), 135.2 + d(rng)}});
  GpsTrack t(fixes);
  for (const auto& f : fixes) EXPECT_EQ(interpolate_position(t, f.t, 0.0), f.point);
}

TEST(SubsampleImages, EveryThreeMetersKeepsEveryFourth) {
  // 3 m steps along the equator (lon step from the mpmath oracle).
  const double step = 2.69796109117361386e-5;
  std::vector<ImageRecord> ims;
  for (int i = 0; i < 20; ++i) ims.push_back(located("i" + std::to_string(i), i, {0.0, i * step}));
  auto kept = subsample_images(ims, 10.0);
  std::vector<std::string> ids;
  for (const auto& k : kept) ids.push_back(k.image_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"i0", "i4", "i8", "i12", "i16"}));
}

TEST(SubsampleImages, StationaryKeepsFirstAndZeroKeepsAll) {
  std::vector<ImageRecord> ims;
  for (int i = 0; i < 10; ++i) ims.push_back(located("s" + std::to_string(i), i, {35.0, 135.0}));
  EXPECT_EQ(subsample_images(ims, 10.0).size(), 1u);
  EXPECT_EQ(subsample_images(ims, 0.0).size(), 10u);
  EXPECT_TRUE(subsample_images(std::vector<ImageRecord>{}, 10.0).empty());
  ims[3].point.reset();
  EXPECT_THROW(subsample_images(ims, 10.0), InvalidArgument);
}

TEST(SubsampleImages, KeptSpacingReconstructs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> step(0.0, 4e-5);
  std::vector<ImageRecord> ims;
  GeoPoint p{35.0, 135.0};
  for (int i = 0; i < 500; ++i) {
    p.lat += step(rng) * (i % 7 == 0 ? 0.0 : 1.0);
    p.lon += step(rng);
    ims.push_back(located(std::to_string(i), i, p));
  }
  auto kept = subsample_images(ims, 10.0);
  std::size_t k = 0;
  double cum = 0.0;
  for (std::size_t i = 0; i < ims.size(); ++i) {
    if (i > 0) cum += haversine_m(*ims[i - 1].point, *ims[i].point);
    if (k < kept.size() && kept[k].image_id == ims[i].image_id) {
      if (k > 0) {
        EXPECT_GE(cum, 10.0);
      }
      cum = 0.0;
      ++k;
    } else {
      EXPECT_LT(cum, 10.0) << "image " << i << " should have been kept";
    }
  }
  EXPECT_EQ(k, kept.size());
}

namespace {

RoadGraph single_segment(GeoPoint a, GeoPoint b) {
  RoadGraph g;
  g.add_node({1, a});
  g.add_node({2, b});
  g.add_straight_edge(7, 1, 2, std::max(0.001, haversine_m(a, b)));
  return g;
}

}  // namespace

TEST(ProjectToEdge, Examples) {
  auto g = single_segment({0.0, 0.0}, {0.0, 0.001});
  auto on = project_to_edge({0.0, 0.0005}, g, 25.0);
  ASSERT_TRUE(on);
  EXPECT_EQ(on->edge_id, 7);
  EXPECT_NEAR(on->dist_m, 0.0, 1e-9);

  // Foot of the perpendicular lies inside the segment; oracle 0.0005 deg of
  // latitude on the 6 371 008.8 m sphere = 55.5975401 m.
  auto off = project_to_edge({0.0005, 0.0005}, g, 100.0);
  ASSERT_TRUE(off);
  EXPECT_NEAR(off->dist_m, 55.59754011676646, 1e-6);
  EXPECT_FALSE(project_to_edge({0.0005, 0.0005}, g, 25.0));

  // Beyond the east endpoint: distance to that endpoint.
  auto beyond = project_to_edge({0.0, 0.0015}, g, 100.0);
  ASSERT_TRUE(beyond);
  EXPECT_NEAR(beyond->dist_m, 0.0005 * deg2rad(1.0) * kEarthRadiusM, 1e-6);

  EXPECT_THROW(project_to_edge({0, 0}, RoadGraph{}, 25.0), EmptyGraph);
}

TEST(ProjectToEdge, TwinEdgesTieToLowerId) {
  RoadGraph g;
  g.add_node({1, {34.70012, 135.19931}});
  g.add_node({2, {34.70371, 135.20457}});
  g.add_straight_edge(9, 2, 1, 600);
  g.add_straight_edge(4, 1, 2, 600);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lat(34.700, 34.704), lon(135.199, 135.205);
  for (int i = 0; i < 200; ++i) {
    auto m = project_to_edge({lat(rng), lon(rng)}, g, 1e9);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->edge_id, 4);
  }
}

namespace {

// Independent planar oracle: endpoint distances and the perpendicular height
// via the cross product, in the same local projection.
double oracle_segment_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double ky = deg2rad(1.0) * kEarthRadiusM;
  const double kx = std::cos(deg2rad(p.lat)) * ky;
  const double ax = (a.lon - p.lon) * kx, ay = (a.lat - p.lat) * ky;
  const double bx = (b.lon - p.lon) * kx, by = (b.lat - p.lat) * ky;
  const double abx = bx - ax, aby = by - ay;
  double best = std::min(std::hypot(ax, ay), std::hypot(bx, by));
  const double len = std::hypot(abx, aby);
  if (len > 0) {
    const double along = (-ax * abx - ay * aby) / len;
    if (along > 0 && along < len) best = std::min(best, std::abs(ax * aby - ay * abx) / len);
  }
  return best;
}

}  // namespace

TEST(ProjectToEdge, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> lat(35.0, 35.004), lon(135.0, 135.004);
  for (int trial = 0; trial < 20; ++trial) {
    RoadGraph g;
    for (int i = 0; i < 6; ++i) g.add_node({i, {lat(rng), lon(rng)}});
    for (int e = 0; e < 8; ++e) {
      const int a = static_cast<int>(rng() % 6), b = (a + 1 + static_cast<int>(rng() % 5)) % 6;
      Edge edge{e, a, b, 1.0, {g.node(a).point, {lat(rng), lon(rng)}, g.node(b).point}, {}};
      edge.distance_m = polyline_length_m(edge.geometry);
      g.add_edge(edge);
    }
    for (int q = 0; q < 50; ++q) {
      GeoPoint p{lat(rng), lon(rng)};
      double want = 1e18;
      for (const auto& e : g.edges())
        for (std::size_t k = 1; k < e.geometry.size(); ++k)
          want = std::min(want, oracle_segment_distance(p, e.geometry[k - 1], e.geometry[k]));
      auto m = project_to_edge(p, g, 1e9);
      ASSERT_TRUE(m);
      EXPECT_NEAR(m->dist_m, want, 1e-6);
    }
  }
}

TEST(Align, EmptyImagesGiveEmptyResult) {
  auto g = single_segment({35.0, 135.0}, {35.0, 135.001});
  auto r = align(two_fix_track(), std::vector<ImageRecord>{}, g);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.dropped_out_of_span + r.dropped_unassigned + r.dropped_by_spacing, 0u);
}

TEST(Align, SingleImageAtFixTime) {
  auto g = single_segment({35.0, 135.0}, {35.0, 135.001});
  std::vector<ImageRecord> ims{{"only", 0.0, {}, {}, {}}};
  auto r = align(two_fix_track(), ims, g, AlignConfig{0.0, 10.0, 25.0, 1.0});
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].edge_id, 7);
  EXPECT_NEAR(*r.records[0].dist_to_edge_m, 0.0, 1e-9);
  EXPECT_EQ(r.records[0].point, (GeoPoint{35.0, 135.0}));
}

TEST(Align, CountsDropsAndSortsByTime) {
  auto g = single_segment({35.0, 135.0}, {35.0, 135.001});
  GpsTrack track({{0, {35.0, 135.0}}, {10, {35.0, 135.001}}, {20, {35.01, 135.001}}});
  std::vector<ImageRecord> ims{{"c", 9.0, {}, {}, {}},  {"a", 1.0, {}, {}, {}},
                               {"late", 40, {}, {}, {}}, {"b", 5.0, {}, {}, {}},
                               {"far", 19.0, {}, {}, {}}};
  auto r = align(track, ims, g, AlignConfig{0.0, 10.0, 25.0, 1.0});
  EXPECT_EQ(r.dropped_out_of_span, 1u);
  EXPECT_EQ(r.dropped_unassigned, 1u);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[0].image_id, "a");
  EXPECT_EQ(r.records[1].image_id, "b");
  EXPECT_EQ(r.records[2].image_id, "c");
}

TEST(FileFormats, GpsAndImageCsv) {
  auto track = read_gps_csv("t,lat,lon\n0,35.0,135.0\n1.5, 35.0001 ,135.0001\n\n");
  ASSERT_EQ(track.size(), 2u);
  EXPECT_EQ(track.fixes()[1].t, 1.5);
  auto reordered = read_gps_csv("lon,lat,t\r\n135.0,35.0,0\r\n");
  EXPECT_EQ(reordered.fixes()[0].point, (GeoPoint{35.0, 135.0}));
  try {
    read_gps_csv("t,lat,lon\n0,35,135\n0,35,135\n");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(read_gps_csv("time,lat,lon\n0,35,135\n"), SchemaError);
  EXPECT_THROW(read_gps_csv("t,lat,lon\n0,abc,135\n"), SchemaError);
  EXPECT_THROW(read_gps_csv("t,lat,lon\n0,35\n"), SchemaError);
  EXPECT_THROW(read_gps_csv(""), SchemaError);

  auto ims = read_image_index_csv("image_id,t\nimg_001,1.25\nimg_002,1.35\n");
  ASSERT_EQ(ims.size(), 2u);
  EXPECT_EQ(ims[1].image_id, "img_002");
  EXPECT_FALSE(ims[0].point);
}

TEST(FileFormats, AlignedJsonlRoundTrip) {
  ImageRecord r{"img_1", 12.5, GeoPoint{35.1, 135.2}, 3, 1.25};
  const auto text = aligned_to_jsonl(std::vector<ImageRecord>{r});
  EXPECT_EQ(text,
            "{\"dist_to_edge_m\":1.25,\"edge_id\":3,\"image_id\":\"img_1\",\"lat\":35.1,\"lon\":135.2,"
            "\"t\":12.5}\n");
  auto back = aligned_from_jsonl(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].image_id, "img_1");
  EXPECT_EQ(*back[0].edge_id, 3);
  EXPECT_THROW(aligned_from_jsonl("{\"image_id\": 1}\n"), SchemaError);
  EXPECT_THROW(aligned_from_jsonl("not json\n"), SchemaError);
}
