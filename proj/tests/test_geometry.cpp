#include <catch_amalgamated.hpp>

#include "markovgap/geometry.hpp"
#include "test_support.hpp"

using namespace markovgap;
using namespace markovgap::testing;

TEST_CASE("lattice mode ordering is a layer-major bijection") {
  const Lattice lat(5, 3, 2);
  std::vector<bool> seen(static_cast<std::size_t>(lat.n_modes()), false);
  for (Index l = 0; l < 2; ++l)
    for (Index y = 0; y < 3; ++y)
      for (Index x = 0; x < 5; ++x) {
        const Index m = lat.mode_of(x, y, l);
        REQUIRE(m < lat.n_modes());
        CHECK_FALSE(seen[static_cast<std::size_t>(m)]);
        seen[static_cast<std::size_t>(m)] = true;
        const auto s = lat.site_of(m);
        CHECK((s.x == x && s.y == y && s.layer == l));
      }
  CHECK(lat.mode_of(0, 0, 1) == 15);
  CHECK_THROWS_AS(lat.mode_of(5, 0), GeometryError);
  CHECK_THROWS_AS(Lattice(0, 3), GeometryError);
}

TEST_CASE("tripartition of an 8x8 lattice") {
  for (Index layers : {1, 2}) {
    const Lattice lat(8, 8, layers);
    const Tripartition tp = build_tripartition(lat, 2, 2, {3, 3}, 1);
    CHECK(static_cast<Index>(tp.a.size()) == 4 * layers);
    CHECK(static_cast<Index>(tp.b.size()) == 4 * layers);
    CHECK(static_cast<Index>(tp.c.size()) == lat.n_modes() - 8 * layers);
    CHECK(tp.south.x == 4.5);
    CHECK(tp.south.y == 2.5);
    CHECK(tp.north.x == 4.5);
    CHECK(tp.north.y == 4.5);
    CHECK(tp.region_of[static_cast<std::size_t>(lat.mode_of(3, 3))] == Region::A);
    CHECK(tp.region_of[static_cast<std::size_t>(lat.mode_of(5, 4))] == Region::B);
    CHECK(tp.region_of[static_cast<std::size_t>(lat.mode_of(7, 4))] == Region::C);
  }
}

TEST_CASE("region masks partition the modes", "[property]") {
  const Lattice lat(30, 26, 2);
  const Tripartition tp = build_tripartition(lat, 5, 7, {6, 8}, 6);
  CHECK(disjoint(tp.a, tp.b));
  CHECK(disjoint(tp.a, tp.c));
  CHECK(disjoint(tp.b, tp.c));
  CHECK(mask_union(mask_union(tp.a, tp.b), tp.c) == ModeMask::range(0, lat.n_modes()));
  CHECK(tp.a.size() == 2 * 25);
  CHECK(tp.b.size() == 2 * 49);
  // N sits at the top of the shorter block.
  CHECK(tp.north.y - tp.south.y == 5.0);
}

TEST_CASE("full-size tripartition and degenerate blocks") {
  const Lattice big(96, 96);
  const Tripartition tp = build_tripartition(big, 24, 24);
  CHECK(tp.a.size() == 576);
  CHECK(tp.b.size() == 576);
  CHECK(tp.margin() >= kDefaultMarginMin);

  const Tripartition thin = build_tripartition(Lattice(20, 20), 1, 1);
  CHECK(thin.a.size() == 1);
  CHECK(thin.north.y - thin.south.y == 1.0);
  CHECK(thin.north.x == thin.south.x);
}

TEST_CASE("tripartition errors") {
  const Lattice lat(16, 16);
  CHECK_THROWS_AS(build_tripartition(lat, 8, 8, {1, 1}, 0), GeometryError);
  CHECK_THROWS_AS(build_tripartition(lat, 2, 2, {-1, 3}, 0), GeometryError);
  CHECK_THROWS_AS(build_tripartition(lat, 4, 4, {2, 6}, 3), GeometryError);
  CHECK_THROWS_AS(build_tripartition(lat, 0, 4, {2, 6}, 0), GeometryError);
  CHECK_NOTHROW(build_tripartition(lat, 4, 4, {4, 6}, 4));
}

TEST_CASE("disk sizes around half-integer centres") {
  const Point c{0.5, 0.5};
  CHECK(count_disk_sites(c, 0) == 0);
  CHECK(count_disk_sites(c, 1) == 4);
  CHECK(count_disk_sites(c, 2) == 12);
  CHECK(count_disk_sites(c, 3) == 32);
  CHECK(count_disk_sites(c, 4) == 52);
  // Integer centre for comparison.
  CHECK(count_disk_sites({0.0, 0.0}, 4) == 49);
}

TEST_CASE("smoother supports") {
  const Lattice lat(40, 40, 2);
  const Tripartition tp = build_tripartition(lat, 12, 12);

  const SmootherSupport bare = smoother_support(tp, SmootherShape::two_circles, 0);
  CHECK(bare.empty());
  CHECK(smoother_support(tp, SmootherShape::joint, 0).empty());
  CHECK(smoother_support(tp, SmootherShape::strip, 0).empty());

  const SmootherSupport two = smoother_support(tp, SmootherShape::two_circles, 4);
  REQUIRE(two.masks.size() == 2);
  CHECK(two.masks[0].size() == 2 * 52);
  CHECK(two.masks[1].size() == 2 * 52);
  CHECK(disjoint(two.masks[0], two.masks[1]));

  const SmootherSupport joint = smoother_support(tp, SmootherShape::joint, 4);
  REQUIRE(joint.masks.size() == 1);
  CHECK(joint.masks[0] == mask_union(two.masks[0], two.masks[1]));

  const SmootherSupport strip = smoother_support(tp, SmootherShape::strip, 4);
  REQUIRE(strip.masks.size() == 1);
  CHECK(strip.masks[0].size() == 2 * 8 * 12);
  // The strip stays inside A and B for R <= L_A.
  CHECK(mask_difference(strip.masks[0], mask_union(tp.a, tp.b)).empty());

  // Every disk mode lies within R of its centre and contains A, B and C sites.
  for (std::size_t k = 0; k < 2; ++k) {
    const Point centre = k == 0 ? tp.north : tp.south;
    bool has_a = false, has_b = false, has_c = false;
    for (Index m : two.masks[k]) {
      const auto s = lat.site_of(m);
      const double dx = s.x - centre.x, dy = s.y - centre.y;
      CHECK(dx * dx + dy * dy <= 16.0);
      has_a |= tp.a.contains(m);
      has_b |= tp.b.contains(m);
      has_c |= tp.c.contains(m);
    }
    CHECK((has_a && has_b && has_c));
  }
}

TEST_CASE("circle masks mirror through the N-S axis", "[property]") {
  const Lattice lat(36, 30);
  const Tripartition tp = build_tripartition(lat, 10, 10);
  const SmootherSupport two = smoother_support(tp, SmootherShape::two_circles, 3);
  for (const auto& mask : two.masks) {
    for (Index m : mask) {
      const auto s = lat.site_of(m);
      const double mirrored = 2.0 * tp.interface_x() - static_cast<double>(s.x);
      CHECK(mask.contains(lat.mode_of(static_cast<Index>(mirrored), s.y)));
    }
  }
}

TEST_CASE("smoother support errors") {
  const Lattice lat(40, 40);
  const Tripartition tp = build_tripartition(lat, 6, 6);
  CHECK_NOTHROW(smoother_support(tp, SmootherShape::two_circles, 3));
  CHECK_THROWS_AS(smoother_support(tp, SmootherShape::two_circles, 4), GeometryError);
  CHECK_NOTHROW(smoother_support(tp, SmootherShape::joint, 4));
  CHECK_THROWS_AS(smoother_support(tp, SmootherShape::two_circles, -1), GeometryError);

  const Tripartition edge = build_tripartition(Lattice(20, 20), 4, 4, {2, 2}, 2);
  CHECK_THROWS_AS(smoother_support(edge, SmootherShape::two_circles, 4), GeometryError);
}

TEST_CASE("restrict composes over nested masks") {
  Rng rng(31);
  const Matrix c = random_mixed_covariance(rng, 6, 0.05, 0.95);
  const ModeMask m1{0, 2, 3, 5};
  const ModeMask m2{2, 5};
  CHECK(linalg::max_abs(restrict(restrict(c, m1), m1.relabel(m2)) - restrict(c, m2)) == 0.0);
  CHECK(restrict(c, ModeMask::range(0, 6)) == c);
  CHECK_THROWS_AS(restrict(c, ModeMask{6}), ValidationError);
}
