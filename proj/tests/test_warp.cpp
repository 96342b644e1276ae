#include <doctest.h>

#include <cmath>
#include <random>

#include "gridflow/warp.hpp"
#include "oracle.hpp"

using namespace gridflow;

namespace {

ScalarField square() {
  ScalarField f(2, 2);
  f(0, 0) = 0.0;
  f(1, 0) = 1.0;
  f(0, 1) = 2.0;
  f(1, 1) = 3.0;
  return f;
}

GridMap single_layer(const ScalarField& f) {
  GridMap m(f.rows(), f.cols(), 0.15);
  m.add_layer("v", f);
  return m;
}

}  // namespace

TEST_SUITE("warp") {
  TEST_CASE("bilinear examples") {
    const ScalarField f = square();
    CHECK(bilinear_sample(f, {0.5, 0.5}).value == doctest::Approx(1.5));
    CHECK(bilinear_sample(f, {0.25, 0.0}).value == doctest::Approx(0.25));
    CHECK(bilinear_sample(f, {1.0, 1.0}).value == 3.0);
    CHECK(bilinear_sample(f, {1.0, 1.0}).in_bounds);
    CHECK_FALSE(bilinear_sample(f, {1.0001, 0.5}).in_bounds);
    CHECK(bilinear_sample(f, {-0.1, 0.5}).value == 0.0);
    for (double x : {0.0, 0.3, 0.7, 1.0}) {
      for (double y : {0.0, 0.1, 0.9, 1.0}) CHECK(bilinear_sample(f, {x, y}).value == doctest::Approx(oracle::bilinear(f, x, y)));
    }
  }

  TEST_CASE("bilinear matches the corner-weight oracle") {
    std::mt19937_64 rng(21);
    const ScalarField f = oracle::random_field(13, 17, rng);
    std::uniform_real_distribution<double> ux(0.0, 16.0), uy(0.0, 12.0);
    for (int i = 0; i < 1000; ++i) {
      const double x = ux(rng), y = uy(rng);
      CHECK(bilinear_sample(f, {x, y}).value == doctest::Approx(oracle::bilinear(f, x, y)).epsilon(1e-12));
    }
    // Grid points reproduce the stored values exactly.
    for (int y = 0; y < f.rows(); ++y) {
      for (int x = 0; x < f.cols(); ++x) CHECK(bilinear_sample(f, {double(x), double(y)}).value == f(x, y));
    }
  }

  TEST_CASE("warp_backward examples") {
    ScalarField row(1, 3);
    row(0, 0) = 0.0;
    row(1, 0) = 1.0;
    row(2, 0) = 2.0;
    const GridMap m = single_layer(row);

    const auto same = warp_backward(m, FlowField(1, 3, FlowDirection::kForward));
    CHECK(same.warped.layer("v") == row);
    for (auto v : same.valid.values()) CHECK(v == 1);

    const auto half = warp_backward(m, FlowField(1, 3, FlowDirection::kForward, {0.5, 0.0}));
    CHECK(half.warped.layer("v")(0, 0) == doctest::Approx(0.5));
    CHECK(half.warped.layer("v")(1, 0) == doctest::Approx(1.5));
    CHECK(half.valid(0, 0) == 1);
    CHECK(half.valid(1, 0) == 1);
    CHECK(half.valid(2, 0) == 0);
    CHECK(half.warped.layer("v")(2, 0) == 0.0);

    CHECK_THROWS_AS(warp_backward(m, FlowField(2, 3, FlowDirection::kForward)), ShapeError);
  }

  TEST_CASE("valid set needs source occupancy and an in-bounds target") {
    std::mt19937_64 rng(22);
    const int n = 12;
    const FlowField flow = oracle::off_grid_flow(n, n, FlowDirection::kForward, rng, 3);
    ValidSet occ(n, n, 0);
    std::bernoulli_distribution b(0.5);
    for (auto& v : occ.values()) v = b(rng);
    const ValidSet valid = valid_set(occ, flow);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double mx = x + flow(x, y).x, my = y + flow(x, y).y;
        const bool inside = mx >= 0.0 && my >= 0.0 && mx <= n - 1 && my <= n - 1;
        CHECK(valid(x, y) == ((occ(x, y) && inside) ? 1 : 0));
      }
    }
    CHECK_THROWS_AS(valid_set(ValidSet(3, 3, 1), flow), ShapeError);
  }

  TEST_CASE("occupancy follows the reflection count") {
    GridMap m(2, 2, 0.15);
    auto& c = m.add_layer(layer::kReflectionCount);
    c(1, 0) = 3.0;
    const ValidSet occ = occupancy(m);
    CHECK(occ(1, 0) == 1);
    CHECK(occ(0, 0) == 0);
    CHECK(occ(1, 1) == 0);
  }

  TEST_CASE("sample_gradient matches finite differences off grid lines") {
    std::mt19937_64 rng(23);
    const ScalarField f = oracle::random_field(10, 10, rng);
    const FlowField pos = oracle::off_grid_flow(10, 10, FlowDirection::kForward, rng, 0);
    const double h = 1e-6;
    int checked = 0;
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 9; ++x) {
        if (checked == 100) break;
        const Vec2 c{x + pos(x, y).x, y + pos(x, y).y};
        const Vec2 g = sample_gradient(f, c);
        const double gx = (oracle::bilinear(f, c.x + h, c.y) - oracle::bilinear(f, c.x - h, c.y)) / (2 * h);
        const double gy = (oracle::bilinear(f, c.x, c.y + h) - oracle::bilinear(f, c.x, c.y - h)) / (2 * h);
        CHECK(g.x == doctest::Approx(gx).epsilon(1e-6));
        CHECK(g.y == doctest::Approx(gy).epsilon(1e-6));
        ++checked;
      }
    }
    CHECK(checked == 81);
    CHECK(sample_gradient(f, {-1.0, 2.0}) == Vec2{});
  }

  TEST_CASE("clamped sampling continues the border value") {
    const ScalarField f = square();
    CHECK(clamped_sample(f, {-3.0, 0.0}) == 0.0);
    CHECK(clamped_sample(f, {5.0, 0.5}) == doctest::Approx(2.0));
    CHECK(clamped_sample(f, {0.5, -2.0}) == doctest::Approx(0.5));
    const Vec2 g = clamped_sample_gradient(f, {5.0, 0.5});
    CHECK(g.x == 0.0);
    CHECK(g.y == doctest::Approx(2.0));
    const Vec2 inner = clamped_sample_gradient(f, {0.5, 0.5});
    CHECK(inner.x == doctest::Approx(1.0));
    CHECK(inner.y == doctest::Approx(2.0));
  }

  TEST_CASE("one-sided slopes at a kink") {
    ScalarField row(1, 3);
    row(0, 0) = 0.0;
    row(1, 0) = 1.0;
    row(2, 0) = 5.0;
    const auto mid = clamped_sample_one_sided(row, {1.0, 0.0});
    CHECK(mid.lower.x == doctest::Approx(1.0));
    CHECK(mid.upper.x == doctest::Approx(4.0));
    const auto left = clamped_sample_one_sided(row, {0.0, 0.0});
    CHECK(left.lower.x == 0.0);
    CHECK(left.upper.x == doctest::Approx(1.0));
    const auto right = clamped_sample_one_sided(row, {2.0, 0.0});
    CHECK(right.lower.x == doctest::Approx(4.0));
    CHECK(right.upper.x == 0.0);
    const auto inside = clamped_sample_one_sided(row, {1.5, 0.0});
    CHECK(inside.lower.x == inside.upper.x);
    const auto outside = clamped_sample_one_sided(row, {-1.0, 0.0});
    CHECK(outside.lower.x == 0.0);
    CHECK(outside.upper.x == 0.0);

    // One-sided difference quotients agree with the reported slopes.
    std::mt19937_64 rng(24);
    const ScalarField f = oracle::random_field(6, 6, rng);
    const double h = 1e-7;
    for (int y = 1; y < 5; ++y) {
      for (int x = 1; x < 5; ++x) {
        const Vec2 c{double(x), y + 0.37};
        const auto g = clamped_sample_one_sided(f, c);
        CHECK(g.upper.x == doctest::Approx((clamped_sample(f, {c.x + h, c.y}) - clamped_sample(f, c)) / h).epsilon(1e-5));
        CHECK(g.lower.x == doctest::Approx((clamped_sample(f, c) - clamped_sample(f, {c.x - h, c.y})) / h).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("integer shifts commute with warping") {
    std::mt19937_64 rng(25);
    const int n = 14;
    const GridMap m = single_layer(oracle::random_field(n, n, rng));
    for (int a = -2; a <= 2; ++a) {
      for (int b = -2; b <= 2; ++b) {
        const auto once = warp_backward(m, FlowField(n, n, FlowDirection::kForward, {double(a + b), 0.0}));
        const auto first = warp_backward(m, FlowField(n, n, FlowDirection::kForward, {double(b), 0.0}));
        const auto twice = warp_backward(first.warped, FlowField(n, n, FlowDirection::kForward, {double(a), 0.0}));
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const bool inner = x + a >= 0 && x + a < n && x + a + b >= 0 && x + a + b < n;
            if (inner) CHECK(twice.warped.layer("v")(x, y) == once.warped.layer("v")(x, y));
          }
        }
      }
    }
  }

  TEST_CASE("direction helpers") {
    CHECK(opposite(FlowDirection::kForward) == FlowDirection::kBackward);
    CHECK(opposite(FlowDirection::kBackward) == FlowDirection::kForward);
    CHECK(std::string(to_string(FlowDirection::kForward)) == "2<-1");
  }
}
