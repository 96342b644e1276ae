#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gridflow/rigid_motion.hpp"
#include "oracle.hpp"

using namespace gridflow;

namespace {

WeightedCorrespondences transformed_points(double theta, Vec2 t, int n, std::mt19937_64& rng, double noise = 0.0) {
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::normal_distribution<double> g(0.0, noise > 0.0 ? noise : 1.0);
  WeightedCorrespondences c;
  for (int i = 0; i < n; ++i) {
    const Vec2 p{u(rng), u(rng)};
    Vec2 q = oracle::rigid(theta, t, p);
    if (noise > 0.0) q += Vec2{g(rng), g(rng)};
    c.source.push_back(p);
    c.target.push_back(q);
    c.weights.push_back(1.0);
  }
  return c;
}

double weighted_cost(const WeightedCorrespondences& c, double theta, Vec2 t) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.source.size(); ++i) {
    s += c.weights[i] * (oracle::rigid(theta, t, c.source[i]) - c.target[i]).squared_norm();
  }
  return s;
}

}  // namespace

TEST_SUITE("rigid_motion") {
  TEST_CASE("closed-form examples") {
    std::mt19937_64 rng(31);
    const auto id = estimate_rigid(transformed_points(0.0, {}, 30, rng));
    CHECK(std::abs(id.theta) < 1e-12);
    CHECK(std::abs(id.t.x) < 1e-12);
    CHECK(std::abs(id.t.y) < 1e-12);

    const auto tr = estimate_rigid(transformed_points(0.0, {3.0, -1.0}, 30, rng));
    CHECK(tr.theta == doctest::Approx(0.0));
    CHECK(tr.t.x == doctest::Approx(3.0));
    CHECK(tr.t.y == doctest::Approx(-1.0));

    WeightedCorrespondences quarter;
    quarter.source = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}};
    quarter.target = {{0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    quarter.weights = {1.0, 1.0, 1.0};
    const auto q = estimate_rigid(quarter);
    CHECK(q.theta == doctest::Approx(std::numbers::pi / 2));
    CHECK(std::abs(q.t.x) < 1e-12);
    CHECK(std::abs(q.t.y) < 1e-12);
  }

  TEST_CASE("noiseless recovery") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> angle(-3.0, 3.0), shift(-10.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
      const double theta = angle(rng);
      const Vec2 t{shift(rng), shift(rng)};
      const auto est = estimate_rigid(transformed_points(theta, t, 20, rng));
      CHECK(std::abs(wrap_angle(est.theta - theta)) < 1e-9);
      CHECK(std::abs(est.t.x - t.x) < 1e-9);
      CHECK(std::abs(est.t.y - t.y) < 1e-9);
    }
  }

  TEST_CASE("noisy estimate is a stationary point of the weighted cost") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      auto c = transformed_points(0.3, {1.0, 2.0}, 40, rng, 0.5);
      for (auto& v : c.weights) v = w(rng);
      const auto est = estimate_rigid(c);
      const double base = weighted_cost(c, est.theta, est.t);
      // Any small perturbation increases the cost.
      for (double d : {1e-4, -1e-4}) {
        CHECK(weighted_cost(c, est.theta + d, est.t) > base);
        CHECK(weighted_cost(c, est.theta, est.t + Vec2{d, 0.0}) > base);
        CHECK(weighted_cost(c, est.theta, est.t + Vec2{0.0, d}) > base);
      }
    }
  }

  TEST_CASE("weights: scale invariance and zero-weight points") {
    std::mt19937_64 rng(34);
    auto c = transformed_points(0.2, {1.0, -2.0}, 25, rng, 0.3);
    std::uniform_real_distribution<double> w(0.1, 1.0);
    for (auto& v : c.weights) v = w(rng);
    const auto base = estimate_rigid(c);

    auto scaled = c;
    for (auto& v : scaled.weights) v *= 7.5;
    const auto s = estimate_rigid(scaled);
    CHECK(s.theta == doctest::Approx(base.theta).epsilon(1e-12));
    CHECK(s.t.x == doctest::Approx(base.t.x).epsilon(1e-12));
    CHECK(s.t.y == doctest::Approx(base.t.y).epsilon(1e-12));

    // Appending zero-weight points leaves the estimate bit-identical.
    auto extra = c;
    extra.source.push_back({100.0, -50.0});
    extra.target.push_back({-300.0, 7.0});
    extra.weights.push_back(0.0);
    CHECK(estimate_rigid(extra) == base);

    auto zero = c;
    for (auto& v : zero.weights) v = 0.0;
    CHECK_THROWS_AS(estimate_rigid(zero), EstimationError);
    WeightedCorrespondences same{{{1, 1}, {1, 1}}, {{2, 2}, {3, 3}}, {1, 1}};
    CHECK_THROWS_AS(estimate_rigid(same), EstimationError);
    auto negative = c;
    negative.weights[0] = -1.0;
    CHECK_THROWS_AS(estimate_rigid(negative), DomainError);
  }

  TEST_CASE("rotation is orthonormal and the inverse undoes the transform") {
    std::mt19937_64 rng(35);
    std::uniform_real_distribution<double> angle(-3.0, 3.0), u(-5.0, 5.0);
    for (int i = 0; i < 100; ++i) {
      const RigidTransform2D T{angle(rng), {u(rng), u(rng)}, FlowDirection::kForward};
      const Vec2 ex = T.rotate({1.0, 0.0}), ey = T.rotate({0.0, 1.0});
      CHECK(ex.x * ex.x + ex.y * ex.y == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(ex.x * ey.x + ex.y * ey.y == doctest::Approx(0.0).epsilon(1e-14));
      CHECK(ex.x * ey.y - ex.y * ey.x == doctest::Approx(1.0).epsilon(1e-14));
      const Vec2 p{u(rng), u(rng)};
      const Vec2 back = T.inverse().apply(T.apply(p));
      CHECK(back.x == doctest::Approx(p.x).epsilon(1e-12));
      CHECK(back.y == doctest::Approx(p.y).epsilon(1e-12));
      CHECK(T.inverse().direction == FlowDirection::kBackward);
      const auto c = compose(T, T.inverse());
      CHECK(std::abs(c.theta) < 1e-12);
      CHECK(std::abs(c.t.x) < 1e-12);
    }
    CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  }

  TEST_CASE("motion_flow examples") {
    const FlowField shift = motion_flow({0.0, {2.0, -1.0}, FlowDirection::kForward}, 5, 7);
    for (auto v : shift.displacement.values()) CHECK(v == Vec2{2.0, -1.0});
    CHECK(shift.direction == FlowDirection::kForward);

    // 90 degrees about the center of a 3x3 grid: the corner (0,0) -> (2,0).
    const FlowField q = motion_flow({std::numbers::pi / 2, {}, FlowDirection::kBackward}, 3, 3);
    CHECK(q(0, 0).x == doctest::Approx(2.0));
    CHECK(q(0, 0).y == doctest::Approx(0.0));
    CHECK(q(1, 1).x == doctest::Approx(0.0));
    CHECK(q.direction == FlowDirection::kBackward);

    const RigidTransform2D T{0.4, {1.5, -2.5}, FlowDirection::kForward};
    const FlowField f = motion_flow(T, 9, 11);
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 11; ++x) {
        const Vec2 p{x - 5.0, y - 4.0};
        const Vec2 expect = oracle::rigid(0.4, {1.5, -2.5}, p) - p;
        CHECK(f(x, y).x == doctest::Approx(expect.x).epsilon(1e-12));
        CHECK(f(x, y).y == doctest::Approx(expect.y).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("round trip through a flow field") {
    const RigidTransform2D T{-0.07, {3.25, 1.5}, FlowDirection::kBackward};
    const FlowField f = motion_flow(T, 21, 25);
    const auto est = estimate_rigid(correspondences_from_flow(f, ValidSet(21, 25, 1)));
    CHECK(est.theta == doctest::Approx(T.theta).epsilon(1e-12));
    CHECK(est.t.x == doctest::Approx(T.t.x).epsilon(1e-12));
    CHECK(est.t.y == doctest::Approx(T.t.y).epsilon(1e-12));
    CHECK(est.direction == FlowDirection::kBackward);
  }

  TEST_CASE("IRLS rejects a rigidly moving outlier block") {
    const int n = 30;
    const RigidTransform2D truth{0.05, {2.0, -1.0}, FlowDirection::kForward};
    FlowField f = motion_flow(truth, n, n);
    Field<std::uint8_t> outlier(n, n, 0);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < 9; ++x) {  // 30% of the columns
        f(x, y) += Vec2{-5.0, 4.0};
        outlier(x, y) = 1;
      }
    }
    const auto r = irls_estimate(f, ValidSet(n, n, 1), 5);
    CHECK(std::abs(r.transform.theta - truth.theta) < 1e-3);
    CHECK(std::abs(r.transform.t.x - truth.t.x) < 1e-3);
    CHECK(std::abs(r.transform.t.y - truth.t.y) < 1e-3);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (outlier(x, y)) CHECK(r.mask.weights(x, y) < 0.1);
        else CHECK(r.mask.weights(x, y) > 0.9);
      }
    }

    // A single iteration is the unweighted closed form.
    const auto one = irls_estimate(f, ValidSet(n, n, 1), 1);
    CHECK(one.transform == estimate_rigid(correspondences_from_flow(f, ValidSet(n, n, 1))));
    ValidSet none(n, n, 0);
    CHECK_THROWS_AS(irls_estimate(f, none, 3), EstimationError);
    CHECK_THROWS_AS(irls_estimate(f, ValidSet(n, n, 1), 0), ParameterError);
  }

  TEST_CASE("motion mask values") {
    CHECK(motion_mask_value(0.0) == 1.0);
    CHECK(motion_mask_value(1.0) == doctest::Approx(static_cast<double>(oracle::motion_mask(1.0L))).epsilon(1e-14));
    CHECK(motion_mask_value(1.0) == doctest::Approx(0.238406).epsilon(1e-6));
    CHECK(motion_mask_value(5.0) == doctest::Approx(static_cast<double>(oracle::motion_mask(5.0L))).epsilon(1e-12));
    CHECK(motion_mask_value(5.0) == doctest::Approx(9.0796e-5).epsilon(1e-4));
    CHECK(motion_mask_value(400.0) == 0.0);
    for (double v = 0.0; v < 10.0; v += 0.25) CHECK(motion_mask_value(v + 0.25) < motion_mask_value(v));
    CHECK(motion_mask_value(20.0) > 0.0);
    const double h = 1e-6;
    for (double s : {0.1, 0.5, 1.0, 2.0}) {
      const double fd = (motion_mask_value(s + h) - motion_mask_value(s - h)) / (2 * h);
      CHECK(motion_mask_derivative(s) == doctest::Approx(fd).epsilon(1e-7));
    }
    Field<Vec2> r(1, 2);
    r(0, 0) = {1.0, 0.0};
    r(1, 0) = {1.0, 2.0};
    const Mask m = motion_mask(r);
    CHECK(m.kind == MaskKind::kMotion);
    CHECK(m.weights(1, 0) == doctest::Approx(static_cast<double>(oracle::motion_mask(5.0L))).epsilon(1e-12));
    r(0, 0) = {std::nan(""), 0.0};
    CHECK_THROWS_AS(motion_mask(r), NumericalError);
  }

  TEST_CASE("spatial mask examples") {
    const Mask flat = Mask::uniform(6, 6, MaskKind::kMotion, 0.4);
    const Mask flat_mag = spatial_mask(flat);
    const Mask flat_comp = spatial_mask(flat, SpatialMaskMode::kComplement);
    for (double v : flat_mag.weights.values()) CHECK(v == 0.0);
    for (double v : flat_comp.weights.values()) CHECK(v == 1.0);

    Mask step = Mask::uniform(6, 8, MaskKind::kMotion, 1.0);
    for (int y = 0; y < 6; ++y) {
      for (int x = 4; x < 8; ++x) step.weights(x, y) = 0.0;
    }
    const Mask s = spatial_mask(step);
    CHECK(s.kind == MaskKind::kSpatial);
    double peak = 0.0;
    for (double v : s.weights.values()) {
      CHECK((v >= 0.0 && v <= 1.0));
      peak = std::max(peak, v);
    }
    CHECK(peak == 1.0);
    CHECK(s.weights(3, 2) == 1.0);
    CHECK(s.weights(4, 2) == 1.0);
    CHECK(s.weights(0, 2) == 0.0);
    CHECK(s.weights(7, 2) == 0.0);
    const Mask comp = spatial_mask(step, SpatialMaskMode::kComplement);
    for (std::size_t i = 0; i < comp.weights.size(); ++i) {
      CHECK(comp.weights.values()[i] == doctest::Approx(1.0 - s.weights.values()[i]));
    }
  }
}
