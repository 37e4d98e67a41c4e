#include "digame/error.hpp"
#include "digame/numerics.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace digame;

namespace {

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

void check_complement(const Mat& r, const Vec& v) {
  REQUIRE(r.rows() == v.size() - 1);
  REQUIRE(r.cols() == v.size());
  CHECK(oracle::inf_norm(r * v) <= 1e-12 * std::max(1.0, v.norm()));
  CHECK(oracle::inf_norm(r * r.transpose() - Mat::Identity(r.rows(), r.rows())) <= 1e-12);
}

}  // namespace

TEST_CASE("grid rejects bad steps and locates times") {
  CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 10), Error);
  CHECK_THROWS_AS(TimeGrid(0.0, -0.1, 10), Error);
  CHECK_THROWS_AS(TimeGrid(0.0, 0.1, 0), Error);
  const TimeGrid g(1.0, 0.01, 101);
  CHECK(g.t_end() == doctest::Approx(2.0));
  CHECK(g.index_of(1.5).value() == 50);
  CHECK_FALSE(g.index_of(1.505).has_value());
  CHECK_FALSE(g.index_of(2.5).has_value());
}

TEST_CASE("complement of a unit axis") {
  const Mat r = orthonormal_complement(v3(0, 0, 1));
  check_complement(r, v3(0, 0, 1));
  const Mat expected = (Mat(2, 3) << 1, 0, 0, 0, 1, 0).finished();
  CHECK(oracle::projection_residual(r, expected) < 1e-14);
}

TEST_CASE("complement of a generic vector matches an svd oracle") {
  const Vec v = v3(0.5, -0.25, 1.0);
  const Mat r = orthonormal_complement(v);
  check_complement(r, v);
  CHECK(oracle::projection_residual(r, oracle::complement_by_svd(v)) < 1e-12);
}

TEST_CASE("zero vector keeps the previous basis") {
  const Mat prev = (Mat(2, 3) << 1, 0, 0, 0, 1, 0).finished();
  const Mat r = orthonormal_complement(v3(0, 0, 0), &prev);
  CHECK(r == prev);
}

TEST_CASE("zero vector without a previous basis falls back to the last axis") {
  const Mat r = orthonormal_complement(v3(0, 0, 0));
  check_complement(r, v3(0, 0, 1));
  CHECK(oracle::inf_norm(r - orthonormal_complement(v3(0, 0, 1))) == 0.0);
}

TEST_CASE("aligned complement stays close to prev") {
  const Mat prev = (Mat(2, 3) << 1, 0, 0, 0, 1, 0).finished();
  const Vec v = v3(0.01, -0.02, 1.0);
  const Mat r = orthonormal_complement(v, &prev);
  check_complement(r, v);
  CHECK((r - prev).norm() < 0.05);
}

TEST_CASE("property: complements are orthonormal and orthogonal") {
  oracle::Gen gen(7);
  for (int trial = 0; trial < 500; ++trial) {
    const long k = gen.integer(2, 7);
    Vec v = gen.vec(k, -3.0, 3.0);
    if (trial % 50 == 0) v *= 1e6;
    if (trial % 75 == 0) v *= 1e-9;
    const Mat r = orthonormal_complement(v);
    check_complement(r, v);
    const Vec w = gen.vec(k, -3.0, 3.0);
    const Mat aligned = orthonormal_complement(w, &r);
    check_complement(aligned, w);
  }
}

TEST_CASE("property: continuity needs alignment") {
  // v(tau) sweeps through v_0 = 0 where the Householder sign flips.
  const double h = 1e-3;
  auto v_at = [](double tau) { return v3(std::cos(tau), std::sin(tau), 1.0 + 0.5 * tau); };
  double aligned_rate = 0.0;
  double raw_rate = 0.0;
  Mat prev = orthonormal_complement(v_at(0.0));
  Mat prev_raw = prev;
  for (int k = 1; k <= 3000; ++k) {
    const double tau = k * h;
    const Mat cur = orthonormal_complement(v_at(tau), &prev);
    const Mat raw = orthonormal_complement(v_at(tau));
    aligned_rate = std::max(aligned_rate, (cur - prev).norm() / h);
    raw_rate = std::max(raw_rate, (raw - prev_raw).norm() / h);
    prev = cur;
    prev_raw = raw;
  }
  CHECK(aligned_rate < 5.0);
  CHECK(raw_rate > 100.0);
}

TEST_CASE("householder reflector is orthogonal and maps n to an axis") {
  oracle::Gen gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec n = gen.unit(gen.integer(2, 6));
    const Mat hm = householder_reflector(n);
    CHECK(oracle::inf_norm(hm * hm.transpose() - Mat::Identity(n.size(), n.size())) < 1e-13);
    CHECK(oracle::inf_norm(hm - hm.transpose()) < 1e-15);
    const Vec hn = hm * n;
    CHECK(std::abs(std::abs(hn(0)) - 1.0) < 1e-13);
    CHECK(hn.tail(n.size() - 1).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("newton on an affine residual takes one step") {
  const Mat a = (Mat(2, 2) << 3, 1, -1, 2).finished();
  const Vec b = (Vec(2) << 1, 4).finished();
  const NewtonResult r = newton_solve([&](const Vec& u) { return Vec(a * u - b); },
                                      [&](const Vec&) { return a; }, Vec::Zero(2), NewtonOptions{});
  CHECK(r.iterations == 1);
  CHECK(oracle::inf_norm(a * r.u - b) <= 1e-12);
}

TEST_CASE("property: affine residuals converge in one step") {
  oracle::Gen gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const long d = gen.integer(1, 6);
    const Mat a = gen.orthogonal(d) * gen.vec(d, 0.5, 2.0).asDiagonal() * gen.orthogonal(d);
    const Vec b = gen.vec(d, -1.0, 1.0);
    const NewtonResult r = newton_solve([&](const Vec& u) { return Vec(a * u - b); },
                                        [&](const Vec&) { return a; }, gen.vec(d, -1.0, 1.0), NewtonOptions{});
    CHECK(r.iterations == 1);
    CHECK(oracle::inf_norm(a * r.u - b) <= 1e-12);
  }
}

TEST_CASE("newton iterates on u^2 - 4 from 3") {
  std::vector<double> visited;
  auto residual = [](const Vec& u) { return Vec::Constant(1, u(0) * u(0) - 4.0); };
  auto jacobian = [&](const Vec& u) {
    visited.push_back(u(0));
    return Mat::Constant(1, 1, 2.0 * u(0));
  };
  const NewtonResult r = newton_solve(residual, jacobian, Vec::Constant(1, 3.0), NewtonOptions{});
  CHECK(std::abs(r.u(0) - 2.0) <= 1e-10);
  REQUIRE(visited.size() >= 3);
  // hand iteration: x1 = 3 - 5/6, x2 = x1 - (x1^2 - 4)/(2 x1)
  const double x1 = 3.0 - 5.0 / 6.0;
  const double x2 = x1 - (x1 * x1 - 4.0) / (2.0 * x1);
  CHECK(visited[0] == 3.0);
  CHECK(visited[1] == doctest::Approx(x1).epsilon(1e-15));
  CHECK(visited[2] == doctest::Approx(x2).epsilon(1e-15));
  CHECK(visited[1] == doctest::Approx(2.1666666).epsilon(1e-7));
  CHECK(visited[2] == doctest::Approx(2.0064102).epsilon(1e-7));
}

TEST_CASE("newton error paths") {
  auto residual = [](const Vec& u) { return Vec::Constant(1, u(0) * u(0) - 4.0); };
  SUBCASE("zero jacobian") {
    try {
      newton_solve(residual, [](const Vec&) { return Mat::Zero(1, 1); }, Vec::Constant(1, 3.0), NewtonOptions{});
      FAIL("expected SingularJacobian");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SingularJacobian);
    }
  }
  SUBCASE("iteration cap") {
    NewtonOptions o;
    o.max_iter = 2;
    try {
      newton_solve(residual, [](const Vec& u) { return Mat::Constant(1, 1, 2.0 * u(0)); }, Vec::Constant(1, 3.0), o);
      FAIL("expected NoConvergence");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoConvergence);
    }
  }
  SUBCASE("trust radius") {
    NewtonOptions o;
    o.trust_radius = 0.5;
    try {
      newton_solve(residual, [](const Vec& u) { return Mat::Constant(1, 1, 2.0 * u(0)); }, Vec::Constant(1, 3.0), o);
      FAIL("expected LeftLocalBranch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LeftLocalBranch);
    }
  }
}

TEST_CASE("rk4 examples") {
  const Vec one = Vec::Constant(1, 1.0);
  CHECK(rk4_step([](double, const Vec& p) { return Vec(Vec::Zero(p.size())); }, 0.0, one, 0.1)(0) == 1.0);
  CHECK(rk4_step([](double, const Vec& p) { return Vec(Vec::Ones(p.size())); }, 0.0, one, 0.1)(0) == 1.1);
  // stages for phi' = phi, h = 0.1: k1 = 1, k2 = 1.05, k3 = 1.0525, k4 = 1.10525
  const double k1 = 1.0, k2 = 1.05, k3 = 1.0525, k4 = 1.10525;
  const double expected = 1.0 + 0.1 / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  const double got = rk4_step([](double, const Vec& p) { return p; }, 0.0, one, 0.1)(0);
  CHECK(got == doctest::Approx(expected).epsilon(1e-15));
  CHECK(got == doctest::Approx(1.1051708333).epsilon(1e-10));
  CHECK(std::abs(got - std::exp(0.1)) < 1e-7);
}

TEST_CASE("rk4 global error on exponential growth") {
  Vec p = Vec::Constant(1, 1.0);
  for (int k = 0; k < 100; ++k) p = rk4_step([](double, const Vec& x) { return x; }, k * 0.01, p, 0.01);
  CHECK(std::abs(p(0) - std::numbers::e) / std::numbers::e <= 1e-8);
}

TEST_CASE("rk4 reports non-finite states") {
  try {
    rk4_step([](double, const Vec& x) { return Vec(x * 1e308); }, 0.0, Vec::Constant(1, 1e10), 1.0);
    FAIL("expected NonFiniteState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteState);
  }
}

TEST_CASE("central differences") {
  const double h = 0.1;
  std::vector<double> sq, cube, flat;
  for (int k = 0; k <= 20; ++k) {
    const double t = -1.0 + k * h;
    sq.push_back(t * t);
    cube.push_back(t * t * t);
    flat.push_back(3.5);
  }
  for (long k = 1; k < 20; ++k) {
    const double t = -1.0 + k * h;
    CHECK(central_difference(sq, h, k) == doctest::Approx(2.0 * t).epsilon(1e-12));
  }
  for (long k = 0; k <= 20; ++k) CHECK(central_difference(flat, h, k) == 0.0);
  CHECK(central_difference(cube, h, 10) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(central_difference(sq, h, 0) == doctest::Approx((sq[1] - sq[0]) / h));
  CHECK(central_difference(sq, h, 20) == doctest::Approx((sq[20] - sq[19]) / h));
  const std::vector<double> two{1.0, 3.0};
  CHECK(central_difference(two, 0.5, 0) == 4.0);
  CHECK(central_difference(two, 0.5, 1) == 4.0);
}
