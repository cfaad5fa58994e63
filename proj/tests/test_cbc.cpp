#include <cmath>
#include <random>

#include <doctest.h>

#include "ltvchase/cbc.hpp"
#include "oracles.hpp"

using namespace ltvchase;
using testing::Interval;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Polytope point_set(const Vector& c) {
  Polytope p(static_cast<int>(c.size()));
  for (int j = 0; j < c.size(); ++j) {
    Vector e = Vector::Zero(c.size());
    e[j] = 1.0;
    p.add(Halfspace(e, c[j]));
    p.add(Halfspace(-e, -c[j]));
  }
  return p;
}

Polytope centered_box(const Vector& c, double r) {
  Polytope p(static_cast<int>(c.size()));
  for (int j = 0; j < c.size(); ++j) {
    Vector e = Vector::Zero(c.size());
    e[j] = 1.0;
    p.add(Halfspace(e, c[j] + r));
    p.add(Halfspace(-e, r - c[j]));
  }
  return p;
}

WorkHistory intervals(const std::vector<Interval>& sets, double anchor, int cap = kDefaultWindowCap) {
  WorkHistory h(Vector::Constant(1, anchor), cap);
  for (const auto& iv : sets) h.append(testing::interval_polytope(iv));
  return h;
}

constexpr ConjugateForm kForms[] = {ConjugateForm::Reduced, ConjugateForm::Full};

}  // namespace

TEST_CASE("work_conjugate closed forms") {
  for (auto form : kForms) {
    WorkHistory origin(Vector::Zero(2));
    origin.append(point_set(Vector::Zero(2)));
    CHECK(std::abs(work_conjugate(origin, vec({0.6, 0.8}), form)) < 1e-6);

    WorkHistory point(Vector::Zero(2));
    point.append(point_set(vec({1.0, 0.0})));
    CHECK(work_conjugate(point, vec({0.0, 1.0}), form) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(work_conjugate(point, vec({1.0, 0.0}), form)) < 1e-6);

    const auto two = intervals({{2.0, 3.0}, {5.0, 6.0}}, 0.0);
    CHECK(std::abs(work_conjugate(two, vec({1.0}), form)) < 1e-6);
    CHECK(work_conjugate(two, vec({-1.0}), form) == doctest::Approx(10.0).epsilon(1e-6));
  }
}

TEST_CASE("work_conjugate rejects long directions and empty requests") {
  const auto two = intervals({{2.0, 3.0}}, 0.0);
  CHECK_THROWS_AS(work_conjugate(two, vec({1.1})), BadDims);
  CHECK_THROWS_AS(work_conjugate(two, vec({1.0, 0.0})), BadDims);
  WorkHistory bad(Vector::Zero(1));
  Polytope empty(1);
  empty.add(Halfspace(vec({1.0}), 0.0));
  empty.add(Halfspace(vec({-1.0}), -1.0));
  bad.append(empty);
  CHECK_THROWS_AS(work_conjugate(bad, vec({1.0})), Infeasible);
  // no requests: the conjugate of ||x - anchor||
  WorkHistory none(vec({2.0, -1.0}));
  CHECK(work_conjugate(none, vec({1.0, 0.0})) == doctest::Approx(-2.0));
}

TEST_CASE("1-D work_conjugate and offline optimum match candidate enumeration") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> len(0.0, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int T = 1 + trial % 6;
    std::vector<Interval> sets;
    for (int s = 0; s < T; ++s) {
      const double lo = u(rng);
      sets.push_back({lo, lo + (trial % 7 == 0 ? 0.0 : len(rng))});
    }
    const double anchor = u(rng);
    const auto h = intervals(sets, anchor);
    for (double v : {1.0, -1.0}) {
      const double oracle = testing::interval_chain_min(sets, anchor, v);
      for (auto form : kForms) CHECK(std::abs(work_conjugate(h, vec({v}), form) - oracle) < 1e-5);
    }
    const auto opt = offline_optimal(h.requests(), h.anchor());
    CHECK(std::abs(opt.cost - testing::interval_chain_min(sets, anchor)) < 1e-5);
    REQUIRE(opt.trajectory.size() == sets.size() + 1);
    CHECK(std::abs(path_length(opt.trajectory) - opt.cost) < 1e-5);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      CHECK(contains(h.requests()[s], opt.trajectory[s + 1], 1e-7));
    }
  }
}

TEST_CASE("planar work_conjugate matches a refined grid dynamic program") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    const int T = 1 + trial % 3;
    WorkHistory h(vec({0.3 * g(rng), 0.3 * g(rng)}));
    for (int s = 0; s < T; ++s) h.append(testing::random_polygon(rng, 1 + (trial + s) % 3));
    Vector v(2);
    v << g(rng), g(rng);
    v.normalize();
    const double oracle = testing::planar_chain_min(h.requests(), h.anchor(), v);
    const double value = work_conjugate(h, v);
    CHECK(value <= oracle + 1e-6);
    CHECK(std::abs(value - oracle) < 1e-2);
  }
}

TEST_CASE("reduced and full conjugate forms agree") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    WorkHistory h(vec({g(rng), g(rng)}));
    for (int s = 0; s < 1 + trial % 4; ++s) h.append(testing::random_polygon(rng, 2));
    Vector v(2);
    v << g(rng), g(rng);
    v.normalize();
    for (double scale : {1.0, 0.5}) {
      const double a = work_conjugate(h, scale * v, ConjugateForm::Reduced);
      const double b = work_conjugate(h, scale * v, ConjugateForm::Full);
      CHECK(std::abs(a - b) < 1e-6);
    }
  }
}

TEST_CASE("conjugate is non-decreasing as requests accumulate") {
  std::mt19937_64 rng(4);
  const auto dirs = sphere_directions(2, 8, 77, false);
  WorkHistory h(Vector::Zero(2));
  std::vector<double> last(dirs.size(), -std::numeric_limits<double>::infinity());
  for (int s = 0; s < 6; ++s) {
    h.append(testing::random_polygon(rng, 2));
    const ConjugateEvaluator eval(h);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const double value = eval.evaluate(dirs[i]).value;
      CHECK(value >= last[i] - 1e-7);
      last[i] = value;
    }
  }
}

TEST_CASE("offline_optimal examples") {
  CHECK(offline_optimal(intervals({{2.0, 3.0}, {5.0, 6.0}}, 0.0).requests(), vec({0.0})).cost ==
        doctest::Approx(5.0).epsilon(1e-7));
  CHECK(offline_optimal(intervals({{0.0, 10.0}, {3.0, 5.0}}, 0.0).requests(), vec({0.0})).cost ==
        doctest::Approx(3.0).epsilon(1e-7));
  const auto still = offline_optimal(intervals({{-1.0, 1.0}, {-2.0, 0.5}, {0.0, 3.0}}, 0.0).requests(), vec({0.0}));
  CHECK(std::abs(still.cost) < 1e-7);
  for (const auto& q : still.trajectory) CHECK(std::abs(q[0]) < 1e-6);
  const auto none = offline_optimal({}, vec({1.0, 2.0}));
  CHECK(none.cost == 0.0);
  CHECK(none.trajectory.size() == 1);
}

TEST_CASE("path_length examples") {
  CHECK(path_length({vec({0.0, 0.0})}) == 0.0);
  CHECK(path_length({vec({0.0, 0.0}), vec({3.0, 4.0})}) == doctest::Approx(5.0));
  CHECK(path_length({vec({0.0, 0.0}), vec({1.0, 0.0}), vec({1.0, 1.0})}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(path_length({}), BadDims);
}

TEST_CASE("sphere directions") {
  const auto plain = sphere_directions(5, 101, 3, false);
  const auto paired = sphere_directions(5, 101, 3, true);
  REQUIRE(plain.size() == 101);
  REQUIRE(paired.size() == 101);
  for (const auto& v : plain) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  for (std::size_t i = 0; i + 1 < paired.size(); i += 2) CHECK((paired[i] + paired[i + 1]).norm() == 0.0);
  CHECK((sphere_directions(5, 101, 3, false)[50] - plain[50]).norm() == 0.0);

  // second moment of the uniform sphere is I / dim
  const auto many = sphere_directions(3, 20000, 9, false);
  Matrix M = Matrix::Zero(3, 3);
  for (const auto& v : many) M += v * v.transpose();
  M /= static_cast<double>(many.size());
  CHECK((M - Matrix::Identity(3, 3) / 3.0).norm() < 0.02);
}

TEST_CASE("steiner_raw examples") {
  WorkHistory box(Vector::Zero(2));
  box.append(box_polytope(BoxBounds{-1.0, 1.0}, 2));
  CHECK(steiner_raw(box, 4000, 1).norm() < 0.1);

  WorkHistory point(Vector::Zero(2));
  const Vector c = vec({1.0, 0.0});
  point.append(point_set(c));
  CHECK((steiner_raw(point, 4000, 2) - c).norm() < 0.1 * (1.0 + c.norm()));
  SteinerOptions independent;
  independent.antithetic = false;
  CHECK((steiner_raw(point, 4000, 2, independent) - c).norm() < 0.1 * (1.0 + c.norm()));

  const auto dirs = sphere_directions(2, 1, 5, true);
  const Vector one = steiner_raw(point, 1, 5);
  CHECK(one.allFinite());
  const double h1 = work_conjugate(point, dirs[0]);
  CHECK((one - (-2.0 * h1 * dirs[0])).norm() < 1e-12);
  CHECK_THROWS_AS(steiner_raw(point, 0, 5), BadDims);
}

TEST_CASE("steiner_raw control variate") {
  // anchor 0 and a single point c: h(v) = |c| - v.c, so centering on c
  // cancels every sample exactly
  WorkHistory point(Vector::Zero(3));
  const Vector c = vec({1.0, -0.5, 2.0});
  point.append(point_set(c));
  SteinerOptions cv;
  cv.center = c;
  CHECK((steiner_raw(point, 10, 3, cv) - c).norm() < 1e-6);
  cv.center = vec({0.0, 0.0});
  CHECK_THROWS_AS(steiner_raw(point, 10, 3, cv), BadDims);

  std::mt19937_64 rng(31);
  WorkHistory h(vec({2.5, -2.0}));
  for (int s = 0; s < 5; ++s) h.append(testing::random_polygon(rng, 2));
  const Vector ref = steiner_raw(h, 20000, 77);
  SteinerOptions off;
  off.center = ref + vec({0.4, -0.3});
  double plain_err = 0.0, cv_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    plain_err += (steiner_raw(h, 60, seed) - ref).squaredNorm();
    cv_err += (steiner_raw(h, 60, seed, off) - ref).squaredNorm();
  }
  CHECK(cv_err < plain_err);
  CHECK((steiner_raw(h, 4000, 5, off) - ref).norm() < 0.05 * (1.0 + ref.norm()));
}

TEST_CASE("steiner_raw does not depend on the worker count") {
  std::mt19937_64 rng(12);
  WorkHistory h(Vector::Zero(2));
  for (int s = 0; s < 4; ++s) h.append(testing::random_polygon(rng, 2));
  SteinerOptions one, many;
  one.workers = 1;
  many.workers = 4;
  ConjugateStats s1, s4;
  const Vector a = steiner_raw(h, 301, 42, one, &s1);
  const Vector b = steiner_raw(h, 301, 42, many, &s4);
  CHECK((a - b).norm() == 0.0);
  CHECK(s1.mean == s4.mean);
  CHECK(s1.min <= s1.mean);
  CHECK(s1.mean <= s1.max);
}

TEST_CASE("select_hypothesis examples") {
  // raw already inside the newest request
  WorkHistory big(Vector::Zero(2));
  big.append(box_polytope(BoxBounds{-10.0, 10.0}, 2));
  const auto inside = select_hypothesis(big, 200, 3);
  CHECK((inside.projected - inside.raw).norm() == 0.0);
  CHECK(inside.samples == 200);

  WorkHistory far(vec({5.0, 0.0}));
  far.append(box_polytope(BoxBounds{-1.0, 1.0}, 2));
  const auto est = select_hypothesis(far, 4000, 11);
  CHECK(contains(far.requests().back(), est.projected, kMembershipTol));
  CHECK((est.raw - project(far.requests().back(), est.raw)).norm() <= 0.15);

  const auto two = select_hypothesis(intervals({{2.0, 3.0}, {5.0, 6.0}}, 0.0), 500, 4);
  CHECK(two.projected[0] >= 5.0 - 1e-7);
  CHECK(two.projected[0] <= 6.0 + 1e-7);

  CHECK_THROWS_AS(select_hypothesis(WorkHistory(Vector::Zero(2)), 10, 1), BadDims);
}

TEST_CASE("truncate keeps the newest window and restarts at the selection") {
  std::vector<Interval> sets;
  for (int s = 0; s < 51; ++s) sets.push_back({static_cast<double>(s), s + 1.0});
  const auto h = intervals(sets, 0.0, 50);
  const auto cut = truncate(h, vec({0.5}));
  CHECK(cut.size() == 50);
  CHECK(cut.anchor()[0] == 0.5);
  CHECK(cut.requests().front().halfspaces()[0].offset() == doctest::Approx(2.0));

  const auto small = intervals({{0.0, 1.0}, {1.0, 2.0}}, -1.0, 50);
  const auto same = truncate(small, vec({9.0}));
  CHECK(same.size() == 2);
  CHECK(same.anchor()[0] == -1.0);

  // cap 1: single-set chasing, conjugate min_{q in K} |q - a| - v q
  const auto chain = intervals({{0.0, 1.0}, {4.0, 7.0}}, 0.0, 1);
  const auto single = truncate(chain, vec({0.8}));
  REQUIRE(single.size() == 1);
  for (double v : {1.0, -1.0}) {
    const double expect = testing::interval_chain_min({{4.0, 7.0}}, 0.8, v);
    CHECK(work_conjugate(single, vec({v})) == doctest::Approx(expect).epsilon(1e-7));
  }
  CHECK(work_conjugate(single, vec({1.0})) == doctest::Approx(-0.8).epsilon(1e-7));
  CHECK(work_conjugate(single, vec({-1.0})) == doctest::Approx(7.2).epsilon(1e-7));

  CHECK_THROWS_AS(WorkHistory(Vector::Zero(1), 0), BadDims);
  WorkHistory h2(Vector::Zero(2));
  CHECK_THROWS_AS(h2.append(testing::interval_polytope({0.0, 1.0})), BadDims);
}

TEST_CASE("nested boxes shrinking onto a point") {
  const Vector p = vec({0.4, -0.2, 0.1});
  WorkHistory h(Vector::Constant(3, -1.0));
  double r = 1.0;
  Vector sel;
  for (int s = 0; s < 8; ++s) {
    r *= 0.5;
    h.append(centered_box(p, r));
    sel = select_hypothesis(h, 1000, 21).projected;
  }
  CHECK((sel - p).norm() <= 2.0 * (r * std::sqrt(3.0) + 0.1));
}
