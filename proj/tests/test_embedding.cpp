#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cetn/embedding.hpp"

using namespace cetn;

namespace {

Batch make_batch(std::vector<int32_t> indices, int fields) {
  Batch b;
  b.batch_size = static_cast<int>(indices.size()) / fields;
  b.fields = fields;
  b.indices = std::move(indices);
  b.labels.assign(b.batch_size, 0);
  return b;
}

}  // namespace

TEST_CASE("lookup gathers rows in field order") {
  Tape t;
  Mat t0(2, 3), t1(3, 3);
  t0 << 1, 2, 3, 4, 5, 6;
  t1 << 10, 11, 12, 13, 14, 15, 16, 17, 18;
  std::vector<Var> tables = {t.leaf(t0), t.leaf(t1)};
  Batch b = make_batch({0, 1}, 2);
  Var e = lookup(tables, b, 3);
  CHECK(e.shape() == Shape(1, 6));
  Mat expect(1, 6);
  expect << 1, 2, 3, 13, 14, 15;
  CHECK(e.value() == expect);
}

TEST_CASE("lookup backward touches only used rows, duplicates accumulate") {
  Tape t;
  Mat t0 = Mat::Zero(4, 2);
  std::vector<Var> tables = {t.leaf(t0)};
  Batch b = make_batch({1, 1, 3}, 1);
  Var e = lookup(tables, b, 2);
  t.backward(sum(e));
  const Mat& g = tables[0].grad();
  CHECK(g.row(0).isZero());
  CHECK(g.row(2).isZero());
  CHECK(g(1, 0) == 2.0);  // used twice
  CHECK(g(3, 0) == 1.0);
  CHECK_THROWS_AS(lookup(tables, make_batch({4}, 1), 2), ContractError);
}

TEST_CASE("lookup gradient matches finite differences") {
  Rng rng(17);
  Mat t0(3, 2), t1(2, 2);
  for (auto* m : {&t0, &t1}) {
    for (int r = 0; r < m->rows(); ++r) {
      for (int c = 0; c < m->cols(); ++c) (*m)(r, c) = rng.uniform(-1, 1);
    }
  }
  Batch b = make_batch({0, 1, 2, 1, 0, 0}, 2);
  auto builder = [&b](Tape& t, const std::vector<Var>& p) {
    Var e = lookup(std::vector<Var>{p[0], p[1]}, b, 2);
    return sum(mul(e, e));
  };
  auto report = grad_check(builder, {t0, t1}, {"t0", "t1"}, 1e-6, 1e-6);
  CHECK(report.ok);
}

TEST_CASE("perturbation obeys the sign rule") {
  Tape t;
  SUBCASE("zero embedding stays zero") {
    Var e = t.leaf(Mat::Zero(2, 3));
    Rng rng(1);
    Mat delta = draw_perturbation(rng, 1, 3, false);
    Var p = perturb(e, delta);
    CHECK(p.value().isZero());
  }
  SUBCASE("worked example") {
    Mat e(1, 2);
    e << -2, 3;
    Mat delta(1, 2);
    delta << 0.5, 0.25;
    Var p = perturb(t.leaf(e), delta);
    CHECK(p.value()(0, 0) == -2.5);
    CHECK(p.value()(0, 1) == 3.25);
  }
}

TEST_CASE("perturbation bounds and sign consistency on random draws") {
  Rng rng(23);
  Mat e(8, 12);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 12; ++c) e(r, c) = rng.uniform(-2, 2);
  }
  e(0, 0) = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Mat delta = draw_perturbation(rng, 4, 3, trial % 2 == 0);
    Tape t;
    Var p = perturb(t.leaf(e), delta);
    Mat diff = p.value() - e;
    CHECK(diff.cwiseAbs().maxCoeff() < 1.0);
    CHECK(((diff.array() * e.array()) >= 0.0).all());
    CHECK((p.value().array().abs() >= e.array().abs()).all());
  }
}

TEST_CASE("field-shared noise repeats the same d-vector") {
  Rng rng(5);
  Mat delta = draw_perturbation(rng, 3, 4, true);
  CHECK(delta.block(0, 0, 1, 4) == delta.block(0, 4, 1, 4));
  CHECK(delta.block(0, 0, 1, 4) == delta.block(0, 8, 1, 4));
}

TEST_CASE("perturbed mean approaches 1.5 at e=1") {
  // U(0,1) noise pushes a unit coordinate to 1 + mean(U) = 1.5
  Rng rng(29);
  double sum = 0.0;
  const int n = 100000;
  Mat e = Mat::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    Mat delta = draw_perturbation(rng, 1, 1, false);
    sum += e(0, 0) + delta(0, 0) * 1.0;
  }
  CHECK(sum / n == doctest::Approx(1.5).epsilon(0.01));
}

TEST_CASE("product pair order and widths") {
  auto pairs = product_pairs(3);
  REQUIRE(pairs.size() == 6);
  CHECK(pairs[0] == std::pair<int, int>{0, 0});
  CHECK(pairs[1] == std::pair<int, int>{0, 1});
  CHECK(pairs[2] == std::pair<int, int>{0, 2});
  CHECK(pairs[3] == std::pair<int, int>{1, 1});
  CHECK(pairs[5] == std::pair<int, int>{2, 2});
  CHECK(product_pairs(10).size() == 55);
}

TEST_CASE("products worked example, f=2 d=2") {
  Tape t;
  Mat e(1, 4);
  e << 1, 2, 3, 4;  // e1=[1,2], e2=[3,4]
  Var ev = t.leaf(e);
  Var ep = pairwise_ep(ev, 2, 2);
  Var ip = pairwise_ip(ev, 2, 2);
  Mat expect_ep(1, 6);
  expect_ep << 1, 4, 3, 8, 9, 16;
  Mat expect_ip(1, 3);
  expect_ip << 5, 11, 25;
  CHECK(ep.value() == expect_ep);
  CHECK(ip.value() == expect_ip);

  // Frappe-sized widths
  CHECK(product_pairs(10).size() * 20 == 1100);
}

TEST_CASE("EP block sums equal IP entries") {
  Rng rng(31);
  const int f = 4, d = 5, B = 7;
  Mat e(B, f * d);
  for (int r = 0; r < B; ++r) {
    for (int c = 0; c < f * d; ++c) e(r, c) = rng.uniform(-2, 2);
  }
  Tape t;
  Var ev = t.leaf(e);
  Mat ep = pairwise_ep(ev, f, d).value();
  Mat ip = pairwise_ip(ev, f, d).value();
  const int pairs = f * (f + 1) / 2;
  for (int p = 0; p < pairs; ++p) {
    for (int r = 0; r < B; ++r) {
      const double block_sum = ep.block(r, p * d, 1, d).sum();
      CHECK(std::abs(block_sum - ip(r, p)) < 1e-12);
    }
  }
}

TEST_CASE("product gradients match finite differences, including self-pairs") {
  Rng rng(37);
  const int f = 3, d = 2, B = 2;
  Mat e(B, f * d);
  for (int r = 0; r < B; ++r) {
    for (int c = 0; c < f * d; ++c) e(r, c) = rng.uniform(-1.5, 1.5);
  }
  Mat w_ep(B, f * (f + 1) / 2 * d), w_ip(B, f * (f + 1) / 2);
  for (int r = 0; r < B; ++r) {
    for (int c = 0; c < w_ep.cols(); ++c) w_ep(r, c) = rng.uniform(-1, 1);
    for (int c = 0; c < w_ip.cols(); ++c) w_ip(r, c) = rng.uniform(-1, 1);
  }
  auto builder = [&](Tape& t, const std::vector<Var>& p) {
    Var ep = pairwise_ep(p[0], f, d);
    Var ip = pairwise_ip(p[0], f, d);
    return add(sum(mul(ep, t.constant(w_ep, ep.shape(), "w"))),
               sum(mul(ip, t.constant(w_ip, ip.shape(), "w"))));
  };
  auto report = grad_check(builder, {e}, {"E"}, 1e-6, 1e-6);
  CHECK(report.ok);
}

TEST_CASE("perturb gradient is the identity pass-through") {
  Rng rng(41);
  Mat e(2, 4);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) e(r, c) = rng.uniform(0.5, 2.0);  // away from the sign kink
  }
  Mat delta = draw_perturbation(rng, 2, 2, false);
  auto builder = [&delta](Tape& t, const std::vector<Var>& p) {
    return sum(mul(perturb(p[0], delta), p[0]));
  };
  auto report = grad_check(builder, {e}, {"E"}, 1e-6, 1e-6);
  CHECK(report.ok);
}
