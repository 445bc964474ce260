#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cetn/losses.hpp"
#include "cetn/rng.hpp"

using namespace cetn;

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Direct evaluation of the denominator-only loss in its ratio form:
// mean_i -log( exp(1/tau) / sum_j exp(sim_ij/tau) ), cosine similarities
// computed densely. Independent of the stabilized implementation path.
double do_infonce_direct(const Mat& vp, const Mat& vpp, double tau) {
  const int b = static_cast<int>(vp.rows());
  auto unit = [](const Mat& m) {
    Mat u = m;
    for (int i = 0; i < m.rows(); ++i) {
      const double n = m.row(i).norm();
      if (n < 1e-12) u.row(i).setZero();
      else u.row(i) /= n;
    }
    return u;
  };
  Mat np = unit(vp), npp = unit(vpp);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    double denom = 0.0;
    for (int j = 0; j < b; ++j) denom += std::exp(np.row(i).dot(npp.row(j)) / tau);
    total += -std::log(std::exp(1.0 / tau) / denom);
  }
  return total / b;
}

double infonce_direct(const Mat& vp, const Mat& vpp, double tau) {
  const int b = static_cast<int>(vp.rows());
  auto unit = [](const Mat& m) {
    Mat u = m;
    for (int i = 0; i < m.rows(); ++i) u.row(i) /= m.row(i).norm();
    return u;
  };
  Mat np = unit(vp), npp = unit(vpp);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    double denom = 0.0;
    for (int j = 0; j < b; ++j) denom += std::exp(np.row(i).dot(npp.row(j)) / tau);
    total += -std::log(std::exp(np.row(i).dot(npp.row(i)) / tau) / denom);
  }
  return total / b;
}

}  // namespace

TEST_CASE("logloss values") {
  Tape t;
  SUBCASE("half probability, positive label") {
    Mat p(1, 1);
    p << 0.5;
    Var loss = logloss_op(t.leaf(p), std::vector<uint8_t>{1});
    CHECK(loss.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("two instances") {
    Mat p(2, 1);
    p << 0.9, 0.1;
    Var loss = logloss_op(t.leaf(p), std::vector<uint8_t>{1, 0});
    CHECK(loss.value()(0, 0) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  }
}

TEST_CASE("logloss gradient through the sigmoid is (p - y)/B") {
  Rng rng(3);
  const int b = 6;
  Mat z = random_mat(rng, b, 1, -2, 2);
  std::vector<uint8_t> y;
  for (int i = 0; i < b; ++i) y.push_back(static_cast<uint8_t>(rng.below(2)));

  Tape t;
  Var zv = t.leaf(z);
  Var p = sigmoid(zv);
  p.retain();
  t.backward(logloss_op(p, y));
  for (int i = 0; i < b; ++i) {
    const double expect = (p.value()(i, 0) - y[i]) / b;
    CHECK(zv.grad()(i, 0) == doctest::Approx(expect).epsilon(1e-8));
  }

  auto report = grad_check(
      [&y](Tape& tt, const std::vector<Var>& pr) {
        return logloss_op(sigmoid(pr[0]), y);
      },
      {z}, {"z"}, 1e-6, 1e-8);
  CHECK(report.ok);
}

TEST_CASE("cosine similarity special values") {
  Tape t;
  Mat a(1, 2), b(1, 2);
  a << 1, 2;
  b << 1, 2;
  CHECK(cosine_rowwise(t.leaf(a), t.leaf(b)).value()(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  Mat c(1, 2), d(1, 2);
  c << 1, 0;
  d << 0, 1;
  CHECK(cosine_rowwise(t.leaf(c), t.leaf(d)).value()(0, 0) == 0.0);
  Mat e(1, 2);
  e << -1, 0;
  CHECK(cosine_rowwise(t.leaf(c), t.leaf(e)).value()(0, 0) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  // zero vector contributes similarity 0
  CHECK(cosine_rowwise(t.leaf(Mat::Zero(1, 2)), t.leaf(d)).value()(0, 0) == 0.0);
}

TEST_CASE("cos_loss endpoints and range") {
  Tape t;
  Rng rng(5);
  Mat v = random_mat(rng, 4, 6);
  CHECK(cos_loss(t.leaf(v), t.leaf(v)).value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cos_loss(t.leaf(v), t.leaf(Mat(-v))).value()(0, 0) ==
        doctest::Approx(2.0).epsilon(1e-12));
  for (int i = 0; i < 10; ++i) {
    Mat a = random_mat(rng, 5, 4), b = random_mat(rng, 5, 4);
    const double l = cos_loss(t.leaf(a), t.leaf(b)).value()(0, 0);
    CHECK(l >= 0.0);
    CHECK(l <= 2.0);
  }
}

TEST_CASE("do_infonce special cases") {
  Tape t;
  SUBCASE("single instance with itself") {
    Mat v(1, 3);
    v << 1, 2, 3;
    Var loss = do_infonce(t.leaf(v), t.leaf(v), 0.2);
    CHECK(loss.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("all similarities one gives log B") {
    Mat v(3, 2);
    v << 1, 0, 2, 0, 3, 0;  // same direction, different lengths
    Var loss = do_infonce(t.leaf(v), t.leaf(v), 0.2);
    CHECK(loss.value()(0, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  }
}

TEST_CASE("do_infonce equals the direct ratio form") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int b = 2 + static_cast<int>(rng.below(10));
    const int d = 2 + static_cast<int>(rng.below(14));
    const double tau = 0.1 + rng.uniform() * 0.9;
    Mat vp = random_mat(rng, b, d), vpp = random_mat(rng, b, d);
    Tape t;
    const double ours = do_infonce(t.leaf(vp), t.leaf(vpp), tau).value()(0, 0);
    CHECK(std::abs(ours - do_infonce_direct(vp, vpp, tau)) < 1e-10);
  }
}

TEST_CASE("infonce basics and identity with do_infonce") {
  Rng rng(11);
  SUBCASE("B=1 is always zero") {
    Mat vp = random_mat(rng, 1, 5), vpp = random_mat(rng, 1, 5);
    Tape t;
    CHECK(infonce(t.leaf(vp), t.leaf(vpp), 0.3).value()(0, 0) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("all sims equal gives log B") {
    Mat v(4, 2);
    v << 1, 0, 5, 0, 2, 0, 7, 0;
    Tape t;
    CHECK(infonce(t.leaf(v), t.leaf(v), 0.2).value()(0, 0) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-10));
  }
  SUBCASE("difference identity: do - info = mean_i (sim_ii - 1)/tau") {
    for (int trial = 0; trial < 20; ++trial) {
      const int b = 2 + static_cast<int>(rng.below(8));
      const int d = 8;
      const double tau = 0.2;
      Mat vp = random_mat(rng, b, d), vpp = random_mat(rng, b, d);
      Tape t;
      const double d_v = do_infonce(t.leaf(vp), t.leaf(vpp), tau).value()(0, 0);
      const double i_v = infonce(t.leaf(vp), t.leaf(vpp), tau).value()(0, 0);
      double mean_diag = 0.0;
      for (int i = 0; i < b; ++i) {
        mean_diag += vp.row(i).dot(vpp.row(i)) / (vp.row(i).norm() * vpp.row(i).norm());
      }
      mean_diag /= b;
      CHECK(std::abs((d_v - i_v) - (mean_diag - 1.0) / tau) < 1e-10);
    }
  }
  SUBCASE("infonce is non-negative") {
    for (int trial = 0; trial < 30; ++trial) {
      const int b = 1 + static_cast<int>(rng.below(9));
      Mat vp = random_mat(rng, b, 6), vpp = random_mat(rng, b, 6);
      Tape t;
      CHECK(infonce(t.leaf(vp), t.leaf(vpp), 0.15).value()(0, 0) >= -1e-12);
    }
  }
}

TEST_CASE("do_infonce is non-negative when some sim reaches 1") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int b = 3;
    Mat vp = random_mat(rng, b, 4);
    Mat vpp = vp;  // diagonal similarities are exactly 1
    Tape t;
    CHECK(do_infonce(t.leaf(vp), t.leaf(vpp), 0.2).value()(0, 0) >= -1e-12);
  }
}

TEST_CASE("increasing an off-diagonal similarity increases both losses") {
  // rotate one vpp row toward vp_i: sim_ij goes up, losses must go up
  Rng rng(17);
  Mat vp = random_mat(rng, 3, 4), vpp = random_mat(rng, 3, 4);
  auto eval = [&](double blend) {
    Mat v2 = vpp;
    v2.row(2) = (1.0 - blend) * vpp.row(2) + blend * vp.row(0).normalized() * vpp.row(2).norm();
    Tape t;
    return std::pair{do_infonce(t.leaf(vp), t.leaf(v2), 0.2).value()(0, 0),
                     infonce(t.leaf(vp), t.leaf(v2), 0.2).value()(0, 0)};
  };
  auto [d0, i0] = eval(0.0);
  auto [d1, i1] = eval(0.35);
  auto [d2, i2] = eval(0.7);
  CHECK(d1 > d0);
  CHECK(d2 > d1);
  CHECK(i1 > i0);
  CHECK(i2 > i1);
}

TEST_CASE("contrastive and cosine gradients match finite differences") {
  Rng rng(19);
  Mat vp = random_mat(rng, 4, 5), vpp = random_mat(rng, 4, 5);
  auto rep1 = grad_check(
      [](Tape& t, const std::vector<Var>& p) { return do_infonce(p[0], p[1], 0.2); },
      {vp, vpp}, {"vp", "vpp"}, 1e-6, 1e-5);
  CHECK(rep1.ok);
  auto rep2 = grad_check(
      [](Tape& t, const std::vector<Var>& p) { return infonce(p[0], p[1], 0.3); },
      {vp, vpp}, {"vp", "vpp"}, 1e-6, 1e-5);
  CHECK(rep2.ok);
  auto rep3 = grad_check(
      [](Tape& t, const std::vector<Var>& p) { return cos_loss(p[0], p[1]); },
      {vp, vpp}, {"v", "vp"}, 1e-6, 1e-5);
  CHECK(rep3.ok);
}

TEST_CASE("blocked lse kernel agrees with the dense op") {
  Rng rng(23);
  // force multiple blocks by exceeding the 2048 block size
  const int b = 2500, d = 8;
  Mat vp = random_mat(rng, b, d), vpp = random_mat(rng, b, d);
  Tape t;
  Var np = normalize_rows_guarded(t.leaf(vp));
  Var npp = normalize_rows_guarded(t.leaf(vpp));
  Var blocked = row_lse_xent(np, npp, 0.2);
  Var dense = logsumexp_rows(scale(matmul(np, npp, false, true), 1.0 / 0.2));
  CHECK((blocked.value() - dense.value()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("total loss decomposition identity") {
  Rng rng(29);
  ModelConfig cfg;
  cfg.kind = ModelKind::Cetn;
  for (int trial = 0; trial < 20; ++trial) {
    const int b = 3 + static_cast<int>(rng.below(6));
    const int dv = 4;
    Tape t;
    ForwardResult fwd;
    Mat z = random_mat(rng, b, 1);
    fwd.logit = t.leaf(z);
    fwd.prob = sigmoid(fwd.logit);
    for (int s = 0; s < 3; ++s) {
      fwd.space_v[s] = t.leaf(random_mat(rng, b, dv));
      fwd.space_v_pre[s] = fwd.space_v[s];
    }
    std::vector<uint8_t> y;
    for (int i = 0; i < b; ++i) y.push_back(static_cast<uint8_t>(rng.below(2)));

    LossWeights w;
    w.alpha = rng.uniform(0, 0.5);
    w.beta_ep = rng.uniform(0, 0.8);
    w.beta_ip = rng.uniform(0, 0.8);
    w.tau = 0.2;
    LossBreakdown out = total_loss(fwd, y, w, cfg);
    const double recomposed = out.ctr_v + w.alpha * out.cl_v + w.beta_ep * out.cos_ep_v +
                              w.beta_ip * out.cos_ip_v;
    CHECK(std::abs(out.total_v - recomposed) < 1e-12);
  }
}

TEST_CASE("ablations zero their loss terms exactly") {
  Rng rng(31);
  const int b = 5, dv = 4;
  Tape t;
  ForwardResult fwd;
  fwd.logit = t.leaf(random_mat(rng, b, 1));
  fwd.prob = sigmoid(fwd.logit);
  for (int s = 0; s < 3; ++s) {
    fwd.space_v[s] = t.leaf(random_mat(rng, b, dv));
    fwd.space_v_pre[s] = fwd.space_v[s];
  }
  std::vector<uint8_t> y = {1, 0, 1, 1, 0};
  LossWeights w;  // all weights nonzero

  ModelConfig no_cl;
  no_cl.ablations = {Ablation::CL};
  LossBreakdown a = total_loss(fwd, y, w, no_cl);
  CHECK(a.cl_v == 0.0);
  CHECK(a.total_v == doctest::Approx(a.ctr_v + w.beta_ep * a.cos_ep_v + w.beta_ip * a.cos_ip_v)
                         .epsilon(1e-12));

  ModelConfig no_cos;
  no_cos.ablations = {Ablation::COS};
  LossBreakdown c = total_loss(fwd, y, w, no_cos);
  CHECK(c.cos_ep_v == 0.0);
  CHECK(c.cos_ip_v == 0.0);

  ModelConfig simmhn;
  simmhn.kind = ModelKind::SimMhn;
  LossBreakdown s = total_loss(fwd, y, w, simmhn);
  CHECK(s.cl_v == 0.0);
  CHECK(s.cos_ep_v == 0.0);
  CHECK(s.total_v == s.ctr_v);
}

TEST_CASE("alpha zero reproduces the -CL wiring exactly") {
  Rng rng(37);
  const int b = 4, dv = 3;
  Tape t;
  ForwardResult fwd;
  fwd.logit = t.leaf(random_mat(rng, b, 1));
  fwd.prob = sigmoid(fwd.logit);
  for (int s = 0; s < 3; ++s) {
    fwd.space_v[s] = t.leaf(random_mat(rng, b, dv));
    fwd.space_v_pre[s] = fwd.space_v[s];
  }
  std::vector<uint8_t> y = {1, 0, 0, 1};
  LossWeights zero_alpha;
  zero_alpha.alpha = 0.0;
  ModelConfig plain;
  ModelConfig ablated;
  ablated.ablations = {Ablation::CL};
  LossWeights full;
  CHECK(total_loss(fwd, y, zero_alpha, plain).total_v ==
        total_loss(fwd, y, full, ablated).total_v);
}
