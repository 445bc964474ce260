#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cetn/metrics.hpp"
#include "cetn/trainer.hpp"
#include "testutil.hpp"

using namespace cetn;

namespace {

ModelConfig small_config(ModelKind kind = ModelKind::Cetn) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.embedding_dim = 4;
  cfg.value_dim = 6;
  cfg.hidden_dims = {16};
  return cfg;
}

TrainerConfig fast_trainer(int max_epochs = 20) {
  TrainerConfig t;
  t.lr = 0.01;
  t.batch_size = 64;
  t.max_epochs = max_epochs;
  t.seed = 7;
  return t;
}

}  // namespace

TEST_CASE("adam first step with unit gradient") {
  ParamStore store;
  store.add("x", Mat::Zero(1, 1));
  Adam adam(store);
  std::vector<Mat> grads = {Mat::Ones(1, 1)};
  adam.step(store, grads, 0.001);
  // m_hat = 1, v_hat = 1 after bias correction, so the step is
  // -lr / (1 + eps) = -0.00099999999...
  CHECK(std::abs(store.at(0).value(0, 0) + 0.001) < 1e-10);
}

TEST_CASE("adam leaves parameters alone for zero or absent gradients") {
  ParamStore store;
  store.add("x", Mat::Constant(2, 2, 1.5));
  Adam adam(store);
  adam.step(store, {Mat::Zero(2, 2)}, 0.1);
  CHECK(store.at(0).value == Mat::Constant(2, 2, 1.5));
  adam.step(store, {Mat()}, 0.1);
  CHECK(store.at(0).value == Mat::Constant(2, 2, 1.5));
}

TEST_CASE("adam rejects non-finite gradients by name") {
  ParamStore store;
  store.add("w.bad", Mat::Zero(1, 1));
  Adam adam(store);
  Mat g(1, 1);
  g << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam.step(store, {g}, 0.1), doctest::Contains("w.bad"),
                       NumericError);
}

TEST_CASE("sparse rows skip untouched embedding rows") {
  ParamStore store;
  store.add("emb", Mat::Constant(4, 2, 1.0), /*sparse_rows=*/true);
  Adam adam(store);
  Mat g = Mat::Zero(4, 2);
  g.row(1).setConstant(0.5);
  adam.step(store, {g}, 0.01);
  // only row 1 moved
  CHECK(store.at(0).value.row(0) == Mat::Constant(1, 2, 1.0));
  CHECK(store.at(0).value.row(2) == Mat::Constant(1, 2, 1.0));
  CHECK(store.at(0).value.row(3) == Mat::Constant(1, 2, 1.0));
  CHECK(store.at(0).value(1, 0) < 1.0);

  // a later step with a different touched row must not disturb row 1 either
  Mat g2 = Mat::Zero(4, 2);
  g2.row(2).setConstant(-0.25);
  const Mat before = store.at(0).value;
  adam.step(store, {g2}, 0.01);
  CHECK(store.at(0).value.row(1) == before.row(1));
  CHECK(store.at(0).value(2, 0) > before(2, 0));
}

TEST_CASE("max_epochs zero returns the initialized model and empty log") {
  auto ds = testutil::separable_dataset(100, 3);
  auto [train_ds, val_ds] = testutil::split_train_val(ds, 0.3);
  Model m(small_config(), ds.field_names, ds.vocab_sizes, 5);
  const auto init = m.params().snapshot();
  TrainerConfig cfg = fast_trainer(0);
  LossWeights w;
  TrainResult r = train(m, train_ds, val_ds, w, cfg);
  CHECK(r.log.empty());
  CHECK(r.best_epoch == -1);
  const auto after = m.params().snapshot();
  for (size_t i = 0; i < init.size(); ++i) CHECK(init[i] == after[i]);
}

TEST_CASE("separable dataset reaches val AUC >= 0.99 within 20 epochs") {
  auto ds = testutil::separable_dataset(200, 11);
  auto [train_ds, val_ds] = testutil::split_train_val(ds, 0.25);
  Model m(small_config(), ds.field_names, ds.vocab_sizes, 5);
  LossWeights w;
  w.alpha = 0.1;
  w.beta_ep = 0.1;
  w.beta_ip = 0.1;
  TrainResult r = train(m, train_ds, val_ds, w, fast_trainer(20));
  CHECK(r.best_val_auc >= 0.99);
}

TEST_CASE("training is bit-deterministic given the seed") {
  auto ds = testutil::synthetic_ctr({.rows = 400, .vocab_sizes = {8, 8}, .seed = 2});
  auto [train_ds, val_ds] = testutil::split_train_val(ds, 0.25);
  auto run = [&] {
    Model m(small_config(), ds.field_names, ds.vocab_sizes, 17);
    LossWeights w;
    TrainerConfig cfg = fast_trainer(3);
    cfg.patience = 100;  // no early stop, fixed three epochs
    train(m, train_ds, val_ds, w, cfg);
    return m.params().snapshot();
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("early stopping fires after exactly patience non-improvements") {
  auto ds = testutil::synthetic_ctr({.rows = 600, .vocab_sizes = {10, 10}, .seed = 4});
  auto [train_ds, val_ds] = testutil::split_train_val(ds, 0.3);
  Model m(small_config(), ds.field_names, ds.vocab_sizes, 9);
  LossWeights w;
  TrainerConfig cfg = fast_trainer(100);
  cfg.patience = 2;
  TrainResult r = train(m, train_ds, val_ds, w, cfg);
  REQUIRE(r.early_stopped);
  REQUIRE(r.log.size() >= 3);
  // the last `patience` epochs did not improve on the best
  const size_t n = r.log.size();
  CHECK(r.best_epoch == static_cast<int>(n) - 1 - cfg.patience);
  for (size_t i = n - cfg.patience; i < n; ++i) {
    CHECK(r.log[i].val_auc <= r.best_val_auc);
  }
  // lr never increases, and the stopping epoch ran on a decayed rate
  for (size_t i = 1; i < n; ++i) CHECK(r.log[i].lr <= r.log[i - 1].lr);
  CHECK(r.log[n - 1].lr == doctest::Approx(r.log[n - 2].lr * cfg.lr_decay));
}

TEST_CASE("returned model holds the best-validation parameters") {
  auto ds = testutil::synthetic_ctr({.rows = 500, .vocab_sizes = {12, 12}, .seed = 6});
  auto [train_ds, val_ds] = testutil::split_train_val(ds, 0.3);
  Model m(small_config(), ds.field_names, ds.vocab_sizes, 13);
  LossWeights w;
  TrainResult r = train(m, train_ds, val_ds, w, fast_trainer(6));
  const EvalResult ev = evaluate(m, val_ds);
  CHECK(ev.auc == doctest::Approx(r.best_val_auc).epsilon(1e-12));
}

TEST_CASE("evaluation is deterministic and noise-free") {
  auto ds = testutil::synthetic_ctr({.rows = 300, .vocab_sizes = {9, 9}, .seed = 8});
  Model m(small_config(), ds.field_names, ds.vocab_sizes, 3);
  const EvalResult a = evaluate(m, ds);
  const EvalResult b = evaluate(m, ds);
  CHECK(std::memcmp(&a.auc, &b.auc, sizeof a.auc) == 0);
  CHECK(std::memcmp(&a.logloss, &b.logloss, sizeof a.logloss) == 0);
  // chunking must not change the scores
  const EvalResult c = evaluate(m, ds, 64);
  CHECK(c.auc == doctest::Approx(a.auc).epsilon(1e-15));
}

TEST_CASE("perfect and constant predictors") {
  EncodedDataset ds = testutil::separable_dataset(100, 21);
  std::vector<double> perfect, constant;
  for (size_t i = 0; i < ds.rows(); ++i) {
    perfect.push_back(ds.labels[i] ? 0.9 : 0.2);
    constant.push_back(0.5);
  }
  CHECK(auc(perfect, ds.labels) == 1.0);
  CHECK(auc(constant, ds.labels) == 0.5);
  CHECK(logloss(constant, ds.labels) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("-CL and -COS traces stay exactly zero every epoch") {
  auto ds = testutil::synthetic_ctr({.rows = 400, .vocab_sizes = {8, 8}, .seed = 10});
  auto [train_ds, val_ds] = testutil::split_train_val(ds, 0.25);
  ModelConfig cfg = small_config();
  cfg.ablations = {Ablation::CL, Ablation::COS};
  Model m(cfg, ds.field_names, ds.vocab_sizes, 19);
  LossWeights w;  // nonzero weights; the ablation must still zero the terms
  TrainResult r = train(m, train_ds, val_ds, w, fast_trainer(3));
  REQUIRE(!r.log.empty());
  for (const auto& rec : r.log) {
    CHECK(rec.train_cl == 0.0);
    CHECK(rec.train_cos1 == 0.0);
    CHECK(rec.train_cos2 == 0.0);
    CHECK(rec.train_total == doctest::Approx(rec.train_ctr).epsilon(1e-12));
  }
}
