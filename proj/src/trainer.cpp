#include "cetn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "cetn/metrics.hpp"

namespace cetn {

std::vector<double> predict_probs(const Model& model, const EncodedDataset& ds,
                                  std::span<const size_t> rows, int chunk) {
  if (chunk < 1) throw ConfigError("predict: chunk must be >= 1");
  std::vector<double> probs;
  probs.reserve(rows.size());
  for (size_t at = 0; at < rows.size(); at += static_cast<size_t>(chunk)) {
    const size_t n = std::min(rows.size() - at, static_cast<size_t>(chunk));
    Batch batch = gather_batch(ds, rows.subspan(at, n));
    Tape t(/*recording=*/false);
    ForwardResult fwd = model.forward(t, batch, /*noise_rng=*/nullptr);
    const Mat& p = fwd.prob.value();
    for (Eigen::Index i = 0; i < p.rows(); ++i) probs.push_back(p(i, 0));
  }
  return probs;
}

std::vector<double> predict_probs(const Model& model, const EncodedDataset& ds, int chunk) {
  std::vector<size_t> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), size_t{0});
  return predict_probs(model, ds, rows, chunk);
}

EvalResult evaluate(const Model& model, const EncodedDataset& ds, int chunk) {
  const std::vector<double> probs = predict_probs(model, ds, chunk);
  return EvalResult{auc(probs, ds.labels), logloss(probs, ds.labels)};
}

TrainResult train(Model& model, const EncodedDataset& train_ds,
                  const EncodedDataset& val_ds, const LossWeights& weights,
                  const TrainerConfig& cfg, const EpochCallback& on_epoch) {
  if (train_ds.rows() == 0) throw ConfigError("train: empty training split");
  if (train_ds.fields() != model.fields() || val_ds.fields() != model.fields()) {
    throw ConfigError("train: dataset fields do not match the model");
  }
  for (int i = 0; i < model.fields(); ++i) {
    if (train_ds.vocab_sizes[i] != model.vocab_sizes()[i]) {
      throw ConfigError("train: vocabulary size mismatch on field '" +
                        model.field_names()[i] + "'");
    }
  }
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (cfg.patience < 1) throw ConfigError("train: patience must be >= 1");
  weights.validate();

  TrainResult result;
  Adam adam(model.params());
  Rng noise_rng(Rng::mix(cfg.seed, 0x6e6f697365ULL));  // "noise" stream
  double lr = cfg.lr;
  int strikes = 0;
  std::vector<Mat> best = model.params().snapshot();

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double sum_total = 0, sum_ctr = 0, sum_cl = 0, sum_cos1 = 0, sum_cos2 = 0;

    const auto batches = epoch_batch_rows(train_ds.rows(), cfg.batch_size, cfg.seed, epoch);
    for (size_t step = 0; step < batches.size(); ++step) {
      try {
        Batch batch = gather_batch(train_ds, batches[step]);
        Tape tape(/*recording=*/true);
        std::vector<Var> leaves;
        ForwardResult fwd = model.forward(tape, batch, &noise_rng, &leaves);
        LossBreakdown loss = total_loss(fwd, batch.labels, weights, model.config());
        if (!std::isfinite(loss.total_v)) {
          throw NumericError("non-finite total loss");
        }
        tape.backward(loss.total);

        std::vector<Mat> grads;
        grads.reserve(leaves.size());
        for (const Var& leaf : leaves) {
          grads.push_back(tape.has_grad(leaf.id()) ? leaf.grad() : Mat());
        }
        adam.step(model.params(), grads, lr);

        const double b = static_cast<double>(batch.batch_size);
        sum_total += loss.total_v * b;
        sum_ctr += loss.ctr_v * b;
        sum_cl += loss.cl_v * b;
        sum_cos1 += loss.cos_ep_v * b;
        sum_cos2 += loss.cos_ip_v * b;
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step) + ": " + e.what());
      }
    }

    const EvalResult val = evaluate(model, val_ds, cfg.eval_chunk);
    const double n = static_cast<double>(train_ds.rows());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_total = sum_total / n;
    rec.train_ctr = sum_ctr / n;
    rec.train_cl = sum_cl / n;
    rec.train_cos1 = sum_cos1 / n;
    rec.train_cos2 = sum_cos2 / n;
    rec.val_auc = val.auc;
    rec.val_logloss = val.logloss;
    rec.lr = lr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (val.auc > result.best_val_auc || result.best_epoch < 0) {
      result.best_val_auc = val.auc;
      result.best_epoch = epoch;
      best = model.params().snapshot();
      strikes = 0;
    } else {
      ++strikes;
      if (strikes >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
      lr *= cfg.lr_decay;  // reduce-on-plateau, once per non-improvement epoch
    }
  }

  model.params().restore(best);
  return result;
}

}  // namespace cetn
