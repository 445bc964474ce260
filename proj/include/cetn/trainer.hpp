#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cetn/adam.hpp"
#include "cetn/data.hpp"
#include "cetn/losses.hpp"
#include "cetn/model.hpp"

namespace cetn {

struct TrainerConfig {
  double lr = 0.001;
  int batch_size = 10000;
  int patience = 2;     // consecutive epochs without val-AUC improvement
  int max_epochs = 100;
  uint64_t seed = 42;
  double lr_decay = 0.1;  // applied on each non-improvement epoch
  int eval_chunk = 4096;
};

struct EpochRecord {
  int epoch = 0;
  double train_total = 0, train_ctr = 0, train_cl = 0, train_cos1 = 0, train_cos2 = 0;
  double val_auc = 0, val_logloss = 0;
  double lr = 0;
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_val_auc = 0.0;
  int best_epoch = -1;  // -1 when no epoch ran
  bool early_stopped = false;
};

struct EvalResult {
  double auc = 0.0;
  double logloss = 0.0;
};

/// Deterministic full-pass probabilities with perturbation disabled.
std::vector<double> predict_probs(const Model& model, const EncodedDataset& ds,
                                  std::span<const size_t> rows, int chunk = 4096);
std::vector<double> predict_probs(const Model& model, const EncodedDataset& ds,
                                  int chunk = 4096);

EvalResult evaluate(const Model& model, const EncodedDataset& ds, int chunk = 4096);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch loop over the training split: forward, losses, backward, Adam;
/// after each epoch the validation AUC decides the schedule. A strict
/// improvement resets the strike count and snapshots the parameters; a
/// non-improvement multiplies the learning rate by lr_decay, and `patience`
/// consecutive non-improvements stop the run. The model ends up holding the
/// best-validation-AUC parameters.
TrainResult train(Model& model, const EncodedDataset& train_ds,
                  const EncodedDataset& val_ds, const LossWeights& weights,
                  const TrainerConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace cetn
