#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pwiser/data.hpp"
#include "pwiser/loss.hpp"
#include "pwiser/metrics.hpp"
#include "pwiser/models.hpp"
#include "pwiser/nn.hpp"

namespace pwiser {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 2048;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  LossConfig loss;      // lambda=0.1, m1=m2=0.3
  ModelConfig model;    // embed_dim=128, num_experts=8
  std::uint64_t seed = 42;
  int eval_every = 1;   // epochs between validation passes
  std::optional<int> early_stop_patience;  // on validation CTR AUC
  bool shuffle = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_bce = 0.0;     // bce_ctr + bce_ctcvr, averaged over batches
  double loss_pwiser = 0.0;  // unweighted component, averaged over batches
  std::optional<double> valid_auc_ctr;
  std::optional<double> valid_auc_ctcvr;
};

struct TrainResult {
  std::unique_ptr<Model> model;  // best-by-validation parameters
  std::vector<EpochRecord> history;
  std::optional<double> best_auc_ctr;
  int best_epoch = -1;
};

// Epoch loop: shuffle, forward, combined loss, backward, Adam step.
// Deterministic given the config seed. Throws NumericError naming the
// offending loss component and batch index on NaN/Inf.
TrainResult train(const Dataset& train_data, const Dataset& valid_data,
                  const TrainConfig& cfg);

std::string history_tsv(const std::vector<EpochRecord>& history);

struct GradCheckEntry {
  Arch arch;
  double lambda = 0.0;
  double max_rel_err = 0.0;
  std::string worst_param;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  std::string text() const;
};

// Central-difference check of every parameter gradient of the combined loss
// on a tiny model (params <= 5000), for each architecture x lambda in {0, 0.1}.
GradCheckReport gradcheck_all(std::uint64_t seed);

// Single-combination check, exposed for unit tests.
GradCheckEntry gradcheck_one(Arch arch, double lambda, std::uint64_t seed);

}  // namespace pwiser
