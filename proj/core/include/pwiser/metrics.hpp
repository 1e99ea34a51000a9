#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pwiser/data.hpp"
#include "pwiser/models.hpp"

namespace pwiser {

// AUC via the Mann-Whitney statistic with averaged ranks for ties.
// Throws MetricError when only one class is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

double log_loss(const std::vector<double>& scores, const std::vector<int>& labels);

struct EvalReport {
  std::optional<double> auc_ctr;      // fraction in [0,1]
  std::optional<double> auc_ctcvr;    // MTL only
  std::optional<double> logloss_ctr;
  std::optional<double> logloss_ctcvr;
  std::uint64_t n_cvr = 0;       // click with conversion
  std::uint64_t n_ct_nocvr = 0;  // click without conversion
  std::uint64_t n_zeros = 0;     // no click
  std::vector<std::string> errors;  // per-task metric failures

  // Flat key=value block; AUCs as percentages with 3 decimals.
  std::string text() const;
  // Single tab-separated row for harness aggregation (same key order).
  std::string tsv_row() const;
  static std::string tsv_header();
};

// CTR AUC over all impressions; CTCVR AUC over all impressions against
// y_ctr * y_cvr (MTL only). Single-class failures for one task are recorded
// while the other task is reported normally.
EvalReport evaluate(Model& model, const Dataset& ds, std::size_t batch_size = 4096);

}  // namespace pwiser
