#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pwiser/errors.hpp"

namespace pwiser {

enum class PwiserTarget { ctr, ctcvr, both };
enum class Kernel { naive, fast };

PwiserTarget parse_pwiser_target(const std::string& s);
Kernel parse_kernel(const std::string& s);
std::string to_string(PwiserTarget t);
std::string to_string(Kernel k);

struct LossConfig {
  double lambda = 0.1;
  double m1 = 0.3;
  double m2 = 0.3;
  PwiserTarget pwiser_target = PwiserTarget::ctr;
  Kernel kernel = Kernel::fast;

  void validate() const;
};

// Per-batch index groups for the three label scenarios:
//   cvr:      y_cvr = 1
//   ctNocvr:  y_ctr = 1 and y_cvr = 0
//   zeros:    y_ctr = 0
// Back-indices point into the originating batch for gradient scatter.
struct ScenarioPartition {
  std::vector<double> scores_ct_nocvr;
  std::vector<double> scores_cvr;
  std::vector<double> scores_zeros;
  std::vector<int> idx_ct_nocvr;
  std::vector<int> idx_cvr;
  std::vector<int> idx_zeros;
  std::size_t batch_size = 0;

  // Builds a partition from bare score groups, assigning back-indices in
  // ctNocvr, cvr, zeros order. Convenient for kernel-level tests.
  static ScenarioPartition from_groups(std::vector<double> ct_nocvr,
                                       std::vector<double> cvr,
                                       std::vector<double> zeros);
};

// Partitions one batch's scores by labels. Group sizes sum to batch size.
ScenarioPartition partition_scores(const std::vector<double>& scores,
                                   const std::vector<int>& y_ctr,
                                   const std::vector<int>& y_cvr);

struct LossResult {
  double value = 0.0;
  // d(loss)/d(score) per sample, batch order.
  std::vector<double> grad;
};

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7].
LossResult bce(const std::vector<double>& scores, const std::vector<int>& labels);

// Pairwise ranking loss, brute-force O(A*C + Z*C) pair enumeration.
//   term1 = (1/A) sum_{a in ctNocvr} sum_{b in cvr} [b < a - m1] (a - b + m1)^2
//   term2 = (1/Z) sum_{z in zeros}   sum_{b in cvr} [b < z - m2] (z - b + m2)^2
// A term is 0 whenever its outer group or the cvr group is empty.
LossResult pwiser_naive(const ScenarioPartition& part, double m1, double m2);

// Same contract as pwiser_naive within 1e-9 relative error, computed with
// sorted groups, prefix sums and binary searches in O(n log n).
LossResult pwiser_fast(const ScenarioPartition& part, double m1, double m2);

LossResult pwiser(const ScenarioPartition& part, double m1, double m2, Kernel k);

struct TaskPredictions {
  std::vector<double> p_ctr;
  std::vector<double> p_cvr;    // empty in STL mode
  std::vector<double> p_ctcvr;  // p_ctr * p_cvr elementwise; empty in STL mode

  bool mtl() const { return !p_cvr.empty(); }
  static TaskPredictions mtl_from(std::vector<double> p_ctr, std::vector<double> p_cvr);
  static TaskPredictions stl_from(std::vector<double> p_ctr);
};

struct CombinedLossResult {
  double value = 0.0;
  double bce_ctr = 0.0;
  double bce_ctcvr = 0.0;  // 0 in STL mode
  double pwiser = 0.0;     // unweighted PWiseR component
  // d(total)/d(p_ctr) and d(total)/d(p_cvr) per sample; grad_cvr empty in STL.
  std::vector<double> grad_ctr;
  std::vector<double> grad_cvr;
};

// MTL: BCE(p_ctr, y_ctr) + BCE(p_ctcvr, y_ctr*y_cvr) + lambda * PWiseR(target head).
// STL: BCE(p_ctr, y_ctr) + lambda * PWiseR(p_ctr); target must be ctr.
CombinedLossResult combined_loss(const TaskPredictions& preds,
                                 const std::vector<int>& y_ctr,
                                 const std::vector<int>& y_cvr,
                                 const LossConfig& cfg);

}  // namespace pwiser
