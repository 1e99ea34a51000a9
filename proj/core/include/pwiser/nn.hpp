#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pwiser/errors.hpp"
#include "pwiser/rng.hpp"

namespace pwiser {

using Mat = Eigen::MatrixXd;

struct Tensor {
  Mat value;
  Mat grad;
};

// Named parameter tensors with parallel gradient buffers.
// Iteration order is sorted by name, so seeding and checkpoints are
// independent of construction order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return items_.count(name) != 0; }
  void zero_grads();
  std::size_t num_params() const;
  bool empty() const { return items_.empty(); }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::map<std::string, Tensor> items_;
};

enum class Activation { none, relu };

// Record of forward operations; backward() replays them in reverse and
// accumulates gradients additively into node and parameter buffers.
class Tape {
 public:
  int input(Mat v);

  // Gathers rows of an embedding table; backward scatters into the rows used.
  int embed(ParamStore& ps, const std::string& table, const std::vector<int>& indices);

  // y = act(x * W + b); b is a 1 x d_out parameter broadcast over rows.
  int dense(int x, ParamStore& ps, const std::string& w_name, const std::string& b_name,
            Activation act);

  int concat_cols(const std::vector<int>& xs);

  // Row-wise softmax, stabilized by max subtraction.
  int softmax_rows(int x);

  // out = sum_e gate(:, e) .* expert_e, each expert n x d, gate n x E.
  int mix(const std::vector<int>& experts, int gate);

  // Elementwise sigmoid clamped to [1e-7, 1 - 1e-7].
  int sigmoid(int x);

  const Mat& value(int node) const { return nodes_[static_cast<std::size_t>(node)].val; }
  Mat& grad(int node) { return nodes_[static_cast<std::size_t>(node)].grad; }

  // Count of active ReLU units plus clamped sigmoid outputs across all
  // recorded ops. Finite differences of the loss are invalid when a
  // perturbation changes this activation pattern (the graph has a kink there).
  std::size_t kink_signature() const { return kinks_; }

  void backward();

 private:
  struct Node {
    Mat val;
    Mat grad;
  };
  int push(Mat v);
  std::vector<Node> nodes_;
  std::vector<std::function<void()>> back_;
  std::size_t kinks_ = 0;
};

enum class OptimizerType { adam, sgd };

struct OptimizerConfig {
  OptimizerType type = OptimizerType::adam;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction, or plain SGD. Weight decay is classic L2 added
// to the gradient before the moment update; biases (names ending in "/b")
// are excluded. Gradients are zeroed after each step.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(ParamStore& ps);
  std::int64_t steps() const { return step_count_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t step_count_ = 0;
  std::map<std::string, Mat> m_, v_;
};

// Glorot-uniform dense weights, N(0, 0.01) embeddings, zero biases.
// Each tensor is seeded from (seed, name), so results do not depend on
// parameter registration order.
void init_params(ParamStore& ps, std::uint64_t seed);

}  // namespace pwiser
