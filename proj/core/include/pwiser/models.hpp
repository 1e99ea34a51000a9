#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwiser/data.hpp"
#include "pwiser/loss.hpp"
#include "pwiser/nn.hpp"

namespace pwiser {

enum class Arch { shared_bottom, mmoe, ple, dnn };

Arch parse_arch(const std::string& s);
std::string to_string(Arch a);

struct ModelConfig {
  Arch arch = Arch::mmoe;
  int embed_dim = 128;
  int num_experts = 8;         // MMoE
  int num_shared_experts = 4;  // PLE
  int num_task_experts = 2;    // PLE, per task
  std::vector<int> tower_widths{256, 128};
  std::vector<int> bottom_widths{256, 128};  // shared_bottom trunk
  std::vector<int> expert_hidden{128};       // expert MLP hidden widths
  std::vector<std::int64_t> field_vocab_sizes;

  bool mtl() const { return arch != Arch::dnn; }
  void validate() const;
};

// Tape node handles for the sigmoid heads of one forward pass.
struct HeadNodes {
  int ctr = -1;
  int cvr = -1;  // -1 for dnn
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  // Builds the forward graph for one batch on the given tape and returns the
  // head nodes. The tape must outlive any backward() call.
  HeadNodes forward(Tape& tape, const std::vector<Sample>& batch);

  // Forward without keeping the tape; p_ctcvr derived as p_ctr * p_cvr.
  TaskPredictions predict(const std::vector<Sample>& batch);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  void build_params();
  int embed_concat(Tape& tape, const std::vector<Sample>& batch);
  int mlp(Tape& tape, int x, const std::string& prefix, const std::vector<int>& widths,
          Activation last_act);
  int expert(Tape& tape, int x, const std::string& prefix);
  int tower_head(Tape& tape, int x, const std::string& task);

  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace pwiser
