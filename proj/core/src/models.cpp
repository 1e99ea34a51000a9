#include "pwiser/models.hpp"

#include <utility>

#include "pwiser/checkpoint.hpp"

namespace pwiser {

namespace {
const char* kTasks[2] = {"ctr", "cvr"};
}

Arch parse_arch(const std::string& s) {
  if (s == "shared_bottom") return Arch::shared_bottom;
  if (s == "mmoe") return Arch::mmoe;
  if (s == "ple") return Arch::ple;
  if (s == "dnn") return Arch::dnn;
  throw ConfigError("unknown arch: " + s);
}

std::string to_string(Arch a) {
  switch (a) {
    case Arch::shared_bottom: return "shared_bottom";
    case Arch::mmoe: return "mmoe";
    case Arch::ple: return "ple";
    case Arch::dnn: return "dnn";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("model.embed_dim must be >= 1");
  if (field_vocab_sizes.empty()) throw ConfigError("model has no feature fields");
  for (auto v : field_vocab_sizes)
    if (v < 1) throw ConfigError("field vocab sizes must be >= 1");
  if (arch == Arch::mmoe && num_experts < 1)
    throw ConfigError("model.num_experts must be >= 1");
  if (arch == Arch::ple) {
    if (num_task_experts < 1)
      throw ConfigError("ple requires at least one task-specific expert per task");
    if (num_shared_experts < 1) throw ConfigError("ple requires at least one shared expert");
  }
  if (expert_hidden.empty()) throw ConfigError("model.expert_hidden must be nonempty");
  for (int w : tower_widths)
    if (w < 1) throw ConfigError("tower widths must be >= 1");
  for (int w : expert_hidden)
    if (w < 1) throw ConfigError("expert hidden widths must be >= 1");
  for (int w : bottom_widths)
    if (w < 1) throw ConfigError("bottom widths must be >= 1");
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build_params();
  init_params(params_, seed);
}

void Model::build_params() {
  const int F = static_cast<int>(cfg_.field_vocab_sizes.size());
  const int D = F * cfg_.embed_dim;
  for (int f = 0; f < F; ++f)
    params_.add("embed/f" + std::to_string(f), cfg_.field_vocab_sizes[f], cfg_.embed_dim);

  auto add_mlp = [&](const std::string& prefix, int in, const std::vector<int>& widths) {
    int cur = in;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      std::string base = prefix + "/l" + std::to_string(k);
      params_.add(base + "/W", cur, widths[k]);
      params_.add(base + "/b", 1, widths[k]);
      cur = widths[k];
    }
    return cur;
  };
  auto add_expert = [&](const std::string& prefix) {
    int cur = add_mlp(prefix, D, cfg_.expert_hidden);
    params_.add(prefix + "/out/W", cur, cfg_.expert_hidden.back());
    params_.add(prefix + "/out/b", 1, cfg_.expert_hidden.back());
    return cfg_.expert_hidden.back();
  };
  auto add_tower_head = [&](const std::string& task, int in) {
    int cur = add_mlp("tower/" + task, in, cfg_.tower_widths);
    params_.add("head/" + task + "/W", cur, 1);
    params_.add("head/" + task + "/b", 1, 1);
  };

  switch (cfg_.arch) {
    case Arch::dnn:
      add_tower_head("ctr", D);
      break;
    case Arch::shared_bottom: {
      int cur = add_mlp("bottom", D, cfg_.bottom_widths);
      for (const char* task : kTasks) add_tower_head(task, cur);
      break;
    }
    case Arch::mmoe: {
      int out = 0;
      for (int e = 0; e < cfg_.num_experts; ++e)
        out = add_expert("expert/e" + std::to_string(e));
      for (const char* task : kTasks) {
        params_.add(std::string("gate/") + task + "/W", D, cfg_.num_experts);
        params_.add(std::string("gate/") + task + "/b", 1, cfg_.num_experts);
        add_tower_head(task, out);
      }
      break;
    }
    case Arch::ple: {
      int out = 0;
      for (int e = 0; e < cfg_.num_shared_experts; ++e)
        out = add_expert("expert/shared/e" + std::to_string(e));
      for (const char* task : kTasks) {
        for (int e = 0; e < cfg_.num_task_experts; ++e)
          out = add_expert(std::string("expert/") + task + "/e" + std::to_string(e));
        const int gate_w = cfg_.num_task_experts + cfg_.num_shared_experts;
        params_.add(std::string("gate/") + task + "/W", D, gate_w);
        params_.add(std::string("gate/") + task + "/b", 1, gate_w);
        add_tower_head(task, out);
      }
      break;
    }
  }
}

int Model::embed_concat(Tape& tape, const std::vector<Sample>& batch) {
  const int F = static_cast<int>(cfg_.field_vocab_sizes.size());
  std::vector<int> parts;
  std::vector<int> idx(batch.size());
  for (int f = 0; f < F; ++f) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (static_cast<std::size_t>(f) >= batch[i].features.size())
        throw std::invalid_argument("sample has fewer fields than the model");
      idx[i] = batch[i].features[static_cast<std::size_t>(f)];
    }
    parts.push_back(tape.embed(params_, "embed/f" + std::to_string(f), idx));
  }
  return parts.size() == 1 ? parts[0] : tape.concat_cols(parts);
}

int Model::mlp(Tape& tape, int x, const std::string& prefix, const std::vector<int>& widths,
               Activation last_act) {
  int cur = x;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    std::string base = prefix + "/l" + std::to_string(k);
    Activation act = (k + 1 == widths.size()) ? last_act : Activation::relu;
    cur = tape.dense(cur, params_, base + "/W", base + "/b", act);
  }
  return cur;
}

int Model::expert(Tape& tape, int x, const std::string& prefix) {
  int h = mlp(tape, x, prefix, cfg_.expert_hidden, Activation::relu);
  return tape.dense(h, params_, prefix + "/out/W", prefix + "/out/b", Activation::none);
}

int Model::tower_head(Tape& tape, int x, const std::string& task) {
  int h = mlp(tape, x, "tower/" + task, cfg_.tower_widths, Activation::relu);
  int logit = tape.dense(h, params_, "head/" + task + "/W", "head/" + task + "/b",
                         Activation::none);
  return tape.sigmoid(logit);
}

HeadNodes Model::forward(Tape& tape, const std::vector<Sample>& batch) {
  if (batch.empty()) throw std::invalid_argument("forward on empty batch");
  int x = embed_concat(tape, batch);
  HeadNodes heads;
  switch (cfg_.arch) {
    case Arch::dnn:
      heads.ctr = tower_head(tape, x, "ctr");
      break;
    case Arch::shared_bottom: {
      int h = mlp(tape, x, "bottom", cfg_.bottom_widths, Activation::relu);
      heads.ctr = tower_head(tape, h, "ctr");
      heads.cvr = tower_head(tape, h, "cvr");
      break;
    }
    case Arch::mmoe: {
      std::vector<int> experts;
      for (int e = 0; e < cfg_.num_experts; ++e)
        experts.push_back(expert(tape, x, "expert/e" + std::to_string(e)));
      int* out[2] = {&heads.ctr, &heads.cvr};
      for (int t = 0; t < 2; ++t) {
        std::string task = kTasks[t];
        int logits =
            tape.dense(x, params_, "gate/" + task + "/W", "gate/" + task + "/b",
                       Activation::none);
        int gate = tape.softmax_rows(logits);
        int mixed = tape.mix(experts, gate);
        *out[t] = tower_head(tape, mixed, task);
      }
      break;
    }
    case Arch::ple: {
      std::vector<int> shared;
      for (int e = 0; e < cfg_.num_shared_experts; ++e)
        shared.push_back(expert(tape, x, "expert/shared/e" + std::to_string(e)));
      int* out[2] = {&heads.ctr, &heads.cvr};
      for (int t = 0; t < 2; ++t) {
        std::string task = kTasks[t];
        std::vector<int> pool;
        for (int e = 0; e < cfg_.num_task_experts; ++e)
          pool.push_back(expert(tape, x, "expert/" + task + "/e" + std::to_string(e)));
        pool.insert(pool.end(), shared.begin(), shared.end());
        int logits =
            tape.dense(x, params_, "gate/" + task + "/W", "gate/" + task + "/b",
                       Activation::none);
        int gate = tape.softmax_rows(logits);
        int mixed = tape.mix(pool, gate);
        *out[t] = tower_head(tape, mixed, task);
      }
      break;
    }
  }
  return heads;
}

TaskPredictions Model::predict(const std::vector<Sample>& batch) {
  Tape tape;
  HeadNodes heads = forward(tape, batch);
  auto col = [&](int node) {
    const Mat& v = tape.value(node);
    return std::vector<double>(v.data(), v.data() + v.rows());
  };
  if (cfg_.mtl()) return TaskPredictions::mtl_from(col(heads.ctr), col(heads.cvr));
  return TaskPredictions::stl_from(col(heads.ctr));
}

void Model::save(const std::string& path) const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, t.value.rows(), t.value.cols()).value = t.value;
  auto meta_scalar = [&](const std::string& name, double v) {
    out.add("meta/" + name, 1, 1).value(0, 0) = v;
  };
  auto meta_vec = [&](const std::string& name, const auto& vals) {
    Tensor& t = out.add("meta/" + name, 1, static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
      t.value(0, static_cast<Eigen::Index>(i)) = static_cast<double>(vals[i]);
  };
  meta_scalar("arch", static_cast<double>(static_cast<int>(cfg_.arch)));
  meta_scalar("embed_dim", cfg_.embed_dim);
  meta_scalar("num_experts", cfg_.num_experts);
  meta_scalar("num_shared_experts", cfg_.num_shared_experts);
  meta_scalar("num_task_experts", cfg_.num_task_experts);
  meta_vec("tower_widths", cfg_.tower_widths);
  meta_vec("bottom_widths", cfg_.bottom_widths);
  meta_vec("expert_hidden", cfg_.expert_hidden);
  meta_vec("field_vocab_sizes", cfg_.field_vocab_sizes);
  save_checkpoint(out, path);
}

Model Model::load(const std::string& path) {
  ParamStore raw = load_checkpoint(path);
  ModelConfig cfg;
  auto scalar = [&](const std::string& name) {
    return static_cast<int>(raw.at("meta/" + name).value(0, 0));
  };
  auto vec_i = [&](const std::string& name) {
    const Mat& v = raw.at("meta/" + name).value;
    std::vector<int> out;
    for (Eigen::Index i = 0; i < v.cols(); ++i) out.push_back(static_cast<int>(v(0, i)));
    return out;
  };
  int arch_code;
  try {
    arch_code = scalar("arch");
  } catch (const std::invalid_argument&) {
    throw ConfigError("checkpoint lacks model metadata: " + path);
  }
  if (arch_code < 0 || arch_code > 3) throw ConfigError("bad arch code in " + path);
  cfg.arch = static_cast<Arch>(arch_code);
  cfg.embed_dim = scalar("embed_dim");
  cfg.num_experts = scalar("num_experts");
  cfg.num_shared_experts = scalar("num_shared_experts");
  cfg.num_task_experts = scalar("num_task_experts");
  cfg.tower_widths = vec_i("tower_widths");
  cfg.bottom_widths = vec_i("bottom_widths");
  cfg.expert_hidden = vec_i("expert_hidden");
  {
    const Mat& v = raw.at("meta/field_vocab_sizes").value;
    for (Eigen::Index i = 0; i < v.cols(); ++i)
      cfg.field_vocab_sizes.push_back(static_cast<std::int64_t>(v(0, i)));
  }
  Model m(cfg);
  m.cfg_.validate();
  for (const auto& [name, t] : raw) {
    if (name.rfind("meta/", 0) == 0) continue;
    m.params_.add(name, t.value.rows(), t.value.cols()).value = t.value;
  }
  return m;
}

}  // namespace pwiser
