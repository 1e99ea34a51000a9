#include "pwiser/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "pwiser/rng.hpp"

namespace pwiser {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  loss.validate();
  model.validate();
  if (!model.mtl() && loss.pwiser_target != PwiserTarget::ctr)
    throw ConfigError("loss.pwiser_target=" + to_string(loss.pwiser_target) +
                      " requires an MTL architecture");
}

namespace {

void check_finite(double v, const char* component, int epoch, std::size_t batch) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite ") + component + " loss at epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch));
}

std::vector<double> node_column(const Tape& tape, int node) {
  const Mat& v = tape.value(node);
  return std::vector<double>(v.data(), v.data() + v.rows());
}

}  // namespace

TrainResult train(const Dataset& train_data, const Dataset& valid_data,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.samples.empty()) throw ConfigError("training dataset is empty");

  TrainResult res;
  res.model = std::make_unique<Model>(cfg.model, cfg.seed);
  Model& model = *res.model;
  Optimizer opt({OptimizerType::adam, cfg.lr, cfg.weight_decay});

  ParamStore* best = nullptr;
  ParamStore best_store;
  int evals_since_improvement = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto batches = epoch_batches(train_data.size(),
                                 static_cast<std::size_t>(cfg.batch_size), cfg.seed,
                                 cfg.shuffle, static_cast<std::uint64_t>(epoch));
    double sum_total = 0.0, sum_bce = 0.0, sum_pwiser = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<Sample> batch = gather(train_data, batches[b]);
      std::vector<int> y_ctr(batch.size()), y_cvr(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        y_ctr[i] = batch[i].y_ctr;
        y_cvr[i] = batch[i].y_cvr;
      }

      Tape tape;
      HeadNodes heads = model.forward(tape, batch);
      TaskPredictions preds =
          model.config().mtl()
              ? TaskPredictions::mtl_from(node_column(tape, heads.ctr),
                                          node_column(tape, heads.cvr))
              : TaskPredictions::stl_from(node_column(tape, heads.ctr));
      CombinedLossResult loss = combined_loss(preds, y_ctr, y_cvr, cfg.loss);
      check_finite(loss.bce_ctr, "bce_ctr", epoch, b);
      check_finite(loss.bce_ctcvr, "bce_ctcvr", epoch, b);
      check_finite(loss.pwiser, "pwiser", epoch, b);

      for (std::size_t i = 0; i < batch.size(); ++i)
        tape.grad(heads.ctr)(static_cast<Eigen::Index>(i), 0) = loss.grad_ctr[i];
      if (model.config().mtl())
        for (std::size_t i = 0; i < batch.size(); ++i)
          tape.grad(heads.cvr)(static_cast<Eigen::Index>(i), 0) = loss.grad_cvr[i];
      tape.backward();
      opt.step(model.params());

      sum_total += loss.value;
      sum_bce += loss.bce_ctr + loss.bce_ctcvr;
      sum_pwiser += loss.pwiser;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const double nb = static_cast<double>(batches.size());
    rec.loss_total = sum_total / nb;
    rec.loss_bce = sum_bce / nb;
    rec.loss_pwiser = sum_pwiser / nb;

    const bool do_eval =
        !valid_data.samples.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    if (do_eval) {
      EvalReport rep = evaluate(model, valid_data);
      rec.valid_auc_ctr = rep.auc_ctr;
      rec.valid_auc_ctcvr = rep.auc_ctcvr;
      if (rep.auc_ctr && (!res.best_auc_ctr || *rep.auc_ctr > *res.best_auc_ctr)) {
        res.best_auc_ctr = rep.auc_ctr;
        res.best_epoch = epoch;
        best_store = model.params();
        best = &best_store;
        evals_since_improvement = 0;
      } else {
        ++evals_since_improvement;
      }
    }
    res.history.push_back(rec);

    if (cfg.early_stop_patience && evals_since_improvement >= *cfg.early_stop_patience)
      break;
  }

  if (best != nullptr) {
    for (auto& [name, t] : model.params()) t.value = best->at(name).value;
  }
  return res;
}

std::string history_tsv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch\tloss_total\tloss_bce\tloss_pwiser\tvalid_auc_ctr\tvalid_auc_ctcvr\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& r : history) {
    os << r.epoch << '\t' << num(r.loss_total) << '\t' << num(r.loss_bce) << '\t'
       << num(r.loss_pwiser) << '\t'
       << (r.valid_auc_ctr ? num(*r.valid_auc_ctr) : "n/a") << '\t'
       << (r.valid_auc_ctcvr ? num(*r.valid_auc_ctcvr) : "n/a") << '\n';
  }
  return os.str();
}

namespace {

ModelConfig tiny_config(Arch arch) {
  ModelConfig mc;
  mc.arch = arch;
  mc.embed_dim = 4;
  mc.num_experts = 2;
  mc.num_shared_experts = 1;
  mc.num_task_experts = 1;
  mc.tower_widths = {4};
  mc.bottom_widths = {4};
  mc.expert_hidden = {4};
  mc.field_vocab_sizes = {8, 8};
  return mc;
}

std::vector<Sample> tiny_batch(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> batch;
  for (int i = 0; i < 24; ++i) {
    Sample s;
    s.features = {static_cast<std::int32_t>(rng.below(8)),
                  static_cast<std::int32_t>(rng.below(8))};
    // cycle through the three scenarios so every partition group is populated
    switch (i % 3) {
      case 0: s.y_ctr = 0; s.y_cvr = 0; break;
      case 1: s.y_ctr = 1; s.y_cvr = 0; break;
      case 2: s.y_ctr = 1; s.y_cvr = 1; break;
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

std::size_t active_pairs(const ScenarioPartition& part, double m1, double m2) {
  std::size_t n = 0;
  for (double b : part.scores_cvr) {
    for (double a : part.scores_ct_nocvr) n += (b < a - m1) ? 1 : 0;
    for (double z : part.scores_zeros) n += (b < z - m2) ? 1 : 0;
  }
  return n;
}

struct LossEval {
  double value = 0.0;
  // margin-violating ranking pairs plus the tape's activation-pattern count;
  // finite differences are invalid whenever a perturbation changes either
  // (hinge indicator and ReLU/clamp introduce kinks or jumps)
  std::size_t active = 0;
};

LossEval loss_value(Model& model, const std::vector<Sample>& batch,
                    const std::vector<int>& y_ctr, const std::vector<int>& y_cvr,
                    const LossConfig& lc) {
  Tape tape;
  HeadNodes heads = model.forward(tape, batch);
  TaskPredictions preds =
      model.config().mtl()
          ? TaskPredictions::mtl_from(node_column(tape, heads.ctr),
                                      node_column(tape, heads.cvr))
          : TaskPredictions::stl_from(node_column(tape, heads.ctr));
  LossEval ev;
  ev.value = combined_loss(preds, y_ctr, y_cvr, lc).value;
  ev.active = tape.kink_signature();
  if (lc.lambda != 0.0) {
    auto count_for = [&](const std::vector<double>& scores) {
      return active_pairs(partition_scores(scores, y_ctr, y_cvr), lc.m1, lc.m2);
    };
    if (lc.pwiser_target == PwiserTarget::ctr || lc.pwiser_target == PwiserTarget::both)
      ev.active += count_for(preds.p_ctr);
    if (lc.pwiser_target == PwiserTarget::ctcvr || lc.pwiser_target == PwiserTarget::both)
      ev.active += count_for(preds.p_ctcvr);
  }
  return ev;
}

}  // namespace

GradCheckEntry gradcheck_one(Arch arch, double lambda, std::uint64_t seed) {
  Model model(tiny_config(arch), seed);
  if (model.params().num_params() > 5000)
    throw std::logic_error("gradcheck model exceeds the tiny-parameter budget");
  std::vector<Sample> batch = tiny_batch(seed + 7);
  std::vector<int> y_ctr(batch.size()), y_cvr(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y_ctr[i] = batch[i].y_ctr;
    y_cvr[i] = batch[i].y_cvr;
  }
  LossConfig lc;
  lc.lambda = lambda;

  // analytic gradients
  model.params().zero_grads();
  {
    Tape tape;
    HeadNodes heads = model.forward(tape, batch);
    TaskPredictions preds =
        model.config().mtl()
            ? TaskPredictions::mtl_from(node_column(tape, heads.ctr),
                                        node_column(tape, heads.cvr))
            : TaskPredictions::stl_from(node_column(tape, heads.ctr));
    CombinedLossResult loss = combined_loss(preds, y_ctr, y_cvr, lc);
    for (std::size_t i = 0; i < batch.size(); ++i)
      tape.grad(heads.ctr)(static_cast<Eigen::Index>(i), 0) = loss.grad_ctr[i];
    if (model.config().mtl())
      for (std::size_t i = 0; i < batch.size(); ++i)
        tape.grad(heads.cvr)(static_cast<Eigen::Index>(i), 0) = loss.grad_cvr[i];
    tape.backward();
  }

  GradCheckEntry entry;
  entry.arch = arch;
  entry.lambda = lambda;
  const double h = 1e-6;
  for (auto& [name, t] : model.params()) {
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
        const double saved = t.value(i, j);
        t.value(i, j) = saved + h;
        const LossEval lp = loss_value(model, batch, y_ctr, y_cvr, lc);
        t.value(i, j) = saved - h;
        const LossEval lm = loss_value(model, batch, y_ctr, y_cvr, lc);
        t.value(i, j) = saved;
        // skip coordinates whose FD interval straddles a hinge boundary
        if (lp.active != lm.active) continue;
        const double fd = (lp.value - lm.value) / (2.0 * h);
        const double an = t.grad(i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        const double err = std::abs(fd - an) / denom;
        if (err > entry.max_rel_err) {
          entry.max_rel_err = err;
          entry.worst_param = name;
        }
      }
    }
  }
  return entry;
}

GradCheckReport gradcheck_all(std::uint64_t seed) {
  GradCheckReport rep;
  for (Arch arch : {Arch::shared_bottom, Arch::mmoe, Arch::ple, Arch::dnn}) {
    for (double lambda : {0.0, 0.1}) {
      GradCheckEntry e = gradcheck_one(arch, lambda, seed);
      rep.worst = std::max(rep.worst, e.max_rel_err);
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

std::string GradCheckReport::text() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s lambda=%.1f  max_rel_err=%.3e  (%s)\n",
                  to_string(e.arch).c_str(), e.lambda, e.max_rel_err,
                  e.worst_param.c_str());
    os << buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst=%.3e\n", worst);
  os << buf;
  return os.str();
}

}  // namespace pwiser
