#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "pwiser/checkpoint.hpp"
#include "pwiser/data.hpp"
#include "pwiser/loss.hpp"
#include "pwiser/metrics.hpp"
#include "pwiser/models.hpp"
#include "pwiser/rng.hpp"
#include "pwiser/runconfig.hpp"
#include "pwiser/synth.hpp"
#include "pwiser/trainer.hpp"

namespace fs = std::filesystem;
using namespace pwiser;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

// Collects artifacts for the per-run MANIFEST: relative path + FNV-1a hash
// of the file contents.
class RunDir {
 public:
  explicit RunDir(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_);
  }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void record(const std::string& name) { names_.push_back(name); }

  void write_text(const std::string& name, const std::string& content) {
    std::ofstream os(path(name), std::ios::binary);
    if (!os) throw IoError("cannot write " + path(name));
    os << content;
    if (!os) throw IoError("write failure on " + path(name));
    record(name);
  }

  void finalize() {
    std::sort(names_.begin(), names_.end());
    std::ostringstream os;
    for (const auto& name : names_) {
      std::ifstream is(path(name), std::ios::binary);
      if (!is) throw IoError("manifest: cannot reopen " + path(name));
      std::ostringstream buf;
      buf << is.rdbuf();
      std::string data = buf.str();
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx",
                    static_cast<unsigned long long>(fnv1a64(data.data(), data.size())));
      os << hex << "  " << name << '\n';
    }
    std::ofstream m(path("MANIFEST"), std::ios::binary);
    m << os.str();
    if (!m) throw IoError("cannot write MANIFEST in " + dir_);
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
};

std::string default_run_dir(const std::string& cmd) {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&t));
  return "runs/" + std::string(buf) + "-" + cmd;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

void print_stats(const DatasetStats& st) {
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return std::string(buf);
  };
  std::cout << "impressions=" << st.impressions << "\nclicks=" << st.clicks
            << "\nconversions=" << st.conversions << "\nctr=" << pct(st.ctr_ratio)
            << "\ncvr=" << pct(st.cvr_ratio) << "\nctcvr=" << pct(st.ctcvr_ratio) << "\n";
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  for (const auto& kv : overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

Dataset load_dataset(const RunConfig& cfg, const std::string& path) {
  if (cfg.schema.empty()) throw ConfigError("data.schema is required");
  std::vector<std::int64_t> vocab(cfg.schema.size(), cfg.vocab_size);
  LoadResult lr = load_tsv(path, cfg.schema, cfg.policy, vocab);
  if (lr.violations > 0)
    std::cerr << "warning: " << lr.violations << " label violations in " << path << "\n";
  return std::move(lr.dataset);
}

struct TrainArtifacts {
  std::optional<double> auc_ctr;
};

TrainArtifacts run_train(RunConfig cfg, RunDir& run) {
  if (cfg.train_path.empty()) throw ConfigError("data.train_path is required");
  std::string echo = cfg.echo();
  std::cout << echo;
  run.write_text("effective_config.txt", echo);

  Dataset train_ds = load_dataset(cfg, cfg.train_path);
  Dataset valid_ds;
  if (!cfg.valid_path.empty()) valid_ds = load_dataset(cfg, cfg.valid_path);

  cfg.train.model.field_vocab_sizes.assign(cfg.schema.size(), cfg.vocab_size);
  TrainResult res = train(train_ds, valid_ds, cfg.train);

  res.model->save(run.path("checkpoint.pwsr"));
  run.record("checkpoint.pwsr");
  run.write_text("history.tsv", history_tsv(res.history));

  TrainArtifacts out;
  const Dataset& eval_ds = valid_ds.samples.empty() ? train_ds : valid_ds;
  EvalReport rep = evaluate(*res.model, eval_ds);
  out.auc_ctr = rep.auc_ctr;
  run.write_text("report.txt", rep.text());
  run.write_text("report.tsv", EvalReport::tsv_header() + "\n" + rep.tsv_row() + "\n");
  std::cout << rep.text();
  return out;
}

int cmd_synth_gen(const SynthSpec& spec, const std::string& out_dir) {
  RunDir run(out_dir.empty() ? default_run_dir("synth") : out_dir);
  SynthLog log = generate(spec);
  write_tsv(log, true, run.path("synth.tsv"));
  run.record("synth.tsv");
  write_tsv(log, false, run.path("synth_clean.tsv"));
  run.record("synth_clean.tsv");
  write_sidecar(log, run.path("synth_sidecar.tsv"));
  run.record("synth_sidecar.tsv");
  run.finalize();
  Dataset noisy = to_dataset(log, true, 2);
  print_stats(stats(noisy));
  std::cout << "wrote " << run.dir() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  RunDir run(out_dir.empty() ? default_run_dir("train") : out_dir);
  run_train(load_run_config(config_path, overrides), run);
  run.finalize();
  std::cout << "wrote " << run.dir() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path,
             std::string schema_csv, const std::string& policy_str,
             const std::string& out_dir) {
  Model model = Model::load(checkpoint);
  const auto F = model.config().field_vocab_sizes.size();
  std::vector<std::string> schema;
  if (schema_csv.empty()) {
    for (std::size_t f = 0; f < F; ++f) schema.push_back("f" + std::to_string(f));
  } else {
    std::stringstream ss(schema_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) schema.push_back(tok);
  }
  if (schema.size() != F)
    throw ConfigError("schema has " + std::to_string(schema.size()) +
                      " fields but checkpoint expects " + std::to_string(F));
  LoadResult lr = load_tsv(data_path, schema, parse_label_policy(policy_str),
                           model.config().field_vocab_sizes);
  if (lr.dataset.samples.empty()) throw ConfigError("dataset is empty: " + data_path);
  EvalReport rep = evaluate(model, lr.dataset);
  if (rep.auc_ctr == std::nullopt && !rep.errors.empty())
    throw ConfigError("evaluation failed: " + rep.errors.front());
  std::cout << rep.text();
  if (!out_dir.empty()) {
    RunDir run(out_dir);
    run.write_text("report.txt", rep.text());
    run.write_text("report.tsv", EvalReport::tsv_header() + "\n" + rep.tsv_row() + "\n");
    run.finalize();
  }
  return kExitOk;
}

int cmd_stats(const std::string& data_path, const std::string& schema_csv,
              const std::string& policy_str) {
  std::vector<std::string> schema;
  std::stringstream ss(schema_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) schema.push_back(tok);
  if (schema.empty()) throw ConfigError("--schema is required");
  std::vector<std::int64_t> vocab(schema.size(), 100003);
  LoadResult lr = load_tsv(data_path, schema, parse_label_policy(policy_str), vocab);
  if (lr.violations > 0) std::cout << "label_violations=" << lr.violations << "\n";
  print_stats(stats(lr.dataset));
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  GradCheckReport rep = gradcheck_all(seed);
  std::cout << rep.text();
  return kExitOk;
}

ScenarioPartition random_partition(std::size_t a, std::size_t c, std::size_t z, Rng& rng) {
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(1e-6, 1.0 - 1e-6);
    return v;
  };
  return ScenarioPartition::from_groups(draw(a), draw(c), draw(z));
}

int cmd_bench_loss(const std::string& sizes_csv, int reps) {
  std::vector<std::size_t> sizes;
  for (double d : parse_double_list(sizes_csv)) sizes.push_back(static_cast<std::size_t>(d));
  if (sizes.empty()) sizes = {1024, 4096, 16384, 32768};
  std::printf("%10s %14s %14s %14s %14s %12s\n", "n/group", "naive_mean_ms", "naive_min_ms",
              "fast_mean_ms", "fast_min_ms", "max_rel_dev");
  Rng rng(12345);
  for (std::size_t n : sizes) {
    ScenarioPartition part = random_partition(n, n, n, rng);
    double naive_sum = 0, naive_min = 1e300, fast_sum = 0, fast_min = 1e300;
    double max_dev = 0;
    for (int r = 0; r < reps; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      LossResult rn = pwiser_naive(part, 0.3, 0.3);
      auto t1 = std::chrono::steady_clock::now();
      LossResult rf = pwiser_fast(part, 0.3, 0.3);
      auto t2 = std::chrono::steady_clock::now();
      double tn = std::chrono::duration<double, std::milli>(t1 - t0).count();
      double tf = std::chrono::duration<double, std::milli>(t2 - t1).count();
      naive_sum += tn;
      naive_min = std::min(naive_min, tn);
      fast_sum += tf;
      fast_min = std::min(fast_min, tf);
      max_dev = std::max(max_dev, std::abs(rf.value - rn.value) /
                                      std::max(1.0, std::abs(rn.value)));
    }
    std::printf("%10zu %14.3f %14.3f %14.3f %14.3f %12.3e\n", n, naive_sum / reps,
                naive_min, fast_sum / reps, fast_min, max_dev);
  }
  return kExitOk;
}

int cmd_gridsearch(const std::string& config_path, const std::vector<std::string>& overrides,
                   const std::string& lambdas_csv, const std::string& m1s_csv,
                   const std::string& m2s_csv, const std::string& out_dir) {
  RunConfig base = load_run_config(config_path, overrides);
  std::vector<double> lambdas = parse_double_list(lambdas_csv);
  std::vector<double> m1s = parse_double_list(m1s_csv);
  std::vector<double> m2s = parse_double_list(m2s_csv);
  if (lambdas.empty()) lambdas = {base.train.loss.lambda};
  if (m1s.empty()) m1s = {base.train.loss.m1};
  if (m2s.empty()) m2s = {base.train.loss.m2};

  RunDir run(out_dir.empty() ? default_run_dir("grid") : out_dir);
  struct Cell {
    double lambda, m1, m2;
    std::optional<double> auc_ctr;
    std::string error;
  };
  std::vector<Cell> cells;
  int idx = 0;
  for (double lambda : lambdas)
    for (double m1 : m1s)
      for (double m2 : m2s) {
        Cell cell{lambda, m1, m2, std::nullopt, ""};
        RunConfig cfg = base;
        cfg.train.loss.lambda = lambda;
        cfg.train.loss.m1 = m1;
        cfg.train.loss.m2 = m2;
        std::string sub = "cell" + std::to_string(idx++);
        try {
          RunDir cell_run(run.path(sub));
          TrainArtifacts art = run_train(cfg, cell_run);
          cell_run.finalize();
          cell.auc_ctr = art.auc_ctr;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        cells.push_back(cell);
      }

  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return a.auc_ctr.value_or(-1.0) > b.auc_ctr.value_or(-1.0);
  });
  std::ostringstream os;
  os << "lambda\tm1\tm2\tvalid_auc_ctr\terror\n";
  for (const auto& c : cells) {
    char buf[128];
    if (c.auc_ctr)
      std::snprintf(buf, sizeof buf, "%g\t%g\t%g\t%.3f\t\n", c.lambda, c.m1, c.m2,
                    *c.auc_ctr * 100.0);
    else
      std::snprintf(buf, sizeof buf, "%g\t%g\t%g\tn/a\t%s\n", c.lambda, c.m1, c.m2,
                    c.error.c_str());
    os << buf;
  }
  run.write_text("results.tsv", os.str());
  run.finalize();
  std::cout << os.str();
  if (!cells.empty() && cells.front().auc_ctr) {
    std::printf("best: lambda=%g m1=%g m2=%g auc_ctr=%.3f\n", cells.front().lambda,
                cells.front().m1, cells.front().m2, *cells.front().auc_ctr * 100.0);
  }
  return kExitOk;
}

std::string config_key_help() {
  std::string out = "Config keys (key=value file or --set overrides) and defaults:\n";
  RunConfig defaults;
  out += defaults.echo();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task CTR/CVR training engine with a pairwise ranking loss"};
  app.require_subcommand(1);
  app.footer(config_key_help());

  // synth-gen
  auto* sg = app.add_subcommand("synth-gen", "Generate a synthetic impression log");
  SynthSpec spec;
  std::string sg_out;
  sg->add_option("--rows", spec.rows, "Number of rows")->capture_default_str();
  sg->add_option("--fields", spec.num_fields, "Number of categorical fields")
      ->capture_default_str();
  sg->add_option("--vocab", spec.vocab, "Distinct raw values per field")
      ->capture_default_str();
  sg->add_option("--noise-rate", spec.noise_rate, "Spurious click probability")
      ->capture_default_str();
  sg->add_option("--target-ctr", spec.target_ctr, "Clean click rate")->capture_default_str();
  sg->add_option("--target-cvr", spec.target_cvr_given_click, "Conversion rate given click")
      ->capture_default_str();
  sg->add_option("--seed", spec.seed, "RNG seed")->capture_default_str();
  sg->add_option("--out-dir", sg_out, "Output directory (default runs/<timestamp>-synth)");

  // train
  auto* tr = app.add_subcommand("train", "Train a model from a key=value config");
  std::string tr_config, tr_out;
  std::vector<std::string> tr_sets;
  tr->add_option("--config", tr_config, "Path to key=value config file");
  tr->add_option("--set", tr_sets, "Override, e.g. --set loss.lambda=0.1");
  tr->add_option("--out-dir", tr_out, "Output directory");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_schema, ev_policy = "coerce", ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
  ev->add_option("--data", ev_data, "TSV dataset path")->required();
  ev->add_option("--schema", ev_schema, "Comma-separated feature fields (default f0..fN)");
  ev->add_option("--policy", ev_policy, "Label policy: coerce|reject")
      ->capture_default_str();
  ev->add_option("--out-dir", ev_out, "Optional report output directory");

  // stats
  auto* st = app.add_subcommand("stats", "Dataset statistics for an ingested TSV");
  std::string st_data, st_schema, st_policy = "coerce";
  st->add_option("--data", st_data, "TSV dataset path")->required();
  st->add_option("--schema", st_schema, "Comma-separated feature fields")->required();
  st->add_option("--policy", st_policy, "Label policy: coerce|reject")
      ->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  std::uint64_t gc_seed = 42;
  gc->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();

  // bench-loss
  auto* bl = app.add_subcommand("bench-loss", "Time the naive and fast loss kernels");
  std::string bl_sizes;
  int bl_reps = 5;
  bl->add_option("--sizes", bl_sizes, "Comma-separated group sizes");
  bl->add_option("--reps", bl_reps, "Repetitions per size")->capture_default_str();

  // gridsearch
  auto* gs = app.add_subcommand("gridsearch", "Grid search over lambda, m1, m2");
  std::string gs_config, gs_lambdas, gs_m1s, gs_m2s, gs_out;
  std::vector<std::string> gs_sets;
  gs->add_option("--config", gs_config, "Path to key=value config file");
  gs->add_option("--set", gs_sets, "Override, e.g. --set train.epochs=1");
  gs->add_option("--lambda", gs_lambdas, "Comma-separated lambda grid");
  gs->add_option("--m1", gs_m1s, "Comma-separated m1 grid");
  gs->add_option("--m2", gs_m2s, "Comma-separated m2 grid");
  gs->add_option("--out-dir", gs_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sg->parsed()) return cmd_synth_gen(spec, sg_out);
    if (tr->parsed()) return cmd_train(tr_config, tr_sets, tr_out);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_schema, ev_policy, ev_out);
    if (st->parsed()) return cmd_stats(st_data, st_schema, st_policy);
    if (gc->parsed()) return cmd_gradcheck(gc_seed);
    if (bl->parsed()) return cmd_bench_loss(bl_sizes, bl_reps);
    if (gs->parsed())
      return cmd_gridsearch(gs_config, gs_sets, gs_lambdas, gs_m1s, gs_m2s, gs_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
