#include "pwiser/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pwiser/rng.hpp"

namespace pwiser {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Bisects the bias so that mean sigmoid(bias + s_i) hits the target rate.
double calibrate_bias(const std::vector<double>& logits, double target) {
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double s : logits) mean += sigmoid(mid + s);
    mean /= static_cast<double>(logits.size());
    (mean < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void SynthSpec::validate() const {
  if (rows < 1) throw std::invalid_argument("rows must be >= 1");
  if (num_fields < 1) throw std::invalid_argument("num_fields must be >= 1");
  if (vocab < 1) throw std::invalid_argument("vocab must be >= 1");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0))
    throw std::invalid_argument("noise_rate must be in [0, 1)");
  if (!(target_ctr > 0.0 && target_ctr < 1.0))
    throw std::invalid_argument("target_ctr must be in (0, 1)");
  if (!(target_cvr_given_click > 0.0 && target_cvr_given_click < 1.0))
    throw std::invalid_argument("target_cvr_given_click must be in (0, 1)");
}

SynthLog generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto n = static_cast<std::size_t>(spec.rows);
  const double per_field_std_click =
      spec.click_weight_scale / std::sqrt(static_cast<double>(spec.num_fields));
  const double per_field_std_conv =
      spec.conv_weight_scale / std::sqrt(static_cast<double>(spec.num_fields));

  std::vector<std::vector<double>> w_click(static_cast<std::size_t>(spec.num_fields)),
      w_conv(static_cast<std::size_t>(spec.num_fields));
  for (int f = 0; f < spec.num_fields; ++f) {
    for (int v = 0; v < spec.vocab; ++v) {
      w_click[static_cast<std::size_t>(f)].push_back(rng.normal(0.0, per_field_std_click));
      w_conv[static_cast<std::size_t>(f)].push_back(rng.normal(0.0, per_field_std_conv));
    }
  }

  SynthLog log;
  log.num_fields = spec.num_fields;
  log.values.resize(n);
  std::vector<double> click_sum(n, 0.0), conv_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    log.values[i].resize(static_cast<std::size_t>(spec.num_fields));
    for (int f = 0; f < spec.num_fields; ++f) {
      int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.vocab)));
      log.values[i][static_cast<std::size_t>(f)] = v;
      click_sum[i] += w_click[static_cast<std::size_t>(f)][static_cast<std::size_t>(v)];
      conv_sum[i] += w_conv[static_cast<std::size_t>(f)][static_cast<std::size_t>(v)];
    }
  }
  const double click_bias = calibrate_bias(click_sum, spec.target_ctr);
  const double conv_bias = calibrate_bias(conv_sum, spec.target_cvr_given_click);

  log.y_ctr_clean.resize(n);
  log.y_ctr_noisy.resize(n);
  log.y_cvr.resize(n);
  log.true_p_ctr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double p = sigmoid(click_bias + click_sum[i]);
    log.true_p_ctr[i] = p;
    bool click = rng.bernoulli(p);
    bool conv = click && rng.bernoulli(sigmoid(conv_bias + conv_sum[i]));
    log.y_ctr_clean[i] = click ? 1 : 0;
    log.y_cvr[i] = conv ? 1 : 0;
    bool noisy_click = click || (spec.noise_rate > 0.0 && rng.bernoulli(spec.noise_rate));
    log.y_ctr_noisy[i] = noisy_click ? 1 : 0;
  }
  return log;
}

std::vector<std::string> synth_field_names(int num_fields) {
  std::vector<std::string> names;
  for (int f = 0; f < num_fields; ++f) names.push_back("f" + std::to_string(f));
  return names;
}

Dataset to_dataset(const SynthLog& log, bool noisy, std::int64_t vocab_size) {
  Dataset ds;
  ds.field_names = synth_field_names(log.num_fields);
  ds.samples.resize(log.rows());
  for (std::size_t i = 0; i < log.rows(); ++i) {
    Sample& s = ds.samples[i];
    s.features.reserve(static_cast<std::size_t>(log.num_fields));
    for (int f = 0; f < log.num_fields; ++f)
      s.features.push_back(hash_feature(
          ds.field_names[static_cast<std::size_t>(f)],
          "v" + std::to_string(log.values[i][static_cast<std::size_t>(f)]), vocab_size));
    s.y_ctr = noisy ? log.y_ctr_noisy[i] : log.y_ctr_clean[i];
    s.y_cvr = log.y_cvr[i];
  }
  return ds;
}

void write_tsv(const SynthLog& log, bool noisy, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (int f = 0; f < log.num_fields; ++f) os << 'f' << f << '\t';
  os << "y_ctr\ty_cvr\n";
  const auto& y = noisy ? log.y_ctr_noisy : log.y_ctr_clean;
  for (std::size_t i = 0; i < log.rows(); ++i) {
    for (int f = 0; f < log.num_fields; ++f)
      os << 'v' << log.values[i][static_cast<std::size_t>(f)] << '\t';
    os << int(y[i]) << '\t' << int(log.y_cvr[i]) << '\n';
  }
  if (!os) throw IoError("write failure: " + path);
}

void write_sidecar(const SynthLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "y_ctr_clean\ty_cvr\ttrue_p_ctr\n";
  os.precision(17);
  for (std::size_t i = 0; i < log.rows(); ++i)
    os << int(log.y_ctr_clean[i]) << '\t' << int(log.y_cvr[i]) << '\t' << log.true_p_ctr[i]
       << '\n';
  if (!os) throw IoError("write failure: " + path);
}

}  // namespace pwiser
