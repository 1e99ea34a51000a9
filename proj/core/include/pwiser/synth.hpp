#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwiser/data.hpp"

namespace pwiser {

// Ground-truth generator for impression logs. Features are uniform over the
// vocab; the click logit is bias + sum of per-(field,value) weights, and the
// bias is calibrated so the clean CTR matches target_ctr on the generated
// rows. Noise flips clean non-clicks to clicks with probability noise_rate;
// conversions are never fabricated.
struct SynthSpec {
  std::int64_t rows = 200000;
  int num_fields = 6;
  int vocab = 50;  // raw values per field
  double target_ctr = 0.04;
  double target_cvr_given_click = 0.10;
  double click_weight_scale = 1.0;  // stddev of the total click logit
  double conv_weight_scale = 1.0;
  double noise_rate = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthLog {
  int num_fields = 0;
  std::vector<std::vector<int>> values;  // [row][field], raw value ids
  std::vector<std::uint8_t> y_ctr_clean;
  std::vector<std::uint8_t> y_ctr_noisy;
  std::vector<std::uint8_t> y_cvr;  // identical in clean and noisy copies
  std::vector<double> true_p_ctr;

  std::size_t rows() const { return values.size(); }
};

SynthLog generate(const SynthSpec& spec);

// Hashes raw values against the canonical field names f0..f{F-1}.
Dataset to_dataset(const SynthLog& log, bool noisy, std::int64_t vocab_size);

std::vector<std::string> synth_field_names(int num_fields);

// Canonical TSV: f0..f{F-1}, y_ctr, y_cvr.
void write_tsv(const SynthLog& log, bool noisy, const std::string& path);

// Sidecar TSV with clean labels and true click probabilities, row-aligned.
void write_sidecar(const SynthLog& log, const std::string& path);

}  // namespace pwiser
