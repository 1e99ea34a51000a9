#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pwiser/errors.hpp"
#include "pwiser/loss.hpp"

namespace pwiser {

// One impression row. After validation y_cvr = 1 implies y_ctr = 1.
struct Sample {
  std::vector<std::int32_t> features;  // per-field hashed indices
  std::uint8_t y_ctr = 0;
  std::uint8_t y_cvr = 0;
};

struct Dataset {
  std::vector<std::string> field_names;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t num_fields() const { return field_names.size(); }
};

struct DatasetStats {
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  std::uint64_t conversions = 0;
  std::optional<double> ctr_ratio;    // clicks / impressions
  std::optional<double> cvr_ratio;    // conversions / clicks
  std::optional<double> ctcvr_ratio;  // conversions / impressions
};

enum class LabelPolicy { reject, coerce };

LabelPolicy parse_label_policy(const std::string& s);

struct LoadResult {
  Dataset dataset;
  std::uint64_t violations = 0;  // rows with y_cvr=1, y_ctr=0 coerced or dropped
};

// FNV-1a 64-bit over "field_name=raw_value", modulo vocab_size.
// Stable across runs and platforms.
std::int32_t hash_feature(const std::string& field_name, const std::string& raw_value,
                          std::int64_t vocab_size);

// Header-bearing UTF-8 TSV. The header must contain every schema field plus
// y_ctr and y_cvr; column order is free. Rows violating y_cvr <= y_ctr are
// coerced to y_ctr=1 (coerce) or dropped (reject), counted either way.
LoadResult load_tsv(const std::string& path, const std::vector<std::string>& schema,
                    LabelPolicy policy, const std::vector<std::int64_t>& vocab_sizes);

DatasetStats stats(const Dataset& ds);

// Groups a batch's head scores by the label scenarios.
ScenarioPartition partition_batch(const std::vector<Sample>& batch,
                                  const std::vector<double>& scores);

// Deterministic batch index sequence for one epoch: permutation drawn from
// (seed, epoch) when shuffling, file order otherwise; the final short batch
// is emitted.
std::vector<std::vector<std::int32_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t seed, bool shuffle,
                                                     std::uint64_t epoch = 0);

std::vector<Sample> gather(const Dataset& ds, const std::vector<std::int32_t>& indices);

}  // namespace pwiser
