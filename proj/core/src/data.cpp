#include "pwiser/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pwiser/rng.hpp"

namespace pwiser {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

int parse_label(const std::string& s, std::size_t row, const char* col) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw ConfigError("non-binary label '" + s + "' in column " + col + " at row " +
                    std::to_string(row));
}

}  // namespace

LabelPolicy parse_label_policy(const std::string& s) {
  if (s == "reject") return LabelPolicy::reject;
  if (s == "coerce") return LabelPolicy::coerce;
  throw ConfigError("unknown label policy: " + s);
}

std::int32_t hash_feature(const std::string& field_name, const std::string& raw_value,
                          std::int64_t vocab_size) {
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  std::uint64_t h = fnv1a64(field_name.data(), field_name.size());
  h = fnv1a64("=", 1, h);
  h = fnv1a64(raw_value.data(), raw_value.size(), h);
  return static_cast<std::int32_t>(h % static_cast<std::uint64_t>(vocab_size));
}

LoadResult load_tsv(const std::string& path, const std::vector<std::string>& schema,
                    LabelPolicy policy, const std::vector<std::int64_t>& vocab_sizes) {
  if (vocab_sizes.size() != schema.size())
    throw std::invalid_argument("load_tsv: vocab_sizes size must match schema");
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("missing header row in " + path);
  auto header = split_tabs(line);
  auto col_of = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ConfigError("missing column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> field_cols;
  for (const auto& f : schema) field_cols.push_back(col_of(f));
  const std::size_t ctr_col = col_of("y_ctr");
  const std::size_t cvr_col = col_of("y_cvr");

  LoadResult res;
  res.dataset.field_names = schema;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != header.size())
      throw ConfigError("row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " columns, expected " +
                        std::to_string(header.size()));
    Sample s;
    s.y_ctr = static_cast<std::uint8_t>(parse_label(cells[ctr_col], row, "y_ctr"));
    s.y_cvr = static_cast<std::uint8_t>(parse_label(cells[cvr_col], row, "y_cvr"));
    if (s.y_cvr == 1 && s.y_ctr == 0) {
      ++res.violations;
      if (policy == LabelPolicy::reject) continue;
      s.y_ctr = 1;
    }
    s.features.reserve(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f)
      s.features.push_back(hash_feature(schema[f], cells[field_cols[f]], vocab_sizes[f]));
    res.dataset.samples.push_back(std::move(s));
  }
  return res;
}

DatasetStats stats(const Dataset& ds) {
  DatasetStats st;
  st.impressions = ds.samples.size();
  for (const auto& s : ds.samples) {
    st.clicks += s.y_ctr;
    st.conversions += s.y_cvr;
  }
  if (st.impressions > 0) {
    st.ctr_ratio = static_cast<double>(st.clicks) / static_cast<double>(st.impressions);
    st.ctcvr_ratio =
        static_cast<double>(st.conversions) / static_cast<double>(st.impressions);
  }
  if (st.clicks > 0)
    st.cvr_ratio = static_cast<double>(st.conversions) / static_cast<double>(st.clicks);
  return st;
}

ScenarioPartition partition_batch(const std::vector<Sample>& batch,
                                  const std::vector<double>& scores) {
  if (batch.size() != scores.size())
    throw std::invalid_argument("partition_batch: batch/scores length mismatch");
  std::vector<int> y_ctr(batch.size()), y_cvr(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y_ctr[i] = batch[i].y_ctr;
    y_cvr[i] = batch[i].y_cvr;
  }
  return partition_scores(scores, y_ctr, y_cvr);
}

std::vector<std::vector<std::int32_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t seed, bool shuffle,
                                                     std::uint64_t epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::int32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  if (shuffle) {
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
    rng.shuffle(perm);
  }
  std::vector<std::vector<std::int32_t>> out;
  for (std::size_t off = 0; off < n; off += batch_size) {
    std::size_t len = std::min(batch_size, n - off);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(off),
                     perm.begin() + static_cast<std::ptrdiff_t>(off + len));
  }
  return out;
}

std::vector<Sample> gather(const Dataset& ds, const std::vector<std::int32_t>& indices) {
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(ds.samples[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace pwiser
