#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pwiser/synth.hpp"

using namespace pwiser;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.rows = 20000;
  spec.num_fields = 4;
  spec.vocab = 20;
  spec.seed = 11;
  return spec;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("zero noise leaves labels untouched") {
  auto spec = small_spec();
  spec.noise_rate = 0.0;
  auto log = generate(spec);
  REQUIRE(log.rows() == 20000);
  CHECK(log.y_ctr_clean == log.y_ctr_noisy);
}

TEST_CASE("noise only flips non-clicks upward and preserves conversions") {
  auto spec = small_spec();
  spec.noise_rate = 0.2;
  auto log = generate(spec);
  std::size_t flips = 0, clean_neg = 0;
  for (std::size_t i = 0; i < log.rows(); ++i) {
    if (log.y_ctr_clean[i] == 1) CHECK(log.y_ctr_noisy[i] == 1);  // never flipped down
    if (log.y_ctr_clean[i] == 0) {
      ++clean_neg;
      flips += log.y_ctr_noisy[i];
    }
    if (log.y_cvr[i] == 1) CHECK(log.y_ctr_clean[i] == 1);  // conversions imply clicks
  }
  // flip fraction among clean negatives ~ Binomial(clean_neg, 0.2), 4 sigma band
  double frac = static_cast<double>(flips) / static_cast<double>(clean_neg);
  double sigma = std::sqrt(0.2 * 0.8 / static_cast<double>(clean_neg));
  CHECK(std::abs(frac - 0.2) < 4 * sigma);
}

TEST_CASE("clean CTR is calibrated to the target") {
  SynthSpec spec;
  spec.rows = 200000;
  spec.seed = 3;
  auto log = generate(spec);
  std::size_t clicks = 0;
  for (auto y : log.y_ctr_clean) clicks += y;
  double ctr = static_cast<double>(clicks) / static_cast<double>(log.rows());
  // bias is calibrated on these rows; allow a binomial 4 sigma band around 4%
  double sigma = std::sqrt(0.04 * 0.96 / static_cast<double>(log.rows()));
  CHECK(std::abs(ctr - 0.04) < 4 * sigma);

  // conversion rate among clean clicks near 10%
  std::size_t convs = 0;
  for (std::size_t i = 0; i < log.rows(); ++i) convs += log.y_cvr[i];
  double cvr = static_cast<double>(convs) / static_cast<double>(clicks);
  double sigma_cvr = std::sqrt(0.1 * 0.9 / static_cast<double>(clicks));
  CHECK(std::abs(cvr - 0.1) < 4 * sigma_cvr);

  // true click probabilities are valid and nondegenerate
  double mn = 1.0, mx = 0.0;
  for (double p : log.true_p_ctr) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    mn = std::min(mn, p);
    mx = std::max(mx, p);
  }
  CHECK(mx - mn > 0.01);
}

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate(small_spec());
  auto b = generate(small_spec());
  CHECK(a.values == b.values);
  CHECK(a.y_ctr_noisy == b.y_ctr_noisy);
  CHECK(a.true_p_ctr == b.true_p_ctr);
  auto spec2 = small_spec();
  spec2.seed = 12;
  auto c = generate(spec2);
  CHECK(a.y_ctr_noisy != c.y_ctr_noisy);
}

TEST_CASE("spec validation") {
  SynthSpec spec;
  spec.rows = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = SynthSpec{};
  spec.target_ctr = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = SynthSpec{};
  spec.noise_rate = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  CHECK_NOTHROW(SynthSpec{}.validate());
}

TEST_CASE("to_dataset and write_tsv round-trip through load_tsv") {
  auto spec = small_spec();
  spec.rows = 500;
  auto log = generate(spec);

  auto direct = to_dataset(log, /*noisy=*/true, 1000);
  TempFile f("pwiser_test_synth.tsv");
  write_tsv(log, /*noisy=*/true, f.path);
  auto loaded = load_tsv(f.path, synth_field_names(spec.num_fields), LabelPolicy::reject,
                         std::vector<std::int64_t>(spec.num_fields, 1000));
  CHECK(loaded.violations == 0);
  REQUIRE(loaded.dataset.size() == direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(loaded.dataset.samples[i].features == direct.samples[i].features);
    CHECK(loaded.dataset.samples[i].y_ctr == direct.samples[i].y_ctr);
    CHECK(loaded.dataset.samples[i].y_cvr == direct.samples[i].y_cvr);
  }

  // clean variant differs from noisy wherever a flip happened
  auto clean = to_dataset(log, /*noisy=*/false, 1000);
  bool any_diff = false;
  for (std::size_t i = 0; i < clean.size(); ++i)
    any_diff |= (clean.samples[i].y_ctr != direct.samples[i].y_ctr);
  CHECK(any_diff);
}

TEST_CASE("sidecar carries clean labels and probabilities") {
  auto spec = small_spec();
  spec.rows = 50;
  auto log = generate(spec);
  TempFile f("pwiser_test_sidecar.tsv");
  write_sidecar(log, f.path);

  std::ifstream is(f.path);
  std::string header;
  REQUIRE(std::getline(is, header));
  CHECK(header == "y_ctr_clean\ty_cvr\ttrue_p_ctr");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int yc, yv;
    double p;
    ss >> yc >> yv >> p;
    CHECK(yc == static_cast<int>(log.y_ctr_clean[rows]));
    CHECK(yv == static_cast<int>(log.y_cvr[rows]));
    CHECK(p == log.true_p_ctr[rows]);  // %.17g survives the round trip
    ++rows;
  }
  CHECK(rows == 50);
}
