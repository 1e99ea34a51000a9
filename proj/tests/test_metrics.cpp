#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pwiser/metrics.hpp"
#include "pwiser/rng.hpp"
#include "pwiser/synth.hpp"

using namespace pwiser;

namespace {

// Pair-counting AUC: (wins + 0.5 * ties) / (pos * neg).
double oracle_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, ties = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      ++pos;
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (labels[j] == 1) continue;
        if (scores[i] > scores[j])
          wins += 1.0;
        else if (scores[i] == scores[j])
          ties += 1.0;
      }
    } else {
      ++neg;
    }
  }
  return (wins + 0.5 * ties) / (static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace

TEST_CASE("auc on hand cases") {
  CHECK(auc({0.1, 0.9}, {0, 1}) == 1.0);
  CHECK(auc({0.9, 0.1}, {0, 1}) == 0.0);
  CHECK(auc({0.5, 0.5}, {0, 1}) == 0.5);
  CHECK(auc({0.2, 0.5, 0.5, 0.9}, {0, 0, 1, 1}) == doctest::Approx(0.875).epsilon(1e-12));
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), MetricError);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 0}), MetricError);
  CHECK_THROWS_AS(auc({}, {}), MetricError);
}

TEST_CASE("auc matches the pair-counting oracle with heavy ties") {
  Rng rng(17);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 2 + rng.below(511);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // quantized scores force many exact ties
      scores[i] = static_cast<double>(rng.below(8)) / 8.0;
      labels[i] = rng.bernoulli(0.3) ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    CHECK(std::abs(auc(scores, labels) - oracle_auc(scores, labels)) <= 1e-12);
  }
}

TEST_CASE("auc is invariant to monotone transforms and flips under negation") {
  Rng rng(23);
  const std::size_t n = 300;
  std::vector<double> scores(n), warped(n), negated(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform(0.01, 0.99);  // continuous, ties almost surely absent
    warped[i] = std::exp(3.0 * scores[i]);
    negated[i] = -scores[i];
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  double a = auc(scores, labels);
  CHECK(auc(warped, labels) == doctest::Approx(a).epsilon(1e-12));
  CHECK(auc(negated, labels) == doctest::Approx(1.0 - a).epsilon(1e-12));
}

TEST_CASE("log_loss agrees with direct computation") {
  std::vector<double> p{0.9, 0.1, 0.6};
  std::vector<int> y{1, 0, 0};
  double expect = -(std::log(0.9) + std::log(0.9) + std::log(0.4)) / 3.0;
  CHECK(log_loss(p, y) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("evaluate: constant model scores 0.5 AUC, MTL reports both tasks") {
  ModelConfig mc;
  mc.arch = Arch::mmoe;
  mc.embed_dim = 4;
  mc.num_experts = 2;
  mc.tower_widths = {4};
  mc.expert_hidden = {4};
  mc.field_vocab_sizes = {16, 16};
  Model m(mc, 1);
  for (auto& [name, t] : m.params()) t.value.setZero();  // all heads 0.5

  Dataset ds;
  ds.field_names = {"a", "b"};
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    Sample s;
    s.features = {static_cast<std::int32_t>(rng.below(16)),
                  static_cast<std::int32_t>(rng.below(16))};
    s.y_ctr = rng.bernoulli(0.4) ? 1 : 0;
    s.y_cvr = (s.y_ctr && rng.bernoulli(0.5)) ? 1 : 0;
    ds.samples.push_back(s);
  }
  auto rep = evaluate(m, ds, 64);
  REQUIRE(rep.auc_ctr.has_value());
  REQUIRE(rep.auc_ctcvr.has_value());
  CHECK(*rep.auc_ctr == 0.5);
  CHECK(*rep.auc_ctcvr == 0.5);
  CHECK(rep.errors.empty());
  CHECK(rep.n_cvr + rep.n_ct_nocvr + rep.n_zeros == 200);

  auto st = stats(ds);
  CHECK(rep.n_zeros == st.impressions - st.clicks);
  CHECK(rep.n_cvr == st.conversions);

  // report text carries AUC as a percentage
  CHECK(rep.text().find("auc_ctr=50.000") != std::string::npos);
}

TEST_CASE("evaluate: STL model omits the ctcvr metrics") {
  ModelConfig mc;
  mc.arch = Arch::dnn;
  mc.embed_dim = 4;
  mc.tower_widths = {4};
  mc.field_vocab_sizes = {16};
  Model m(mc, 2);
  Dataset ds;
  ds.field_names = {"a"};
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    Sample s;
    s.features = {static_cast<std::int32_t>(rng.below(16))};
    s.y_ctr = rng.bernoulli(0.5) ? 1 : 0;
    ds.samples.push_back(s);
  }
  auto rep = evaluate(m, ds, 32);
  CHECK(rep.auc_ctr.has_value());
  CHECK(!rep.auc_ctcvr.has_value());
  CHECK(!rep.logloss_ctcvr.has_value());
}

TEST_CASE("evaluate records a per-task error on single-class labels") {
  ModelConfig mc;
  mc.arch = Arch::mmoe;
  mc.embed_dim = 4;
  mc.num_experts = 2;
  mc.tower_widths = {4};
  mc.expert_hidden = {4};
  mc.field_vocab_sizes = {16};
  Model m(mc, 3);
  Dataset ds;
  ds.field_names = {"a"};
  Rng rng(12);
  for (int i = 0; i < 60; ++i) {
    Sample s;
    s.features = {static_cast<std::int32_t>(rng.below(16))};
    s.y_ctr = rng.bernoulli(0.5) ? 1 : 0;
    s.y_cvr = 0;  // CTCVR labels all zero -> single class
    ds.samples.push_back(s);
  }
  auto rep = evaluate(m, ds, 32);
  CHECK(rep.auc_ctr.has_value());
  CHECK(!rep.auc_ctcvr.has_value());
  CHECK(!rep.errors.empty());
}

TEST_CASE("scoring the generating probabilities beats chance comfortably") {
  SynthSpec spec;
  spec.rows = 20000;
  spec.num_fields = 4;
  spec.vocab = 20;
  spec.noise_rate = 0.0;
  spec.seed = 41;
  auto log = generate(spec);
  std::vector<int> labels(log.rows());
  for (std::size_t i = 0; i < log.rows(); ++i) labels[i] = log.y_ctr_clean[i];
  // the Bayes scores are the true click probabilities
  CHECK(auc(log.true_p_ctr, labels) > 0.65);
}

TEST_CASE("tsv row and header have matching column counts") {
  EvalReport rep;
  rep.auc_ctr = 0.5;
  auto count = [](const std::string& s) {
    return std::count(s.begin(), s.end(), '\t');
  };
  CHECK(count(EvalReport::tsv_header()) == count(rep.tsv_row()));
}
