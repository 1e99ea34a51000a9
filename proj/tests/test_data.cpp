#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "pwiser/data.hpp"
#include "pwiser/rng.hpp"

using namespace pwiser;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("fnv1a64 reference vector") {
  CHECK(fnv1a64("a", 1) == 0xAF63DC4C8601EC8CULL);
  CHECK(fnv1a64("", 0) == 0xCBF29CE484222325ULL);  // offset basis
}

TEST_CASE("hash_feature is stable, in range, and collapses at vocab 1") {
  auto h = hash_feature("user", "123", 1000);
  CHECK(h == hash_feature("user", "123", 1000));
  CHECK(h >= 0);
  CHECK(h < 1000);
  CHECK(hash_feature("user", "123", 1000) != hash_feature("item", "123", 1000));
  CHECK(hash_feature("anything", "at_all", 1) == 0);
}

TEST_CASE("load_tsv parses by header name and covers all three scenarios") {
  TempFile f("pwiser_test_basic.tsv",
             "y_cvr\tuser\titem\ty_ctr\n"  // shuffled column order
             "0\tu1\ti1\t0\n"
             "0\tu2\ti2\t1\n"
             "1\tu3\ti3\t1\n");
  auto r = load_tsv(f.path, {"user", "item"}, LabelPolicy::reject, {100, 100});
  CHECK(r.violations == 0);
  REQUIRE(r.dataset.size() == 3);
  CHECK(r.dataset.field_names == std::vector<std::string>{"user", "item"});
  CHECK(r.dataset.samples[0].y_ctr == 0);
  CHECK(r.dataset.samples[1].y_ctr == 1);
  CHECK(r.dataset.samples[1].y_cvr == 0);
  CHECK(r.dataset.samples[2].y_cvr == 1);
  CHECK(r.dataset.samples[0].features[0] == hash_feature("user", "u1", 100));
  CHECK(r.dataset.samples[2].features[1] == hash_feature("item", "i3", 100));
}

TEST_CASE("label violations: coerce keeps the row, reject drops it, both count") {
  const std::string body =
      "user\ty_ctr\ty_cvr\n"
      "u1\t0\t1\n"  // violation
      "u2\t1\t1\n";
  TempFile f1("pwiser_test_coerce.tsv", body);
  auto rc = load_tsv(f1.path, {"user"}, LabelPolicy::coerce, {50});
  CHECK(rc.violations == 1);
  REQUIRE(rc.dataset.size() == 2);
  CHECK(rc.dataset.samples[0].y_ctr == 1);  // coerced up
  CHECK(rc.dataset.samples[0].y_cvr == 1);

  TempFile f2("pwiser_test_reject.tsv", body);
  auto rr = load_tsv(f2.path, {"user"}, LabelPolicy::reject, {50});
  CHECK(rr.violations == 1);
  CHECK(rr.dataset.size() == 1);
}

TEST_CASE("load_tsv error paths") {
  CHECK_THROWS_AS(load_tsv("/nonexistent.tsv", {"user"}, LabelPolicy::coerce, {10}),
                  IoError);

  TempFile missing("pwiser_test_missing_col.tsv", "user\ty_ctr\nu1\t0\n");
  CHECK_THROWS_AS(load_tsv(missing.path, {"user"}, LabelPolicy::coerce, {10}), ConfigError);

  TempFile badlab("pwiser_test_badlabel.tsv",
                  "user\ty_ctr\ty_cvr\nu1\t0\t0\nu2\t2\t0\n");
  try {
    load_tsv(badlab.path, {"user"}, LabelPolicy::coerce, {10});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);  // 1-based file line
  }

  TempFile header_only("pwiser_test_header.tsv", "user\ty_ctr\ty_cvr\n");
  auto r = load_tsv(header_only.path, {"user"}, LabelPolicy::coerce, {10});
  CHECK(r.dataset.size() == 0);

  auto st = stats(r.dataset);
  CHECK(st.impressions == 0);
  CHECK(!st.ctr_ratio.has_value());
}

TEST_CASE("stats ratios on a hand-built dataset") {
  Dataset ds;
  ds.field_names = {"f"};
  for (int i = 0; i < 100; ++i) {
    Sample s;
    s.features = {0};
    s.y_ctr = i < 4 ? 1 : 0;
    s.y_cvr = i < 1 ? 1 : 0;
    ds.samples.push_back(s);
  }
  auto st = stats(ds);
  CHECK(st.impressions == 100);
  CHECK(st.clicks == 4);
  CHECK(st.conversions == 1);
  CHECK(*st.ctr_ratio == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(*st.cvr_ratio == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(*st.ctcvr_ratio == doctest::Approx(0.01).epsilon(1e-12));

  // no clicks -> cvr undefined
  Dataset none;
  none.field_names = {"f"};
  Sample s;
  s.features = {0};
  none.samples = {s};
  auto st2 = stats(none);
  CHECK(st2.ctr_ratio.has_value());
  CHECK(!st2.cvr_ratio.has_value());
}

TEST_CASE("partition_batch group sizes match a label recount") {
  Rng rng(31);
  const std::size_t n = 1000;
  std::vector<Sample> batch(n);
  std::vector<double> scores(n);
  std::size_t want_cvr = 0, want_ct = 0, want_zero = 0;
  for (std::size_t i = 0; i < n; ++i) {
    batch[i].y_ctr = rng.bernoulli(0.3) ? 1 : 0;
    batch[i].y_cvr = (batch[i].y_ctr && rng.bernoulli(0.4)) ? 1 : 0;
    scores[i] = rng.uniform(0.001, 0.999);
    if (batch[i].y_cvr)
      ++want_cvr;
    else if (batch[i].y_ctr)
      ++want_ct;
    else
      ++want_zero;
  }
  auto part = partition_batch(batch, scores);
  CHECK(part.scores_cvr.size() == want_cvr);
  CHECK(part.scores_ct_nocvr.size() == want_ct);
  CHECK(part.scores_zeros.size() == want_zero);
  CHECK(part.batch_size == n);
  // back-indices carry the right scores
  for (std::size_t i = 0; i < part.idx_cvr.size(); ++i)
    CHECK(part.scores_cvr[i] == scores[static_cast<std::size_t>(part.idx_cvr[i])]);
  for (std::size_t i = 0; i < part.idx_zeros.size(); ++i)
    CHECK(part.scores_zeros[i] == scores[static_cast<std::size_t>(part.idx_zeros[i])]);
}

TEST_CASE("epoch_batches shapes, determinism, and full coverage") {
  auto batches = epoch_batches(5, 2, 77, true, 0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 2);
  CHECK(batches[2].size() == 1);  // short final batch kept

  std::set<std::int32_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen == std::set<std::int32_t>{0, 1, 2, 3, 4});

  CHECK(epoch_batches(5, 2, 77, true, 0) == batches);          // same seed+epoch
  CHECK(epoch_batches(5, 2, 77, true, 1) != batches);          // epoch changes order
  auto plain = epoch_batches(5, 2, 77, false, 0);
  CHECK(plain[0] == std::vector<std::int32_t>{0, 1});          // no shuffle = file order
  CHECK(plain[2] == std::vector<std::int32_t>{4});
}

TEST_CASE("gather picks the indexed samples") {
  Dataset ds;
  ds.field_names = {"f"};
  for (int i = 0; i < 4; ++i) {
    Sample s;
    s.features = {i};
    ds.samples.push_back(s);
  }
  auto picked = gather(ds, {3, 1});
  REQUIRE(picked.size() == 2);
  CHECK(picked[0].features[0] == 3);
  CHECK(picked[1].features[0] == 1);
}

TEST_CASE("label policy parsing") {
  CHECK(parse_label_policy("reject") == LabelPolicy::reject);
  CHECK(parse_label_policy("coerce") == LabelPolicy::coerce);
  CHECK_THROWS_AS(parse_label_policy("ignore"), ConfigError);
}
