#include "pwiser/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace pwiser {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::uint64_t pos = 0;
  for (int y : labels) pos += static_cast<std::uint64_t>(y);
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0)
    throw MetricError("auc undefined: only one class present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks within tie groups
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  double p = static_cast<double>(pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double log_loss(const std::vector<double>& scores, const std::vector<int>& labels) {
  return bce(scores, labels).value;
}

namespace {
std::string fmt_pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v * 100.0);
  return buf;
}
std::string fmt_raw(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}
}  // namespace

std::string EvalReport::text() const {
  std::ostringstream os;
  os << "auc_ctr=" << fmt_pct(auc_ctr) << '\n';
  os << "auc_ctcvr=" << fmt_pct(auc_ctcvr) << '\n';
  os << "logloss_ctr=" << fmt_raw(logloss_ctr) << '\n';
  os << "logloss_ctcvr=" << fmt_raw(logloss_ctcvr) << '\n';
  os << "n_cvr=" << n_cvr << '\n';
  os << "n_ct_nocvr=" << n_ct_nocvr << '\n';
  os << "n_zeros=" << n_zeros << '\n';
  for (const auto& e : errors) os << "error=" << e << '\n';
  return os.str();
}

std::string EvalReport::tsv_header() {
  return "auc_ctr\tauc_ctcvr\tlogloss_ctr\tlogloss_ctcvr\tn_cvr\tn_ct_nocvr\tn_zeros";
}

std::string EvalReport::tsv_row() const {
  std::ostringstream os;
  os << fmt_pct(auc_ctr) << '\t' << fmt_pct(auc_ctcvr) << '\t' << fmt_raw(logloss_ctr)
     << '\t' << fmt_raw(logloss_ctcvr) << '\t' << n_cvr << '\t' << n_ct_nocvr << '\t'
     << n_zeros;
  return os.str();
}

EvalReport evaluate(Model& model, const Dataset& ds, std::size_t batch_size) {
  if (ds.samples.empty()) throw std::invalid_argument("evaluate on empty dataset");
  const bool mtl = model.config().mtl();
  std::vector<double> p_ctr, p_ctcvr;
  std::vector<int> y_ctr, y_ctcvr;
  p_ctr.reserve(ds.size());
  EvalReport rep;
  for (std::size_t off = 0; off < ds.size(); off += batch_size) {
    std::size_t len = std::min(batch_size, ds.size() - off);
    std::vector<Sample> batch(ds.samples.begin() + static_cast<std::ptrdiff_t>(off),
                              ds.samples.begin() + static_cast<std::ptrdiff_t>(off + len));
    TaskPredictions preds = model.predict(batch);
    for (std::size_t i = 0; i < len; ++i) {
      const Sample& s = batch[i];
      p_ctr.push_back(preds.p_ctr[i]);
      y_ctr.push_back(s.y_ctr);
      if (mtl) {
        p_ctcvr.push_back(preds.p_ctcvr[i]);
        y_ctcvr.push_back(s.y_ctr * s.y_cvr);
      }
      if (s.y_cvr)
        ++rep.n_cvr;
      else if (s.y_ctr)
        ++rep.n_ct_nocvr;
      else
        ++rep.n_zeros;
    }
  }
  try {
    rep.auc_ctr = auc(p_ctr, y_ctr);
    rep.logloss_ctr = log_loss(p_ctr, y_ctr);
  } catch (const MetricError& e) {
    rep.errors.push_back(std::string("ctr: ") + e.what());
  }
  if (mtl) {
    try {
      rep.auc_ctcvr = auc(p_ctcvr, y_ctcvr);
      rep.logloss_ctcvr = log_loss(p_ctcvr, y_ctcvr);
    } catch (const MetricError& e) {
      rep.errors.push_back(std::string("ctcvr: ") + e.what());
    }
  }
  return rep;
}

}  // namespace pwiser
