#include "pwiser/loss.hpp"

#include <algorithm>
#include <cmath>

namespace pwiser {

namespace {

constexpr double kBceEps = 1e-7;

void check_margin(double m, const char* name) {
  if (!(m >= 0.0 && m < 1.0))
    throw std::invalid_argument(std::string(name) + " must be in [0, 1)");
}

void check_scores_open_unit(const std::vector<double>& s, const char* group) {
  for (double v : s)
    if (!(v > 0.0 && v < 1.0))
      throw std::invalid_argument(std::string("score outside (0,1) in group ") + group);
}

void validate_partition(const ScenarioPartition& p, double m1, double m2) {
  check_margin(m1, "m1");
  check_margin(m2, "m2");
  check_scores_open_unit(p.scores_ct_nocvr, "ctNocvr");
  check_scores_open_unit(p.scores_cvr, "cvr");
  check_scores_open_unit(p.scores_zeros, "zeros");
}

}  // namespace

PwiserTarget parse_pwiser_target(const std::string& s) {
  if (s == "ctr") return PwiserTarget::ctr;
  if (s == "ctcvr") return PwiserTarget::ctcvr;
  if (s == "both") return PwiserTarget::both;
  throw ConfigError("unknown pwiser_target: " + s);
}

Kernel parse_kernel(const std::string& s) {
  if (s == "naive") return Kernel::naive;
  if (s == "fast") return Kernel::fast;
  throw ConfigError("unknown kernel: " + s);
}

std::string to_string(PwiserTarget t) {
  switch (t) {
    case PwiserTarget::ctr: return "ctr";
    case PwiserTarget::ctcvr: return "ctcvr";
    case PwiserTarget::both: return "both";
  }
  return "?";
}

std::string to_string(Kernel k) { return k == Kernel::naive ? "naive" : "fast"; }

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
  if (!(m1 >= 0.0 && m1 < 1.0)) throw ConfigError("loss.m1 must be in [0, 1)");
  if (!(m2 >= 0.0 && m2 < 1.0)) throw ConfigError("loss.m2 must be in [0, 1)");
}

ScenarioPartition ScenarioPartition::from_groups(std::vector<double> ct_nocvr,
                                                std::vector<double> cvr,
                                                std::vector<double> zeros) {
  ScenarioPartition p;
  p.scores_ct_nocvr = std::move(ct_nocvr);
  p.scores_cvr = std::move(cvr);
  p.scores_zeros = std::move(zeros);
  int next = 0;
  for (std::size_t i = 0; i < p.scores_ct_nocvr.size(); ++i) p.idx_ct_nocvr.push_back(next++);
  for (std::size_t i = 0; i < p.scores_cvr.size(); ++i) p.idx_cvr.push_back(next++);
  for (std::size_t i = 0; i < p.scores_zeros.size(); ++i) p.idx_zeros.push_back(next++);
  p.batch_size = static_cast<std::size_t>(next);
  return p;
}

ScenarioPartition partition_scores(const std::vector<double>& scores,
                                   const std::vector<int>& y_ctr,
                                   const std::vector<int>& y_cvr) {
  if (scores.size() != y_ctr.size() || scores.size() != y_cvr.size())
    throw std::invalid_argument("partition_scores: scores/labels length mismatch");
  ScenarioPartition p;
  p.batch_size = scores.size();
  for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
    if (y_cvr[i] == 1) {
      p.scores_cvr.push_back(scores[i]);
      p.idx_cvr.push_back(i);
    } else if (y_ctr[i] == 1) {
      p.scores_ct_nocvr.push_back(scores[i]);
      p.idx_ct_nocvr.push_back(i);
    } else {
      p.scores_zeros.push_back(scores[i]);
      p.idx_zeros.push_back(i);
    }
  }
  return p;
}

LossResult bce(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.empty()) throw std::invalid_argument("bce: empty input");
  if (scores.size() != labels.size())
    throw std::invalid_argument("bce: scores/labels length mismatch");
  const double n = static_cast<double>(scores.size());
  LossResult r;
  r.grad.assign(scores.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double p = std::clamp(scores[i], kBceEps, 1.0 - kBceEps);
    double y = static_cast<double>(labels[i]);
    sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    r.grad[i] = (p - y) / (n * p * (1.0 - p));
  }
  r.value = -sum / n;
  return r;
}

LossResult pwiser_naive(const ScenarioPartition& part, double m1, double m2) {
  validate_partition(part, m1, m2);
  LossResult r;
  r.grad.assign(part.batch_size, 0.0);
  const auto& cvr = part.scores_cvr;
  if (cvr.empty()) return r;

  auto term = [&](const std::vector<double>& outer, const std::vector<int>& outer_idx,
                  double m) {
    if (outer.empty()) return;
    const double inv = 1.0 / static_cast<double>(outer.size());
    for (std::size_t i = 0; i < outer.size(); ++i) {
      const double a = outer[i];
      const double thr = a - m;
      for (std::size_t j = 0; j < cvr.size(); ++j) {
        const double b = cvr[j];
        if (b < thr) {
          const double d = a - b + m;
          r.value += inv * d * d;
          r.grad[outer_idx[i]] += 2.0 * inv * d;
          r.grad[part.idx_cvr[j]] -= 2.0 * inv * d;
        }
      }
    }
  };
  term(part.scores_ct_nocvr, part.idx_ct_nocvr, m1);
  term(part.scores_zeros, part.idx_zeros, m2);
  return r;
}

LossResult pwiser_fast(const ScenarioPartition& part, double m1, double m2) {
  validate_partition(part, m1, m2);
  LossResult r;
  r.grad.assign(part.batch_size, 0.0);
  const auto& cvr = part.scores_cvr;
  if (cvr.empty()) return r;

  const std::size_t c = cvr.size();
  // cvr scores sorted ascending, with back-indices carried along.
  std::vector<std::size_t> order(c);
  for (std::size_t i = 0; i < c; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return cvr[x] < cvr[y]; });
  std::vector<double> bs(c);
  for (std::size_t i = 0; i < c; ++i) bs[i] = cvr[order[i]];
  std::vector<double> pre1(c + 1, 0.0), pre2(c + 1, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    pre1[i + 1] = pre1[i] + bs[i];
    pre2[i + 1] = pre2[i] + bs[i] * bs[i];
  }

  auto term = [&](const std::vector<double>& outer, const std::vector<int>& outer_idx,
                  double m) {
    if (outer.empty()) return;
    const std::size_t g = outer.size();
    const double inv = 1.0 / static_cast<double>(g);

    // Outer direction: for each a, all sorted cvr entries below a - m contribute
    // (a - b + m)^2 = cnt*(a+m)^2 - 2(a+m)*S1 + S2.
    for (std::size_t i = 0; i < g; ++i) {
      const double a = outer[i];
      const double thr = a - m;
      const auto k = static_cast<std::size_t>(
          std::lower_bound(bs.begin(), bs.end(), thr) - bs.begin());
      if (k == 0) continue;
      const double ap = a + m;
      const double cnt = static_cast<double>(k);
      r.value += inv * (cnt * ap * ap - 2.0 * ap * pre1[k] + pre2[k]);
      r.grad[outer_idx[i]] += 2.0 * inv * (cnt * ap - pre1[k]);
    }

    // cvr direction: b takes gradient from every outer a with b < a - m.
    // Keys are the same a - m doubles the outer pass compares against, so the
    // active pair set matches pwiser_naive bit-for-bit.
    std::vector<std::pair<double, double>> keyed(g);  // (a - m, a)
    for (std::size_t i = 0; i < g; ++i) keyed[i] = {outer[i] - m, outer[i]};
    std::sort(keyed.begin(), keyed.end());
    std::vector<double> suf(g + 1, 0.0);  // suffix sums of a
    for (std::size_t i = g; i-- > 0;) suf[i] = suf[i + 1] + keyed[i].second;
    for (std::size_t j = 0; j < c; ++j) {
      const double b = cvr[j];
      const auto lo = static_cast<std::size_t>(
          std::upper_bound(keyed.begin(), keyed.end(), b,
                           [](double v, const std::pair<double, double>& kv) {
                             return v < kv.first;
                           }) -
          keyed.begin());
      const double cnt = static_cast<double>(g - lo);
      if (cnt == 0.0) continue;
      r.grad[part.idx_cvr[j]] -= 2.0 * inv * (suf[lo] + cnt * (m - b));
    }
  };
  term(part.scores_ct_nocvr, part.idx_ct_nocvr, m1);
  term(part.scores_zeros, part.idx_zeros, m2);
  return r;
}

LossResult pwiser(const ScenarioPartition& part, double m1, double m2, Kernel k) {
  return k == Kernel::naive ? pwiser_naive(part, m1, m2) : pwiser_fast(part, m1, m2);
}

TaskPredictions TaskPredictions::mtl_from(std::vector<double> p_ctr,
                                          std::vector<double> p_cvr) {
  if (p_ctr.size() != p_cvr.size())
    throw std::invalid_argument("TaskPredictions: head length mismatch");
  TaskPredictions t;
  t.p_ctr = std::move(p_ctr);
  t.p_cvr = std::move(p_cvr);
  t.p_ctcvr.resize(t.p_ctr.size());
  for (std::size_t i = 0; i < t.p_ctr.size(); ++i) t.p_ctcvr[i] = t.p_ctr[i] * t.p_cvr[i];
  return t;
}

TaskPredictions TaskPredictions::stl_from(std::vector<double> p_ctr) {
  TaskPredictions t;
  t.p_ctr = std::move(p_ctr);
  return t;
}

CombinedLossResult combined_loss(const TaskPredictions& preds,
                                 const std::vector<int>& y_ctr,
                                 const std::vector<int>& y_cvr,
                                 const LossConfig& cfg) {
  cfg.validate();
  const std::size_t n = preds.p_ctr.size();
  if (y_ctr.size() != n || y_cvr.size() != n)
    throw std::invalid_argument("combined_loss: labels/predictions length mismatch");
  const bool mtl = preds.mtl();
  if (!mtl && cfg.pwiser_target != PwiserTarget::ctr)
    throw ConfigError("pwiser_target=" + to_string(cfg.pwiser_target) +
                      " requires an MTL model");

  CombinedLossResult out;
  out.grad_ctr.assign(n, 0.0);

  LossResult bce_ctr = bce(preds.p_ctr, y_ctr);
  out.bce_ctr = bce_ctr.value;
  for (std::size_t i = 0; i < n; ++i) out.grad_ctr[i] += bce_ctr.grad[i];

  if (mtl) {
    out.grad_cvr.assign(n, 0.0);
    std::vector<int> y_ctcvr(n);
    for (std::size_t i = 0; i < n; ++i) y_ctcvr[i] = y_ctr[i] * y_cvr[i];
    LossResult bce_prod = bce(preds.p_ctcvr, y_ctcvr);
    out.bce_ctcvr = bce_prod.value;
    // chain through p_ctcvr = p_ctr * p_cvr
    for (std::size_t i = 0; i < n; ++i) {
      out.grad_ctr[i] += bce_prod.grad[i] * preds.p_cvr[i];
      out.grad_cvr[i] += bce_prod.grad[i] * preds.p_ctr[i];
    }
  }

  auto add_pwiser_on = [&](const std::vector<double>& head, bool is_ctcvr) {
    ScenarioPartition part = partition_scores(head, y_ctr, y_cvr);
    LossResult pr = pwiser(part, cfg.m1, cfg.m2, cfg.kernel);
    out.pwiser += pr.value;
    for (std::size_t i = 0; i < n; ++i) {
      double g = cfg.lambda * pr.grad[i];
      if (is_ctcvr) {
        out.grad_ctr[i] += g * preds.p_cvr[i];
        out.grad_cvr[i] += g * preds.p_ctr[i];
      } else {
        out.grad_ctr[i] += g;
      }
    }
  };

  // The component value is reported even when lambda == 0.
  switch (cfg.pwiser_target) {
    case PwiserTarget::ctr:
      add_pwiser_on(preds.p_ctr, false);
      break;
    case PwiserTarget::ctcvr:
      add_pwiser_on(preds.p_ctcvr, true);
      break;
    case PwiserTarget::both:
      add_pwiser_on(preds.p_ctr, false);
      add_pwiser_on(preds.p_ctcvr, true);
      break;
  }

  out.value = out.bce_ctr + out.bce_ctcvr + cfg.lambda * out.pwiser;
  return out;
}

}  // namespace pwiser
