#include "pwiser/nn.hpp"

#include <algorithm>
#include <cmath>

namespace pwiser {

Tensor& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (items_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Tensor t;
  t.value = Mat::Zero(rows, cols);
  t.grad = Mat::Zero(rows, cols);
  return items_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = items_.find(name);
  if (it == items_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = items_.find(name);
  if (it == items_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : items_) t.grad.setZero();
}

std::size_t ParamStore::num_params() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

int Tape::push(Mat v) {
  nodes_.push_back({std::move(v), Mat()});
  Node& n = nodes_.back();
  n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  return static_cast<int>(nodes_.size() - 1);
}

int Tape::input(Mat v) { return push(std::move(v)); }

int Tape::embed(ParamStore& ps, const std::string& table, const std::vector<int>& indices) {
  Tensor* t = &ps.at(table);
  const auto V = t->value.rows();
  Mat out(static_cast<Eigen::Index>(indices.size()), t->value.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= V)
      throw std::out_of_range("embedding index out of range for " + table);
    out.row(static_cast<Eigen::Index>(i)) = t->value.row(indices[i]);
  }
  int id = push(std::move(out));
  std::vector<int> idx = indices;
  back_.push_back([this, id, t, idx = std::move(idx)] {
    const Mat& g = nodes_[static_cast<std::size_t>(id)].grad;
    for (std::size_t i = 0; i < idx.size(); ++i)
      t->grad.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
  return id;
}

int Tape::dense(int x, ParamStore& ps, const std::string& w_name, const std::string& b_name,
                Activation act) {
  Tensor* W = &ps.at(w_name);
  Tensor* b = &ps.at(b_name);
  const Mat& xv = value(x);
  if (xv.cols() != W->value.rows() || W->value.cols() != b->value.cols() ||
      b->value.rows() != 1)
    throw std::invalid_argument("dense: shape mismatch for " + w_name);
  Mat y = (xv * W->value).rowwise() + b->value.row(0);
  if (act == Activation::relu) {
    kinks_ += static_cast<std::size_t>((y.array() > 0.0).count());
    y = y.cwiseMax(0.0);
  }
  int id = push(std::move(y));
  back_.push_back([this, id, x, W, b, act] {
    Mat g = nodes_[static_cast<std::size_t>(id)].grad;
    if (act == Activation::relu) {
      const Mat& yv = nodes_[static_cast<std::size_t>(id)].val;
      g = (yv.array() > 0.0).select(g, 0.0);
    }
    const Mat& xv = nodes_[static_cast<std::size_t>(x)].val;
    W->grad.noalias() += xv.transpose() * g;
    b->grad.row(0) += g.colwise().sum();
    nodes_[static_cast<std::size_t>(x)].grad.noalias() += g * W->value.transpose();
  });
  return id;
}

int Tape::concat_cols(const std::vector<int>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index rows = value(xs[0]).rows(), cols = 0;
  for (int x : xs) {
    if (value(x).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += value(x).cols();
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (int x : xs) {
    out.middleCols(off, value(x).cols()) = value(x);
    off += value(x).cols();
  }
  int id = push(std::move(out));
  std::vector<int> inputs = xs;
  back_.push_back([this, id, inputs = std::move(inputs)] {
    const Mat& g = nodes_[static_cast<std::size_t>(id)].grad;
    Eigen::Index off = 0;
    for (int x : inputs) {
      Mat& xg = nodes_[static_cast<std::size_t>(x)].grad;
      xg += g.middleCols(off, xg.cols());
      off += xg.cols();
    }
  });
  return id;
}

int Tape::softmax_rows(int x) {
  const Mat& xv = value(x);
  Mat y(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    double mx = xv.row(i).maxCoeff();
    Eigen::ArrayXd e = (xv.row(i).array() - mx).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  int id = push(std::move(y));
  back_.push_back([this, id, x] {
    const Mat& yv = nodes_[static_cast<std::size_t>(id)].val;
    const Mat& g = nodes_[static_cast<std::size_t>(id)].grad;
    Mat& xg = nodes_[static_cast<std::size_t>(x)].grad;
    for (Eigen::Index i = 0; i < yv.rows(); ++i) {
      double dot = yv.row(i).dot(g.row(i));
      xg.row(i) += (yv.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
  });
  return id;
}

int Tape::mix(const std::vector<int>& experts, int gate) {
  const Mat& gv = value(gate);
  if (gv.cols() != static_cast<Eigen::Index>(experts.size()))
    throw std::invalid_argument("mix: gate width != number of experts");
  const Eigen::Index n = gv.rows();
  const Eigen::Index d = value(experts[0]).cols();
  Mat out = Mat::Zero(n, d);
  for (std::size_t e = 0; e < experts.size(); ++e) {
    const Mat& ev = value(experts[e]);
    if (ev.rows() != n || ev.cols() != d) throw std::invalid_argument("mix: expert shape");
    out += (ev.array().colwise() * gv.col(static_cast<Eigen::Index>(e)).array()).matrix();
  }
  int id = push(std::move(out));
  std::vector<int> es = experts;
  back_.push_back([this, id, es = std::move(es), gate] {
    const Mat& g = nodes_[static_cast<std::size_t>(id)].grad;
    const Mat& gv = nodes_[static_cast<std::size_t>(gate)].val;
    Mat& gg = nodes_[static_cast<std::size_t>(gate)].grad;
    for (std::size_t e = 0; e < es.size(); ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      const Mat& ev = nodes_[static_cast<std::size_t>(es[e])].val;
      Mat& eg = nodes_[static_cast<std::size_t>(es[e])].grad;
      eg += (g.array().colwise() * gv.col(ei).array()).matrix();
      gg.col(ei) += (g.array() * ev.array()).rowwise().sum().matrix();
    }
  });
  return id;
}

int Tape::sigmoid(int x) {
  const Mat& xv = value(x);
  std::size_t clamped = 0;
  Mat y = xv.unaryExpr([&clamped](double z) {
    double s = 1.0 / (1.0 + std::exp(-z));
    if (s < 1e-7 || s > 1.0 - 1e-7) ++clamped;
    return std::clamp(s, 1e-7, 1.0 - 1e-7);
  });
  kinks_ += clamped;
  int id = push(std::move(y));
  back_.push_back([this, id, x] {
    const Mat& xv = nodes_[static_cast<std::size_t>(x)].val;
    const Mat& g = nodes_[static_cast<std::size_t>(id)].grad;
    Mat& xg = nodes_[static_cast<std::size_t>(x)].grad;
    xg += (g.array() * xv.unaryExpr([](double z) {
                           double s = 1.0 / (1.0 + std::exp(-z));
                           return s * (1.0 - s);
                         }).array())
              .matrix();
  });
  return id;
}

void Tape::backward() {
  for (auto it = back_.rbegin(); it != back_.rend(); ++it) (*it)();
}

void Optimizer::step(ParamStore& ps) {
  if (ps.empty()) throw std::logic_error("optimizer step on empty parameter store");
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  for (auto& [name, p] : ps) {
    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, "/b") == 0;
    Eigen::Map<Eigen::ArrayXd> w(p.value.data(), p.value.size());
    Eigen::Map<Eigen::ArrayXd> g(p.grad.data(), p.grad.size());
    if (cfg_.weight_decay != 0.0 && !is_bias) g += cfg_.weight_decay * w;
    if (cfg_.type == OptimizerType::sgd) {
      w -= cfg_.lr * g;
    } else {
      Mat& m = m_.try_emplace(name, Mat::Zero(p.value.rows(), p.value.cols())).first->second;
      Mat& v = v_.try_emplace(name, Mat::Zero(p.value.rows(), p.value.cols())).first->second;
      Eigen::Map<Eigen::ArrayXd> ma(m.data(), m.size());
      Eigen::Map<Eigen::ArrayXd> va(v.data(), v.size());
      ma = cfg_.beta1 * ma + (1.0 - cfg_.beta1) * g;
      va = cfg_.beta2 * va + (1.0 - cfg_.beta2) * g * g;
      const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
      const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
      w -= cfg_.lr * (ma / bc1) / ((va / bc2).sqrt() + cfg_.eps);
    }
    g = 0.0;
  }
}

void init_params(ParamStore& ps, std::uint64_t seed) {
  for (auto& [name, t] : ps) {
    Rng rng(seed ^ fnv1a64(name.data(), name.size()));
    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, "/b") == 0;
    const bool is_embed = name.rfind("embed/", 0) == 0;
    if (is_bias) {
      t.value.setZero();
    } else if (is_embed) {
      for (Eigen::Index i = 0; i < t.value.rows(); ++i)
        for (Eigen::Index j = 0; j < t.value.cols(); ++j)
          t.value(i, j) = rng.normal(0.0, 0.01);
    } else {
      const double fan_in = static_cast<double>(t.value.rows());
      const double fan_out = static_cast<double>(t.value.cols());
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (Eigen::Index i = 0; i < t.value.rows(); ++i)
        for (Eigen::Index j = 0; j < t.value.cols(); ++j)
          t.value(i, j) = rng.uniform(-bound, bound);
    }
    t.grad.setZero();
  }
}

}  // namespace pwiser
