#include "cedst/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace cedst {

Parameter& ParamRegistry::create(const std::string& name, int rows, int cols) {
  if (by_name_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  storage_.push_back(Parameter{name, Mat::Zero(rows, cols), Mat::Zero(rows, cols)});
  Parameter* p = &storage_.back();
  by_name_[name] = p;
  order_.push_back(p);
  return *p;
}

Parameter* ParamRegistry::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

void ParamRegistry::zero_grads() {
  for (Parameter* p : order_) p->zero_grad();
}

void ParamRegistry::init_xavier(std::mt19937_64& rng) {
  for (Parameter* p : order_) {
    const double fan_in = static_cast<double>(p->value.cols());
    const double fan_out = static_cast<double>(p->value.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int j = 0; j < p->value.cols(); ++j)
      for (int i = 0; i < p->value.rows(); ++i) p->value(i, j) = dist(rng);
    p->zero_grad();
  }
}

Var Tape::make(Mat v) {
  nodes_.push_back(std::make_unique<Node>());
  Node* n = nodes_.back().get();
  n->value = std::move(v);
  return n;
}

Var Tape::constant(Mat v) { return make(std::move(v)); }

Var Tape::param(Parameter& p) {
  Var n = make(p.value);
  n->param = &p;
  return n;
}

Var Tape::add(Var a, Var b) {
  assert(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols());
  Var n = make(a->value + b->value);
  n->backward = [n, a, b] {
    a->grad += n->grad;
    b->grad += n->grad;
  };
  return n;
}

Var Tape::sub(Var a, Var b) {
  Var n = make(a->value - b->value);
  n->backward = [n, a, b] {
    a->grad += n->grad;
    b->grad -= n->grad;
  };
  return n;
}

Var Tape::cmult(Var a, Var b) {
  Var n = make(a->value.cwiseProduct(b->value));
  n->backward = [n, a, b] {
    a->grad += n->grad.cwiseProduct(b->value);
    b->grad += n->grad.cwiseProduct(a->value);
  };
  return n;
}

Var Tape::scale(Var a, double k) {
  Var n = make(a->value * k);
  n->backward = [n, a, k] { a->grad += n->grad * k; };
  return n;
}

Var Tape::smul(Var scalar, Var a) {
  assert(scalar->value.rows() == 1 && scalar->value.cols() == 1);
  Var n = make(a->value * scalar->value(0, 0));
  n->backward = [n, scalar, a] {
    a->grad += n->grad * scalar->value(0, 0);
    scalar->grad(0, 0) += n->grad.cwiseProduct(a->value).sum();
  };
  return n;
}

Var Tape::matmul(Var a, Var b) {
  assert(a->value.cols() == b->value.rows());
  Var n = make(a->value * b->value);
  n->backward = [n, a, b] {
    a->grad += n->grad * b->value.transpose();
    b->grad += a->value.transpose() * n->grad;
  };
  return n;
}

Var Tape::transpose(Var a) {
  Var n = make(a->value.transpose());
  n->backward = [n, a] { a->grad += n->grad.transpose(); };
  return n;
}

Var Tape::vconcat(const std::vector<Var>& parts) {
  assert(!parts.empty());
  int rows = 0;
  const int cols = static_cast<int>(parts[0]->value.cols());
  for (Var p : parts) rows += static_cast<int>(p->value.rows());
  Mat v(rows, cols);
  int at = 0;
  for (Var p : parts) {
    v.middleRows(at, p->value.rows()) = p->value;
    at += static_cast<int>(p->value.rows());
  }
  Var n = make(std::move(v));
  std::vector<Var> ps = parts;
  n->backward = [n, ps] {
    int at = 0;
    for (Var p : ps) {
      p->grad += n->grad.middleRows(at, p->value.rows());
      at += static_cast<int>(p->value.rows());
    }
  };
  return n;
}

Var Tape::hconcat(const std::vector<Var>& parts) {
  assert(!parts.empty());
  const int rows = static_cast<int>(parts[0]->value.rows());
  int cols = 0;
  for (Var p : parts) cols += static_cast<int>(p->value.cols());
  Mat v(rows, cols);
  int at = 0;
  for (Var p : parts) {
    v.middleCols(at, p->value.cols()) = p->value;
    at += static_cast<int>(p->value.cols());
  }
  Var n = make(std::move(v));
  std::vector<Var> ps = parts;
  n->backward = [n, ps] {
    int at = 0;
    for (Var p : ps) {
      p->grad += n->grad.middleCols(at, p->value.cols());
      at += static_cast<int>(p->value.cols());
    }
  };
  return n;
}

Var Tape::slice_rows(Var a, int first, int count) {
  Var n = make(a->value.middleRows(first, count));
  n->backward = [n, a, first, count] { a->grad.middleRows(first, count) += n->grad; };
  return n;
}

Var Tape::slice_cols(Var a, int first, int count) {
  Var n = make(a->value.middleCols(first, count));
  n->backward = [n, a, first, count] { a->grad.middleCols(first, count) += n->grad; };
  return n;
}

Var Tape::tanh(Var a) {
  Var n = make(a->value.array().tanh().matrix());
  n->backward = [n, a] {
    a->grad.array() += n->grad.array() * (1.0 - n->value.array().square());
  };
  return n;
}

Var Tape::logistic(Var a) {
  Var n = make((1.0 / (1.0 + (-a->value.array()).exp())).matrix());
  n->backward = [n, a] {
    a->grad.array() += n->grad.array() * n->value.array() * (1.0 - n->value.array());
  };
  return n;
}

Var Tape::softmax(Var a, const std::vector<bool>& mask) {
  assert(a->value.cols() == 1);
  const int r = static_cast<int>(a->value.rows());
  assert(mask.empty() || static_cast<int>(mask.size()) == r);
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < r; ++i)
    if (mask.empty() || mask[i]) mx = std::max(mx, a->value(i, 0));
  Mat p = Mat::Zero(r, 1);
  double z = 0.0;
  for (int i = 0; i < r; ++i) {
    if (mask.empty() || mask[i]) {
      p(i, 0) = std::exp(a->value(i, 0) - mx);
      z += p(i, 0);
    }
  }
  p /= z;
  Var n = make(std::move(p));
  n->backward = [n, a] {
    const double s = n->grad.cwiseProduct(n->value).sum();
    a->grad.array() += n->value.array() * (n->grad.array() - s);
  };
  return n;
}

Var Tape::pick(Var a, int row, int col) {
  Mat v(1, 1);
  v(0, 0) = a->value(row, col);
  Var n = make(std::move(v));
  n->backward = [n, a, row, col] { a->grad(row, col) += n->grad(0, 0); };
  return n;
}

Var Tape::log_eps(Var a, double eps) {
  Var n = make((a->value.array() + eps).log().matrix());
  n->backward = [n, a, eps] {
    a->grad.array() += n->grad.array() / (a->value.array() + eps);
  };
  return n;
}

Var Tape::sum(Var a) {
  Mat v(1, 1);
  v(0, 0) = a->value.sum();
  Var n = make(std::move(v));
  n->backward = [n, a] { a->grad.array() += n->grad(0, 0); };
  return n;
}

Var Tape::bce_with_logits(Var logits, const Mat& targets) {
  assert(logits->value.rows() == targets.rows() && logits->value.cols() == 1);
  double loss = 0.0;
  for (int i = 0; i < logits->value.rows(); ++i) {
    const double z = logits->value(i, 0);
    const double t = targets(i, 0);
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  Mat v(1, 1);
  v(0, 0) = loss;
  Var n = make(std::move(v));
  n->backward = [n, logits, targets] {
    const double g = n->grad(0, 0);
    for (int i = 0; i < logits->value.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logits->value(i, 0)));
      logits->grad(i, 0) += g * (p - targets(i, 0));
    }
  };
  return n;
}

void Tape::backward(Var loss) {
  assert(loss->value.rows() == 1 && loss->value.cols() == 1);
  for (auto& n : nodes_) n->grad.setZero(n->value.rows(), n->value.cols());
  loss->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
  for (auto& n : nodes_) {
    if (n->param) n->param->grad += n->grad;
  }
}

}  // namespace cedst
