#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace cedst {

using Mat = Eigen::MatrixXd;

// Trainable tensor. Lives outside any tape; gradients accumulate into
// `grad` across a batch and are consumed by the optimizer.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Owns all parameters of a model, keyed by name. Iteration order is
// creation order, which fixes the optimizer update order.
class ParamRegistry {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter* find(const std::string& name);
  const std::vector<Parameter*>& all() const { return order_; }
  void zero_grads();

  // Symmetric fan-based uniform init for every registered parameter.
  void init_xavier(std::mt19937_64& rng);

 private:
  std::deque<Parameter> storage_;
  std::map<std::string, Parameter*> by_name_;
  std::vector<Parameter*> order_;
};

struct Node {
  Mat value;
  Mat grad;
  std::function<void()> backward;  // empty for leaves
  Parameter* param = nullptr;      // set for parameter leaves
};

using Var = Node*;

// Dynamic computation graph, rebuilt per forward pass. Single-threaded.
class Tape {
 public:
  Var constant(Mat v);
  Var param(Parameter& p);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmult(Var a, Var b);
  Var scale(Var a, double k);
  // Broadcast multiply by a 1x1 scalar node.
  Var smul(Var scalar, Var a);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var vconcat(const std::vector<Var>& parts);
  Var hconcat(const std::vector<Var>& parts);
  Var slice_rows(Var a, int first, int count);
  Var slice_cols(Var a, int first, int count);
  Var tanh(Var a);
  Var logistic(Var a);
  // Column-vector softmax. Rows where mask is false get probability 0;
  // an all-true (or empty) mask is the plain softmax.
  Var softmax(Var a, const std::vector<bool>& mask = {});
  Var pick(Var a, int row, int col = 0);
  Var log_eps(Var a, double eps = 1e-12);
  Var sum(Var a);
  // Sum of elementwise binary cross-entropy given raw logits (column)
  // and a 0/1 target column of the same length.
  Var bce_with_logits(Var logits, const Mat& targets);

  void backward(Var loss);
  size_t size() const { return nodes_.size(); }

 private:
  Var make(Mat v);
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace cedst
