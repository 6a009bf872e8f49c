#pragma once

#include "cedst/corpus.hpp"
#include "cedst/model.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace cedst::testutil {

inline std::string fixture(const std::string& name) {
  return std::string(CEDST_TEST_DATA_DIR) + "/" + name;
}

// Central finite differences against accumulated analytic gradients.
// loss_fn(true) must run backward and leave gradients in the registry.
inline double max_grad_rel_error(ParamRegistry& reg,
                                 const std::function<double(bool)>& loss_fn,
                                 double h = 1e-5) {
  reg.zero_grads();
  loss_fn(true);
  std::vector<Mat> analytic;
  for (Parameter* p : reg.all()) analytic.push_back(p->grad);

  double worst = 0.0;
  const auto& params = reg.all();
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (int j = 0; j < p.value.cols(); ++j) {
      for (int i = 0; i < p.value.rows(); ++i) {
        const double saved = p.value(i, j);
        p.value(i, j) = saved + h;
        const double up = loss_fn(false);
        p.value(i, j) = saved - h;
        const double down = loss_fn(false);
        p.value(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = analytic[pi](i, j);
        const double denom = std::max(1.0, std::abs(fd) + std::abs(an));
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
  }
  return worst;
}

// Minimal restaurant-style ontology shared by several suites.
inline Ontology tiny_ontology() {
  Ontology o;
  SlotSpec food{"food", SlotKind::Single, {"thai", "chinese"}, {"none", "dontcare"}};
  SlotSpec area{"area", SlotKind::Single, {"north", "south"}, {"none", "dontcare"}};
  SlotSpec request{"request", SlotKind::Multi, {"address", "phone"}, {"none"}};
  o.slots = {food, area, request};
  return o;
}

inline Turn make_turn(const std::string& utterance,
                      const std::map<std::string, std::string>& goal = {},
                      const std::set<std::string>& requests = {}) {
  Turn t;
  t.user_utterance = tokenize(utterance);
  t.gold.turn_goal = goal;
  t.gold.requests = requests;
  return t;
}

}  // namespace cedst::testutil
