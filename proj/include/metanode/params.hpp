#pragma once

// Named model parameters plus the Adam update. Insertion order of names is
// load-bearing: checkpoints serialize tensors in this order, which is what
// makes identical runs produce byte-identical artifacts.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/matrix.hpp"
#include "metanode/tape.hpp"

namespace mn {

class ParamStore {
 public:
  // decay=false exempts the tensor from weight decay (biases, norm scales).
  void add(const std::string& name, Matrix value, bool decay = true) {
    if (index_.count(name)) throw ConfigError("parameter '" + name + "' already registered");
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, std::move(value), {}, {}, {}, decay});
    Entry& e = entries_.back();
    e.grad = Matrix(e.value.rows, e.value.cols);
    e.m = Matrix(e.value.rows, e.value.cols);
    e.v = Matrix(e.value.rows, e.value.cols);
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Matrix& value(const std::string& name) { return at(name).value; }
  const Matrix& value(const std::string& name) const { return at(name).value; }
  Matrix& grad(const std::string& name) { return at(name).grad; }

  const std::vector<std::string>& names() const {
    if (names_.size() != entries_.size()) {
      names_.clear();
      for (const Entry& e : entries_) names_.push_back(e.name);
    }
    return names_;
  }

  void zero_grads() {
    for (Entry& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
  }

  // Decoupled-from-nothing classic Adam: weight decay folds into the raw
  // gradient before the moment updates, then bias-corrected step.
  void adam_step(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (Entry& e : entries_) {
      for (size_t i = 0; i < e.value.data.size(); ++i) {
        double g = e.grad.data[i];
        if (e.decay) g += weight_decay * e.value.data[i];
        e.m.data[i] = beta1 * e.m.data[i] + (1.0 - beta1) * g;
        e.v.data[i] = beta2 * e.v.data[i] + (1.0 - beta2) * g * g;
        const double mhat = e.m.data[i] / bc1;
        const double vhat = e.v.data[i] / bc2;
        e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  i64 adam_steps() const { return step_; }

  std::vector<Matrix> snapshot_values() const {
    std::vector<Matrix> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.value);
    return out;
  }

  void restore_values(const std::vector<Matrix>& snap) {
    if (snap.size() != entries_.size()) throw ConfigError("restore_values: snapshot size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
      if (!snap[i].same_shape(entries_[i].value)) throw ConfigError("restore_values: shape mismatch");
      entries_[i].value = snap[i];
    }
  }

 private:
  struct Entry {
    std::string name;
    Matrix value, grad, m, v;
    bool decay;
  };

  Entry& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second];
  }
  const Entry& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second];
  }

  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
  mutable std::vector<std::string> names_;
  i64 step_ = 0;
};

// Bridges a ParamStore and one Tape: the first request for a name creates a
// leaf holding the current value, later requests reuse it, so a parameter
// referenced several times in one forward pass accumulates one combined
// gradient. pull_grads() adds the tape's leaf gradients into the store.
class TapeBind {
 public:
  TapeBind(ParamStore& store, Tape& tape) : store_(store), tape_(tape) {}

  Tape::Id operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Tape::Id id = tape_.leaf(store_.value(name));
    bound_[name] = id;
    return id;
  }

  void pull_grads() {
    for (const auto& [name, id] : bound_) {
      Matrix g = tape_.grad(id);
      add_inplace(store_.grad(name), g);
    }
  }

 private:
  ParamStore& store_;
  Tape& tape_;
  std::map<std::string, Tape::Id> bound_;
};

// Central-difference check of d(loss)/d(params) for a scalar loss functional.
// `f` must populate store.grad when asked for gradients and must be a pure
// function of the store's values. Returns the worst relative error, with the
// usual max(|a|,|b|,floor) denominator so near-zero pairs compare absolutely.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  i64 worst_index = 0;
};

inline GradCheckReport grad_check(ParamStore& store,
                                  const std::function<double(bool /*want_grads*/)>& f,
                                  double h = 1e-5) {
  store.zero_grads();
  f(true);
  std::vector<std::string> names = store.names();
  std::vector<Matrix> analytic;
  analytic.reserve(names.size());
  for (const auto& n : names) analytic.push_back(store.grad(n));

  GradCheckReport rep;
  for (size_t p = 0; p < names.size(); ++p) {
    Matrix& val = store.value(names[p]);
    for (size_t i = 0; i < val.data.size(); ++i) {
      const double keep = val.data[i];
      val.data[i] = keep + h;
      const double up = f(false);
      val.data[i] = keep - h;
      const double dn = f(false);
      val.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = analytic[p].data[i];
      const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = names[p];
        rep.worst_index = static_cast<i64>(i);
      }
    }
  }
  return rep;
}

}  // namespace mn
