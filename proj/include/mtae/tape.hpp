#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "mtae/tensor.hpp"

namespace mtae {

/// A trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  mutable Tensor grad;  // written through const references during backward

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() const { grad = Tensor(value.shape()); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of forward operations. `backward` replays the
/// recorded gradient functions in exact reverse execution order and adds the
/// resulting leaf gradients into each Parameter's accumulator.
///
/// In inference mode no gradient functions are kept.
class Tape {
 public:
  enum class Mode { record, inference };
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record; }

  Var constant(Tensor value);
  Var parameter(const Parameter& p);

  /// Appends an op output. `fn` is kept only when recording and at least one
  /// input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward fn);
  Var record(Tensor value, const std::vector<Var>& inputs, Backward fn);

  const Tensor& value(const Var& v) const { return nodes_[v.id()].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  /// Gradient buffer of `v`, allocated as zeros on first use.
  Tensor& grad(const Var& v);

  void backward(const Var& loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    const Parameter* param = nullptr;
    Backward backward;
  };

  void check_owned(const Var& v, const char* op) const;

  Mode mode_;
  std::deque<Node> nodes_;
};

}  // namespace mtae
