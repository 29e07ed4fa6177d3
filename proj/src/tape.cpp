#include "mtae/tape.hpp"

#include "mtae/error.hpp"

namespace mtae {

const Tensor& Var::value() const {
  if (!tape_) throw Error(ErrorCategory::state, "use of an empty Var");
  return tape_->value(*this);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  nodes_.push_back(Node{p.value, {}, recording(), &p, {}});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v, const char* op) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw Error(ErrorCategory::state, std::string(op) + ": value does not belong to this tape");
  }
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward fn) {
  bool needs = false;
  for (const auto& in : inputs) {
    check_owned(in, "record");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  needs = needs && recording();
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(fn) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward fn) {
  bool needs = false;
  for (const auto& in : inputs) {
    check_owned(in, "record");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  needs = needs && recording();
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(fn) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(const Var& v) {
  Node& n = nodes_[v.id()];
  // A scalar shares the empty shape with a default Tensor, so compare sizes too.
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (!loss.valid() || loss.tape() != this || loss.id() >= nodes_.size()) {
    throw Error(ErrorCategory::state, "backward called on a value detached from this tape");
  }
  if (!recording()) throw Error(ErrorCategory::state, "backward on an inference-mode tape");
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw Error(ErrorCategory::shape, "backward requires a scalar loss, got " + shape_string(root.value.shape()));
  }
  if (!root.requires_grad) return;

  for (auto& n : nodes_) n.grad = Tensor();
  grad(loss).fill(1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      if (n.param->grad.size() != n.param->value.size()) n.param->zero_grad();
      auto& acc = n.param->grad.storage();
      const auto& g = n.grad.storage();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
    }
  }
}

}  // namespace mtae
