#include "mtae/optim.hpp"

#include <algorithm>
#include <cmath>

#include "mtae/error.hpp"

namespace mtae {

double RsqrtSchedule::operator()(std::int64_t step) const {
  if (step < 1) throw Error(ErrorCategory::range, "learning-rate schedule is defined for step >= 1");
  const double s = static_cast<double>(step);
  return base * scale * std::min(s * std::pow(warmup, -1.5), 1.0 / std::sqrt(s));
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step(const RsqrtSchedule& schedule) {
  ++step_;
  const double lr = schedule(step_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.size() != p.value.size()) p.zero_grad();
    auto& w = p.value.storage();
    const auto& g = p.grad.storage();
    auto& m = m_[i].storage();
    auto& v = v_[i].storage();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
    }
  }
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* p : params)
      for (auto& g : p->grad.storage()) g *= s;
  }
  return norm;
}

}  // namespace mtae
