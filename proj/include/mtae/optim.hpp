#pragma once

#include <cstdint>
#include <vector>

#include "mtae/tape.hpp"

namespace mtae {

/// Linear warmup followed by inverse-square-root decay:
///   lr(step) = base * scale * min(step * warmup^-1.5, step^-0.5)
/// `scale` is typically hidden_size^-0.5.
struct RsqrtSchedule {
  double base = 0.2;
  double warmup = 8000.0;
  double scale = 1.0;

  double operator()(std::int64_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// Adam over a fixed list of parameters. Moment buffers follow the order of
/// the parameter list given at construction.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

  /// Applies one update with learning rate schedule(step) and advances the
  /// step counter. Gradients are left untouched.
  void step(const RsqrtSchedule& schedule);

  std::int64_t steps_taken() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return cfg_; }

  std::vector<Tensor>& first_moments() noexcept { return m_; }
  std::vector<Tensor>& second_moments() noexcept { return v_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  void set_steps_taken(std::int64_t s) noexcept { step_ = s; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::int64_t step_ = 0;
};

void zero_grads(const std::vector<Parameter*>& params);

/// Scales all gradients so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace mtae
