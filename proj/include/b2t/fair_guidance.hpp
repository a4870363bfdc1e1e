#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "b2t/sd_bias_scorer.hpp"

namespace b2t {

struct GuidanceParams {
  double guidance_scale = 7.5;
  double edit_scale = 4.0;
  int warmup_steps = 5;
  double threshold = 0.95;
  double momentum_scale = 0.5;
  double momentum_beta = 0.6;

  void validate() const;

  static GuidanceParams balancing() { return {}; }
  static GuidanceParams elimination() {
    GuidanceParams p;
    p.edit_scale = 12.0;
    return p;
  }
};

struct MomentumState {
  std::vector<float> accumulated;  // empty means all zeros
  int step = 0;
};

// u + guidance_scale * (p - u), element-wise in float.
std::vector<float> cfg_base(std::span<const float> uncond, std::span<const float> prompt,
                            double guidance_scale);

// 1 for elements whose |x| ranks at or above the threshold quantile, 0
// elsewhere. Ties in |x| are ranked by position, so exactly
// n - ceil(threshold * n) + 1 elements are active.
std::vector<unsigned char> quantile_mask(std::span<const float> x, double threshold);

// One guidance step. raw = direction * edit_scale * mask * (edit - uncond);
// the edit term raw + momentum_scale * state is applied from step
// warmup_steps on. The state then becomes beta * state + (1 - beta) * raw and
// the step counter advances. Where the edit term is zero the output equals
// cfg_base bit for bit.
std::vector<float> fair_guidance_step(std::span<const float> uncond, std::span<const float> prompt,
                                      std::span<const float> edit, int direction,
                                      const GuidanceParams& params, MomentumState& state);

ScoreTensor fair_guidance_step(const ScoreTensor& uncond, const ScoreTensor& prompt, const ScoreTensor& edit,
                               int direction, const GuidanceParams& params, MomentumState& state);

struct BalancerState {
  std::size_t with_attribute = 0;
  std::size_t without_attribute = 0;
  double target = 0.5;  // 0 = eliminate

  double ratio() const;
};

class Balancer {
 public:
  void register_attribute(const std::string& attribute, double target);
  // Elimination always returns -1; balancing returns -1 while the observed
  // ratio is above target and +1 otherwise.
  int choose_direction(const std::string& attribute) const;
  void record(const std::string& attribute, bool exhibited);
  const BalancerState& state(const std::string& attribute) const;

 private:
  std::map<std::string, BalancerState> states_;
};

struct BalanceSimulation {
  std::vector<int> directions;
  std::vector<bool> exhibited;
  double final_ratio = 0.0;
};

// Seeded stream: a +1 edit yields the attribute with probability p_plus, a -1
// edit with probability p_minus.
BalanceSimulation simulate_balancing(std::size_t samples, double p_plus, double p_minus,
                                     std::uint64_t seed, double target = 0.5);

}  // namespace b2t
