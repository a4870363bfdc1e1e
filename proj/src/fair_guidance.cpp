#include "b2t/fair_guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "b2t/error.hpp"

namespace b2t {

void GuidanceParams::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (warmup_steps < 0) throw InvalidArgument("warmup_steps must be >= 0");
  if (guidance_scale < 0 || edit_scale < 0 || momentum_scale < 0) {
    throw InvalidArgument("guidance, edit and momentum scales must be >= 0");
  }
  if (!(momentum_beta >= 0.0 && momentum_beta <= 1.0)) throw InvalidArgument("momentum_beta must lie in [0, 1]");
}

std::vector<float> cfg_base(std::span<const float> uncond, std::span<const float> prompt,
                            double guidance_scale) {
  if (uncond.size() != prompt.size()) throw InvalidArgument("score tensor shape mismatch");
  const auto g = static_cast<float>(guidance_scale);
  std::vector<float> out(uncond.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = uncond[i] + g * (prompt[i] - uncond[i]);
  return out;
}

std::vector<unsigned char> quantile_mask(std::span<const float> x, double threshold) {
  const std::size_t n = x.size();
  std::vector<unsigned char> mask(n, 0);
  if (n == 0) return mask;
  auto k = static_cast<std::size_t>(std::ceil(threshold * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n) - 1;  // rank of the threshold quantile
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    float fa = std::fabs(x[a]), fb = std::fabs(x[b]);
    return fa != fb ? fa < fb : a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), less);
  for (std::size_t r = k; r < n; ++r) mask[idx[r]] = 1;
  return mask;
}

std::vector<float> fair_guidance_step(std::span<const float> uncond, std::span<const float> prompt,
                                      std::span<const float> edit, int direction,
                                      const GuidanceParams& params, MomentumState& state) {
  params.validate();
  if (direction != 1 && direction != -1) throw InvalidArgument("direction must be +1 or -1");
  if (uncond.size() != prompt.size() || uncond.size() != edit.size()) {
    throw InvalidArgument("score tensor shape mismatch");
  }
  const std::size_t n = uncond.size();
  if (state.accumulated.empty()) state.accumulated.assign(n, 0.0f);
  if (state.accumulated.size() != n) throw InvalidArgument("momentum state shape mismatch");

  std::vector<float> out = cfg_base(uncond, prompt, params.guidance_scale);

  std::vector<float> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = edit[i] - uncond[i];
  std::vector<unsigned char> mask = quantile_mask(diff, params.threshold);
  const auto scale = static_cast<float>(direction * params.edit_scale);
  std::vector<float> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = mask[i] ? scale * diff[i] : 0.0f;

  if (state.step >= params.warmup_steps) {
    const auto ms = static_cast<float>(params.momentum_scale);
    for (std::size_t i = 0; i < n; ++i) {
      float term = raw[i] + ms * state.accumulated[i];
      if (term != 0.0f) out[i] += term;
    }
  }
  const auto beta = static_cast<float>(params.momentum_beta);
  for (std::size_t i = 0; i < n; ++i) {
    state.accumulated[i] = beta * state.accumulated[i] + (1.0f - beta) * raw[i];
  }
  ++state.step;
  return out;
}

ScoreTensor fair_guidance_step(const ScoreTensor& uncond, const ScoreTensor& prompt, const ScoreTensor& edit,
                               int direction, const GuidanceParams& params, MomentumState& state) {
  if (uncond.shape != prompt.shape || uncond.shape != edit.shape) {
    throw InvalidArgument("score tensor shape mismatch");
  }
  ScoreTensor out = uncond;
  out.condition = prompt.condition;
  out.values = fair_guidance_step(uncond.values, prompt.values, edit.values, direction, params, state);
  return out;
}

double BalancerState::ratio() const {
  std::size_t total = with_attribute + without_attribute;
  return total == 0 ? 0.0 : static_cast<double>(with_attribute) / static_cast<double>(total);
}

void Balancer::register_attribute(const std::string& attribute, double target) {
  if (!(target >= 0.0 && target < 1.0)) throw InvalidArgument("balancer target must lie in [0, 1)");
  states_[attribute] = BalancerState{0, 0, target};
}

const BalancerState& Balancer::state(const std::string& attribute) const {
  auto it = states_.find(attribute);
  if (it == states_.end()) throw InvalidArgument("unknown attribute '" + attribute + "'");
  return it->second;
}

int Balancer::choose_direction(const std::string& attribute) const {
  const BalancerState& s = state(attribute);
  if (s.target == 0.0) return -1;
  return s.ratio() > s.target ? -1 : 1;
}

void Balancer::record(const std::string& attribute, bool exhibited) {
  auto it = states_.find(attribute);
  if (it == states_.end()) throw InvalidArgument("unknown attribute '" + attribute + "'");
  ++(exhibited ? it->second.with_attribute : it->second.without_attribute);
}

BalanceSimulation simulate_balancing(std::size_t samples, double p_plus, double p_minus,
                                     std::uint64_t seed, double target) {
  Balancer b;
  b.register_attribute("attribute", target);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  BalanceSimulation sim;
  for (std::size_t i = 0; i < samples; ++i) {
    int dir = b.choose_direction("attribute");
    bool has = unif(rng) < (dir > 0 ? p_plus : p_minus);
    b.record("attribute", has);
    sim.directions.push_back(dir);
    sim.exhibited.push_back(has);
  }
  sim.final_ratio = b.state("attribute").ratio();
  return sim;
}

}  // namespace b2t
