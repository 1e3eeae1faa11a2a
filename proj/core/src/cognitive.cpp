#include "hmiway/cognitive.hpp"

#include <algorithm>

#include "hmiway/errors.hpp"

namespace hmiway {

const char* to_string(HumanAction a) {
  switch (a) {
    case HumanAction::kSpeedUp: return "speed_up";
    case HumanAction::kSlowDown: return "slow_down";
    case HumanAction::kKeepSpeed: return "keep_speed";
    case HumanAction::kMoveLeft: return "move_left";
    case HumanAction::kMoveRight: return "move_right";
  }
  return "?";
}

const char* to_string(AIAction a) {
  return a == AIAction::kAlert ? "alert" : "no_alert";
}

void DriverProfile::validate() const {
  if (beta < 0 || beta > 1) throw ContractError("DriverProfile: beta must be in [0,1]");
  if (alpha < 0 || alpha > 1) throw ContractError("DriverProfile: alpha must be in [0,1]");
  if (eta < 0) throw ContractError("DriverProfile: eta must be >= 0");
  if (inflation <= 0) throw ContractError("DriverProfile: inflation must be positive");
  bool high = pref_label == Preference::kHigh;
  if (high != (eta >= 0.5))
    throw ContractError("DriverProfile: preference label must be high iff eta >= 0.5");
}

DriverProfile make_profile(std::string name, int id, double beta, double alpha, double eta,
                           double inflation) {
  DriverProfile p;
  p.name = std::move(name);
  p.id = id;
  p.beta = beta;
  p.alpha = alpha;
  p.eta = eta;
  p.inflation = inflation;
  p.distract_label = beta >= 0.5 ? Distractibility::kHigh : Distractibility::kLow;
  p.pref_label = eta >= 0.5 ? Preference::kHigh : Preference::kLow;
  p.validate();
  return p;
}

const std::vector<DriverProfile>& archetype_registry() {
  static const std::vector<DriverProfile> profiles = {
      make_profile("Lisa", 0, 0.2, 0.8, 0.01, 3.0),
      make_profile("Marge", 1, 0.2, 0.8, 1.0, 9.0),
      make_profile("Bart", 2, 0.8, 0.2, 0.01, 3.0),
      make_profile("Homer", 3, 0.8, 0.2, 1.0, 9.0),
      make_profile("Avg", 4, 0.5, 0.5, 0.505, 6.0),
  };
  return profiles;
}

DriverProfile archetype_profile(std::string_view name) {
  for (const auto& p : archetype_registry())
    if (p.name == name) return p;
  throw ContractError("unknown driver archetype: " + std::string(name));
}

DriverProfile archetype_profile(int id) {
  for (const auto& p : archetype_registry())
    if (p.id == id) return p;
  throw ContractError("unknown driver archetype id: " + std::to_string(id));
}

std::pair<int, int> step_acceptance(int i_prev, int c_prev, bool alert, int window) {
  if (window < 1) throw ContractError("step_acceptance: window must be >= 1");
  if (c_prev < 0 || c_prev >= window)
    throw ContractError("step_acceptance: counter out of [0, N-1]");
  if (alert) return {1, 0};
  if (i_prev == 0) return {0, 0};
  int c = (c_prev + 1) % window;
  int i = c_prev < window - 1 ? 1 : 0;
  return {i, c};
}

double modulated_transition_prob(int d_prev, int i, const DriverProfile& p) {
  double shift = i == 1 ? p.eta : 0.0;
  if (d_prev == 0) return std::max(0.0, p.beta - shift);
  return 1.0 - std::min(1.0, p.alpha + shift);
}

std::pair<CognitiveState, HumanAction> step_cognitive(const CognitiveState& state, AIAction a_ai,
                                                      HumanAction a_human,
                                                      const DriverProfile& profile, int window,
                                                      Rng& rng) {
  auto [i_new, c_new] = step_acceptance(state.i, state.c, a_ai == AIAction::kAlert, window);
  double p_distracted = modulated_transition_prob(state.d, i_new, profile);
  int d_new = rng.bernoulli(p_distracted) ? 1 : 0;

  HumanAction applied = a_human;
  if (d_new == 1 && state.applied_action >= 0)
    applied = static_cast<HumanAction>(state.applied_action);

  CognitiveState next;
  next.d = d_new;
  next.i = i_new;
  next.c = c_new;
  next.applied_action = static_cast<int>(applied);
  return {next, applied};
}

double stationary_distraction_fraction(const DriverProfile& profile, AlertPolicy policy) {
  int i = policy == AlertPolicy::kAlwaysAlert ? 1 : 0;
  double beta_eff = modulated_transition_prob(0, i, profile);
  double alpha_eff = 1.0 - modulated_transition_prob(1, i, profile);
  double denom = alpha_eff + beta_eff;
  if (denom == 0.0) throw ContractError("stationary_distraction_fraction: absorbing chain");
  return beta_eff / denom;
}

}  // namespace hmiway
