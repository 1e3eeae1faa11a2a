#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hmiway/rng.hpp"

namespace hmiway {

enum class HumanAction { kSpeedUp = 0, kSlowDown = 1, kKeepSpeed = 2, kMoveLeft = 3, kMoveRight = 4 };
inline constexpr int kNumHumanActions = 5;

enum class AIAction { kAlert = 0, kNoAlert = 1 };
inline constexpr int kNumAIActions = 2;

const char* to_string(HumanAction a);
const char* to_string(AIAction a);

enum class Distractibility { kLow, kHigh };
enum class Preference { kLow, kHigh };

struct DriverProfile {
  double beta = 0.5;       // P(attentive -> distracted), baseline
  double alpha = 0.5;      // P(distracted -> attentive), baseline
  double eta = 0.0;        // intervention effectiveness factor
  double inflation = 1.0;  // perceptual obstacle inflation multiplier
  Distractibility distract_label = Distractibility::kLow;
  Preference pref_label = Preference::kLow;
  int id = -1;
  std::string name;

  void validate() const;
};

// Labels derived from the parameters: distractibility high iff beta >= 0.5,
// preference high iff eta >= 0.5.
DriverProfile make_profile(std::string name, int id, double beta, double alpha, double eta,
                           double inflation);

// Built-in archetypes: Lisa(0), Marge(1), Bart(2), Homer(3), Avg(4).
const std::vector<DriverProfile>& archetype_registry();
DriverProfile archetype_profile(std::string_view name);
DriverProfile archetype_profile(int id);

struct CognitiveState {
  int d = 0;                // distraction flag
  int i = 0;                // acceptance flag
  int c = 0;                // intervention counter, in [0, N-1]
  int applied_action = -1;  // last applied vehicle action, -1 before the first step
};

// Joint update of the acceptance flag and intervention counter.
//   i_prev=0, alert     -> (1, 0)
//   i_prev=0, no_alert  -> (0, 0)
//   i_prev=1, alert     -> (1, 0)
//   i_prev=1, no_alert  -> c=(c_prev+1) mod N; i = 1 if c_prev < N-1 else 0
std::pair<int, int> step_acceptance(int i_prev, int c_prev, bool alert, int window);

// P(d_t = 1) given the previous distraction flag and the current acceptance
// flag:
//   d_prev=0: max(0, beta - eta*[i=1])
//   d_prev=1: 1 - min(1, alpha + eta*[i=1])
double modulated_transition_prob(int d_prev, int i, const DriverProfile& profile);

// One cognitive step in the order: counter, acceptance, distraction, gating.
// Returns the new state and the applied vehicle action (the previous applied
// action while distracted, the human's action otherwise).
std::pair<CognitiveState, HumanAction> step_cognitive(const CognitiveState& state, AIAction a_ai,
                                                      HumanAction a_human,
                                                      const DriverProfile& profile, int window,
                                                      Rng& rng);

enum class AlertPolicy { kAlwaysAlert, kNeverAlert };

// Stationary P(d = 1) of the two-state chain under a fixed alert policy;
// throws when the effective chain is absorbing.
double stationary_distraction_fraction(const DriverProfile& profile, AlertPolicy policy);

}  // namespace hmiway
