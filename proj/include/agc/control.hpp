#pragma once

#include "agc/plant.hpp"

#include <vector>

namespace agc {

/// What the AGC policies observe: area frequency deviations (Hz) and
/// tie-line power deviations (pu).
struct Observation {
    Vec f;
    Vec ptie;
};

Observation observe(const SystemModel& model, const Vec& x);

struct RewardConfig {
    Vec r1;           // per-area frequency weights
    double r2 = 0.0;  // tie-line weight (uniform across ties)
    double r3 = 0.0;  // dispatch magnitude weight
    double r4 = 0.0;  // within-area load-sharing weight
    double r5 = 0.0;  // CBF-flag penalty
    double r6 = 0.0;  // safety-violation penalty
    // When true the third term penalizes the change of dispatch against the
    // previous one instead of its level.
    bool dispatchDeltaPenalty = false;
};

struct RewardFlags {
    bool cbfFlag = false;
    bool violation = false;
};

/// The six penalty terms, each stored <= 0 so the total is their plain sum.
struct RewardTerms {
    double freqDev = 0.0;
    double tieDev = 0.0;
    double dispatch = 0.0;
    double loadShare = 0.0;
    double flagPenalty = 0.0;
    double violationPenalty = 0.0;

    double total() const {
        return freqDev + tieDev + dispatch + loadShare + flagPenalty + violationPenalty;
    }
};

RewardTerms rewardTerms(const RewardConfig& cfg, const Observation& obs, const Vec& pref,
                        const RewardFlags& flags, const std::vector<std::vector<int>>& groups,
                        const Vec* prevPref = nullptr);

double reward(const RewardConfig& cfg, const Observation& obs, const Vec& pref,
              const RewardFlags& flags, const std::vector<std::vector<int>>& groups,
              const Vec* prevPref = nullptr);

struct PiGains {
    double kp = 0.0;  // pu per pu of ACE
    double ki = 0.0;  // pu per (pu of ACE * s)
};

/// Classical per-area PI regulator on the area control error
/// ACE_i = ptie_i + beta_i f_i, dispatched through fixed participation
/// factors. Gains act in the stabilizing direction (dispatch opposes ACE).
class PiController {
  public:
    PiController(const SystemModel& model, std::vector<PiGains> gains,
                 std::vector<std::vector<double>> participation);

    /// Advances the integrators by dt and returns the dispatch vector.
    Vec step(const Observation& obs, double dt);
    void reset();

    /// Net tie-line deviation seen by each area (exports minus imports).
    static Vec areaTieDeviation(const SystemModel& model, const Vec& ptie);

  private:
    const SystemModel* model_;
    std::vector<PiGains> gains_;
    std::vector<std::vector<double>> participation_;
    Vec integral_;
};

}  // namespace agc
