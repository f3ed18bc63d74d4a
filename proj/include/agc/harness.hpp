#pragma once

#include "agc/agent.hpp"
#include "agc/control.hpp"
#include "agc/safety.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace agc {

enum class FilterMode { FlagTerminate, Rectify, Unfiltered };

struct LoadEvent {
    double t = 0.0;      // s
    int area = 0;
    double deltaPu = 0.0;
};

struct Scenario {
    double duration = 60.0;   // s
    double agcPeriod = 2.0;   // s between policy dispatches
    std::vector<LoadEvent> loadSchedule;
    FilterMode mode = FilterMode::FlagTerminate;
    std::uint64_t seed = 0;
    double rk4Dt = 1e-3;         // ground-truth integration step
    double traceSampleDt = 0.0;  // 0 disables continuous-state sampling
};

enum class TerminalCause { TimeUp, CbfFlag, Violation };

/// One completed decision step: the observation at the end of the hold, the
/// dispatch that produced it, and the reward granted at that instant.
struct DispatchRecord {
    double t = 0.0;
    Vec f;
    Vec ptie;
    Vec prefRaw;      // what the policy asked for
    Vec prefApplied;  // what reached the plant (zero if blocked)
    bool flagged = false;
    bool violation = false;
    RewardTerms reward;
};

struct EpisodeTrace {
    std::vector<double> sampleT;
    std::vector<Vec> sampleX;
    std::vector<DispatchRecord> dispatches;
    TerminalCause terminal = TerminalCause::TimeUp;
    double totalReward = 0.0;
    double maxAbsFreq = 0.0;  // Hz, over every integration substep
    double endTime = 0.0;
};

class Policy {
  public:
    virtual ~Policy() = default;
    virtual void reset() {}
    virtual Vec act(const Observation& obs, double t, double dt) = 0;
};

class PiPolicy : public Policy {
  public:
    explicit PiPolicy(PiController controller) : controller_(std::move(controller)) {}
    void reset() override { controller_.reset(); }
    Vec act(const Observation& obs, double /*t*/, double dt) override {
        return controller_.step(obs, dt);
    }

  private:
    PiController controller_;
};

/// Scales raw observations to O(1) network inputs.
struct ObsScaler {
    double fScale = 0.4;    // Hz
    double tieScale = 0.1;  // pu

    Vec operator()(const Observation& obs) const {
        Vec v(obs.f.size() + obs.ptie.size());
        v << obs.f / fScale, obs.ptie / tieScale;
        return v;
    }
};

class AgentPolicy : public Policy {
  public:
    AgentPolicy(DdpgAgent& agent, ObsScaler scaler, double noiseSigma = 0.0)
        : agent_(&agent), scaler_(scaler), sigma_(noiseSigma) {}
    Vec act(const Observation& obs, double /*t*/, double /*dt*/) override {
        const Vec v = scaler_(obs);
        return sigma_ > 0.0 ? agent_->actNoisy(v, sigma_) : agent_->act(v);
    }

  private:
    DdpgAgent* agent_;
    ObsScaler scaler_;
    double sigma_;
};

class ScriptedPolicy : public Policy {
  public:
    explicit ScriptedPolicy(std::function<Vec(double)> dispatchOfTime)
        : fn_(std::move(dispatchOfTime)) {}
    Vec act(const Observation&, double t, double /*dt*/) override { return fn_(t); }

  private:
    std::function<Vec(double)> fn_;
};

/// Completed-step callback used by the training loop; obs vectors are the
/// raw observations at the start and end of the step.
struct EpisodeHooks {
    std::function<void(const Observation& obs, const Vec& action, double reward,
                       const Observation& nextObs, bool terminal)>
        onTransition;
};

/// Simulates the closed loop for one episode. The filter (when the mode uses
/// it) screens every dispatch and re-checks the held input every prediction
/// horizon; FlagTerminate ends the episode on the first flag, Rectify
/// replaces unsafe dispatches by the QP solution.
EpisodeTrace runEpisode(const SystemModel& model, const SafetyFilter* filter,
                        const RewardConfig& rewardCfg, const Scenario& scenario, Policy& policy,
                        const EpisodeHooks* hooks = nullptr);

struct TrainingConfig {
    double episodeDuration = 60.0;
    double agcPeriod = 2.0;
    int loadStepsMin = 1;
    int loadStepsMax = 3;
    double loadMagnitude = 0.05;  // pu, magnitudes uniform in +-this
    FilterMode mode = FilterMode::FlagTerminate;
    double rk4Dt = 1e-3;
};

struct TrainReport {
    std::vector<double> episodeReward;
    std::vector<double> movingAvg100;
    std::vector<int> episodeSteps;
    std::vector<int> flagEpisodes;  // indices of flag-terminated episodes
    int violationCount = 0;
    double wallClockSeconds = 0.0;  // not part of the serialized report
};

/// Randomized load schedule for training episode `episode`, derived
/// deterministically from the master seed.
std::vector<LoadEvent> randomLoadSchedule(const TrainingConfig& cfg, int areaCount,
                                          std::uint64_t masterSeed, int episode);

/// The safe-training loop: per episode, a fresh randomized load schedule,
/// exploration noise from the agent's schedule, one agent update per
/// completed step.
TrainReport train(const SystemModel& model, const SafetyFilter& filter,
                  const RewardConfig& rewardCfg, const TrainingConfig& cfg, DdpgAgent& agent,
                  ObsScaler scaler, int episodes, std::uint64_t masterSeed);

struct PolicyMetrics {
    Vec peakAbsFreq;          // Hz per area
    double peakAbsTie = 0.0;  // pu
    double settlingTime = -1.0;  // s until |f| < band in every area, -1 if never
    double steadyImbalance = 0.0;  // load-sharing sum of squares near the end
    double totalReward = 0.0;
};

PolicyMetrics traceMetrics(const SystemModel& model, const EpisodeTrace& trace,
                           double settleBandHz = 0.005, double steadyWindow = 5.0);

/// Serialization helpers. All files are deterministic for a fixed input.
std::string formatDouble(double v);
void writeTraceCsv(const std::string& path, const SystemModel& model,
                   const EpisodeTrace& trace);
void writeDispatchCsv(const std::string& path, const SystemModel& model,
                      const EpisodeTrace& trace);
void writeTrainReportCsv(const std::string& path, const TrainReport& report);

}  // namespace agc
