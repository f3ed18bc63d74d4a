#pragma once

#include "agc/mlp.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace agc {

struct AgentConfig {
    std::vector<int> hidden{64, 64};
    double actionLimit = 0.1;  // pu per generator
    double gamma = 0.95;
    double tau = 0.005;
    double actorLr = 1e-4;
    double criticLr = 1e-3;
    int bufferCapacity = 200000;
    int batchSize = 64;
    int warmupSteps = 1000;  // transitions collected before updates start
    double noiseSigma0 = 0.3;
    double noiseSigmaFinal = 0.03;
    int noiseDecayEpisodes = 1500;
};

struct Transition {
    Vec obs;
    Vec action;
    double reward = 0.0;
    Vec nextObs;
    bool terminal = false;
};

class ReplayBuffer {
  public:
    explicit ReplayBuffer(size_t capacity);

    void push(Transition t);
    const Transition& at(size_t i) const { return storage_[i]; }
    size_t size() const { return storage_.size(); }
    size_t capacity() const { return capacity_; }

  private:
    size_t capacity_;
    size_t next_ = 0;
    std::vector<Transition> storage_;
};

struct UpdateDiagnostics {
    double criticLoss = 0.0;
    double actorObjective = 0.0;  // mean critic value of the actor's actions
};

/// Deterministic-policy-gradient actor-critic with target networks and a
/// uniform replay buffer. The actor maps observations to dispatch vectors
/// bounded by actionLimit through a tanh output; the critic scores
/// observation-action pairs.
class DdpgAgent {
  public:
    DdpgAgent(int obsDim, int actDim, AgentConfig cfg, std::uint64_t seed);

    /// Deterministic policy output (actionLimit * tanh(...)).
    Vec act(const Vec& obs) const;

    /// Policy output with Gaussian exploration noise sigma * actionLimit,
    /// clamped back to the action range.
    Vec actNoisy(const Vec& obs, double sigma);

    /// Exploration scale for a given training episode (linear anneal).
    double noiseSigma(int episode) const;

    void remember(Transition t);

    /// One critic regression step toward r + gamma (1-terminal) Qt(s', At(s')),
    /// one actor ascent step on Q(s, A(s)), then soft target updates.
    /// Returns nothing until warmup transitions have been collected.
    /// Throws std::runtime_error if the critic loss turns non-finite.
    std::optional<UpdateDiagnostics> update();

    void save(const std::filesystem::path& file) const;
    /// Throws std::runtime_error on format or dimension mismatch.
    static DdpgAgent load(const std::filesystem::path& file, AgentConfig cfg,
                          std::uint64_t seed);

    int obsDim() const { return obsDim_; }
    int actionDim() const { return actDim_; }
    const AgentConfig& config() const { return cfg_; }
    const ReplayBuffer& buffer() const { return buffer_; }

    Mlp& actor() { return actor_; }
    Mlp& critic() { return critic_; }
    const Mlp& actor() const { return actor_; }
    const Mlp& critic() const { return critic_; }
    const Mlp& targetActor() const { return targetActor_; }
    const Mlp& targetCritic() const { return targetCritic_; }
    std::mt19937_64& rng() { return rng_; }

  private:
    DdpgAgent(int obsDim, int actDim, AgentConfig cfg, std::uint64_t seed, bool initNets);

    int obsDim_;
    int actDim_;
    AgentConfig cfg_;
    Mlp actor_, critic_, targetActor_, targetCritic_;
    AdamOptimizer actorOpt_, criticOpt_;
    ReplayBuffer buffer_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace agc
