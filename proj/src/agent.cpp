#include "agc/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace agc {

namespace {

constexpr char kMagic[8] = {'A', 'G', 'C', 'N', 'E', 'T', 'S', '\0'};
constexpr std::uint32_t kVersion = 1;

std::vector<int> withEnds(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> dims;
    dims.push_back(in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    return dims;
}

}  // namespace

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) {
        throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }
    storage_.reserve(std::min<size_t>(capacity_, 1 << 20));
}

void ReplayBuffer::push(Transition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
    } else {
        storage_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }
}

DdpgAgent::DdpgAgent(int obsDim, int actDim, AgentConfig cfg, std::uint64_t seed)
    : DdpgAgent(obsDim, actDim, std::move(cfg), seed, true) {}

DdpgAgent::DdpgAgent(int obsDim, int actDim, AgentConfig cfg, std::uint64_t seed, bool initNets)
    : obsDim_(obsDim),
      actDim_(actDim),
      cfg_(std::move(cfg)),
      actor_(withEnds(obsDim, cfg_.hidden, actDim), OutputKind::Tanh),
      critic_(withEnds(obsDim + actDim, cfg_.hidden, 1), OutputKind::Linear),
      actorOpt_(cfg_.actorLr),
      criticOpt_(cfg_.criticLr),
      buffer_(static_cast<size_t>(cfg_.bufferCapacity)),
      rng_(seed) {
    if (!(cfg_.gamma > 0.0 && cfg_.gamma < 1.0)) {
        throw std::invalid_argument("DdpgAgent: gamma must be in (0, 1)");
    }
    if (!(cfg_.tau > 0.0 && cfg_.tau <= 1.0)) {
        throw std::invalid_argument("DdpgAgent: tau must be in (0, 1]");
    }
    if (initNets) {
        actor_.initRandom(rng_);
        critic_.initRandom(rng_);
    }
    targetActor_ = actor_;
    targetCritic_ = critic_;
}

Vec DdpgAgent::act(const Vec& obs) const {
    return cfg_.actionLimit * actor_.forward(obs);
}

Vec DdpgAgent::actNoisy(const Vec& obs, double sigma) {
    Vec a = act(obs);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) += sigma * cfg_.actionLimit * normal_(rng_);
        a(i) = std::clamp(a(i), -cfg_.actionLimit, cfg_.actionLimit);
    }
    return a;
}

double DdpgAgent::noiseSigma(int episode) const {
    if (cfg_.noiseDecayEpisodes <= 0) {
        return cfg_.noiseSigmaFinal;
    }
    const double frac = std::clamp(
        static_cast<double>(episode) / static_cast<double>(cfg_.noiseDecayEpisodes), 0.0, 1.0);
    return cfg_.noiseSigma0 + frac * (cfg_.noiseSigmaFinal - cfg_.noiseSigma0);
}

void DdpgAgent::remember(Transition t) {
    if (t.obs.size() != obsDim_ || t.nextObs.size() != obsDim_ || t.action.size() != actDim_) {
        throw std::invalid_argument("DdpgAgent::remember: transition dimension mismatch");
    }
    buffer_.push(std::move(t));
}

std::optional<UpdateDiagnostics> DdpgAgent::update() {
    const size_t need = static_cast<size_t>(std::max(cfg_.batchSize, cfg_.warmupSteps));
    if (buffer_.size() < need) {
        return std::nullopt;
    }
    const int batch = cfg_.batchSize;
    std::uniform_int_distribution<size_t> pick(0, buffer_.size() - 1);

    std::vector<const Transition*> sample(batch);
    for (int k = 0; k < batch; ++k) {
        sample[k] = &buffer_.at(pick(rng_));
    }

    // Critic regression toward the frozen-target bootstrap value. The critic
    // sees actions scaled back to the actor's [-1, 1] output range.
    MlpGrads criticGrads = critic_.zeroGrads();
    double criticLoss = 0.0;
    Mlp::Cache cache;
    Vec sa(obsDim_ + actDim_);
    for (int k = 0; k < batch; ++k) {
        const Transition& t = *sample[k];
        double y = t.reward;
        if (!t.terminal) {
            sa << t.nextObs, targetActor_.forward(t.nextObs);
            y += cfg_.gamma * targetCritic_.forward(sa)(0);
        }
        sa << t.obs, t.action / cfg_.actionLimit;
        const double q = critic_.forward(sa, cache)(0);
        const double err = q - y;
        criticLoss += err * err;
        Vec dLdOut(1);
        dLdOut(0) = 2.0 * err / batch;
        critic_.backward(cache, dLdOut, criticGrads);
    }
    criticLoss /= batch;
    if (!std::isfinite(criticLoss)) {
        throw std::runtime_error("DdpgAgent::update: critic loss is not finite");
    }
    criticOpt_.step(critic_, criticGrads);

    // Actor ascent on the critic's value of its own actions.
    MlpGrads actorGrads = actor_.zeroGrads();
    double actorObjective = 0.0;
    Mlp::Cache actorCache;
    MlpGrads scratchCritic = critic_.zeroGrads();
    for (int k = 0; k < batch; ++k) {
        const Transition& t = *sample[k];
        const Vec& aOut = actor_.forward(t.obs, actorCache);
        sa << t.obs, aOut;
        const double q = critic_.forward(sa, cache)(0);
        actorObjective += q / batch;

        Vec dQdOut(1);
        dQdOut(0) = 1.0;
        scratchCritic.setZero();
        Vec dQdInput;
        critic_.backward(cache, dQdOut, scratchCritic, &dQdInput);
        // Maximize Q: descend on -dQ/da at the actor's output.
        const Vec dLdAction = (-1.0 / batch) * dQdInput.tail(actDim_);
        actor_.backward(actorCache, dLdAction, actorGrads);
    }
    if (!std::isfinite(actorObjective)) {
        throw std::runtime_error("DdpgAgent::update: actor objective is not finite");
    }
    actorOpt_.step(actor_, actorGrads);

    softUpdate(targetActor_, actor_, cfg_.tau);
    softUpdate(targetCritic_, critic_, cfg_.tau);
    return UpdateDiagnostics{criticLoss, actorObjective};
}

void DdpgAgent::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::runtime_error("DdpgAgent::save: cannot open " + file.string());
    }
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint32_t counts[2] = {static_cast<std::uint32_t>(obsDim_),
                                     static_cast<std::uint32_t>(actDim_)};
    out.write(reinterpret_cast<const char*>(counts), sizeof(counts));
    writeMlp(out, actor_);
    writeMlp(out, critic_);
    writeMlp(out, targetActor_);
    writeMlp(out, targetCritic_);
    if (!out) {
        throw std::runtime_error("DdpgAgent::save: write failed for " + file.string());
    }
}

DdpgAgent DdpgAgent::load(const std::filesystem::path& file, AgentConfig cfg,
                          std::uint64_t seed) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::runtime_error("DdpgAgent::load: cannot open " + file.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + 8, kMagic)) {
        throw std::runtime_error("DdpgAgent::load: bad magic in " + file.string());
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion) {
        throw std::runtime_error("DdpgAgent::load: unsupported version");
    }
    std::uint32_t counts[2];
    in.read(reinterpret_cast<char*>(counts), sizeof(counts));
    if (!in) {
        throw std::runtime_error("DdpgAgent::load: truncated header");
    }
    DdpgAgent agent(static_cast<int>(counts[0]), static_cast<int>(counts[1]), std::move(cfg),
                    seed, false);
    agent.actor_ = readMlp(in);
    agent.critic_ = readMlp(in);
    agent.targetActor_ = readMlp(in);
    agent.targetCritic_ = readMlp(in);
    if (agent.actor_.inputDim() != agent.obsDim_ ||
        agent.actor_.outputDim() != agent.actDim_ ||
        agent.critic_.inputDim() != agent.obsDim_ + agent.actDim_ ||
        agent.critic_.outputDim() != 1) {
        throw std::runtime_error("DdpgAgent::load: checkpoint dimensions do not match");
    }
    return agent;
}

}  // namespace agc
