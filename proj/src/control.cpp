#include "agc/control.hpp"

#include <cmath>
#include <stdexcept>

namespace agc {

Observation observe(const SystemModel& model, const Vec& x) {
    return Observation{areaFrequencies(model, x), tieFlows(model, x)};
}

RewardTerms rewardTerms(const RewardConfig& cfg, const Observation& obs, const Vec& pref,
                        const RewardFlags& flags, const std::vector<std::vector<int>>& groups,
                        const Vec* prevPref) {
    if (cfg.r1.size() != obs.f.size()) {
        throw std::invalid_argument("rewardTerms: r1 dimension mismatch");
    }
    RewardTerms t;
    t.freqDev = -cfg.r1.dot(obs.f.cwiseAbs());
    t.tieDev = -cfg.r2 * obs.ptie.cwiseAbs().sum();

    if (cfg.dispatchDeltaPenalty) {
        const Vec prev = prevPref ? *prevPref : Vec::Zero(pref.size());
        t.dispatch = -cfg.r3 * (pref - prev).squaredNorm();
    } else {
        t.dispatch = -cfg.r3 * pref.squaredNorm();
    }

    double share = 0.0;
    for (const auto& group : groups) {
        if (group.empty()) {
            continue;
        }
        double mean = 0.0;
        for (int j : group) {
            mean += pref(j);
        }
        mean /= static_cast<double>(group.size());
        for (int j : group) {
            const double d = pref(j) - mean;
            share += d * d;
        }
    }
    t.loadShare = -cfg.r4 * share;

    t.flagPenalty = flags.cbfFlag ? -cfg.r5 : 0.0;
    t.violationPenalty = flags.violation ? -cfg.r6 : 0.0;
    return t;
}

double reward(const RewardConfig& cfg, const Observation& obs, const Vec& pref,
              const RewardFlags& flags, const std::vector<std::vector<int>>& groups,
              const Vec* prevPref) {
    return rewardTerms(cfg, obs, pref, flags, groups, prevPref).total();
}

PiController::PiController(const SystemModel& model, std::vector<PiGains> gains,
                           std::vector<std::vector<double>> participation)
    : model_(&model), gains_(std::move(gains)), participation_(std::move(participation)) {
    const size_t m = static_cast<size_t>(model.areaCount);
    if (gains_.size() != m || participation_.size() != m) {
        throw std::invalid_argument("PiController: need gains and participation per area");
    }
    for (size_t i = 0; i < m; ++i) {
        if (gains_[i].ki < 0.0) {
            throw std::invalid_argument("PiController: ki must be nonnegative");
        }
        const auto& p = participation_[i];
        if (p.size() != model.generatorIndex[i].size()) {
            throw std::invalid_argument("PiController: participation size mismatch");
        }
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) {
                throw std::invalid_argument("PiController: participation must be nonnegative");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("PiController: participation must sum to 1 per area");
        }
    }
    integral_ = Vec::Zero(model.areaCount);
}

Vec PiController::areaTieDeviation(const SystemModel& model, const Vec& ptie) {
    Vec net = Vec::Zero(model.areaCount);
    for (int k = 0; k < model.tieCount(); ++k) {
        net(model.tieFromArea[k]) += ptie(k);
        net(model.tieToArea[k]) -= ptie(k);
    }
    return net;
}

Vec PiController::step(const Observation& obs, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("PiController::step: dt must be positive");
    }
    const Vec tieNet = areaTieDeviation(*model_, obs.ptie);
    Vec u = Vec::Zero(model_->generatorCount());
    for (int i = 0; i < model_->areaCount; ++i) {
        const double ace = tieNet(i) + model_->freqBias[i] * obs.f(i);
        integral_(i) += ace * dt;
        const double command = -(gains_[i].kp * ace + gains_[i].ki * integral_(i));
        const auto& cols = model_->generatorIndex[i];
        for (size_t j = 0; j < cols.size(); ++j) {
            u(cols[j]) = participation_[i][j] * command;
        }
    }
    return u;
}

void PiController::reset() {
    integral_.setZero();
}

}  // namespace agc
