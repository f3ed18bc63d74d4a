#include "agc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace agc {

namespace {

constexpr double kTimeEps = 1e-9;

struct LoadState {
    std::vector<LoadEvent> schedule;  // sorted by time
    size_t next = 0;
    Vec pl;

    void applyDue(double t) {
        while (next < schedule.size() && schedule[next].t <= t + kTimeEps) {
            pl(schedule[next].area) += schedule[next].deltaPu;
            ++next;
        }
    }
};

/// The dispatch vector a record's reward was computed from: blocked
/// proposals are billed as proposed, everything else as applied.
const Vec& rewardPref(const DispatchRecord& r) {
    return (r.flagged || r.violation) ? r.prefRaw : r.prefApplied;
}

}  // namespace

EpisodeTrace runEpisode(const SystemModel& model, const SafetyFilter* filter,
                        const RewardConfig& rewardCfg, const Scenario& scenario, Policy& policy,
                        const EpisodeHooks* hooks) {
    if (!(scenario.duration > 0.0) || !(scenario.agcPeriod > 0.0) || !(scenario.rk4Dt > 0.0)) {
        throw std::invalid_argument("runEpisode: durations must be positive");
    }
    const bool filtered = scenario.mode != FilterMode::Unfiltered;
    if (filtered && filter == nullptr) {
        throw std::invalid_argument("runEpisode: filtered mode requires a SafetyFilter");
    }
    for (const LoadEvent& ev : scenario.loadSchedule) {
        if (ev.t < 0.0 || ev.t > scenario.duration || ev.area < 0 ||
            ev.area >= model.areaCount) {
            throw std::invalid_argument("runEpisode: load event outside scenario bounds");
        }
    }

    policy.reset();

    EpisodeTrace trace;
    Vec x = Vec::Zero(model.order());
    Vec uHeld = Vec::Zero(model.generatorCount());

    LoadState load;
    load.schedule = scenario.loadSchedule;
    std::stable_sort(load.schedule.begin(), load.schedule.end(),
                     [](const LoadEvent& a, const LoadEvent& b) { return a.t < b.t; });
    load.pl = Vec::Zero(model.areaCount);

    const bool sampling = scenario.traceSampleDt > 0.0;
    double nextSampleT = 0.0;
    if (sampling) {
        trace.sampleT.push_back(0.0);
        trace.sampleX.push_back(x);
        nextSampleT = scenario.traceSampleDt;
    }

    Rk4Workspace ws;
    ws.resize(model.order());
    Vec cHold(model.order());

    auto trackFreq = [&](const Vec& state) {
        for (int i = 0; i < model.areaCount; ++i) {
            trace.maxAbsFreq = std::max(trace.maxAbsFreq, std::abs(state(model.freqStateIndex[i])));
        }
    };
    trackFreq(x);

    // Advances x over [from, to] under held inputs, tracking the frequency
    // envelope and optional samples at every integration substep. Returns
    // false (restoring the pre-span state) if the plant diverges.
    Vec xBefore(model.order());
    auto simulateSpan = [&](double from, double to, const Vec& u) {
        if (to - from <= kTimeEps) {
            return true;
        }
        xBefore = x;
        cHold.noalias() = model.B1 * load.pl;
        cHold.noalias() += model.B2 * u;
        const int nSub =
            std::max(1, static_cast<int>(std::ceil((to - from) / scenario.rk4Dt - kTimeEps)));
        const double h = (to - from) / nSub;
        for (int i = 0; i < nSub; ++i) {
            rk4LinearStepInPlace(model.A, cHold, h, x, ws);
            trackFreq(x);
            if (sampling) {
                const double tNow = from + (i + 1) * h;
                if (tNow >= nextSampleT - kTimeEps) {
                    trace.sampleT.push_back(tNow);
                    trace.sampleX.push_back(x);
                    nextSampleT += scenario.traceSampleDt;
                }
            }
        }
        if (!x.allFinite()) {
            x = xBefore;
            return false;
        }
        return true;
    };

    auto pushRecord = [&](double t, const Observation& obs, const Vec& raw, const Vec& applied,
                          bool flagged, bool violation) -> const DispatchRecord& {
        DispatchRecord rec;
        rec.t = t;
        rec.f = obs.f;
        rec.ptie = obs.ptie;
        rec.prefRaw = raw;
        rec.prefApplied = applied;
        rec.flagged = flagged;
        rec.violation = violation;
        rec.reward = rewardTerms(rewardCfg, obs, rewardPref(rec), RewardFlags{flagged, violation},
                                 model.generatorIndex);
        trace.dispatches.push_back(std::move(rec));
        trace.totalReward += trace.dispatches.back().reward.total();
        return trace.dispatches.back();
    };

    // Evaluation-instant safety check: outside the predicted-safe set or an
    // actual band breach counts as a violation event.
    auto violationAt = [&](const BarrierEval& ev, const Observation& obs) {
        if (!ev.inside) {
            return true;
        }
        return obs.f.cwiseAbs().maxCoeff() > filter->config().fMax;
    };

    trace.terminal = TerminalCause::TimeUp;
    bool done = false;
    double tCursor = 0.0;

    for (int k = 0; !done; ++k) {
        const double tk = k * scenario.agcPeriod;
        if (tk >= scenario.duration - kTimeEps) {
            break;
        }
        load.applyDue(tk);
        const Observation obs = observe(model, x);
        const Vec aRaw = policy.act(obs, tk, scenario.agcPeriod);
        Vec uApply = aRaw;
        bool flaggedNow = false;
        bool violationNow = false;

        if (filtered) {
            const BarrierEval ev = filter->condition(x, load.pl, aRaw, uHeld);
            if (violationAt(ev, obs)) {
                violationNow = true;
            } else if (!ev.satisfied()) {
                if (scenario.mode == FilterMode::FlagTerminate) {
                    flaggedNow = true;
                } else {
                    const CbfDecision d =
                        filter->screen(x, load.pl, aRaw, ScreenMode::Rectify, uHeld);
                    uApply = std::get<CbfRectified>(d).uSafe;
                }
            }
        }

        if (flaggedNow || violationNow) {
            pushRecord(tk, obs, aRaw, Vec::Zero(aRaw.size()), flaggedNow, violationNow);
            if (hooks && hooks->onTransition) {
                hooks->onTransition(obs, aRaw, trace.dispatches.back().reward.total(), obs, true);
            }
            trace.terminal = violationNow ? TerminalCause::Violation : TerminalCause::CbfFlag;
            tCursor = tk;
            done = true;
            break;
        }

        // Hold uApply until the next dispatch, re-checking every prediction
        // horizon and at every load change.
        const double tEnd = std::min(tk + scenario.agcPeriod, scenario.duration);
        uHeld = uApply;

        std::vector<double> bounds;
        if (filtered) {
            const double ts = filter->config().tsPred;
            for (double tb = tk + ts; tb < tEnd - kTimeEps; tb += ts) {
                bounds.push_back(tb);
            }
        }
        for (const LoadEvent& ev : load.schedule) {
            if (ev.t > tk + kTimeEps && ev.t < tEnd - kTimeEps) {
                bounds.push_back(ev.t);
            }
        }
        bounds.push_back(tEnd);
        std::sort(bounds.begin(), bounds.end());

        double cur = tk;
        bool heldTerminated = false;
        for (double tb : bounds) {
            if (tb - cur > kTimeEps && !simulateSpan(cur, tb, uHeld)) {
                // Divergence is reported as a violation terminal, not thrown.
                const Observation obsNow = observe(model, x);
                pushRecord(cur, obsNow, aRaw, uHeld, false, true);
                if (hooks && hooks->onTransition) {
                    hooks->onTransition(obs, uHeld, trace.dispatches.back().reward.total(),
                                        obsNow, true);
                }
                trace.terminal = TerminalCause::Violation;
                tCursor = cur;
                heldTerminated = true;
                break;
            }
            cur = tb;
            load.applyDue(tb);
            if (tb >= tEnd - kTimeEps || !filtered) {
                continue;
            }
            const Observation obsNow = observe(model, x);
            const BarrierEval ev = filter->condition(x, load.pl, uHeld, uHeld);
            if (violationAt(ev, obsNow)) {
                pushRecord(tb, obsNow, aRaw, uHeld, false, true);
                if (hooks && hooks->onTransition) {
                    hooks->onTransition(obs, uHeld, trace.dispatches.back().reward.total(),
                                        obsNow, true);
                }
                trace.terminal = TerminalCause::Violation;
                tCursor = tb;
                heldTerminated = true;
                break;
            }
            if (!ev.satisfied()) {
                if (scenario.mode == FilterMode::FlagTerminate) {
                    pushRecord(tb, obsNow, aRaw, uHeld, true, false);
                    if (hooks && hooks->onTransition) {
                        hooks->onTransition(obs, uHeld, trace.dispatches.back().reward.total(),
                                            obsNow, true);
                    }
                    trace.terminal = TerminalCause::CbfFlag;
                    tCursor = tb;
                    heldTerminated = true;
                    break;
                }
                const CbfDecision d =
                    filter->screen(x, load.pl, uHeld, ScreenMode::Rectify, uHeld);
                uHeld = std::get<CbfRectified>(d).uSafe;
            }
        }
        if (heldTerminated) {
            done = true;
            break;
        }

        const Observation obsNext = observe(model, x);
        pushRecord(tEnd, obsNext, aRaw, uHeld, false, false);
        if (hooks && hooks->onTransition) {
            hooks->onTransition(obs, uHeld, trace.dispatches.back().reward.total(), obsNext,
                                false);
        }
        tCursor = tEnd;
        if (tEnd >= scenario.duration - kTimeEps) {
            break;
        }
    }

    trace.endTime = tCursor;
    return trace;
}

std::vector<LoadEvent> randomLoadSchedule(const TrainingConfig& cfg, int areaCount,
                                          std::uint64_t masterSeed, int episode) {
    auto mix = [](std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    std::mt19937_64 rng(mix(masterSeed, static_cast<std::uint64_t>(episode)));
    std::uniform_int_distribution<int> stepCount(cfg.loadStepsMin, cfg.loadStepsMax);
    std::uniform_real_distribution<double> when(0.0, cfg.episodeDuration);
    std::uniform_int_distribution<int> whichArea(0, areaCount - 1);
    std::uniform_real_distribution<double> magnitude(-cfg.loadMagnitude, cfg.loadMagnitude);

    std::vector<LoadEvent> schedule;
    const int n = stepCount(rng);
    for (int i = 0; i < n; ++i) {
        LoadEvent ev;
        ev.t = when(rng);
        ev.area = whichArea(rng);
        ev.deltaPu = magnitude(rng);
        schedule.push_back(ev);
    }
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const LoadEvent& a, const LoadEvent& b) { return a.t < b.t; });
    return schedule;
}

TrainReport train(const SystemModel& model, const SafetyFilter& filter,
                  const RewardConfig& rewardCfg, const TrainingConfig& cfg, DdpgAgent& agent,
                  ObsScaler scaler, int episodes, std::uint64_t masterSeed) {
    if (episodes < 1) {
        throw std::invalid_argument("train: episodes must be >= 1");
    }
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    double runningSum = 0.0;

    for (int e = 0; e < episodes; ++e) {
        Scenario sc;
        sc.duration = cfg.episodeDuration;
        sc.agcPeriod = cfg.agcPeriod;
        sc.loadSchedule = randomLoadSchedule(cfg, model.areaCount, masterSeed, e);
        sc.mode = cfg.mode;
        sc.seed = masterSeed;
        sc.rk4Dt = cfg.rk4Dt;
        sc.traceSampleDt = 0.0;

        AgentPolicy policy(agent, scaler, agent.noiseSigma(e));
        EpisodeHooks hooks;
        hooks.onTransition = [&](const Observation& obs, const Vec& action, double r,
                                 const Observation& next, bool terminal) {
            agent.remember(Transition{scaler(obs), action, r, scaler(next), terminal});
            agent.update();
        };
        const EpisodeTrace trace = runEpisode(model, &filter, rewardCfg, sc, policy, &hooks);

        report.episodeReward.push_back(trace.totalReward);
        report.episodeSteps.push_back(static_cast<int>(trace.dispatches.size()));
        if (trace.terminal == TerminalCause::CbfFlag) {
            report.flagEpisodes.push_back(e);
        }
        if (trace.terminal == TerminalCause::Violation) {
            ++report.violationCount;
        }
        runningSum += trace.totalReward;
        const int window = std::min(static_cast<int>(report.episodeReward.size()), 100);
        if (static_cast<int>(report.episodeReward.size()) > 100) {
            runningSum -= report.episodeReward[report.episodeReward.size() - 101];
        }
        report.movingAvg100.push_back(runningSum / window);
    }

    report.wallClockSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

PolicyMetrics traceMetrics(const SystemModel& model, const EpisodeTrace& trace,
                           double settleBandHz, double steadyWindow) {
    PolicyMetrics m;
    m.peakAbsFreq = Vec::Zero(model.areaCount);
    m.totalReward = trace.totalReward;

    double lastUnsettled = -1.0;
    for (size_t s = 0; s < trace.sampleX.size(); ++s) {
        const Vec& x = trace.sampleX[s];
        bool inBand = true;
        for (int i = 0; i < model.areaCount; ++i) {
            const double f = std::abs(x(model.freqStateIndex[i]));
            m.peakAbsFreq(i) = std::max(m.peakAbsFreq(i), f);
            if (f >= settleBandHz) {
                inBand = false;
            }
        }
        for (int k = 0; k < model.tieCount(); ++k) {
            m.peakAbsTie = std::max(m.peakAbsTie, std::abs(x(model.tieStateIndex[k])));
        }
        if (!inBand) {
            lastUnsettled = trace.sampleT[s];
        }
    }
    if (!trace.sampleT.empty() && lastUnsettled < trace.sampleT.back()) {
        m.settlingTime = std::max(lastUnsettled, 0.0);
    }

    double imbalance = 0.0;
    int counted = 0;
    for (const DispatchRecord& rec : trace.dispatches) {
        if (rec.t < trace.endTime - steadyWindow) {
            continue;
        }
        const Vec& u = rec.prefApplied;
        for (const auto& group : model.generatorIndex) {
            double mean = 0.0;
            for (int j : group) {
                mean += u(j);
            }
            mean /= static_cast<double>(group.size());
            for (int j : group) {
                imbalance += (u(j) - mean) * (u(j) - mean);
            }
        }
        ++counted;
    }
    m.steadyImbalance = counted > 0 ? imbalance / counted : 0.0;
    return m;
}

std::string formatDouble(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void writeTraceCsv(const std::string& path, const SystemModel& model,
                   const EpisodeTrace& trace) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("writeTraceCsv: cannot open " + path);
    }
    out << "time_s";
    for (const auto& label : model.stateLabels) {
        out << ',' << label;
    }
    for (int j = 0; j < model.generatorCount(); ++j) {
        out << ",pref_raw_g" << (j + 1);
    }
    for (int j = 0; j < model.generatorCount(); ++j) {
        out << ",pref_g" << (j + 1);
    }
    out << '\n';

    size_t d = 0;
    Vec raw = Vec::Zero(model.generatorCount());
    Vec applied = Vec::Zero(model.generatorCount());
    for (size_t s = 0; s < trace.sampleT.size(); ++s) {
        const double t = trace.sampleT[s];
        // Dispatch records mark their hold with the value at the hold end.
        while (d < trace.dispatches.size() && trace.dispatches[d].t <= t + kTimeEps) {
            raw = trace.dispatches[d].prefRaw;
            applied = trace.dispatches[d].prefApplied;
            ++d;
        }
        if (d < trace.dispatches.size()) {
            raw = trace.dispatches[d].prefRaw;
            applied = trace.dispatches[d].prefApplied;
        }
        out << formatDouble(t);
        for (Eigen::Index i = 0; i < trace.sampleX[s].size(); ++i) {
            out << ',' << formatDouble(trace.sampleX[s](i));
        }
        for (Eigen::Index j = 0; j < raw.size(); ++j) {
            out << ',' << formatDouble(raw(j));
        }
        for (Eigen::Index j = 0; j < applied.size(); ++j) {
            out << ',' << formatDouble(applied(j));
        }
        out << '\n';
    }
}

void writeDispatchCsv(const std::string& path, const SystemModel& model,
                      const EpisodeTrace& trace) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("writeDispatchCsv: cannot open " + path);
    }
    out << "time_s";
    for (int i = 0; i < model.areaCount; ++i) {
        out << ",f" << (i + 1) << "_hz";
    }
    for (int k = 0; k < model.tieCount(); ++k) {
        out << ",ptie" << (k + 1) << "_pu";
    }
    for (int j = 0; j < model.generatorCount(); ++j) {
        out << ",pref_raw_g" << (j + 1);
    }
    for (int j = 0; j < model.generatorCount(); ++j) {
        out << ",pref_g" << (j + 1);
    }
    out << ",flag,violation,reward,r_freq,r_tie,r_dispatch,r_share,r_flag,r_violation\n";
    for (const DispatchRecord& rec : trace.dispatches) {
        out << formatDouble(rec.t);
        for (Eigen::Index i = 0; i < rec.f.size(); ++i) {
            out << ',' << formatDouble(rec.f(i));
        }
        for (Eigen::Index k = 0; k < rec.ptie.size(); ++k) {
            out << ',' << formatDouble(rec.ptie(k));
        }
        for (Eigen::Index j = 0; j < rec.prefRaw.size(); ++j) {
            out << ',' << formatDouble(rec.prefRaw(j));
        }
        for (Eigen::Index j = 0; j < rec.prefApplied.size(); ++j) {
            out << ',' << formatDouble(rec.prefApplied(j));
        }
        out << ',' << (rec.flagged ? 1 : 0) << ',' << (rec.violation ? 1 : 0) << ','
            << formatDouble(rec.reward.total()) << ',' << formatDouble(rec.reward.freqDev) << ','
            << formatDouble(rec.reward.tieDev) << ',' << formatDouble(rec.reward.dispatch) << ','
            << formatDouble(rec.reward.loadShare) << ',' << formatDouble(rec.reward.flagPenalty)
            << ',' << formatDouble(rec.reward.violationPenalty) << '\n';
    }
}

void writeTrainReportCsv(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("writeTrainReportCsv: cannot open " + path);
    }
    out << "episode,reward,moving_avg_100,steps,flag_terminated\n";
    size_t flagIdx = 0;
    for (size_t e = 0; e < report.episodeReward.size(); ++e) {
        const bool flagged =
            flagIdx < report.flagEpisodes.size() &&
            report.flagEpisodes[flagIdx] == static_cast<int>(e);
        if (flagged) {
            ++flagIdx;
        }
        out << e << ',' << formatDouble(report.episodeReward[e]) << ','
            << formatDouble(report.movingAvg100[e]) << ',' << report.episodeSteps[e] << ','
            << (flagged ? 1 : 0) << '\n';
    }
}

}  // namespace agc
