#include "agc/config.hpp"

#include <CLI11.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace agc;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void ensureOutDir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + out);
    }
}

int cmdValidateModel(const std::string& configPath) {
    const AppConfig cfg = loadConfig(configPath);
    const SystemModel model = cfg.buildSystem();

    std::printf("states n = %d, areas m = %d, generators g = %d, ties = %d\n", model.order(),
                model.areaCount, model.generatorCount(), model.tieCount());
    std::printf("state labels:\n");
    for (int i = 0; i < model.order(); ++i) {
        std::printf("  [%2d] %s\n", i, model.stateLabels[i].c_str());
    }

    Eigen::EigenSolver<Mat> eig(model.A);
    std::printf("eigenvalues of A:\n");
    double maxRe = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < model.order(); ++i) {
        const double re = eig.eigenvalues()(i).real();
        const double im = eig.eigenvalues()(i).imag();
        maxRe = std::max(maxRe, re);
        std::printf("  % .6e %+.6e i\n", re, im);
    }
    std::printf("max real part = %.3e\n", maxRe);
    if (maxRe >= 1e-9) {
        std::printf("verdict: UNSTABLE (eigenvalue with positive real part)\n");
        return kExitRuntime;
    }
    std::printf("verdict: stable\n");
    return kExitOk;
}

int cmdDemoCbf(const std::string& configPath, const std::string& modeName,
               const std::string& out, double rampRate, double duration) {
    const AppConfig cfg = loadConfig(configPath);
    const SystemModel model = cfg.buildSystem();
    ensureOutDir(out);

    // Published demo configuration: alpha = 0.1, Ts = 0.1 s, F = 0.5 Hz.
    SafetyConfig safety = cfg.safety;
    safety.fMax = 0.5;
    safety.alpha = Vec::Constant(model.areaCount, 0.1);
    safety.tsPred = 0.1;
    const SafetyFilter filter(model, safety);

    Scenario sc = cfg.scenario;
    sc.duration = duration;
    sc.agcPeriod = 0.1;
    sc.mode = parseFilterMode(modeName);
    sc.loadSchedule = {LoadEvent{40.0, 0, 0.02}};
    sc.traceSampleDt = 1e-3;

    // Erroneous monotone ramp on the first generator of area 1.
    ScriptedPolicy attack([&](double t) {
        Vec u = Vec::Zero(model.generatorCount());
        u(0) = rampRate * t;
        return u;
    });

    const EpisodeTrace trace = runEpisode(model, &filter, cfg.reward, sc, attack, nullptr);
    const std::string tag = "demo_cbf_" + modeName;
    writeTraceCsv(out + "/" + tag + "_trace.csv", model, trace);
    writeDispatchCsv(out + "/" + tag + "_dispatch.csv", model, trace);

    std::printf("mode=%s max|df|=%.4f Hz  F=%.4f Hz  end=%.1f s  dispatches=%zu\n",
                modeName.c_str(), trace.maxAbsFreq, safety.fMax, trace.endTime,
                trace.dispatches.size());
    return kExitOk;
}

int cmdTrain(const std::string& configPath, int episodes, std::uint64_t seed,
             const std::string& out) {
    const AppConfig cfg = loadConfig(configPath);
    const SystemModel model = cfg.buildSystem();
    ensureOutDir(out);

    const SafetyFilter filter(model, cfg.safety);
    DdpgAgent agent(model.areaCount + model.tieCount(), model.generatorCount(), cfg.agent, seed);

    const TrainReport report =
        train(model, filter, cfg.reward, cfg.training, agent, cfg.scaler(), episodes, seed);

    writeTrainReportCsv(out + "/train_report.csv", report);
    agent.save(out + "/agent.ckpt");

    const double avgEnd = report.movingAvg100.empty() ? 0.0 : report.movingAvg100.back();
    std::printf("episodes=%d flags=%zu violations=%d avg100(end)=%.3f wall=%.1fs\n", episodes,
                report.flagEpisodes.size(), report.violationCount, avgEnd,
                report.wallClockSeconds);
    if (report.violationCount > 0) {
        std::fprintf(stderr, "error: training recorded %d safety violations\n",
                     report.violationCount);
        return kExitRuntime;
    }
    return kExitOk;
}

int cmdEval(const std::string& configPath, const std::string& checkpoint,
            const std::string& out) {
    const AppConfig cfg = loadConfig(configPath);
    const SystemModel model = cfg.buildSystem();
    ensureOutDir(out);

    const SafetyFilter filter(model, cfg.safety);
    DdpgAgent agent = DdpgAgent::load(checkpoint, cfg.agent, cfg.scenario.seed);
    if (agent.obsDim() != model.areaCount + model.tieCount() ||
        agent.actionDim() != model.generatorCount()) {
        throw std::runtime_error("checkpoint dimensions do not match the model");
    }

    Scenario sc = cfg.scenario;
    if (sc.traceSampleDt <= 0.0) {
        sc.traceSampleDt = 1e-3;
    }
    AgentPolicy policy(agent, cfg.scaler());
    const EpisodeTrace trace = runEpisode(model, &filter, cfg.reward, sc, policy, nullptr);
    writeTraceCsv(out + "/eval_trace.csv", model, trace);
    writeDispatchCsv(out + "/eval_dispatch.csv", model, trace);

    const PolicyMetrics m = traceMetrics(model, trace);
    std::printf("total_reward=%.4f max|df|=%.4f Hz settle=%.2f s imbalance=%.3e\n",
                trace.totalReward, trace.maxAbsFreq, m.settlingTime, m.steadyImbalance);
    return kExitOk;
}

int cmdCompare(const std::string& configPath, const std::string& checkpoint,
               const std::string& out) {
    const AppConfig cfg = loadConfig(configPath);
    const SystemModel model = cfg.buildSystem();
    ensureOutDir(out);

    const SafetyFilter filter(model, cfg.safety);
    Scenario sc = cfg.scenario;
    if (sc.traceSampleDt <= 0.0) {
        sc.traceSampleDt = 1e-3;
    }

    PiPolicy pi(PiController(model, cfg.piGains, cfg.piParticipation));
    const EpisodeTrace piTrace = runEpisode(model, &filter, cfg.reward, sc, pi, nullptr);
    writeTraceCsv(out + "/compare_pi_trace.csv", model, piTrace);
    writeDispatchCsv(out + "/compare_pi_dispatch.csv", model, piTrace);
    const PolicyMetrics piM = traceMetrics(model, piTrace);

    DdpgAgent agent = DdpgAgent::load(checkpoint, cfg.agent, cfg.scenario.seed);
    if (agent.obsDim() != model.areaCount + model.tieCount() ||
        agent.actionDim() != model.generatorCount()) {
        throw std::runtime_error("checkpoint dimensions do not match the model");
    }
    AgentPolicy rl(agent, cfg.scaler());
    const EpisodeTrace rlTrace = runEpisode(model, &filter, cfg.reward, sc, rl, nullptr);
    writeTraceCsv(out + "/compare_rl_trace.csv", model, rlTrace);
    writeDispatchCsv(out + "/compare_rl_dispatch.csv", model, rlTrace);
    const PolicyMetrics rlM = traceMetrics(model, rlTrace);

    std::ofstream summary(out + "/compare_summary.csv");
    summary << "policy,peak_abs_f_hz,peak_abs_ptie_pu,settling_s,steady_imbalance,total_reward\n";
    auto line = [&](const char* name, const PolicyMetrics& m) {
        summary << name << ',' << formatDouble(m.peakAbsFreq.maxCoeff()) << ','
                << formatDouble(m.peakAbsTie) << ',' << formatDouble(m.settlingTime) << ','
                << formatDouble(m.steadyImbalance) << ',' << formatDouble(m.totalReward) << '\n';
    };
    line("pi", piM);
    line("rl", rlM);
    summary.close();

    std::printf("%-6s %12s %12s %10s %14s %12s\n", "policy", "peak|df|", "peak|ptie|", "settle_s",
                "imbalance", "reward");
    std::printf("%-6s %12.5f %12.5f %10.2f %14.4e %12.3f\n", "pi", piM.peakAbsFreq.maxCoeff(),
                piM.peakAbsTie, piM.settlingTime, piM.steadyImbalance, piM.totalReward);
    std::printf("%-6s %12.5f %12.5f %10.2f %14.4e %12.3f\n", "rl", rlM.peakAbsFreq.maxCoeff(),
                rlM.peakAbsTie, rlM.settlingTime, rlM.steadyImbalance, rlM.totalReward);
    return kExitOk;
}

int cmdTunePi(const std::string& configPath) {
    const AppConfig cfg = loadConfig(configPath);
    const SystemModel model = cfg.buildSystem();
    const SafetyFilter filter(model, cfg.safety);

    Scenario sc;
    sc.duration = 60.0;
    sc.agcPeriod = cfg.training.agcPeriod;
    sc.mode = FilterMode::Rectify;
    sc.loadSchedule = {LoadEvent{1.0, 0, 0.05}};
    sc.traceSampleDt = 0.01;

    double bestKp = 0.0, bestKi = 0.0;
    double bestScore = std::numeric_limits<double>::infinity();
    for (double kp = 0.0; kp <= 0.501; kp += 0.05) {
        for (double ki = 0.02; ki <= 0.501; ki += 0.02) {
            std::vector<PiGains> gains(model.areaCount, PiGains{kp, ki});
            PiPolicy policy(PiController(model, gains, cfg.piParticipation));
            EpisodeTrace trace;
            try {
                trace = runEpisode(model, &filter, cfg.reward, sc, policy, nullptr);
            } catch (const std::exception&) {
                continue;
            }
            if (trace.terminal != TerminalCause::TimeUp) {
                continue;
            }
            // Integral of time-weighted |df| over the trace samples.
            double itae = 0.0;
            for (size_t s = 0; s < trace.sampleT.size(); ++s) {
                double absf = 0.0;
                for (int i = 0; i < model.areaCount; ++i) {
                    absf += std::abs(trace.sampleX[s](model.freqStateIndex[i]));
                }
                itae += trace.sampleT[s] * absf;
            }
            if (itae < bestScore) {
                bestScore = itae;
                bestKp = kp;
                bestKi = ki;
            }
        }
    }
    std::printf("best gains: kp=%.3f ki=%.3f (itae=%.4f)\n", bestKp, bestKi, bestScore);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale safe AGC toolkit: CBF-screened dispatch on a two-area grid"};
    app.require_subcommand(1);
    app.fallthrough();  // allow --config/--seed after the subcommand name

    std::string config = "default";
    std::string out = "out";
    std::string mode = "rectify";
    std::string checkpoint;
    std::uint64_t seed = 0;
    int episodes = 2000;
    double rampRate = 0.02;
    double demoDuration = 60.0;

    app.add_option("--config", config, "config file path or \"default\"")->capture_default_str();

    auto* validate = app.add_subcommand("validate-model", "print dimensions and eigenvalues");

    auto* demo = app.add_subcommand("demo-cbf", "scripted ramp-attack demo");
    demo->add_option("--mode", mode, "off|rectify|flag")->capture_default_str();
    demo->add_option("--out", out, "output directory")->capture_default_str();
    demo->add_option("--ramp-rate", rampRate, "attack ramp rate, pu/s")->capture_default_str();
    demo->add_option("--duration", demoDuration, "demo length, s")->capture_default_str();

    auto* trainCmd = app.add_subcommand("train", "run the safe training loop");
    trainCmd->add_option("--episodes", episodes, "episode count")->capture_default_str();
    trainCmd->add_option("--seed", seed, "master seed")->capture_default_str();
    trainCmd->add_option("--out", out, "output directory")->capture_default_str();

    auto* evalCmd = app.add_subcommand("eval", "run a trained agent on the config scenario");
    evalCmd->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
    evalCmd->add_option("--out", out, "output directory")->capture_default_str();

    auto* compareCmd = app.add_subcommand("compare", "PI vs trained agent on the step scenario");
    compareCmd->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
    compareCmd->add_option("--out", out, "output directory")->capture_default_str();

    auto* tunePi = app.add_subcommand("tune-pi", "grid-search PI gains on the 5% step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (validate->parsed()) {
            return cmdValidateModel(config);
        }
        if (demo->parsed()) {
            return cmdDemoCbf(config, mode, out, rampRate, demoDuration);
        }
        if (trainCmd->parsed()) {
            return cmdTrain(config, episodes, seed, out);
        }
        if (evalCmd->parsed()) {
            return cmdEval(config, checkpoint, out);
        }
        if (compareCmd->parsed()) {
            return cmdCompare(config, checkpoint, out);
        }
        if (tunePi->parsed()) {
            return cmdTunePi(config);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
