#include "agc/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace agc {

namespace {

using nlohmann::json;

const json& member(const json& j, const std::string& path, const std::string& key) {
    if (!j.is_object() || !j.contains(key)) {
        throw ConfigError("config: missing field " + path + "." + key);
    }
    return j.at(key);
}

double numberAt(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number()) {
        throw ConfigError("config: field " + path + "." + key + " must be a number");
    }
    return v.get<double>();
}

int intAt(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_number_integer()) {
        throw ConfigError("config: field " + path + "." + key + " must be an integer");
    }
    return v.get<int>();
}

bool boolAt(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_boolean()) {
        throw ConfigError("config: field " + path + "." + key + " must be a boolean");
    }
    return v.get<bool>();
}

std::string stringAt(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_string()) {
        throw ConfigError("config: field " + path + "." + key + " must be a string");
    }
    return v.get<std::string>();
}

const json& arrayAt(const json& j, const std::string& path, const std::string& key) {
    const json& v = member(j, path, key);
    if (!v.is_array()) {
        throw ConfigError("config: field " + path + "." + key + " must be an array");
    }
    return v;
}

Vec vecAt(const json& j, const std::string& path, const std::string& key) {
    const json& arr = arrayAt(j, path, key);
    Vec v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) {
            throw ConfigError("config: field " + path + "." + key + "[" + std::to_string(i) +
                              "] must be a number");
        }
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    return v;
}

GeneratorParams parseGenerator(const json& j, const std::string& path) {
    GeneratorParams g;
    if (j.contains("name")) {
        g.name = stringAt(j, path, "name");
    }
    const std::string kind = stringAt(j, path, "kind");
    g.droop = numberAt(j, path, "droop_hz_per_pu");
    if (kind == "thermal_reheat") {
        g.kind = GeneratorKind::ThermalReheat;
        g.governorT = numberAt(j, path, "governor_s");
        g.turbineT = numberAt(j, path, "turbine_s");
        g.reheatGain = numberAt(j, path, "reheat_gain");
        g.reheatT = numberAt(j, path, "reheat_s");
    } else if (kind == "hydro") {
        g.kind = GeneratorKind::Hydro;
        g.servoT = numberAt(j, path, "servo_s");
        g.resetZeroT = numberAt(j, path, "reset_zero_s");
        g.droopPoleT = numberAt(j, path, "droop_pole_s");
        g.waterT = numberAt(j, path, "water_s");
    } else {
        throw ConfigError("config: field " + path + ".kind must be thermal_reheat or hydro");
    }
    return g;
}

}  // namespace

FilterMode parseFilterMode(const std::string& name) {
    if (name == "flag") {
        return FilterMode::FlagTerminate;
    }
    if (name == "rectify") {
        return FilterMode::Rectify;
    }
    if (name == "off") {
        return FilterMode::Unfiltered;
    }
    throw ConfigError("config: unknown filter mode \"" + name + "\" (flag|rectify|off)");
}

std::string filterModeName(FilterMode mode) {
    switch (mode) {
        case FilterMode::FlagTerminate:
            return "flag";
        case FilterMode::Rectify:
            return "rectify";
        case FilterMode::Unfiltered:
            return "off";
    }
    return "?";
}

AppConfig parseConfig(const std::string& jsonText) {
    json root;
    try {
        root = json::parse(jsonText);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    AppConfig cfg;

    const json& plant = member(root, "", "plant");
    const json& areas = arrayAt(plant, "plant", "areas");
    for (size_t i = 0; i < areas.size(); ++i) {
        const std::string path = "plant.areas[" + std::to_string(i) + "]";
        const json& ja = areas[i];
        AreaParams a;
        if (ja.contains("name")) {
            a.name = stringAt(ja, path, "name");
        }
        a.inertiaGain = numberAt(ja, path, "inertia_gain_hz_per_pu");
        a.inertiaT = numberAt(ja, path, "inertia_t_s");
        a.freqBias = numberAt(ja, path, "freq_bias_pu_per_hz");
        const json& gens = arrayAt(ja, path, "generators");
        for (size_t k = 0; k < gens.size(); ++k) {
            a.generators.push_back(
                parseGenerator(gens[k], path + ".generators[" + std::to_string(k) + "]"));
        }
        cfg.areas.push_back(std::move(a));
    }
    const json& ties = arrayAt(plant, "plant", "tie_lines");
    for (size_t k = 0; k < ties.size(); ++k) {
        const std::string path = "plant.tie_lines[" + std::to_string(k) + "]";
        TieLine t;
        t.fromArea = intAt(ties[k], path, "from_area");
        t.toArea = intAt(ties[k], path, "to_area");
        t.syncCoeff = numberAt(ties[k], path, "sync_pu_per_rad");
        cfg.ties.push_back(t);
    }

    const json& safety = member(root, "", "safety");
    cfg.safety.fMax = numberAt(safety, "safety", "f_max_hz");
    cfg.safety.alpha = vecAt(safety, "safety", "alpha");
    cfg.safety.tsPred = numberAt(safety, "safety", "ts_pred_s");
    cfg.safety.includeLoadInBdot = boolAt(safety, "safety", "include_load_in_bdot");
    for (const auto& v : arrayAt(safety, "safety", "rectifiable")) {
        if (!v.is_boolean()) {
            throw ConfigError("config: field safety.rectifiable entries must be booleans");
        }
        cfg.safety.rectifiable.push_back(v.get<bool>());
    }
    cfg.safetyMode = parseFilterMode(stringAt(safety, "safety", "mode"));

    const json& reward = member(root, "", "reward");
    cfg.reward.r1 = vecAt(reward, "reward", "r1");
    cfg.reward.r2 = numberAt(reward, "reward", "r2");
    cfg.reward.r3 = numberAt(reward, "reward", "r3");
    cfg.reward.r4 = numberAt(reward, "reward", "r4");
    cfg.reward.r5 = numberAt(reward, "reward", "r5");
    cfg.reward.r6 = numberAt(reward, "reward", "r6");
    cfg.reward.dispatchDeltaPenalty = boolAt(reward, "reward", "dispatch_delta_penalty");

    const json& pi = member(root, "", "pi");
    const json& gains = arrayAt(pi, "pi", "gains");
    for (size_t i = 0; i < gains.size(); ++i) {
        const std::string path = "pi.gains[" + std::to_string(i) + "]";
        cfg.piGains.push_back(PiGains{numberAt(gains[i], path, "kp"),
                                      numberAt(gains[i], path, "ki")});
    }
    const json& part = arrayAt(pi, "pi", "participation");
    for (size_t i = 0; i < part.size(); ++i) {
        const std::string path = "pi.participation[" + std::to_string(i) + "]";
        if (!part[i].is_array()) {
            throw ConfigError("config: field " + path + " must be an array");
        }
        std::vector<double> row;
        for (const auto& v : part[i]) {
            if (!v.is_number()) {
                throw ConfigError("config: field " + path + " entries must be numbers");
            }
            row.push_back(v.get<double>());
        }
        cfg.piParticipation.push_back(std::move(row));
    }

    const json& agent = member(root, "", "agent");
    cfg.agent.hidden.clear();
    for (const auto& v : arrayAt(agent, "agent", "hidden")) {
        if (!v.is_number_integer() || v.get<int>() < 1) {
            throw ConfigError("config: field agent.hidden entries must be positive integers");
        }
        cfg.agent.hidden.push_back(v.get<int>());
    }
    cfg.agent.actionLimit = numberAt(agent, "agent", "action_limit_pu");
    cfg.agent.gamma = numberAt(agent, "agent", "gamma");
    cfg.agent.tau = numberAt(agent, "agent", "tau");
    cfg.agent.actorLr = numberAt(agent, "agent", "actor_lr");
    cfg.agent.criticLr = numberAt(agent, "agent", "critic_lr");
    cfg.agent.bufferCapacity = intAt(agent, "agent", "buffer_capacity");
    cfg.agent.batchSize = intAt(agent, "agent", "batch_size");
    cfg.agent.warmupSteps = intAt(agent, "agent", "warmup_steps");
    cfg.agent.noiseSigma0 = numberAt(agent, "agent", "noise_sigma0");
    cfg.agent.noiseSigmaFinal = numberAt(agent, "agent", "noise_sigma_final");
    cfg.agent.noiseDecayEpisodes = intAt(agent, "agent", "noise_decay_episodes");
    cfg.obsTieScale = numberAt(agent, "agent", "obs_tie_scale_pu");

    const json& training = member(root, "", "training");
    cfg.training.episodeDuration = numberAt(training, "training", "episode_s");
    cfg.training.agcPeriod = numberAt(training, "training", "agc_period_s");
    cfg.training.loadStepsMin = intAt(training, "training", "load_steps_min");
    cfg.training.loadStepsMax = intAt(training, "training", "load_steps_max");
    cfg.training.loadMagnitude = numberAt(training, "training", "load_mag_pu");
    cfg.training.mode = parseFilterMode(stringAt(training, "training", "mode"));

    const json& scenario = member(root, "", "scenario");
    cfg.scenario.duration = numberAt(scenario, "scenario", "duration_s");
    cfg.scenario.agcPeriod = numberAt(scenario, "scenario", "agc_period_s");
    cfg.scenario.mode = parseFilterMode(stringAt(scenario, "scenario", "mode"));
    cfg.scenario.seed = static_cast<std::uint64_t>(intAt(scenario, "scenario", "seed"));
    for (size_t i = 0; i < arrayAt(scenario, "scenario", "load_schedule").size(); ++i) {
        const json& ev = scenario.at("load_schedule")[i];
        const std::string path = "scenario.load_schedule[" + std::to_string(i) + "]";
        LoadEvent e;
        e.t = numberAt(ev, path, "t_s");
        e.area = intAt(ev, path, "area");
        e.deltaPu = numberAt(ev, path, "delta_pu");
        cfg.scenario.loadSchedule.push_back(e);
    }

    const json& sim = member(root, "", "sim");
    const double rk4Dt = numberAt(sim, "sim", "rk4_dt_s");
    const double sampleDt = numberAt(sim, "sim", "trace_sample_dt_s");
    cfg.training.rk4Dt = rk4Dt;
    cfg.scenario.rk4Dt = rk4Dt;
    cfg.scenario.traceSampleDt = sampleDt;

    // Cross-checks the loader can state better than the builder.
    if (cfg.safety.alpha.size() != static_cast<Eigen::Index>(cfg.areas.size())) {
        throw ConfigError("config: safety.alpha must have one entry per area");
    }
    size_t generatorTotal = 0;
    for (const auto& area : cfg.areas) {
        generatorTotal += area.generators.size();
    }
    if (cfg.safety.rectifiable.size() != generatorTotal) {
        throw ConfigError("config: safety.rectifiable needs one entry per generator");
    }
    if (cfg.reward.r1.size() != static_cast<Eigen::Index>(cfg.areas.size())) {
        throw ConfigError("config: reward.r1 must have one entry per area");
    }
    if (cfg.piGains.size() != cfg.areas.size() || cfg.piParticipation.size() != cfg.areas.size()) {
        throw ConfigError("config: pi.gains and pi.participation need one entry per area");
    }
    for (size_t i = 0; i < cfg.areas.size(); ++i) {
        if (cfg.piParticipation[i].size() != cfg.areas[i].generators.size()) {
            throw ConfigError("config: pi.participation[" + std::to_string(i) +
                              "] must match the area's generator count");
        }
    }
    return cfg;
}

AppConfig loadConfig(const std::string& pathOrDefault) {
    if (pathOrDefault == "default") {
        return parseConfig(defaultConfigJson());
    }
    std::ifstream in(pathOrDefault);
    if (!in) {
        throw ConfigError("config: cannot open file " + pathOrDefault);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parseConfig(text.str());
}

}  // namespace agc
