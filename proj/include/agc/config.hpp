#pragma once

#include "agc/harness.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace agc {

/// Raised by the loader with the offending field path in the message.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Everything the tools need in one file: plant, safety, reward, PI,
/// agent hyperparameters, training distribution, and the eval scenario.
struct AppConfig {
    std::vector<AreaParams> areas;
    std::vector<TieLine> ties;

    SafetyConfig safety;
    FilterMode safetyMode = FilterMode::FlagTerminate;

    RewardConfig reward;

    std::vector<PiGains> piGains;
    std::vector<std::vector<double>> piParticipation;

    AgentConfig agent;
    double obsTieScale = 0.1;  // pu, observation normalization

    TrainingConfig training;
    Scenario scenario;  // used by `eval`

    SystemModel buildSystem() const { return buildModel(areas, ties); }
    ObsScaler scaler() const { return ObsScaler{safety.fMax, obsTieScale}; }
};

/// The built-in two-area thermal+hydro configuration (JSON text).
const std::string& defaultConfigJson();

AppConfig parseConfig(const std::string& jsonText);

/// Loads a config file; the name "default" resolves to the built-in one.
AppConfig loadConfig(const std::string& pathOrDefault);

FilterMode parseFilterMode(const std::string& name);
std::string filterModeName(FilterMode mode);

}  // namespace agc
