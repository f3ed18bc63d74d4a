#pragma once

#include "agc/numerics.hpp"

#include <string>
#include <vector>

namespace agc {

enum class GeneratorKind { ThermalReheat, Hydro };

/// Per-unit generator data. Thermal-reheat units use governorT/turbineT/
/// reheatGain/reheatT; hydro units use servoT plus the transient-droop
/// compensator pair (resetZeroT numerator, droopPoleT denominator) and the
/// water starting time of the non-minimum-phase penstock turbine.
struct GeneratorParams {
    std::string name;
    GeneratorKind kind = GeneratorKind::ThermalReheat;
    double droop = 0.0;  // Hz per pu

    double governorT = 0.0;   // s
    double turbineT = 0.0;    // s
    double reheatGain = 0.0;  // in [0, 1]
    double reheatT = 0.0;     // s

    double servoT = 0.0;      // s
    double resetZeroT = 0.0;  // s
    double droopPoleT = 0.0;  // s
    double waterT = 0.0;      // s
};

struct AreaParams {
    std::string name;
    double inertiaGain = 0.0;  // Kp, Hz per pu
    double inertiaT = 0.0;     // Tp, s
    double freqBias = 0.0;     // beta, pu per Hz
    std::vector<GeneratorParams> generators;
};

struct TieLine {
    int fromArea = -1;
    int toArea = -1;
    double syncCoeff = 0.0;  // pu per rad
};

/// Continuous-time load-frequency model
///   xdot = A x + B1 pL + B2 pRef,  f = C x
/// with per-area state blocks (generator internals then the swing state)
/// followed by one integrator state per tie line.
struct SystemModel {
    Mat A, B1, B2, C;
    std::vector<std::string> stateLabels;
    int areaCount = 0;
    std::vector<std::vector<int>> generatorIndex;  // area -> columns of pRef
    std::vector<int> freqStateIndex;               // per area
    std::vector<int> tieStateIndex;                // per tie
    std::vector<int> tieFromArea, tieToArea;       // per tie
    std::vector<double> freqBias;                  // beta per area, for ACE

    int order() const { return static_cast<int>(A.rows()); }
    int generatorCount() const { return static_cast<int>(B2.cols()); }
    int tieCount() const { return static_cast<int>(tieStateIndex.size()); }
};

struct DiscreteModel {
    Mat Abar, B1bar, B2bar, C;
    double ts = 0.0;
};

struct SimState {
    Vec x;
    double t = 0.0;
};

/// Assembles the block-structured model from physical parameters.
/// Throws std::invalid_argument naming the offending parameter.
SystemModel buildModel(const std::vector<AreaParams>& areas, const std::vector<TieLine>& ties);

/// Exact ZOH discretization at step ts.
DiscreteModel discretize(const SystemModel& model, double ts);

/// One-step-ahead area frequency deviations (Hz) under held inputs:
/// C (Abar x + B1bar pL + B2bar pRef).
Vec predictFrequencies(const DiscreteModel& dm, const Vec& x, const Vec& pl, const Vec& pref);

/// Ground-truth advance by dt under held inputs, RK4 sub-steps <= maxSub.
/// Throws std::runtime_error on divergence to non-finite state.
SimState stepHeld(const SystemModel& model, const SimState& s, const Vec& pl, const Vec& pref,
                  double dt, double maxSub = 1e-3);

/// Tie-line power deviations (pu), one entry per tie line.
Vec tieFlows(const SystemModel& model, const Vec& x);

/// Area frequency deviations (Hz) read from the state.
Vec areaFrequencies(const SystemModel& model, const Vec& x);

}  // namespace agc
