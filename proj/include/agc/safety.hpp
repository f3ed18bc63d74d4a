#pragma once

#include "agc/plant.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace agc {

struct SafetyConfig {
    double fMax = 0.4;    // Hz, largest permitted |frequency deviation|
    Vec alpha;            // per-area barrier gains, all > 0
    double tsPred = 0.5;  // s, prediction horizon of the discretized model
    // When false, the load input is dropped from xdot when evaluating the
    // barrier derivative (the literal published form of the condition).
    bool includeLoadInBdot = true;
    // Per-generator rectification authority (empty = every channel). A hydro
    // penstock's inverse response inverts its short-horizon leverage, so a
    // least-distance corrector would chase it; such channels stay pinned to
    // the raw dispatch and corrections fall on the remaining units.
    std::vector<bool> rectifiable;
};

/// Logarithmic barrier -log(h / (1 + h)); positive and strictly decreasing
/// on h > 0, diverging as h -> 0+. Returns nullopt when h <= 0, which marks
/// the state outside the safe set rather than a numerical failure.
std::optional<double> barrierB(double h);

/// Per-area barrier evaluation at one instant.
struct BarrierEval {
    Vec h;         // Hz^2, fMax^2 - predicted_f^2
    Vec b;         // barrier values, valid where h > 0
    Vec bdot;      // 1/s, derivative along the candidate dynamics
    Vec residual;  // bdot - alpha / b; condition satisfied iff all <= 0
    bool inside = false;  // h > 0 in every area

    bool satisfied(double tol = 0.0) const {
        return inside && (residual.array() <= tol).all();
    }
};

struct CbfAllowed {};
struct CbfFlagged {
    std::vector<int> areas;  // areas whose condition failed
    Vec residuals;
};
struct CbfRectified {
    Vec uSafe;
    Vec delta;  // uSafe - uRaw
    std::vector<int> activeAreas;
};
using CbfDecision = std::variant<CbfAllowed, CbfFlagged, CbfRectified>;

enum class ScreenMode { FlagOnly, Rectify };

/// Thrown when every rectified dispatch is infeasible; the caller must stop.
struct RectificationInfeasible : std::runtime_error {
    RectificationInfeasible() : std::runtime_error("cbf rectification infeasible") {}
};

/// Screens candidate dispatch vectors against the per-area logarithmic
/// barrier over one-step-ahead predicted frequencies.
///
/// The barrier state (h, B, dh/dx) is evaluated on the prediction under the
/// inputs currently in force (uHeld); the candidate enters only through the
/// continuous dynamics term of Bdot, which keeps the screening condition
/// affine in the candidate and the rectification a least-distance QP.
class SafetyFilter {
  public:
    SafetyFilter(const SystemModel& model, const SafetyConfig& cfg);

    /// h_i = fMax^2 - predicted_f_i^2 for an explicit choice of held inputs.
    Vec barrierH(const Vec& x, const Vec& pl, const Vec& pref) const;

    /// Barrier values, derivative along xdot = A x + B1 pl + B2 uCandidate,
    /// and condition residuals. uHeld parameterizes the prediction inside h.
    BarrierEval condition(const Vec& x, const Vec& pl, const Vec& uCandidate,
                          const Vec& uHeld) const;

    /// FlagOnly: Allowed or Flagged. Rectify: Allowed, or Rectified with the
    /// nearest dispatch satisfying every area condition. Throws
    /// RectificationInfeasible when no dispatch can satisfy them.
    CbfDecision screen(const Vec& x, const Vec& pl, const Vec& uRaw, ScreenMode mode,
                       const Vec& uHeld) const;

    const DiscreteModel& discrete() const { return dm_; }
    const SafetyConfig& config() const { return cfg_; }
    const SystemModel& model() const { return *model_; }

    Vec zeroDispatch() const { return Vec::Zero(model_->generatorCount()); }

  private:
    const SystemModel* model_;
    SafetyConfig cfg_;
    DiscreteModel dm_;
    Mat cAbar_;  // C * Abar, rows are d(predicted f_i)/dx
};

}  // namespace agc
