#include "agc/safety.hpp"

#include <cmath>
#include <stdexcept>

namespace agc {

std::optional<double> barrierB(double h) {
    if (!(h > 0.0)) {
        return std::nullopt;
    }
    return -std::log(h / (1.0 + h));
}

SafetyFilter::SafetyFilter(const SystemModel& model, const SafetyConfig& cfg)
    : model_(&model), cfg_(cfg) {
    if (!(cfg.fMax > 0.0)) {
        throw std::invalid_argument("SafetyFilter: fMax must be positive");
    }
    if (cfg.alpha.size() != model.areaCount || (cfg.alpha.array() <= 0.0).any()) {
        throw std::invalid_argument("SafetyFilter: alpha must be positive, one per area");
    }
    if (!(cfg.tsPred > 0.0)) {
        throw std::invalid_argument("SafetyFilter: tsPred must be positive");
    }
    if (!cfg_.rectifiable.empty() &&
        cfg_.rectifiable.size() != static_cast<size_t>(model.generatorCount())) {
        throw std::invalid_argument("SafetyFilter: rectifiable mask size mismatch");
    }
    dm_ = discretize(model, cfg.tsPred);
    cAbar_ = dm_.C * dm_.Abar;
}

Vec SafetyFilter::barrierH(const Vec& x, const Vec& pl, const Vec& pref) const {
    const Vec f = predictFrequencies(dm_, x, pl, pref);
    return (cfg_.fMax * cfg_.fMax - f.array().square()).matrix();
}

BarrierEval SafetyFilter::condition(const Vec& x, const Vec& pl, const Vec& uCandidate,
                                    const Vec& uHeld) const {
    const int m = model_->areaCount;
    BarrierEval ev;
    ev.h.resize(m);
    ev.b.resize(m);
    ev.bdot.resize(m);
    ev.residual.resize(m);

    const Vec fPred = predictFrequencies(dm_, x, pl, uHeld);
    Vec xdot = model_->A * x + model_->B2 * uCandidate;
    if (cfg_.includeLoadInBdot) {
        xdot += model_->B1 * pl;
    }

    ev.inside = true;
    for (int i = 0; i < m; ++i) {
        const double h = cfg_.fMax * cfg_.fMax - fPred(i) * fPred(i);
        ev.h(i) = h;
        const auto b = barrierB(h);
        if (!b) {
            ev.inside = false;
            ev.b(i) = std::numeric_limits<double>::infinity();
            ev.bdot(i) = std::numeric_limits<double>::infinity();
            ev.residual(i) = std::numeric_limits<double>::infinity();
            continue;
        }
        ev.b(i) = *b;
        // dh_i/dx = -2 f_pred_i * c_i Abar; Bdot = -(dh/dx) xdot / (h + h^2)
        const double dhdxXdot = -2.0 * fPred(i) * cAbar_.row(i).dot(xdot);
        ev.bdot(i) = -dhdxXdot / (h + h * h);
        ev.residual(i) = ev.bdot(i) - cfg_.alpha(i) / ev.b(i);
    }
    return ev;
}

CbfDecision SafetyFilter::screen(const Vec& x, const Vec& pl, const Vec& uRaw, ScreenMode mode,
                                 const Vec& uHeld) const {
    // Matches the rectification QP's feasibility slack, so re-screening a
    // rectified dispatch is idempotent.
    constexpr double kResidualSlack = 1e-9;
    const BarrierEval ev = condition(x, pl, uRaw, uHeld);
    if (!ev.inside) {
        // Already outside the safe set: report every area on/past the boundary.
        CbfFlagged fl;
        fl.residuals = ev.residual;
        for (int i = 0; i < model_->areaCount; ++i) {
            if (ev.h(i) <= 0.0) {
                fl.areas.push_back(i);
            }
        }
        return fl;
    }
    if (ev.satisfied(kResidualSlack)) {
        return CbfAllowed{};
    }
    if (mode == ScreenMode::FlagOnly) {
        CbfFlagged fl;
        fl.residuals = ev.residual;
        for (int i = 0; i < model_->areaCount; ++i) {
            if (ev.residual(i) > kResidualSlack) {
                fl.areas.push_back(i);
            }
        }
        return fl;
    }

    // Residual_i(u) is affine: residual_i(u) = residual_i(0) + w_i . u with
    //   w_i = 2 f_pred_i (c_i Abar) B2 / (h_i + h_i^2),
    // so each area contributes one half-space w_i . u <= -residual_i(0).
    // Channels outside the rectifiable mask stay at their raw values and the
    // QP runs over the remaining coordinates.
    const int m = model_->areaCount;
    const int g = model_->generatorCount();
    std::vector<int> freeCols;
    for (int j = 0; j < g; ++j) {
        if (cfg_.rectifiable.empty() || cfg_.rectifiable[j]) {
            freeCols.push_back(j);
        }
    }

    const Vec fPred = predictFrequencies(dm_, x, pl, uHeld);
    QpProblem qp;
    qp.target.resize(freeCols.size());
    for (size_t k = 0; k < freeCols.size(); ++k) {
        qp.target(k) = uRaw(freeCols[k]);
    }
    std::vector<Vec> fullNormals;
    for (int i = 0; i < m; ++i) {
        const double h = ev.h(i);
        const Vec w =
            (2.0 * fPred(i) / (h + h * h)) * (cAbar_.row(i) * model_->B2).transpose();
        fullNormals.push_back(w);
        Vec wFree(freeCols.size());
        double fixedPart = 0.0;
        for (int j = 0; j < g; ++j) {
            const bool isFree =
                cfg_.rectifiable.empty() || cfg_.rectifiable[j];
            if (!isFree) {
                fixedPart += w(j) * uRaw(j);
            }
        }
        for (size_t k = 0; k < freeCols.size(); ++k) {
            wFree(k) = w(freeCols[k]);
        }
        const double residualAtZero = ev.residual(i) - w.dot(uRaw);
        qp.normals.push_back(wFree);
        qp.bounds.push_back(-residualAtZero - fixedPart);
    }
    const auto uFree = solveLeastDistanceQp(qp);
    if (!uFree) {
        throw RectificationInfeasible{};
    }
    CbfRectified rect;
    rect.uSafe = uRaw;
    for (size_t k = 0; k < freeCols.size(); ++k) {
        rect.uSafe(freeCols[k]) = (*uFree)(k);
    }
    rect.delta = rect.uSafe - uRaw;
    for (int i = 0; i < m; ++i) {
        if (std::abs(fullNormals[i].dot(rect.uSafe) -
                     (-(ev.residual(i) - fullNormals[i].dot(uRaw)))) <= 1e-7) {
            rect.activeAreas.push_back(i);
        }
    }
    return rect;
}

}  // namespace agc
