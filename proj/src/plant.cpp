#include "agc/plant.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace agc {

namespace {

void requirePositive(double v, const std::string& field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("buildModel: " + field + " must be positive and finite");
    }
}

void validateGenerator(const GeneratorParams& g, const std::string& where) {
    requirePositive(g.droop, where + ".droop");
    if (g.kind == GeneratorKind::ThermalReheat) {
        requirePositive(g.governorT, where + ".governorT");
        requirePositive(g.turbineT, where + ".turbineT");
        requirePositive(g.reheatT, where + ".reheatT");
        if (g.reheatGain < 0.0 || g.reheatGain > 1.0) {
            throw std::invalid_argument("buildModel: " + where + ".reheatGain must be in [0, 1]");
        }
    } else {
        requirePositive(g.servoT, where + ".servoT");
        requirePositive(g.resetZeroT, where + ".resetZeroT");
        requirePositive(g.droopPoleT, where + ".droopPoleT");
        requirePositive(g.waterT, where + ".waterT");
    }
}

}  // namespace

SystemModel buildModel(const std::vector<AreaParams>& areas, const std::vector<TieLine>& ties) {
    const int m = static_cast<int>(areas.size());
    if (m == 0) {
        throw std::invalid_argument("buildModel: at least one area required");
    }
    for (int i = 0; i < m; ++i) {
        const AreaParams& ar = areas[i];
        const std::string where = "areas[" + std::to_string(i) + "]";
        requirePositive(ar.inertiaGain, where + ".inertiaGain");
        requirePositive(ar.inertiaT, where + ".inertiaT");
        requirePositive(ar.freqBias, where + ".freqBias");
        if (ar.generators.empty()) {
            throw std::invalid_argument("buildModel: " + where + " has no generators");
        }
        for (size_t j = 0; j < ar.generators.size(); ++j) {
            validateGenerator(ar.generators[j],
                              where + ".generators[" + std::to_string(j) + "]");
        }
    }
    for (size_t k = 0; k < ties.size(); ++k) {
        const TieLine& tie = ties[k];
        const std::string where = "ties[" + std::to_string(k) + "]";
        if (tie.fromArea < 0 || tie.fromArea >= m || tie.toArea < 0 || tie.toArea >= m) {
            throw std::invalid_argument("buildModel: " + where + " references a missing area");
        }
        if (tie.fromArea == tie.toArea) {
            throw std::invalid_argument("buildModel: " + where + " connects an area to itself");
        }
        requirePositive(tie.syncCoeff, where + ".syncCoeff");
    }

    // State layout: per area [generator internals..., swing], then tie states.
    SystemModel model;
    model.areaCount = m;
    int n = 0;
    int g = 0;
    std::vector<int> areaStart(m);
    for (int i = 0; i < m; ++i) {
        areaStart[i] = n;
        n += 3 * static_cast<int>(areas[i].generators.size()) + 1;
        g += static_cast<int>(areas[i].generators.size());
    }
    const int tieStart = n;
    n += static_cast<int>(ties.size());

    model.A = Mat::Zero(n, n);
    model.B1 = Mat::Zero(n, m);
    model.B2 = Mat::Zero(n, g);
    model.C = Mat::Zero(m, n);
    model.stateLabels.resize(n);
    model.generatorIndex.resize(m);
    model.freqStateIndex.resize(m);
    model.freqBias.resize(m);

    int uCol = 0;
    for (int i = 0; i < m; ++i) {
        const AreaParams& ar = areas[i];
        const std::string areaName = ar.name.empty() ? "a" + std::to_string(i + 1) : ar.name;
        const int nGen = static_cast<int>(ar.generators.size());
        const int swing = areaStart[i] + 3 * nGen;
        model.freqStateIndex[i] = swing;
        model.freqBias[i] = ar.freqBias;
        model.stateLabels[swing] = areaName + ".freq_hz";
        model.C(i, swing) = 1.0;

        const double kpOverTp = ar.inertiaGain / ar.inertiaT;
        model.A(swing, swing) = -1.0 / ar.inertiaT;
        model.B1(swing, i) = -kpOverTp;

        for (int j = 0; j < nGen; ++j) {
            const GeneratorParams& gen = ar.generators[j];
            const std::string genName =
                areaName + "." + (gen.name.empty() ? "g" + std::to_string(j + 1) : gen.name);
            const int s0 = areaStart[i] + 3 * j;
            model.generatorIndex[i].push_back(uCol);

            if (gen.kind == GeneratorKind::ThermalReheat) {
                const int gov = s0, turb = s0 + 1, reh = s0 + 2;
                model.stateLabels[gov] = genName + ".gov";
                model.stateLabels[turb] = genName + ".turb";
                model.stateLabels[reh] = genName + ".reheat";

                // governor: xg' = (u - f/R - xg)/Tg
                model.A(gov, gov) = -1.0 / gen.governorT;
                model.A(gov, swing) = -1.0 / (gen.droop * gen.governorT);
                model.B2(gov, uCol) = 1.0 / gen.governorT;
                // turbine: xt' = (xg - xt)/Tt
                model.A(turb, gov) = 1.0 / gen.turbineT;
                model.A(turb, turb) = -1.0 / gen.turbineT;
                // reheat shaping (1 + Kr Tr s)/(1 + Tr s):
                //   xr' = ((1-Kr) xt - xr)/Tr,  Pm = xr + Kr xt
                model.A(reh, turb) = (1.0 - gen.reheatGain) / gen.reheatT;
                model.A(reh, reh) = -1.0 / gen.reheatT;

                model.A(swing, reh) += kpOverTp;
                model.A(swing, turb) += kpOverTp * gen.reheatGain;
            } else {
                const int srv = s0, cmp = s0 + 1, wat = s0 + 2;
                model.stateLabels[srv] = genName + ".servo";
                model.stateLabels[cmp] = genName + ".droopcomp";
                model.stateLabels[wat] = genName + ".water";

                // servo: x1' = (u - f/R - x1)/T1
                model.A(srv, srv) = -1.0 / gen.servoT;
                model.A(srv, swing) = -1.0 / (gen.droop * gen.servoT);
                model.B2(srv, uCol) = 1.0 / gen.servoT;
                // transient droop (1 + s Tr)/(1 + s T2): out = b x1 + x2 with
                //   x2' = ((1 - b) x1 - x2)/T2,  b = Tr/T2
                const double b = gen.resetZeroT / gen.droopPoleT;
                model.A(cmp, srv) = (1.0 - b) / gen.droopPoleT;
                model.A(cmp, cmp) = -1.0 / gen.droopPoleT;
                // penstock (1 - s Tw)/(1 + 0.5 s Tw): Pm = -2 out + x3 with
                //   x3' = (3 out - x3)/(0.5 Tw)
                const double half = 0.5 * gen.waterT;
                model.A(wat, srv) = 3.0 * b / half;
                model.A(wat, cmp) = 3.0 / half;
                model.A(wat, wat) = -1.0 / half;

                model.A(swing, srv) += kpOverTp * (-2.0 * b);
                model.A(swing, cmp) += kpOverTp * (-2.0);
                model.A(swing, wat) += kpOverTp;
            }
            ++uCol;
        }
    }

    for (size_t k = 0; k < ties.size(); ++k) {
        const TieLine& tie = ties[k];
        const int s = tieStart + static_cast<int>(k);
        model.tieStateIndex.push_back(s);
        model.tieFromArea.push_back(tie.fromArea);
        model.tieToArea.push_back(tie.toArea);
        model.stateLabels[s] = "tie.a" + std::to_string(tie.fromArea + 1) + "_a" +
                               std::to_string(tie.toArea + 1);
        const double w = 2.0 * std::numbers::pi * tie.syncCoeff;
        model.A(s, model.freqStateIndex[tie.fromArea]) = w;
        model.A(s, model.freqStateIndex[tie.toArea]) = -w;
        // Exported power loads the sending area and supplies the receiving one.
        model.A(model.freqStateIndex[tie.fromArea], s) -=
            areas[tie.fromArea].inertiaGain / areas[tie.fromArea].inertiaT;
        model.A(model.freqStateIndex[tie.toArea], s) +=
            areas[tie.toArea].inertiaGain / areas[tie.toArea].inertiaT;
    }

    return model;
}

DiscreteModel discretize(const SystemModel& model, double ts) {
    if (!(ts > 0.0)) {
        throw std::invalid_argument("discretize: ts must be positive");
    }
    DiscreteModel dm;
    dm.Abar = expm(model.A, ts);
    dm.B1bar = zohInputMatrix(model.A, model.B1, ts);
    dm.B2bar = zohInputMatrix(model.A, model.B2, ts);
    dm.C = model.C;
    dm.ts = ts;
    return dm;
}

Vec predictFrequencies(const DiscreteModel& dm, const Vec& x, const Vec& pl, const Vec& pref) {
    if (x.size() != dm.Abar.rows() || pl.size() != dm.B1bar.cols() ||
        pref.size() != dm.B2bar.cols()) {
        throw std::invalid_argument("predictFrequencies: dimension mismatch");
    }
    return dm.C * (dm.Abar * x + dm.B1bar * pl + dm.B2bar * pref);
}

SimState stepHeld(const SystemModel& model, const SimState& s, const Vec& pl, const Vec& pref,
                  double dt, double maxSub) {
    if (!(dt > 0.0) || !(maxSub > 0.0)) {
        throw std::invalid_argument("stepHeld: dt and maxSub must be positive");
    }
    if (s.x.size() != model.order() || pl.size() != model.areaCount ||
        pref.size() != model.generatorCount()) {
        throw std::invalid_argument("stepHeld: dimension mismatch");
    }
    const int nSub = std::max(1, static_cast<int>(std::ceil(dt / maxSub - 1e-12)));
    const double h = dt / nSub;
    const Vec c = model.B1 * pl + model.B2 * pref;

    SimState out;
    out.x = s.x;
    Rk4Workspace ws;
    ws.resize(out.x.size());
    for (int i = 0; i < nSub; ++i) {
        rk4LinearStepInPlace(model.A, c, h, out.x, ws);
    }
    if (!out.x.allFinite()) {
        throw std::runtime_error("stepHeld: simulation diverged to non-finite state");
    }
    out.t = s.t + dt;
    return out;
}

Vec tieFlows(const SystemModel& model, const Vec& x) {
    Vec p(model.tieCount());
    for (int k = 0; k < model.tieCount(); ++k) {
        p(k) = x(model.tieStateIndex[k]);
    }
    return p;
}

Vec areaFrequencies(const SystemModel& model, const Vec& x) {
    return model.C * x;
}

}  // namespace agc
