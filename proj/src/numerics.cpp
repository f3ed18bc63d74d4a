#include "agc/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace agc {

namespace {

bool allFinite(const Mat& m) {
    return m.allFinite();
}

// Pade(13,13) numerator coefficients (Higham, "The scaling and squaring
// method for the matrix exponential revisited").
constexpr double kPade13[] = {
    6.4764752532480000e16, 3.2382376266240000e16, 7.7717703038976000e15,
    1.1873537964288000e15, 1.2906019526400000e14, 1.0559470521600000e13,
    6.7044257280000000e11, 3.3522128640000000e10, 1.3232419200000000e9,
    4.0840800000000000e7,  9.6096000000000000e5,  1.6380000000000000e4,
    1.8200000000000000e2,  1.0};

// Largest scaled 1-norm for which the (13,13) approximant stays at
// double-precision accuracy.
constexpr double kTheta13 = 5.371920351148152;

Mat expmPade13(const Mat& a) {
    const Eigen::Index n = a.rows();
    const Mat identity = Mat::Identity(n, n);
    const Mat a2 = a * a;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;

    const Mat u = a * (a6 * (kPade13[13] * a6 + kPade13[11] * a4 + kPade13[9] * a2) +
                       kPade13[7] * a6 + kPade13[5] * a4 + kPade13[3] * a2 +
                       kPade13[1] * identity);
    const Mat v = a6 * (kPade13[12] * a6 + kPade13[10] * a4 + kPade13[8] * a2) +
                  kPade13[6] * a6 + kPade13[4] * a4 + kPade13[2] * a2 +
                  kPade13[0] * identity;

    // (V - U) X = (V + U)
    return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Mat expm(const Mat& a, double scale) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("expm: matrix must be square");
    }
    if (!std::isfinite(scale) || !allFinite(a)) {
        throw std::domain_error("expm: non-finite input");
    }

    Mat scaled = a * scale;
    const double norm1 = scaled.cwiseAbs().colwise().sum().maxCoeff();

    int squarings = 0;
    if (norm1 > kTheta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
        scaled *= std::ldexp(1.0, -squarings);
    }

    Mat result = expmPade13(scaled);
    for (int i = 0; i < squarings; ++i) {
        result = result * result;
    }
    return result;
}

Mat zohInputMatrix(const Mat& a, const Mat& b, double ts) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("zohInputMatrix: A must be square");
    }
    if (b.rows() != a.rows()) {
        throw std::invalid_argument("zohInputMatrix: B row count must match A");
    }
    if (!(ts > 0.0)) {
        throw std::invalid_argument("zohInputMatrix: ts must be positive");
    }

    const Eigen::Index n = a.rows();
    const Eigen::Index m = b.cols();
    Mat aug = Mat::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = a;
    aug.topRightCorner(n, m) = b;

    const Mat phi = expm(aug, ts);
    return phi.topRightCorner(n, m);
}

Vec rk4Step(const std::function<Vec(const Vec&)>& deriv, const Vec& x, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("rk4Step: dt must be positive");
    }
    const Vec k1 = deriv(x);
    const Vec k2 = deriv(x + (0.5 * dt) * k1);
    const Vec k3 = deriv(x + (0.5 * dt) * k2);
    const Vec k4 = deriv(x + dt * k3);
    Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
        throw std::runtime_error("rk4Step: derivative produced non-finite state");
    }
    return next;
}

void rk4LinearStepInPlace(const Mat& a, const Vec& c, double dt, Vec& x, Rk4Workspace& ws) {
    ws.k1.noalias() = a * x;
    ws.k1 += c;
    ws.xt = x;
    ws.xt.noalias() += (0.5 * dt) * ws.k1;
    ws.k2.noalias() = a * ws.xt;
    ws.k2 += c;
    ws.xt = x;
    ws.xt.noalias() += (0.5 * dt) * ws.k2;
    ws.k3.noalias() = a * ws.xt;
    ws.k3 += c;
    ws.xt = x;
    ws.xt.noalias() += dt * ws.k3;
    ws.k4.noalias() = a * ws.xt;
    ws.k4 += c;
    x.noalias() += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

namespace {

constexpr double kFeasSlack = 1e-9;

bool feasible(const QpProblem& p, const Vec& u) {
    for (size_t k = 0; k < p.normals.size(); ++k) {
        if (p.normals[k].dot(u) > p.bounds[k] + kFeasSlack) {
            return false;
        }
    }
    return true;
}

}  // namespace

std::optional<Vec> solveLeastDistanceQp(const QpProblem& problem) {
    const Eigen::Index n = problem.target.size();
    if (problem.normals.size() != problem.bounds.size()) {
        throw std::invalid_argument("solveLeastDistanceQp: normals/bounds size mismatch");
    }
    for (const Vec& a : problem.normals) {
        if (a.size() != n) {
            throw std::invalid_argument("solveLeastDistanceQp: constraint dimension mismatch");
        }
    }

    // Vacuous and contradictory zero-normal constraints.
    QpProblem p;
    p.target = problem.target;
    for (size_t k = 0; k < problem.normals.size(); ++k) {
        if (problem.normals[k].norm() == 0.0) {
            if (problem.bounds[k] < -kFeasSlack) {
                return std::nullopt;  // 0 . u <= negative: empty
            }
            continue;
        }
        p.normals.push_back(problem.normals[k]);
        p.bounds.push_back(problem.bounds[k]);
    }

    const int m = static_cast<int>(p.normals.size());
    if (m == 0 || feasible(p, p.target)) {
        return p.target;
    }

    // The objective is strictly convex, so the unique optimum is the KKT
    // point of exactly one active set; enumerate them all (m is the number
    // of control areas, 2 at desk scale).
    std::optional<Vec> best;
    double bestDist = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << m); ++mask) {
        std::vector<int> active;
        for (int k = 0; k < m; ++k) {
            if (mask & (1u << k)) {
                active.push_back(k);
            }
        }
        const int na = static_cast<int>(active.size());
        if (na > n) {
            continue;
        }
        Mat w(na, n);
        Vec rhs(na);
        for (int i = 0; i < na; ++i) {
            w.row(i) = p.normals[active[i]].transpose();
            rhs(i) = p.bounds[active[i]];
        }
        const Mat gram = w * w.transpose();
        Eigen::FullPivLU<Mat> lu(gram);
        if (!lu.isInvertible()) {
            continue;  // linearly dependent set; covered by a subset
        }
        const Vec lambda = lu.solve(w * p.target - rhs);
        if ((lambda.array() < -kFeasSlack).any()) {
            continue;  // dual infeasible: these constraints are not all active
        }
        const Vec cand = p.target - w.transpose() * lambda;
        if (!feasible(p, cand)) {
            continue;
        }
        const double dist = (cand - p.target).norm();
        if (dist < bestDist) {
            bestDist = dist;
            best = cand;
        }
    }
    return best;
}

}  // namespace agc
