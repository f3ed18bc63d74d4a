#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace agc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Matrix exponential e^{A*scale} via scaling-and-squaring with a
/// Pade(13,13) rational approximant.
///
/// Throws std::invalid_argument for non-square input and
/// std::domain_error for non-finite entries or scale.
Mat expm(const Mat& a, double scale = 1.0);

/// Zero-order-hold input matrix  Bbar = integral_0^ts e^{A tau} dtau * B.
///
/// Computed through the exponential of the augmented matrix
/// [[A, B], [0, 0]], so a singular A is handled; for invertible A the
/// result equals A^{-1} (e^{A ts} - I) B.
Mat zohInputMatrix(const Mat& a, const Mat& b, double ts);

/// Classical 4th-order Runge-Kutta advance of x by dt.
/// Throws std::runtime_error if the derivative produces non-finite values.
Vec rk4Step(const std::function<Vec(const Vec&)>& deriv, const Vec& x, double dt);

/// Scratch vectors for the allocation-free linear RK4 path.
struct Rk4Workspace {
    Vec k1, k2, k3, k4, xt;

    void resize(Eigen::Index n) {
        k1.resize(n);
        k2.resize(n);
        k3.resize(n);
        k4.resize(n);
        xt.resize(n);
    }
};

/// One RK4 step of the affine system xdot = A x + c, updating x in place.
/// Same scheme as rk4Step, specialized so simulation loops do not allocate.
void rk4LinearStepInPlace(const Mat& a, const Vec& c, double dt, Vec& x, Rk4Workspace& ws);

/// Least-distance projection problem: minimize 1/2 ||target - u||^2
/// subject to normals[k] . u <= bounds[k] for every k.
struct QpProblem {
    Vec target;
    std::vector<Vec> normals;
    std::vector<double> bounds;
};

/// Solves the least-distance QP by enumerating active sets of the
/// inequality constraints. Exact for the small constraint counts used
/// here (one constraint per control area). Returns std::nullopt when
/// the half-space intersection is empty.
///
/// The returned point satisfies every constraint within 1e-9 slack.
std::optional<Vec> solveLeastDistanceQp(const QpProblem& problem);

}  // namespace agc
