#pragma once

#include "agc/numerics.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace agc {

enum class OutputKind : std::uint32_t { Linear = 0, Tanh = 1 };

struct MlpGrads {
    std::vector<Mat> dW;
    std::vector<Vec> db;

    void setZero();
};

/// Fully connected network with tanh hidden layers and a linear or tanh
/// output. Forward and backward passes are explicit so gradients can be
/// checked against finite differences.
class Mlp {
  public:
    Mlp() = default;
    Mlp(std::vector<int> dims, OutputKind output);

    /// Uniform(-1/sqrt(fanIn), 1/sqrt(fanIn)) everywhere except the final
    /// layer, which starts near zero so initial outputs sit at the center
    /// of the action range.
    void initRandom(std::mt19937_64& rng, double finalLayerScale = 3e-3);

    Vec forward(const Vec& input) const;

    struct Cache {
        std::vector<Vec> act;  // act[0] = input, act[layerCount()] = output
    };
    const Vec& forward(const Vec& input, Cache& cache) const;

    /// Accumulates parameter gradients for the scalar objective whose
    /// gradient at the output is dLdOut; optionally also returns the
    /// gradient with respect to the input.
    void backward(const Cache& cache, const Vec& dLdOut, MlpGrads& grads,
                  Vec* dLdInput = nullptr) const;

    MlpGrads zeroGrads() const;
    int layerCount() const { return static_cast<int>(w.size()); }
    int inputDim() const { return dims_.front(); }
    int outputDim() const { return dims_.back(); }
    const std::vector<int>& dims() const { return dims_; }
    OutputKind outputKind() const { return output_; }

    double parameter(int flatIndex) const;
    void setParameter(int flatIndex, double value);
    int parameterCount() const;

    std::vector<Mat> w;  // w[l] is (dims[l+1] x dims[l])
    std::vector<Vec> b;

  private:
    std::vector<int> dims_;
    OutputKind output_ = OutputKind::Linear;
};

/// Per-network Adam state.
class AdamOptimizer {
  public:
    AdamOptimizer() = default;
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    void step(Mlp& net, const MlpGrads& grads);

  private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<Mat> mW_, vW_;
    std::vector<Vec> mB_, vB_;
};

/// theta_target <- (1 - tau) theta_target + tau theta
void softUpdate(Mlp& target, const Mlp& online, double tau);

void writeMlp(std::ostream& out, const Mlp& net);
Mlp readMlp(std::istream& in);

}  // namespace agc
