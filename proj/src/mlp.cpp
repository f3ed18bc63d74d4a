#include "agc/mlp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace agc {

void MlpGrads::setZero() {
    for (Mat& g : dW) {
        g.setZero();
    }
    for (Vec& g : db) {
        g.setZero();
    }
}

Mlp::Mlp(std::vector<int> dims, OutputKind output) : dims_(std::move(dims)), output_(output) {
    if (dims_.size() < 2) {
        throw std::invalid_argument("Mlp: need at least input and output dims");
    }
    for (int d : dims_) {
        if (d < 1) {
            throw std::invalid_argument("Mlp: layer dims must be positive");
        }
    }
    for (size_t l = 0; l + 1 < dims_.size(); ++l) {
        w.emplace_back(Mat::Zero(dims_[l + 1], dims_[l]));
        b.emplace_back(Vec::Zero(dims_[l + 1]));
    }
}

void Mlp::initRandom(std::mt19937_64& rng, double finalLayerScale) {
    for (size_t l = 0; l < w.size(); ++l) {
        const bool last = (l + 1 == w.size());
        const double bound = last ? finalLayerScale : 1.0 / std::sqrt(static_cast<double>(dims_[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < w[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < w[l].cols(); ++j) {
                w[l](i, j) = dist(rng);
            }
        }
        for (Eigen::Index i = 0; i < b[l].size(); ++i) {
            b[l](i) = dist(rng);
        }
    }
}

const Vec& Mlp::forward(const Vec& input, Cache& cache) const {
    if (input.size() != dims_.front()) {
        throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    }
    cache.act.resize(w.size() + 1);
    cache.act[0] = input;
    for (size_t l = 0; l < w.size(); ++l) {
        Vec z = w[l] * cache.act[l] + b[l];
        const bool last = (l + 1 == w.size());
        if (!last || output_ == OutputKind::Tanh) {
            z = z.array().tanh();
        }
        cache.act[l + 1] = std::move(z);
    }
    return cache.act.back();
}

Vec Mlp::forward(const Vec& input) const {
    Cache cache;
    return forward(input, cache);
}

void Mlp::backward(const Cache& cache, const Vec& dLdOut, MlpGrads& grads, Vec* dLdInput) const {
    Vec delta = dLdOut;
    for (int l = layerCount() - 1; l >= 0; --l) {
        const bool last = (l + 1 == layerCount());
        if (!last || output_ == OutputKind::Tanh) {
            // d tanh(z)/dz = 1 - tanh(z)^2, with tanh(z) cached as act[l+1]
            delta = delta.cwiseProduct(
                (1.0 - cache.act[l + 1].array().square()).matrix());
        }
        grads.dW[l].noalias() += delta * cache.act[l].transpose();
        grads.db[l] += delta;
        if (l > 0 || dLdInput != nullptr) {
            delta = w[l].transpose() * delta;
        }
    }
    if (dLdInput != nullptr) {
        *dLdInput = delta;
    }
}

MlpGrads Mlp::zeroGrads() const {
    MlpGrads g;
    for (size_t l = 0; l < w.size(); ++l) {
        g.dW.push_back(Mat::Zero(w[l].rows(), w[l].cols()));
        g.db.push_back(Vec::Zero(b[l].size()));
    }
    return g;
}

int Mlp::parameterCount() const {
    int n = 0;
    for (size_t l = 0; l < w.size(); ++l) {
        n += static_cast<int>(w[l].size() + b[l].size());
    }
    return n;
}

double Mlp::parameter(int flatIndex) const {
    int k = flatIndex;
    for (size_t l = 0; l < w.size(); ++l) {
        if (k < w[l].size()) {
            return w[l](k / w[l].cols(), k % w[l].cols());
        }
        k -= static_cast<int>(w[l].size());
        if (k < b[l].size()) {
            return b[l](k);
        }
        k -= static_cast<int>(b[l].size());
    }
    throw std::out_of_range("Mlp::parameter");
}

void Mlp::setParameter(int flatIndex, double value) {
    int k = flatIndex;
    for (size_t l = 0; l < w.size(); ++l) {
        if (k < w[l].size()) {
            w[l](k / w[l].cols(), k % w[l].cols()) = value;
            return;
        }
        k -= static_cast<int>(w[l].size());
        if (k < b[l].size()) {
            b[l](k) = value;
            return;
        }
        k -= static_cast<int>(b[l].size());
    }
    throw std::out_of_range("Mlp::setParameter");
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(Mlp& net, const MlpGrads& grads) {
    if (mW_.empty()) {
        for (int l = 0; l < net.layerCount(); ++l) {
            mW_.push_back(Mat::Zero(net.w[l].rows(), net.w[l].cols()));
            vW_.push_back(Mat::Zero(net.w[l].rows(), net.w[l].cols()));
            mB_.push_back(Vec::Zero(net.b[l].size()));
            vB_.push_back(Vec::Zero(net.b[l].size()));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int l = 0; l < net.layerCount(); ++l) {
        mW_[l] = beta1_ * mW_[l] + (1.0 - beta1_) * grads.dW[l];
        vW_[l] = beta2_ * vW_[l].array() + (1.0 - beta2_) * grads.dW[l].array().square();
        net.w[l].array() -=
            lr_ * (mW_[l].array() / bc1) / ((vW_[l].array() / bc2).sqrt() + eps_);
        mB_[l] = beta1_ * mB_[l] + (1.0 - beta1_) * grads.db[l];
        vB_[l] = beta2_ * vB_[l].array() + (1.0 - beta2_) * grads.db[l].array().square();
        net.b[l].array() -=
            lr_ * (mB_[l].array() / bc1) / ((vB_[l].array() / bc2).sqrt() + eps_);
    }
}

void softUpdate(Mlp& target, const Mlp& online, double tau) {
    for (int l = 0; l < target.layerCount(); ++l) {
        target.w[l] = (1.0 - tau) * target.w[l] + tau * online.w[l];
        target.b[l] = (1.0 - tau) * target.b[l] + tau * online.b[l];
    }
}

namespace {

template <typename T>
void writeRaw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T readRaw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error("readMlp: truncated stream");
    }
    return v;
}

}  // namespace

void writeMlp(std::ostream& out, const Mlp& net) {
    writeRaw<std::uint32_t>(out, static_cast<std::uint32_t>(net.outputKind()));
    writeRaw<std::uint32_t>(out, static_cast<std::uint32_t>(net.dims().size()));
    for (int d : net.dims()) {
        writeRaw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (int l = 0; l < net.layerCount(); ++l) {
        for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) {
                writeRaw<double>(out, net.w[l](i, j));
            }
        }
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
            writeRaw<double>(out, net.b[l](i));
        }
    }
}

Mlp readMlp(std::istream& in) {
    const auto kind = static_cast<OutputKind>(readRaw<std::uint32_t>(in));
    const auto nDims = readRaw<std::uint32_t>(in);
    if (nDims < 2 || nDims > 64) {
        throw std::runtime_error("readMlp: implausible layer count");
    }
    std::vector<int> dims(nDims);
    for (auto& d : dims) {
        d = static_cast<int>(readRaw<std::uint32_t>(in));
    }
    Mlp net(dims, kind);
    for (int l = 0; l < net.layerCount(); ++l) {
        for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) {
                net.w[l](i, j) = readRaw<double>(in);
            }
        }
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
            net.b[l](i) = readRaw<double>(in);
        }
    }
    return net;
}

}  // namespace agc
