#include "agc/agent.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace agc;

namespace {

/// Norm-based relative error between backprop and finite-difference
/// gradients over every parameter of `net` for the scalar loss
/// v . net(input).
double gradCheck(Mlp& net, const Vec& input, const Vec& v, double eps = 1e-5) {
    Mlp::Cache cache;
    net.forward(input, cache);
    MlpGrads grads = net.zeroGrads();
    net.backward(cache, v, grads);

    const int n = net.parameterCount();
    Vec bp(n), fd(n);
    int idx = 0;
    for (int l = 0; l < net.layerCount(); ++l) {
        for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) {
                bp(idx + static_cast<int>(i * net.w[l].cols() + j)) = grads.dW[l](i, j);
            }
        }
        idx += static_cast<int>(net.w[l].size());
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
            bp(idx + static_cast<int>(i)) = grads.db[l](i);
        }
        idx += static_cast<int>(net.b[l].size());
    }
    for (int k = 0; k < n; ++k) {
        const double saved = net.parameter(k);
        net.setParameter(k, saved + eps);
        const double plus = v.dot(net.forward(input));
        net.setParameter(k, saved - eps);
        const double minus = v.dot(net.forward(input));
        net.setParameter(k, saved);
        fd(k) = (plus - minus) / (2.0 * eps);
    }
    return (bp - fd).norm() / std::max({bp.norm(), fd.norm(), 1e-12});
}

AgentConfig smallConfig() {
    AgentConfig cfg;
    cfg.hidden = {32, 32};
    cfg.actionLimit = 2.0;
    cfg.gamma = 0.9;
    cfg.tau = 0.01;
    cfg.actorLr = 5e-4;
    cfg.criticLr = 2e-3;
    cfg.bufferCapacity = 20000;
    cfg.batchSize = 64;
    cfg.warmupSteps = 500;
    return cfg;
}

}  // namespace

TEST_CASE("zero final layer puts the actor at the center of the action range") {
    Mlp actor({3, 16, 2}, OutputKind::Tanh);
    std::mt19937_64 rng(0);
    actor.initRandom(rng);
    actor.w.back().setZero();
    actor.b.back().setZero();
    const Vec out = actor.forward(Vec::Ones(3));
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);  // tanh(0) = 0
}

TEST_CASE("actor and critic gradients match finite differences") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int draw = 0; draw < 10; ++draw) {
        Mlp actor({3, 24, 24, 4}, OutputKind::Tanh);
        Mlp critic({7, 24, 24, 1}, OutputKind::Linear);
        actor.initRandom(rng, 0.05);
        critic.initRandom(rng, 0.05);

        const Vec obs = test::randomVec(rng, 3, 1.0);
        const Vec sa = test::randomVec(rng, 7, 1.0);
        Vec vActor(4);
        for (int i = 0; i < 4; ++i) {
            vActor(i) = dist(rng);
        }
        Vec vCritic = Vec::Ones(1);

        CHECK(gradCheck(actor, obs, vActor) < 1e-4);
        CHECK(gradCheck(critic, sa, vCritic) < 1e-4);
    }
}

TEST_CASE("backward also differentiates with respect to the input") {
    std::mt19937_64 rng(3);
    Mlp critic({5, 16, 1}, OutputKind::Linear);
    critic.initRandom(rng, 0.1);
    const Vec sa = test::randomVec(rng, 5, 0.7);

    Mlp::Cache cache;
    critic.forward(sa, cache);
    MlpGrads grads = critic.zeroGrads();
    Vec dIn;
    critic.backward(cache, Vec::Ones(1), grads, &dIn);

    const double eps = 1e-6;
    for (int k = 0; k < 5; ++k) {
        Vec plus = sa, minus = sa;
        plus(k) += eps;
        minus(k) -= eps;
        const double fd = (critic.forward(plus)(0) - critic.forward(minus)(0)) / (2.0 * eps);
        CHECK(std::abs(fd - dIn(k)) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("actor output is bounded by the action limit everywhere") {
    AgentConfig cfg = smallConfig();
    cfg.actionLimit = 0.1;
    DdpgAgent agent(3, 4, cfg, 99);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> wide(-50.0, 50.0);
    for (int i = 0; i < 100000; ++i) {
        Vec obs(3);
        obs << wide(rng), wide(rng), wide(rng);
        const Vec a = agent.act(obs);
        CHECK(a.cwiseAbs().maxCoeff() <= 0.1);
    }
}

TEST_CASE("identically seeded agents act identically") {
    DdpgAgent a(3, 2, smallConfig(), 424242);
    DdpgAgent b(3, 2, smallConfig(), 424242);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 20; ++i) {
        const Vec obs = test::randomVec(rng, 3, 2.0);
        CHECK((a.act(obs) - b.act(obs)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.actNoisy(obs, 0.1) - b.actNoisy(obs, 0.1)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("gamma = 0 regresses the critic straight to the reward") {
    AgentConfig cfg = smallConfig();
    cfg.gamma = 1e-12;  // gamma must stay in (0,1); this is numerically zero
    cfg.warmupSteps = cfg.batchSize;
    cfg.bufferCapacity = cfg.batchSize;
    DdpgAgent agent(2, 1, cfg, 7);

    // One repeated transition: every sampled batch is that transition.
    Transition t;
    t.obs = Vec::Ones(2);
    t.action = Vec::Constant(1, 0.5);
    t.reward = -3.0;
    t.nextObs = Vec::Zero(2);
    t.terminal = true;
    for (int i = 0; i < cfg.batchSize; ++i) {
        agent.remember(t);
    }
    std::vector<double> losses;
    for (int i = 0; i < 100; ++i) {
        const auto diag = agent.update();
        REQUIRE(diag.has_value());
        losses.push_back(diag->criticLoss);
    }
    // Monotone through the descent; near convergence Adam's momentum makes
    // the loss bounce around the floor, so pin the floor instead.
    for (size_t i = 1; i <= 40; ++i) {
        CHECK(losses[i] < losses[i - 1]);
    }
    CHECK(losses.back() < 1e-2 * losses.front());

    // The critic's value converges toward the reward.
    Vec sa(3);
    sa << t.obs, t.action / cfg.actionLimit;
    const double q = agent.critic().forward(sa)(0);
    CHECK(std::abs(q - t.reward) < std::abs(-3.0) * 0.5);
}

TEST_CASE("tau = 1 hard-copies the online networks into the targets") {
    AgentConfig cfg = smallConfig();
    cfg.tau = 1.0;
    cfg.warmupSteps = cfg.batchSize;
    DdpgAgent agent(2, 1, cfg, 11);
    std::mt19937_64 rng(2);
    for (int i = 0; i < cfg.batchSize; ++i) {
        Transition t;
        t.obs = test::randomVec(rng, 2, 1.0);
        t.action = test::randomVec(rng, 1, 1.0);
        t.reward = -t.obs.squaredNorm();
        t.nextObs = test::randomVec(rng, 2, 1.0);
        t.terminal = false;
        agent.remember(t);
    }
    REQUIRE(agent.update().has_value());
    for (int l = 0; l < agent.actor().layerCount(); ++l) {
        CHECK((agent.targetActor().w[l] - agent.actor().w[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((agent.targetCritic().w[l] - agent.critic().w[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("checkpoint round-trip preserves forward passes bit for bit") {
    namespace fs = std::filesystem;
    const fs::path file = fs::temp_directory_path() / "agc_test_agent.ckpt";
    DdpgAgent agent(3, 4, smallConfig(), 1234);
    agent.save(file);
    DdpgAgent loaded = DdpgAgent::load(file, smallConfig(), 1);

    std::mt19937_64 rng(77);
    for (int i = 0; i < 50; ++i) {
        const Vec obs = test::randomVec(rng, 3, 3.0);
        const Vec a1 = agent.act(obs);
        const Vec a2 = loaded.act(obs);
        CHECK((a1 - a2).cwiseAbs().maxCoeff() == 0.0);
    }

    // Saving the loaded agent reproduces the same bytes.
    const fs::path file2 = fs::temp_directory_path() / "agc_test_agent2.ckpt";
    loaded.save(file2);
    std::ifstream f1(file, std::ios::binary), f2(file2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    CHECK_FALSE(b1.empty());
    fs::remove(file);
    fs::remove(file2);
}

TEST_CASE("loading a checkpoint with mismatched dimensions fails") {
    namespace fs = std::filesystem;
    const fs::path file = fs::temp_directory_path() / "agc_test_agent3.ckpt";
    DdpgAgent agent(3, 4, smallConfig(), 5);
    agent.save(file);
    DdpgAgent loaded = DdpgAgent::load(file, smallConfig(), 5);
    CHECK(loaded.obsDim() == 3);
    CHECK(loaded.actionDim() == 4);
    // Corrupt the magic.
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_AS(DdpgAgent::load(file, smallConfig(), 5), std::runtime_error);
    fs::remove(file);
}

TEST_CASE("ddpg learns a near-optimal policy on a scalar regulation task") {
    // Plant: xdot = -x + u, ZOH-discretized at dt = 0.2; reward -(x^2 + 0.1 u^2).
    const double dt = 0.2;
    const double a = std::exp(-dt);
    const double b = 1.0 - std::exp(-dt);
    const int horizon = 20;
    const auto reward = [](double x, double u) { return -(x * x + 0.1 * u * u); };

    // Deterministic evaluation set of initial states.
    std::vector<double> evalStarts;
    for (int i = 0; i <= 20; ++i) {
        evalStarts.push_back(-1.0 + 0.1 * i);
    }

    const auto rollScripted = [&](const std::function<double(double)>& policy) {
        double total = 0.0;
        for (double x0 : evalStarts) {
            double x = x0;
            for (int k = 0; k < horizon; ++k) {
                const double u = policy(x);
                total += reward(x, u);
                x = a * x + b * u;
            }
        }
        return total / static_cast<double>(evalStarts.size());
    };

    // Oracle: best constant gain by grid search.
    double bestGain = 0.0;
    double bestReturn = -std::numeric_limits<double>::infinity();
    for (double k = -3.0; k <= 0.0; k += 0.01) {
        const double r = rollScripted([&](double x) { return k * x; });
        if (r > bestReturn) {
            bestReturn = r;
            bestGain = k;
        }
    }
    INFO("oracle gain ", bestGain, " return ", bestReturn);

    AgentConfig cfg = smallConfig();
    DdpgAgent agent(1, 1, cfg, 2025);
    std::mt19937_64 env(501);
    std::uniform_real_distribution<double> x0dist(-1.0, 1.0);

    const int episodes = 400;
    for (int e = 0; e < episodes; ++e) {
        double x = x0dist(env);
        const double sigma = 0.3 * (1.0 - static_cast<double>(e) / episodes) + 0.02;
        for (int k = 0; k < horizon; ++k) {
            Vec obs(1);
            obs << x;
            const Vec u = agent.actNoisy(obs, sigma);
            const double r = reward(x, u(0));
            const double xNext = a * x + b * u(0);
            Vec next(1);
            next << xNext;
            agent.remember(Transition{obs, u, r, next, false});
            agent.update();
            x = xNext;
        }
    }

    const double learned = rollScripted([&](double x) {
        Vec obs(1);
        obs << x;
        return agent.act(obs)(0);
    });
    INFO("learned return ", learned);
    CHECK(learned >= bestReturn + 0.1 * bestReturn);  // bestReturn < 0
}
