#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "natadv/nn.hpp"
#include "natadv/serialize.hpp"

using namespace natadv;

TEST_CASE("all-zero weights and biases give zero output") {
    Rng rng(1);
    Mlp net = Mlp::make(4, {5, 5}, 3, rng);
    for (auto* p : net.params())
        for (double& e : p->value.a) e = 0.0;
    std::vector<double> x{0.3, -0.7, 1.2, 0.0}, y(3, 99.0);
    net.forward(x, y);
    for (double v : y) REQUIRE(v == 0.0);
}

TEST_CASE("identity single linear layer returns its input") {
    Rng rng(2);
    Mlp net = Mlp::make(3, {}, 3, rng);
    for (double& e : net.w[0].value.a) e = 0.0;
    for (int i = 0; i < 3; ++i) net.w[0].value(i, i) = 1.0;
    for (double& e : net.b[0].value.a) e = 0.0;
    std::vector<double> x{0.25, -1.5, 2.0}, y(3);
    net.forward(x, y);
    for (int i = 0; i < 3; ++i) REQUIRE(y[i] == x[i]);
}

TEST_CASE("random 2-3-1 net matches hand-computed tanh chain") {
    Rng rng(3);
    Mlp net = Mlp::make(2, {3}, 1, rng);
    std::vector<double> x{0.4, -0.9}, y(1);
    net.forward(x, y);

    double h[3];
    for (int i = 0; i < 3; ++i) {
        double acc = net.b[0].value(0, i);
        for (int j = 0; j < 2; ++j) acc += net.w[0].value(i, j) * x[j];
        h[i] = std::tanh(acc);
    }
    double out = net.b[1].value(0, 0);
    for (int i = 0; i < 3; ++i) out += net.w[1].value(0, i) * h[i];
    REQUIRE(std::fabs(y[0] - out) < 1e-12);

    // Batch and tape forwards agree with the scalar path.
    Mat X(1, 2);
    X(0, 0) = x[0];
    X(0, 1) = x[1];
    REQUIRE(net.forward(X)(0, 0) == y[0]);
    Tape t;
    REQUIRE(t.val(net.forward(t, t.constant(X)))(0, 0) == y[0]);
}

TEST_CASE("mismatched input size is a contract error") {
    Rng rng(4);
    Mlp net = Mlp::make(3, {4}, 2, rng);
    std::vector<double> x{1.0, 2.0}, y(2);
    REQUIRE_THROWS_AS(net.forward(x, y), ContractError);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    Rng rng(5);
    Mlp net = Mlp::make(2, {3}, 1, rng);
    auto params = net.params();
    const Mat w0 = net.w[0].value;
    zero_grads(params);
    Adam adam(AdamConfig{.lr = 1e-3});
    adam.step(params);
    REQUIRE(adam.t == 1);
    REQUIRE(net.w[0].value.a == w0.a);
}

TEST_CASE("adam first step moves each weight by about -lr*sign(g)") {
    Param p(Mat(1, 3));
    p.value.a = {1.0, -2.0, 0.5};
    p.grad = Mat(1, 3);
    p.grad.a = {0.3, -1.7, 0.002};
    Adam adam(AdamConfig{.lr = 0.01, .eps = 1e-8});
    const Mat before = p.value;
    adam.step({&p});
    for (int k = 0; k < 3; ++k) {
        const double delta = p.value.a[k] - before.a[k];
        const double expect = -adam.cfg.lr * (p.grad.a[k] > 0 ? 1.0 : -1.0);
        REQUIRE(delta == Catch::Approx(expect).epsilon(1e-4));
    }
}

TEST_CASE("two identical adam runs produce identical parameter streams") {
    auto run = [](std::vector<double>& sink) {
        Rng rng(6);
        Mlp net = Mlp::make(3, {8}, 2, rng);
        auto params = net.params();
        Adam adam(AdamConfig{.lr = 3e-3});
        Rng grads(7);
        for (int step = 0; step < 5; ++step) {
            zero_grads(params);
            for (auto* p : params)
                for (double& g : p->grad.a) g = grads.normal();
            adam.step(params);
            for (auto* p : params)
                for (double v : p->value.a) sink.push_back(v);
        }
    };
    std::vector<double> a, b;
    run(a);
    run(b);
    REQUIRE(a == b);
}

TEST_CASE("non-finite gradient aborts the optimizer step") {
    Param p(Mat(1, 1));
    p.grad = Mat(1, 1);
    p.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    Adam adam;
    std::vector<Param*> ps{&p};
    REQUIRE_THROWS_AS(adam.step(ps), TrainingError);
}

TEST_CASE("gaussian log-density matches the closed form within 1e-10") {
    Rng rng(8);
    GaussianPolicy pol = GaussianPolicy::make(3, {6}, 2, rng, -0.7);
    pol.log_std.value(0, 1) = 0.3;
    std::vector<double> obs{0.1, -0.4, 0.9}, action{0.02, -0.11};

    std::vector<double> mean(2);
    pol.mean_net.forward(obs, mean);
    double expect = 0.0;
    for (int d = 0; d < 2; ++d) {
        const double sd = std::exp(pol.log_std.value(0, d));
        const double z = (action[d] - mean[d]) / sd;
        expect += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
    }
    REQUIRE(std::fabs(pol.log_prob(obs, action) - expect) < 1e-10);

    Mat obs_m(1, 3), act_m(1, 2);
    for (int j = 0; j < 3; ++j) obs_m(0, j) = obs[j];
    for (int j = 0; j < 2; ++j) act_m(0, j) = action[j];
    Tape t;
    Var lp = pol.log_prob(t, t.constant(obs_m), act_m);
    REQUIRE(std::fabs(t.val(lp)(0, 0) - expect) < 1e-10);

    Tape t2;
    const double ent = t2.val(pol.entropy(t2))(0, 0);
    const double ent_expect = pol.log_std.value(0, 0) + pol.log_std.value(0, 1) +
                              0.5 * 2 * (1.0 + std::log(2.0 * M_PI));
    REQUIRE(std::fabs(ent - ent_expect) < 1e-12);
    REQUIRE(std::fabs(pol.entropy_value() - ent_expect) < 1e-12);
}

TEST_CASE("log_std clamp keeps sampled log-probabilities finite") {
    Rng rng(9);
    GaussianPolicy pol = GaussianPolicy::make(2, {4}, 2, rng);
    for (double& e : pol.log_std.value.a) e = -40.0;
    pol.clamp_log_std();
    for (double e : pol.log_std.value.a) REQUIRE(e == pol.log_std_min);
    std::vector<double> obs{0.2, 0.8}, act(2);
    Rng arng(10);
    pol.act(obs, arng, true, act);
    REQUIRE(std::isfinite(pol.log_prob(obs, act)));
}

TEST_CASE("checkpoint round-trip is bit-identical") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "natadv_nn_test";
    fs::create_directories(dir);
    const fs::path path = dir / "policy.ckpt";

    Rng rng(11);
    GaussianPolicy pol = GaussianPolicy::make(4, {7, 5}, 2, rng, -1.2);
    Adam adam(AdamConfig{.lr = 1e-3});
    auto params = pol.params();
    zero_grads(params);
    Rng grads(12);
    for (auto* p : params)
        for (double& g : p->grad.a) g = grads.normal();
    adam.step(params);

    save_policy(path, pol, &adam);
    Adam adam2;
    GaussianPolicy loaded = load_policy(path, &adam2);

    REQUIRE(loaded.mean_net.sizes == pol.mean_net.sizes);
    for (std::size_t l = 0; l < pol.mean_net.w.size(); ++l) {
        REQUIRE(loaded.mean_net.w[l].value.a == pol.mean_net.w[l].value.a);
        REQUIRE(loaded.mean_net.b[l].value.a == pol.mean_net.b[l].value.a);
        REQUIRE(loaded.mean_net.w[l].m.a == pol.mean_net.w[l].m.a);
    }
    REQUIRE(loaded.log_std.value.a == pol.log_std.value.a);
    REQUIRE(adam2.t == adam.t);

    std::vector<double> obs{0.1, 0.2, 0.3, 0.4}, y1(2), y2(2);
    pol.mean_net.forward(obs, y1);
    loaded.mean_net.forward(obs, y2);
    REQUIRE(y1 == y2);

    // A flipped payload byte is detected.
    auto bytes = [&] {
        std::ifstream in(path, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }();
    bytes[bytes.size() / 2] ^= 0x01;
    const fs::path bad = dir / "tampered.ckpt";
    std::ofstream(bad, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    REQUIRE_THROWS_AS(BlobReader::from_file(bad), CorruptionError);
    fs::remove_all(dir);
}

TEST_CASE("grad norm clipping rescales to the bound") {
    Param p(Mat(1, 2));
    p.grad = Mat(1, 2);
    p.grad.a = {3.0, 4.0}; // norm 5
    const double before = clip_grad_norm({&p}, 2.5);
    REQUIRE(before == Catch::Approx(5.0));
    REQUIRE(p.grad.a[0] == Catch::Approx(1.5));
    REQUIRE(p.grad.a[1] == Catch::Approx(2.0));
}
