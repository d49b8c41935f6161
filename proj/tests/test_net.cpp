#include <doctest.h>

#include <cmath>
#include <vector>

#include "dynaq/net.hpp"
#include "dynaq/rng.hpp"

using namespace dynaq;

namespace {

// independent loss evaluation used by the finite-difference oracle
double loss_of(const LayeredNet& net, const std::vector<double>& x, const std::vector<double>& t) {
    const std::vector<double> y = net.forward(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - clamp_target(t[i]);
        acc += 0.5 * d * d;
    }
    return acc;
}

struct ParamRef {
    std::vector<double>* vec;
    std::size_t idx;
};

std::vector<ParamRef> all_params(LayeredNet& n) {
    std::vector<ParamRef> out;
    for (auto* v : {&n.w1(), &n.b1(), &n.w2(), &n.b2()})
        for (std::size_t i = 0; i < v->size(); ++i) out.push_back({v, i});
    return out;
}

}  // namespace

TEST_CASE("parameter bundles follow the published table") {
    const NetParams q = net_params(NetKind::Q);
    CHECK(q.hidden_dim == 10);
    CHECK(q.init_bound == doctest::Approx(0.05));
    CHECK(q.learning_rate == doctest::Approx(0.5));
    CHECK(q.hidden_slope == doctest::Approx(1.0));
    CHECK(q.output_slope == doctest::Approx(0.4));
    const NetParams r = net_params(NetKind::R);
    CHECK(r.hidden_dim == 16);
    CHECK(r.init_bound == doctest::Approx(0.0045));
    CHECK(r.learning_rate == doctest::Approx(0.1));
    const NetParams p = net_params(NetKind::P);
    CHECK(p.hidden_dim == 26);
    CHECK(p.init_bound == doctest::Approx(0.1));
    CHECK(p.learning_rate == doctest::Approx(0.1));
    CHECK(p.hidden_slope == doctest::Approx(0.9));
    CHECK(p.output_slope == doctest::Approx(0.5));
    // gates share the P bundle
    CHECK(net_params(NetKind::G).hidden_dim == 26);
    Rng rng(1);
    LayeredNet n = new_net(NetKind::Q, 34, 1, rng);
    CHECK(n.hidden_dim() == 10);
    for (double w : n.w1()) CHECK(std::abs(w) <= 0.05);
    for (double b : n.b1()) CHECK(b == 0.0);
}

TEST_CASE("zero weights and biases give 0.5 everywhere") {
    Rng rng(3);
    LayeredNet n(4, 5, 3, 1.0, 0.4, 0.1, 0.0, rng);
    const std::vector<double> x{0.2, -0.7, 1.0, 0.0};
    for (double y : n.forward(x)) CHECK(y == doctest::Approx(0.5));
}

TEST_CASE("large slope saturates toward 1 on positive pre-activation") {
    Rng rng(4);
    LayeredNet n(2, 3, 1, 1.0, 50.0, 0.1, 0.0, rng);
    for (double& b : n.b2()) b = 1.0;
    CHECK(n.forward(std::vector<double>{0.0, 0.0})[0] > 0.999999);
}

TEST_CASE("same seed constructs identical nets") {
    Rng a(77), b(77);
    LayeredNet n1 = new_net(NetKind::P, 34, 34, a);
    LayeredNet n2 = new_net(NetKind::P, 34, 34, b);
    CHECK(n1.w1() == n2.w1());
    CHECK(n1.w2() == n2.w2());
}

TEST_CASE("forward matches direct formula evaluation") {
    Rng rng(11);
    LayeredNet n(3, 4, 2, 0.9, 0.5, 0.1, 0.3, rng);
    const std::vector<double> x{0.5, -0.25, 0.8};
    // hand evaluation from the raw matrices
    std::vector<double> h(4), y(2);
    for (int j = 0; j < 4; ++j) {
        double acc = n.b1()[j];
        for (int k = 0; k < 3; ++k) acc += n.w1()[j * 3 + k] * x[k];
        h[j] = 1.0 / (1.0 + std::exp(-0.9 * acc));
    }
    for (int i = 0; i < 2; ++i) {
        double acc = n.b2()[i];
        for (int j = 0; j < 4; ++j) acc += n.w2()[i * 4 + j] * h[j];
        y[i] = 1.0 / (1.0 + std::exp(-0.5 * acc));
    }
    const std::vector<double> out = n.forward(x);
    CHECK(out[0] == doctest::Approx(y[0]).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(y[1]).epsilon(1e-12));
    CHECK(out[0] > 0.0);
    CHECK(out[0] < 1.0);
}

TEST_CASE("analytic gradient matches central finite differences on 100+ random nets") {
    Rng rng(2024);
    const double h = 1e-5;
    int cases = 0;
    double worst = 0.0;
    for (int rep = 0; rep < 110; ++rep) {
        const int in = 2 + static_cast<int>(rng.below(5));
        const int hid = 3 + static_cast<int>(rng.below(6));
        const int out = 1 + static_cast<int>(rng.below(3));
        const double hs = rng.uniform(0.4, 1.2), os = rng.uniform(0.4, 1.2);
        const double lr = 0.25;
        LayeredNet net(in, hid, out, hs, os, lr, 0.5, rng);
        std::vector<double> x(in), t(out);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        for (double& v : t) v = rng.uniform(0.05, 0.95);

        // analytic gradient recovered from one SGD step
        LayeredNet stepped = net;
        stepped.backprop(x, t);
        auto pn = all_params(net);
        auto ps = all_params(stepped);

        for (std::size_t i = 0; i < pn.size(); ++i) {
            const double analytic = ((*pn[i].vec)[pn[i].idx] - (*ps[i].vec)[ps[i].idx]) / lr;
            LayeredNet probe = net;
            auto pp = all_params(probe);
            const double orig = (*pp[i].vec)[pp[i].idx];
            (*pp[i].vec)[pp[i].idx] = orig + h;
            const double lp = loss_of(probe, x, t);
            (*pp[i].vec)[pp[i].idx] = orig - h;
            const double lm = loss_of(probe, x, t);
            const double numeric = (lp - lm) / (2.0 * h);
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
        ++cases;
    }
    CHECK(cases >= 100);
    CHECK(worst < 1e-4);
}

TEST_CASE("backprop with target equal to output leaves weights unchanged") {
    Rng rng(8);
    LayeredNet n(3, 4, 2, 1.0, 0.5, 0.5, 0.4, rng);
    const std::vector<double> x{0.1, 0.9, -0.4};
    const std::vector<double> y = n.forward(x);
    LayeredNet before = n;
    n.backprop(x, y);
    CHECK(n.w1() == before.w1());
    CHECK(n.b1() == before.b1());
    CHECK(n.w2() == before.w2());
    CHECK(n.b2() == before.b2());
}

TEST_CASE("repeated training on one sample drives error below 1e-3, non-increasing") {
    Rng rng(15);
    LayeredNet n(3, 4, 2, 1.0, 0.4, 0.5, 0.05, rng);
    const std::vector<double> x{0.3, -0.6, 0.9};
    const std::vector<double> t{0.8, 0.2};
    double prev = n.l1_error(x, t);
    for (int i = 0; i < 10000; ++i) {
        n.backprop(x, t);
        const double e = n.l1_error(x, t);
        CHECK(e <= prev + 1e-12);
        prev = e;
    }
    CHECK(prev < 1e-3);
    for (double w : n.w1()) CHECK(std::isfinite(w));
}

TEST_CASE("targets outside [0,1] are clamped, weights stay finite") {
    Rng rng(21);
    LayeredNet n(2, 3, 1, 1.0, 0.4, 0.5, 0.05, rng);
    const std::vector<double> x{0.5, 0.5};
    for (int i = 0; i < 5000; ++i) n.backprop(x, std::vector<double>{1.7});
    const double y = n.forward(x)[0];
    CHECK(y > 0.95);  // crawling toward the 0.999 clamp
    CHECK(y < 1.0);
    for (double w : n.w2()) CHECK(std::isfinite(w));
}

TEST_CASE("l1_error basics") {
    Rng rng(31);
    LayeredNet n(2, 3, 2, 1.0, 1.0, 0.1, 0.0, rng);  // zero net: outputs (0.5, 0.5)
    const std::vector<double> x{0.0, 0.0};
    CHECK(n.l1_error(x, std::vector<double>{1.0, 0.0}) == doctest::Approx(1.0));
    const std::vector<double> y = n.forward(x);
    CHECK(n.l1_error(x, y) == doctest::Approx(0.0));
    CHECK_THROWS(n.l1_error(x, std::vector<double>{0.5}));
}

TEST_CASE("json round-trip preserves behaviour bit-exactly") {
    Rng rng(41);
    LayeredNet n = new_net(NetKind::R, 34, 1, rng);
    std::vector<double> x(34);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const LayeredNet m = LayeredNet::from_json(n.to_json());
    CHECK(m.forward(x)[0] == n.forward(x)[0]);
}

TEST_CASE("dimension mismatches are rejected") {
    Rng rng(51);
    LayeredNet n(3, 4, 2, 1.0, 0.5, 0.1, 0.1, rng);
    CHECK_THROWS(n.forward(std::vector<double>{1.0, 2.0}));
    CHECK_THROWS(n.backprop(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{0.5}));
}
