// Two-layer feedforward networks with slope-parameterized sigmoid units and
// plain online SGD backpropagation. Substrate for the Q, reward, predecessor
// and gate networks.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynaq/rng.hpp"

namespace dynaq {

// Parameter bundle selector. Q/R/P follow the published table; gates reuse
// the P bundle with a scalar output.
enum class NetKind { Q, R, P, G };

// Output-layer training loss. Cross-entropy pairs with the sigmoid output
// (delta has no extra sigmoid-derivative factor), so saturated components
// keep learning; squared error is the plain alternative. World-model and
// gate nets need the cross-entropy tails to converge within the epoch
// budget; Q nets keep the squared TD delta.
enum class Loss { SquaredError, CrossEntropy };

struct NetParams {
    int hidden_dim;
    double init_bound;
    double learning_rate;
    double hidden_slope;
    double output_slope;
    Loss loss;
};

inline NetParams net_params(NetKind kind) {
    switch (kind) {
        case NetKind::Q: return {10, 0.05, 0.5, 1.0, 0.4, Loss::SquaredError};
        case NetKind::R: return {16, 0.0045, 0.1, 1.0, 0.4, Loss::CrossEntropy};
        case NetKind::P: return {26, 0.1, 0.1, 0.9, 0.5, Loss::CrossEntropy};
        case NetKind::G: return {26, 0.1, 0.1, 0.9, 0.5, Loss::CrossEntropy};
    }
    throw std::logic_error("net_params: bad kind");
}

inline double sigmoid(double slope, double x) { return 1.0 / (1.0 + std::exp(-slope * x)); }

// Training targets are clamped into the representable open interval of the
// output sigmoid; Bellman targets can transiently fall outside [0,1].
inline double clamp_target(double t) {
    if (t < 0.001) return 0.001;
    if (t > 0.999) return 0.999;
    return t;
}

class LayeredNet {
public:
    LayeredNet() = default;

    LayeredNet(int input_dim, int hidden_dim, int output_dim, double hidden_slope, double output_slope,
               double learning_rate, double init_bound, Rng& rng, Loss loss = Loss::SquaredError)
        : in_(input_dim), hid_(hidden_dim), out_(output_dim), hidden_slope_(hidden_slope),
          output_slope_(output_slope), lr_(learning_rate), loss_(loss) {
        if (input_dim <= 0 || hidden_dim <= 0 || output_dim <= 0)
            throw std::invalid_argument("LayeredNet: dims must be > 0");
        w1_.resize(static_cast<std::size_t>(hid_) * in_);
        b1_.assign(hid_, 0.0);  // biases start at zero; the init bound applies to weights
        w2_.resize(static_cast<std::size_t>(out_) * hid_);
        b2_.assign(out_, 0.0);
        for (double& w : w1_) w = rng.uniform(-init_bound, init_bound);
        for (double& w : w2_) w = rng.uniform(-init_bound, init_bound);
        h_.resize(hid_);
        y_.resize(out_);
        dh_.resize(hid_);
    }

    LayeredNet(NetKind kind, int input_dim, int output_dim, Rng& rng)
        : LayeredNet(input_dim, net_params(kind).hidden_dim, output_dim, net_params(kind).hidden_slope,
                     net_params(kind).output_slope, net_params(kind).learning_rate,
                     net_params(kind).init_bound, rng, net_params(kind).loss) {}

    int input_dim() const { return in_; }
    int hidden_dim() const { return hid_; }
    int output_dim() const { return out_; }
    double learning_rate() const { return lr_; }

    std::vector<double> forward(std::span<const double> x) const {
        check_input(x);
        std::vector<double> h(hid_), y(out_);
        forward_into(x, h, y);
        return y;
    }

    // forward, keeping the hidden activations for the gradient step
    void forward_cached(std::span<const double> x) {
        check_input(x);
        forward_into(x, h_, y_);
    }

    const std::vector<double>& output() const { return y_; }

    // One online gradient step toward the clamped target.
    void backprop(std::span<const double> x, std::span<const double> target) {
        if (static_cast<int>(target.size()) != out_) throw std::invalid_argument("backprop: target dim mismatch");
        forward_cached(x);
        dy_buf_.resize(out_);
        for (int i = 0; i < out_; ++i) {
            const double y = y_[i];
            const double err = y - clamp_target(target[i]);
            dy_buf_[i] = loss_ == Loss::SquaredError ? err * output_slope_ * y * (1.0 - y)
                                                     : err * output_slope_;
        }
        // hidden deltas use pre-update output weights
        for (int j = 0; j < hid_; ++j) {
            double acc = 0.0;
            for (int i = 0; i < out_; ++i) acc += w2_[static_cast<std::size_t>(i) * hid_ + j] * dy_buf_[i];
            dh_[j] = acc * hidden_slope_ * h_[j] * (1.0 - h_[j]);
        }
        for (int i = 0; i < out_; ++i) {
            const double step = lr_ * dy_buf_[i];
            double* row = &w2_[static_cast<std::size_t>(i) * hid_];
            for (int j = 0; j < hid_; ++j) row[j] -= step * h_[j];
            b2_[i] -= step;
        }
        for (int j = 0; j < hid_; ++j) {
            const double step = lr_ * dh_[j];
            double* row = &w1_[static_cast<std::size_t>(j) * in_];
            for (int k = 0; k < in_; ++k) row[k] -= step * x[k];
            b1_[j] -= step;
        }
    }

    double l1_error(std::span<const double> x, std::span<const double> target) const {
        if (static_cast<int>(target.size()) != out_) throw std::invalid_argument("l1_error: target dim mismatch");
        check_input(x);
        thread_local std::vector<double> h, y;
        h.resize(hid_);
        y.resize(out_);
        forward_into(x, h, y);
        double acc = 0.0;
        for (int i = 0; i < out_; ++i) acc += std::abs(y[i] - target[i]);
        return acc;
    }

    // raw parameter access (serialization, gradient checks)
    std::vector<double>& w1() { return w1_; }
    std::vector<double>& b1() { return b1_; }
    std::vector<double>& w2() { return w2_; }
    std::vector<double>& b2() { return b2_; }
    const std::vector<double>& w1() const { return w1_; }
    const std::vector<double>& b1() const { return b1_; }
    const std::vector<double>& w2() const { return w2_; }
    const std::vector<double>& b2() const { return b2_; }
    double hidden_slope() const { return hidden_slope_; }
    double output_slope() const { return output_slope_; }

    Loss loss() const { return loss_; }

    nlohmann::json to_json() const {
        return nlohmann::json{{"input_dim", in_},   {"hidden_dim", hid_},
                              {"output_dim", out_}, {"hidden_slope", hidden_slope_},
                              {"output_slope", output_slope_}, {"learning_rate", lr_},
                              {"loss", loss_ == Loss::SquaredError ? "squared" : "cross_entropy"},
                              {"w1", w1_},          {"b1", b1_},
                              {"w2", w2_},          {"b2", b2_}};
    }

    static LayeredNet from_json(const nlohmann::json& j) {
        LayeredNet n;
        n.in_ = j.at("input_dim").get<int>();
        n.hid_ = j.at("hidden_dim").get<int>();
        n.out_ = j.at("output_dim").get<int>();
        n.hidden_slope_ = j.at("hidden_slope").get<double>();
        n.output_slope_ = j.at("output_slope").get<double>();
        n.lr_ = j.at("learning_rate").get<double>();
        n.loss_ = j.value("loss", "squared") == "cross_entropy" ? Loss::CrossEntropy : Loss::SquaredError;
        n.w1_ = j.at("w1").get<std::vector<double>>();
        n.b1_ = j.at("b1").get<std::vector<double>>();
        n.w2_ = j.at("w2").get<std::vector<double>>();
        n.b2_ = j.at("b2").get<std::vector<double>>();
        if (n.w1_.size() != static_cast<std::size_t>(n.hid_) * n.in_ ||
            n.w2_.size() != static_cast<std::size_t>(n.out_) * n.hid_)
            throw std::runtime_error("LayeredNet::from_json: inconsistent dimensions");
        n.h_.resize(n.hid_);
        n.y_.resize(n.out_);
        n.dh_.resize(n.hid_);
        return n;
    }

private:
    void check_input(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != in_) throw std::invalid_argument("LayeredNet: input dim mismatch");
    }

    void forward_into(std::span<const double> x, std::vector<double>& h, std::vector<double>& y) const {
        for (int j = 0; j < hid_; ++j) {
            const double* row = &w1_[static_cast<std::size_t>(j) * in_];
            double acc = b1_[j];
            for (int k = 0; k < in_; ++k) acc += row[k] * x[k];
            h[j] = sigmoid(hidden_slope_, acc);
        }
        for (int i = 0; i < out_; ++i) {
            const double* row = &w2_[static_cast<std::size_t>(i) * hid_];
            double acc = b2_[i];
            for (int j = 0; j < hid_; ++j) acc += row[j] * h[j];
            y[i] = sigmoid(output_slope_, acc);
        }
    }

    int in_ = 0, hid_ = 0, out_ = 0;
    double hidden_slope_ = 1.0, output_slope_ = 1.0, lr_ = 0.1;
    Loss loss_ = Loss::SquaredError;
    std::vector<double> w1_, b1_, w2_, b2_;
    // scratch
    std::vector<double> h_, y_, dh_, dy_buf_;
};

inline LayeredNet new_net(NetKind kind, int input_dim, int output_dim, Rng& rng) {
    return LayeredNet(kind, input_dim, output_dim, rng);
}

}  // namespace dynaq
