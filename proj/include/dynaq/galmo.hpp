// GALMO: growing gated-expert training so a single input can map to several
// outputs. On each sample only the lowest-error expert is trained; samples
// whose error is a statistical outlier trigger duplication of that expert.
#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynaq/net.hpp"
#include "dynaq/rng.hpp"

namespace dynaq {

struct Sample {
    std::vector<double> input;
    std::vector<double> output;
};

using SampleSet = std::vector<Sample>;

struct GalmoConfig {
    double outlier_gain = 3.0;  // w: gain of the outlier detector threshold
    int max_epochs = 4000;
    // Epochs during which the outlier threshold stays at +inf. The
    // median/quartile statistic only identifies barycenter-stuck samples
    // once the rest of the set has settled; applied to a still-descending
    // error distribution it duplicates slow starters until the expert cap.
    int theta_warmup_epochs = 3000;
    // Gate decision boundary at inference. An input owned by two experts
    // trains each owning gate toward 1 and 0 alternately, so those gates
    // settle near 0.5; the threshold sits below that equilibrium and above
    // the near-zero level of non-owning gates.
    double gate_threshold = 0.35;
    bool reshuffle = true;  // new sample order every epoch
    int expert_cap = 64;    // hard failure above this, to catch runaway growth
};

// Paired expert/gate lists; pairing is by index.
struct ExpertEnsemble {
    std::vector<LayeredNet> experts;
    std::vector<LayeredNet> gates;

    ExpertEnsemble() = default;

    ExpertEnsemble(NetKind expert_kind, int input_dim, int output_dim, Rng& rng) {
        experts.push_back(new_net(expert_kind, input_dim, output_dim, rng));
        gates.push_back(new_net(NetKind::G, input_dim, 1, rng));
    }

    std::size_t size() const { return experts.size(); }
    int input_dim() const { return experts.at(0).input_dim(); }
    int output_dim() const { return experts.at(0).output_dim(); }

    nlohmann::json to_json() const {
        nlohmann::json e = nlohmann::json::array(), g = nlohmann::json::array();
        for (const auto& n : experts) e.push_back(n.to_json());
        for (const auto& n : gates) g.push_back(n.to_json());
        return nlohmann::json{{"experts", e}, {"gates", g}};
    }

    static ExpertEnsemble from_json(const nlohmann::json& j) {
        ExpertEnsemble ens;
        for (const auto& n : j.at("experts")) ens.experts.push_back(LayeredNet::from_json(n));
        for (const auto& n : j.at("gates")) ens.gates.push_back(LayeredNet::from_json(n));
        if (ens.experts.empty() || ens.experts.size() != ens.gates.size())
            throw std::runtime_error("ExpertEnsemble::from_json: bad expert/gate pairing");
        return ens;
    }
};

// Linear-interpolation quantile at position q*(n-1) on the sorted list. The
// threshold trajectory depends on this convention, so it is fixed here.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty list");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

inline double outlier_threshold(const std::vector<double>& min_errors, double gain) {
    const double med = quantile(min_errors, 0.5);
    const double q3 = quantile(min_errors, 0.75);
    return med + gain * (q3 - med);
}

struct EpochLog {
    std::vector<double> min_errors;   // per presented sample (pre-clone min on growth steps)
    std::vector<int> trained_expert;  // expert updated per sample (the clone on growth steps)
    std::vector<char> grew;
    double theta_after = 0.0;
};

namespace detail {

// `grown`, when given, marks samples (by original index) that already caused
// a duplication; they train normally from then on. A sample stuck on a
// barycenter needs one extra network, and re-cloning the same sample while
// its error rides the threshold only piles up redundant experts.
inline EpochLog galmo_epoch(ExpertEnsemble& ens, const SampleSet& samples, std::span<const int> order,
                            double theta, Rng& rng, const GalmoConfig& cfg,
                            std::vector<char>* grown = nullptr) {
    EpochLog log;
    log.min_errors.reserve(order.size());
    log.trained_expert.reserve(order.size());
    log.grew.reserve(order.size());
    const std::vector<double> gate_one{1.0}, gate_zero{0.0};
    std::vector<double> errors;
    for (int idx : order) {
        const Sample& s = samples[idx];
        errors.clear();
        for (const auto& expert : ens.experts) errors.push_back(expert.l1_error(s.input, s.output));
        const std::size_t best =
            static_cast<std::size_t>(std::min_element(errors.begin(), errors.end()) - errors.begin());
        const double min_err = errors[best];
        log.min_errors.push_back(min_err);
        const bool may_grow = grown == nullptr || !(*grown)[idx];
        if (min_err < theta || !may_grow) {
            ens.experts[best].backprop(s.input, s.output);
            for (std::size_t g = 0; g < ens.gates.size(); ++g)
                ens.gates[g].backprop(s.input, g == best ? gate_one : gate_zero);
            log.trained_expert.push_back(static_cast<int>(best));
            log.grew.push_back(0);
        } else {
            if (static_cast<int>(ens.size()) >= cfg.expert_cap)
                throw std::runtime_error("galmo: runaway growth, expert cap " +
                                         std::to_string(cfg.expert_cap) + " reached");
            ens.experts.push_back(ens.experts[best]);  // clone of the closest expert
            ens.experts.back().backprop(s.input, s.output);
            ens.gates.push_back(new_net(NetKind::G, ens.input_dim(), 1, rng));
            ens.gates.back().backprop(s.input, gate_one);  // other gates untouched on growth
            if (grown) (*grown)[idx] = 1;
            log.trained_expert.push_back(static_cast<int>(ens.size()) - 1);
            log.grew.push_back(1);
        }
    }
    log.theta_after = outlier_threshold(log.min_errors, cfg.outlier_gain);
    return log;
}

}  // namespace detail

// One pass over the samples in their stored order. theta = +inf on the first
// ever epoch (no growth can happen then). Returns the log carrying M and the
// updated threshold.
inline EpochLog train_epoch(ExpertEnsemble& ens, const SampleSet& samples, double theta, Rng& rng,
                            const GalmoConfig& cfg = {}) {
    if (!samples.empty() &&
        (static_cast<int>(samples[0].input.size()) != ens.input_dim() ||
         static_cast<int>(samples[0].output.size()) != ens.output_dim()))
        throw std::invalid_argument("train_epoch: sample dimensions do not match ensemble");
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    return detail::galmo_epoch(ens, samples, order, theta, rng, cfg);
}

// epoch, original sample index, min L1 error, expert count
using GalmoLogger = std::function<void(int, int, double, int)>;

struct TrainResult {
    std::vector<double> theta_history;
    std::vector<double> final_min_errors;  // per sample, last epoch, sample order
};

inline TrainResult train(ExpertEnsemble& ens, const SampleSet& samples, const GalmoConfig& cfg,
                         Rng& rng, const GalmoLogger& logger = nullptr) {
    TrainResult result;
    if (samples.empty()) return result;
    if (static_cast<int>(samples[0].input.size()) != ens.input_dim() ||
        static_cast<int>(samples[0].output.size()) != ens.output_dim())
        throw std::invalid_argument("train: sample dimensions do not match ensemble");
    Rng shuffle_rng = rng.fork("galmo-shuffle");
    Rng grow_rng = rng.fork("galmo-grow");
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<char> grown(samples.size(), 0);
    double theta = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.reshuffle) shuffle_rng.shuffle(order);
        const EpochLog log = detail::galmo_epoch(ens, samples, order, theta, grow_rng, cfg, &grown);
        theta = epoch + 1 < cfg.theta_warmup_epochs ? std::numeric_limits<double>::infinity()
                                                    : log.theta_after;
        result.theta_history.push_back(theta);
        if (logger) {
            for (std::size_t i = 0; i < order.size(); ++i)
                logger(epoch, order[i], log.min_errors[i], static_cast<int>(ens.size()));
        }
        if (epoch == cfg.max_epochs - 1) {
            result.final_min_errors.assign(samples.size(), 0.0);
            for (std::size_t i = 0; i < order.size(); ++i)
                result.final_min_errors[order[i]] = log.min_errors[i];
        }
    }
    return result;
}

struct Prediction {
    std::vector<double> output;
    double gate_value;
    int expert_index;
};

// Outputs of every expert whose gate clears the threshold, in expert order.
// An empty list is a legal result.
inline std::vector<Prediction> predict_all(const ExpertEnsemble& ens, std::span<const double> input,
                                           double gate_threshold = 0.35) {
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const double g = ens.gates[i].forward(input)[0];
        if (g > gate_threshold) out.push_back({ens.experts[i].forward(input), g, static_cast<int>(i)});
    }
    return out;
}

// Prediction of the expert with the strongest gate, regardless of threshold.
// Used where a single value is wanted (reward queries).
inline std::vector<double> predict_best(const ExpertEnsemble& ens, std::span<const double> input) {
    std::size_t best = 0;
    double best_g = -1.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const double g = ens.gates[i].forward(input)[0];
        if (g > best_g) {
            best_g = g;
            best = i;
        }
    }
    return ens.experts[best].forward(input);
}

}  // namespace dynaq
