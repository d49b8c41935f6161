// Off-line learned world model: per-action predecessor ensembles
// (successor state -> predecessor states) and reward ensembles, trained with
// GALMO on transition quadruplets collected from the task set.
#pragma once

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dynaq/galmo.hpp"
#include "dynaq/maze.hpp"
#include "dynaq/net.hpp"
#include "dynaq/rng.hpp"

namespace dynaq {

// One unit of world-model training data. A predecessor equal to the zero
// vector marks a "null" transition: no state reaches `succ` by `action`.
struct TransitionSample {
    StateVector succ;
    StateVector pred;
    Action action = Action::North;
    double reward = 0.0;
    int task = 0;
};

inline bool is_null_state(std::span<const double> v, double eps = 1e-12) {
    for (double x : v)
        if (std::abs(x) > eps) return false;
    return true;
}

inline double l1_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += std::abs(x);
    return acc;
}

struct CollectOptions {
    PlaceKernel kernel{};
    double reward_magnitude = 0.8;
    bool dedup = true;       // exact-vector-equality deduplication
    int n_laps = 40;         // behavioral mode: laps per task
    double policy_beta = 2.2;  // behavioral mode: softmax gain on the lap preference
};

inline std::vector<RewardMemory> steady_memories(TaskId t) {
    if (t == TaskId::Alternate)
        return {RewardMemory{Side::Right, Side::Left}, RewardMemory{Side::Left, Side::Right}};
    return {steady_memory(t)};
}

namespace detail {

inline std::string sample_key(const TransitionSample& s) {
    std::string key;
    key.reserve((s.succ.size() + s.pred.size() + 2) * sizeof(double));
    auto append = [&key](const double* p, std::size_t n) {
        key.append(reinterpret_cast<const char*>(p), n * sizeof(double));
    };
    const double a = static_cast<double>(s.action);
    append(&a, 1);
    append(&s.reward, 1);
    append(s.succ.data(), s.succ.size());
    append(s.pred.data(), s.pred.size());
    return key;
}

inline void dedup_in_place(std::vector<TransitionSample>& samples) {
    std::unordered_set<std::string> seen;
    std::vector<TransitionSample> out;
    out.reserve(samples.size());
    for (auto& s : samples)
        if (seen.insert(sample_key(s)).second) out.push_back(std::move(s));
    samples = std::move(out);
}

// Memory histories that can actually occur at a cell in the steady-state
// regime of a task. At reward sites only the post-arrival history exists.
inline std::vector<RewardMemory> valid_memories_at(const Maze& maze, TaskId task, int cell) {
    const std::vector<RewardMemory> mems = steady_memories(task);
    const Side side = maze.site_side(cell);
    if (side == Side::None) return mems;
    std::vector<RewardMemory> out;
    for (const RewardMemory& h : mems) {
        const RewardMemory post = task_rewards(task, side, h.last) ? update_memory(h, side) : h;
        if (std::find(out.begin(), out.end(), post) == out.end()) out.push_back(post);
    }
    return out;
}

}  // namespace detail

// Enumerates every steady-state transition of each task, both directions of
// travel, plus null transitions for (state, action) pairs nothing can enter
// by. This is the ground-truth oracle the trained model is tested against.
inline std::vector<TransitionSample> collect_exhaustive(const Maze& maze, const std::vector<TaskId>& tasks,
                                                        const CollectOptions& opt = {}) {
    if (tasks.empty()) throw std::invalid_argument("collect_exhaustive: no tasks");
    std::vector<TransitionSample> out;
    for (TaskId task : tasks) {
        const MazeView view(maze, maze.default_blocking(task_blocked_side(task)));
        view.check_sites(task);
        struct Key {
            int cell;
            RewardMemory mem;
            Action action;
            bool operator==(const Key&) const = default;
        };
        std::vector<Key> covered;
        auto is_covered = [&covered](const Key& k) {
            return std::find(covered.begin(), covered.end(), k) != covered.end();
        };
        for (int p = 0; p < maze.num_cells(); ++p) {
            if (!view.open(p) || !view.reachable(p)) continue;
            for (const RewardMemory& h : detail::valid_memories_at(maze, task, p)) {
                const StateVector from = encode_state(view, p, h, opt.kernel);
                for (Action a : kActions) {
                    const int c = view.neighbor(p, a);
                    if (c < 0 || !view.reachable(c)) continue;
                    const Side side = maze.site_side(c);
                    const bool rewarded = side != Side::None && task_rewards(task, side, h.last);
                    const RewardMemory m2 = rewarded ? update_memory(h, side) : h;
                    out.push_back({encode_state(view, c, m2, opt.kernel), from, a,
                                   rewarded ? opt.reward_magnitude : 0.0, static_cast<int>(task)});
                    covered.push_back({c, m2, a});
                }
            }
        }
        const StateVector null_state(static_cast<std::size_t>(maze.num_cells()) + 2, 0.0);
        for (int c = 0; c < maze.num_cells(); ++c) {
            if (!view.open(c) || !view.reachable(c)) continue;
            for (const RewardMemory& m : detail::valid_memories_at(maze, task, c)) {
                for (Action a : kActions) {
                    if (!is_covered({c, m, a}))
                        out.push_back({encode_state(view, c, m, opt.kernel), null_state, a, 0.0,
                                       static_cast<int>(task)});
                }
            }
        }
    }
    if (opt.dedup) detail::dedup_in_place(out);
    return out;
}

// Logs transitions from simulated laps: a softmax over a shortest-path
// preference toward the currently rewarded site, so most laps are correct
// with occasional wrong turns. Order is the order of experience.
inline std::vector<TransitionSample> collect_behavioral(const Maze& maze, const std::vector<TaskId>& tasks,
                                                        Rng& rng, const CollectOptions& opt = {}) {
    if (tasks.empty()) throw std::invalid_argument("collect_behavioral: no tasks");
    std::vector<TransitionSample> out;
    for (TaskId task : tasks) {
        const MazeView view(maze, maze.default_blocking(task_blocked_side(task)));
        view.check_sites(task);
        RewardMemory mem = steady_memory(task);
        int cell = maze.start_cell, prev = -1;
        StateVector phi = encode_state(view, cell, mem, opt.kernel);
        struct SeenKey {
            int cell;
            RewardMemory mem;
            bool operator==(const SeenKey&) const = default;
        };
        std::vector<SeenKey> seen{{cell, mem}};
        int laps = 0;
        while (laps < opt.n_laps) {
            const std::vector<Action> actions = valid_actions(view, cell, prev);
            Side target = Side::Right;
            for (Side s : {Side::Left, Side::Right})
                if (task_rewards(task, s, mem.last)) target = s;
            const int goal = maze.reward_site(target);
            // softmax over the lap preference
            std::vector<double> w(actions.size());
            double total = 0.0;
            for (std::size_t i = 0; i < actions.size(); ++i) {
                const int n = view.neighbor(cell, actions[i]);
                const bool toward = view.geodesic(n, goal) == view.geodesic(cell, goal) - 1;
                w[i] = std::exp(opt.policy_beta * (toward ? 1.0 : 0.0));
                total += w[i];
            }
            double u = rng.uniform() * total;
            std::size_t pick = actions.size() - 1;
            for (std::size_t i = 0; i < actions.size(); ++i) {
                if (u < w[i]) {
                    pick = i;
                    break;
                }
                u -= w[i];
            }
            const StepResult sr = step(view, task, cell, prev, actions[pick], mem.last, opt.reward_magnitude);
            const RewardMemory m2 = update_memory(mem, sr.rewarded);
            StateVector phi2 = encode_state(view, sr.next_cell, m2, opt.kernel);
            out.push_back({phi2, phi, actions[pick], sr.reward, static_cast<int>(task)});
            if (std::find(seen.begin(), seen.end(), SeenKey{sr.next_cell, m2}) == seen.end())
                seen.push_back({sr.next_cell, m2});
            if (maze.site_side(sr.next_cell) != Side::None) ++laps;
            prev = cell;
            cell = sr.next_cell;
            mem = m2;
            phi = std::move(phi2);
        }
        // geometric null transitions for every visited state
        const StateVector null_state(static_cast<std::size_t>(maze.num_cells()) + 2, 0.0);
        for (const auto& k : seen) {
            for (Action a : kActions) {
                const int from = maze.neighbor(k.cell, reverse(a));
                if (from < 0 || !view.open(from))
                    out.push_back({encode_state(view, k.cell, k.mem, opt.kernel), null_state, a, 0.0,
                                   static_cast<int>(task)});
            }
        }
    }
    if (opt.dedup) detail::dedup_in_place(out);
    return out;
}

// --- training -----------------------------------------------------------

// Reward-network input convention. Algorithm texts disagree: training is
// written against the arrival state while queries run on the departure
// state. Departure keeps rewards a deterministic function of the input and
// matches how the replay loop queries the model, so it is the default.
enum class RewardInput { Departure, Arrival };

struct WorldModelConfig {
    GalmoConfig galmo{};
    RewardInput reward_input = RewardInput::Departure;
    double gate_threshold = 0.35;  // see GalmoConfig on the dual-owner gate equilibrium
    double null_epsilon = 0.5;     // L1 norm below which a predicted predecessor is a learned null
};

inline SampleSet predecessor_samples(const std::vector<TransitionSample>& data, Action a) {
    SampleSet s;
    for (const auto& t : data)
        if (t.action == a) s.push_back({t.succ, t.pred});
    return s;
}

inline SampleSet reward_samples(const std::vector<TransitionSample>& data, Action a, RewardInput mode) {
    SampleSet s;
    for (const auto& t : data) {
        if (t.action != a) continue;
        if (mode == RewardInput::Departure) {
            if (is_null_state(t.pred)) continue;  // no transition happened
            s.push_back({t.pred, {t.reward}});
        } else {
            s.push_back({t.succ, {t.reward}});
        }
    }
    return s;
}

struct WorldModel {
    std::array<ExpertEnsemble, 4> predecessors;
    std::array<ExpertEnsemble, 4> rewards;
    WorldModelConfig config;
    std::array<TrainResult, 4> predecessor_training;
    std::array<TrainResult, 4> reward_training;
};

// name is "pred_N", "reward_W", ...: epoch, sample index, min L1 error, expert count
using WorldModelLogger = std::function<void(const std::string&, int, int, double, int)>;

inline WorldModel learn(const std::vector<TransitionSample>& data, const WorldModelConfig& cfg, Rng& rng,
                        const WorldModelLogger& logger = nullptr) {
    if (data.empty()) throw std::invalid_argument("learn: empty dataset");
    const int dim = static_cast<int>(data[0].succ.size());
    WorldModel wm;
    wm.config = cfg;
    for (Action a : kActions) {
        const int i = static_cast<int>(a);
        const std::string suffix = action_name(a);
        {
            Rng r = rng.fork(std::string("pred_") + suffix);
            wm.predecessors[i] = ExpertEnsemble(NetKind::P, dim, dim, r);
            const SampleSet s = predecessor_samples(data, a);
            GalmoLogger gl;
            if (logger) {
                const std::string name = "pred_" + suffix;
                gl = [&logger, name](int e, int si, double err, int n) { logger(name, e, si, err, n); };
            }
            wm.predecessor_training[i] = train(wm.predecessors[i], s, cfg.galmo, r, gl);
        }
        {
            Rng r = rng.fork(std::string("reward_") + suffix);
            wm.rewards[i] = ExpertEnsemble(NetKind::R, dim, 1, r);
            const SampleSet s = reward_samples(data, a, cfg.reward_input);
            GalmoLogger gl;
            if (logger) {
                const std::string name = "reward_" + suffix;
                gl = [&logger, name](int e, int si, double err, int n) { logger(name, e, si, err, n); };
            }
            wm.reward_training[i] = train(wm.rewards[i], s, cfg.galmo, r, gl);
        }
    }
    return wm;
}

// Gated predecessor predictions with learned nulls filtered out by the L1
// norm test. An empty result means "no predecessor".
inline std::vector<StateVector> predict_predecessors(const WorldModel& wm, std::span<const double> state,
                                                     Action action) {
    std::vector<StateVector> out;
    for (const Prediction& p :
         predict_all(wm.predecessors[static_cast<int>(action)], state, wm.config.gate_threshold)) {
        if (l1_norm(p.output) > wm.config.null_epsilon) out.push_back(std::move(p.output));
    }
    return out;
}

inline double predict_reward(const WorldModel& wm, std::span<const double> state, Action action) {
    return predict_best(wm.rewards[static_cast<int>(action)], state)[0];
}

// --- ground-truth inspection ---------------------------------------------

// (cell, memory levels) signature used to compare predicted and true states.
struct DecodedState {
    int cell = -1;
    double l = 0.0, r = 0.0;
    auto operator<=>(const DecodedState&) const = default;
};

inline std::optional<DecodedState> decode_state(std::span<const double> v) {
    const auto cell = decode_position(v);
    if (!cell) return std::nullopt;
    return DecodedState{*cell, nearest_memory_level(mem_l(v)), nearest_memory_level(mem_r(v))};
}

// Ground truth for one (successor state, action): the set of distinct true
// predecessors (empty for pure null transitions).
struct PredecessorGroup {
    StateVector succ;
    Action action = Action::North;
    std::vector<StateVector> preds;
};

inline std::vector<PredecessorGroup> group_by_successor(const std::vector<TransitionSample>& data) {
    std::map<std::pair<std::string, int>, std::size_t> index;
    std::vector<PredecessorGroup> groups;
    auto vec_key = [](const StateVector& v) {
        return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    };
    for (const auto& t : data) {
        const auto key = std::make_pair(vec_key(t.succ), static_cast<int>(t.action));
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, groups.size());
            groups.push_back({t.succ, t.action, {}});
            it = index.find(key);
        }
        PredecessorGroup& g = groups[it->second];
        if (!is_null_state(t.pred)) {
            bool dup = false;
            for (const auto& p : g.preds) dup = dup || p == t.pred;
            if (!dup) g.preds.push_back(t.pred);
        }
    }
    return groups;
}

inline std::vector<PredecessorGroup> multi_predecessor_groups(const std::vector<TransitionSample>& data) {
    std::vector<PredecessorGroup> out;
    for (auto& g : group_by_successor(data))
        if (g.preds.size() >= 2) out.push_back(std::move(g));
    return out;
}

// --- serialization --------------------------------------------------------

inline void dump_dataset_jsonl(std::ostream& os, const std::vector<TransitionSample>& data) {
    for (const auto& t : data) {
        nlohmann::json j{{"succ", t.succ},
                         {"pred", t.pred},
                         {"action", action_name(t.action)},
                         {"reward", t.reward},
                         {"task", t.task}};
        os << j.dump() << '\n';
    }
}

inline Action action_from_name(const std::string& s) {
    for (Action a : kActions)
        if (s == action_name(a)) return a;
    throw std::invalid_argument("bad action name: " + s);
}

inline std::vector<TransitionSample> load_dataset_jsonl(std::istream& is) {
    std::vector<TransitionSample> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        out.push_back({j.at("succ").get<StateVector>(), j.at("pred").get<StateVector>(),
                       action_from_name(j.at("action").get<std::string>()), j.at("reward").get<double>(),
                       j.value("task", 0)});
    }
    return out;
}

inline void save_checkpoint(const WorldModel& wm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (Action a : kActions) {
        const int i = static_cast<int>(a);
        for (const char* kind : {"pred", "reward"}) {
            const auto& ens = kind[0] == 'p' ? wm.predecessors[i] : wm.rewards[i];
            const auto& tr = kind[0] == 'p' ? wm.predecessor_training[i] : wm.reward_training[i];
            nlohmann::json j = ens.to_json();
            j["outlier_gain"] = wm.config.galmo.outlier_gain;
            j["theta_history"] = tr.theta_history;
            std::ofstream f(dir / (std::string(kind) + "_" + action_name(a) + ".json"));
            f << j.dump() << '\n';
        }
    }
    nlohmann::json meta{{"gate_threshold", wm.config.gate_threshold},
                        {"null_epsilon", wm.config.null_epsilon},
                        {"reward_input", wm.config.reward_input == RewardInput::Departure ? "departure" : "arrival"},
                        {"max_epochs", wm.config.galmo.max_epochs},
                        {"outlier_gain", wm.config.galmo.outlier_gain}};
    std::ofstream f(dir / "meta.json");
    f << meta.dump(2) << '\n';
}

inline WorldModel load_checkpoint(const std::filesystem::path& dir) {
    WorldModel wm;
    std::ifstream mf(dir / "meta.json");
    if (!mf) throw std::runtime_error("load_checkpoint: missing meta.json in " + dir.string());
    nlohmann::json meta = nlohmann::json::parse(mf);
    wm.config.gate_threshold = meta.at("gate_threshold").get<double>();
    wm.config.null_epsilon = meta.at("null_epsilon").get<double>();
    wm.config.reward_input =
        meta.at("reward_input").get<std::string>() == "arrival" ? RewardInput::Arrival : RewardInput::Departure;
    wm.config.galmo.max_epochs = meta.at("max_epochs").get<int>();
    wm.config.galmo.outlier_gain = meta.at("outlier_gain").get<double>();
    for (Action a : kActions) {
        const int i = static_cast<int>(a);
        for (const char* kind : {"pred", "reward"}) {
            std::ifstream f(dir / (std::string(kind) + "_" + action_name(a) + ".json"));
            if (!f) throw std::runtime_error("load_checkpoint: missing ensemble file");
            nlohmann::json j = nlohmann::json::parse(f);
            auto& ens = kind[0] == 'p' ? wm.predecessors[i] : wm.rewards[i];
            auto& tr = kind[0] == 'p' ? wm.predecessor_training[i] : wm.reward_training[i];
            ens = ExpertEnsemble::from_json(j);
            tr.theta_history = j.value("theta_history", std::vector<double>{});
        }
    }
    return wm;
}

}  // namespace dynaq
