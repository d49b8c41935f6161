// Discrete double-T maze: grid parsing, place-cell state coding, reward
// memory, task contingencies and movement rules.
//
// Maze file format (ASCII grid, one character per cell):
//   '#' wall   '.' open   'S' start   'L'/'R' reward sites
//   '1'/'2' junction markers T1/T2
// Lines starting with '%' are comments. Optional '%z' lines carry a zone grid
// of the same width ('l'/'r'/'c' for open cells) used by the replay analysis;
// without them zones default to the cell position relative to the stem.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynaq {

struct MazeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Action : int { North = 0, South = 1, East = 2, West = 3 };
constexpr std::array<Action, 4> kActions = {Action::North, Action::South, Action::East, Action::West};

inline Action reverse(Action a) {
    switch (a) {
        case Action::North: return Action::South;
        case Action::South: return Action::North;
        case Action::East: return Action::West;
        case Action::West: return Action::East;
    }
    throw std::logic_error("reverse: bad action");
}

inline const char* action_name(Action a) {
    switch (a) {
        case Action::North: return "N";
        case Action::South: return "S";
        case Action::East: return "E";
        case Action::West: return "W";
    }
    return "?";
}

enum class Side { None, Left, Right };

inline const char* side_name(Side s) {
    switch (s) {
        case Side::None: return "none";
        case Side::Left: return "left";
        case Side::Right: return "right";
    }
    return "?";
}

enum class Zone { Left, Right, Central };

// Reward contingencies. Tasks 1/2 run with one arm physically blocked.
enum class TaskId : int {
    RightBlockedLeft = 1,  // always rewarded right, left arm blocked
    LeftBlockedRight = 2,  // always rewarded left, right arm blocked
    Right = 3,
    Left = 4,
    Alternate = 5,
};

inline TaskId task_from_int(int v) {
    if (v < 1 || v > 5) throw std::invalid_argument("task id must be in 1..5");
    return static_cast<TaskId>(v);
}

inline Side task_blocked_side(TaskId t) {
    if (t == TaskId::RightBlockedLeft) return Side::Left;
    if (t == TaskId::LeftBlockedRight) return Side::Right;
    return Side::None;
}

// Side rewarded on arrival, given the side of the last reward (task 5 only
// consults it; on a fresh memory either side of the alternation is rewarded).
inline bool task_rewards(TaskId t, Side arrival_side, Side last_rewarded) {
    switch (t) {
        case TaskId::RightBlockedLeft:
        case TaskId::Right: return arrival_side == Side::Right;
        case TaskId::LeftBlockedRight:
        case TaskId::Left: return arrival_side == Side::Left;
        case TaskId::Alternate:
            if (last_rewarded == Side::None) return arrival_side != Side::None;
            return arrival_side != Side::None && arrival_side != last_rewarded;
    }
    return false;
}

struct Coord {
    int x = 0, y = 0;
    bool operator==(const Coord&) const = default;
};

struct Maze {
    int width = 0, height = 0;
    std::vector<Coord> cells;                  // open cells, row-major ids
    std::vector<std::array<int, 4>> adjacency; // per cell, per action; -1 = wall
    std::vector<Zone> zones;
    int start_cell = -1;
    int left_reward = -1;
    int right_reward = -1;
    int t1 = -1;  // junction at the stem bottom
    int t2 = -1;  // choice junction at the stem top
    // canonical lap orientation: true where moving from the cell by the
    // action follows the direction of travel (stem northward, laps outward
    // from T2 and back to T1)
    std::vector<std::array<bool, 4>> canonical;

    int num_cells() const { return static_cast<int>(cells.size()); }

    int cell_at(int x, int y) const {
        if (x < 0 || x >= width || y < 0 || y >= height) return -1;
        return grid_[static_cast<std::size_t>(y) * width + x];
    }

    int neighbor(int cell, Action a) const { return adjacency[cell][static_cast<int>(a)]; }

    Side site_side(int cell) const {
        if (cell == left_reward) return Side::Left;
        if (cell == right_reward) return Side::Right;
        return Side::None;
    }

    int reward_site(Side s) const { return s == Side::Left ? left_reward : right_reward; }

    // The arm blockade used in tasks 1/2: the two cells flanking T2 and T1 on
    // the blocked side, which seals that half of the loop.
    std::vector<int> default_blocking(Side side) const {
        if (side == Side::None) return {};
        const Action a = side == Side::Left ? Action::West : Action::East;
        std::vector<int> blocked;
        for (int junction : {t2, t1}) {
            const int c = neighbor(junction, a);
            if (c < 0) throw MazeError("default_blocking: junction has no arm on that side");
            blocked.push_back(c);
        }
        return blocked;
    }

    static Maze parse(std::istream& in);
    static Maze load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw MazeError("cannot open maze file: " + path);
        return parse(f);
    }

    std::vector<int> grid_;  // (x,y) -> cell id or -1
};

namespace detail {

// Walks a degree-2 corridor from `from` through `first` until reaching `stop`.
inline std::vector<int> follow_corridor(const Maze& m, int from, int first, int stop) {
    std::vector<int> path{from, first};
    int prev = from, cur = first;
    while (cur != stop) {
        int next = -1;
        for (Action a : kActions) {
            const int n = m.neighbor(cur, a);
            if (n >= 0 && n != prev) {
                if (next >= 0) throw MazeError("maze corridor is not degree-2; cannot orient laps");
                next = n;
            }
        }
        if (next < 0) throw MazeError("maze corridor dead-ends before reaching junction");
        prev = cur;
        cur = next;
        path.push_back(cur);
        if (path.size() > m.cells.size() + 2) throw MazeError("maze corridor loops without reaching junction");
    }
    return path;
}

}  // namespace detail

inline Maze Maze::parse(std::istream& in) {
    std::vector<std::string> rows, zone_rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '%') {
            if (line.size() >= 2 && line[1] == 'z') {
                std::string z = line.substr(2);
                if (!z.empty() && z[0] == ' ') z.erase(0, 1);
                zone_rows.push_back(z);
            }
            continue;
        }
        rows.push_back(line);
    }
    if (rows.empty()) throw MazeError("maze file has no grid rows");

    Maze m;
    m.height = static_cast<int>(rows.size());
    m.width = static_cast<int>(rows[0].size());
    for (const auto& r : rows)
        if (static_cast<int>(r.size()) != m.width) throw MazeError("maze rows have unequal lengths");
    if (!zone_rows.empty() && static_cast<int>(zone_rows.size()) != m.height)
        throw MazeError("zone rows do not match grid height");

    m.grid_.assign(static_cast<std::size_t>(m.width) * m.height, -1);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const char c = rows[y][x];
            if (c == '#') continue;
            if (c != '.' && c != 'S' && c != 'L' && c != 'R' && c != '1' && c != '2')
                throw MazeError(std::string("unexpected maze character '") + c + "'");
            const int id = m.num_cells();
            m.grid_[static_cast<std::size_t>(y) * m.width + x] = id;
            m.cells.push_back({x, y});
            switch (c) {
                case 'S': m.start_cell = id; break;
                case 'L': m.left_reward = id; break;
                case 'R': m.right_reward = id; break;
                case '1': m.t1 = id; break;
                case '2': m.t2 = id; break;
                default: break;
            }
        }
    }
    if (m.num_cells() != 32)
        throw MazeError("maze must have exactly 32 open cells, got " + std::to_string(m.num_cells()));
    if (m.start_cell < 0 || m.left_reward < 0 || m.right_reward < 0 || m.t1 < 0 || m.t2 < 0)
        throw MazeError("maze must mark S, L, R, 1 and 2 exactly once");

    m.adjacency.resize(m.cells.size());
    for (int id = 0; id < m.num_cells(); ++id) {
        const Coord c = m.cells[id];
        m.adjacency[id][static_cast<int>(Action::North)] = m.cell_at(c.x, c.y - 1);
        m.adjacency[id][static_cast<int>(Action::South)] = m.cell_at(c.x, c.y + 1);
        m.adjacency[id][static_cast<int>(Action::East)] = m.cell_at(c.x + 1, c.y);
        m.adjacency[id][static_cast<int>(Action::West)] = m.cell_at(c.x - 1, c.y);
    }

    // reachability of both reward sites in the unblocked maze
    {
        std::vector<char> seen(m.cells.size(), 0);
        std::queue<int> q;
        q.push(m.start_cell);
        seen[m.start_cell] = 1;
        while (!q.empty()) {
            const int c = q.front();
            q.pop();
            for (Action a : kActions) {
                const int n = m.neighbor(c, a);
                if (n >= 0 && !seen[n]) {
                    seen[n] = 1;
                    q.push(n);
                }
            }
        }
        if (!seen[m.left_reward] || !seen[m.right_reward])
            throw MazeError("a reward site is unreachable from the start cell");
    }

    // zones
    m.zones.resize(m.cells.size());
    if (!zone_rows.empty()) {
        for (int id = 0; id < m.num_cells(); ++id) {
            const Coord c = m.cells[id];
            if (c.x >= static_cast<int>(zone_rows[c.y].size()))
                throw MazeError("zone row too short");
            switch (zone_rows[c.y][c.x]) {
                case 'l': m.zones[id] = Zone::Left; break;
                case 'r': m.zones[id] = Zone::Right; break;
                case 'c': m.zones[id] = Zone::Central; break;
                default: throw MazeError("zone grid must use l/r/c on open cells");
            }
        }
    } else {
        const int stem_x = m.cells[m.t2].x;
        for (int id = 0; id < m.num_cells(); ++id) {
            const int x = m.cells[id].x;
            m.zones[id] = x < stem_x ? Zone::Left : (x > stem_x ? Zone::Right : Zone::Central);
        }
    }

    // canonical lap orientation from three corridor walks
    m.canonical.assign(m.cells.size(), {false, false, false, false});
    auto mark = [&m](const std::vector<int>& path) {
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            for (Action a : kActions) {
                if (m.neighbor(path[i], a) == path[i + 1]) m.canonical[path[i]][static_cast<int>(a)] = true;
            }
        }
    };
    const int left_first = m.neighbor(m.t2, Action::West);
    const int right_first = m.neighbor(m.t2, Action::East);
    const int stem_first = m.neighbor(m.t1, Action::North);
    if (left_first < 0 || right_first < 0 || stem_first < 0)
        throw MazeError("junction arms missing; not a double-T layout");
    mark(detail::follow_corridor(m, m.t2, left_first, m.t1));
    mark(detail::follow_corridor(m, m.t2, right_first, m.t1));
    mark(detail::follow_corridor(m, m.t1, stem_first, m.t2));
    return m;
}

// A maze under a runtime blocking configuration. Precomputes geodesic
// distances (shortest path through open, unblocked cells) and reachability
// from the start cell.
class MazeView {
public:
    explicit MazeView(const Maze& maze, std::vector<int> blocked_cells = {})
        : maze_(&maze), blocked_(maze.cells.size(), 0) {
        for (int c : blocked_cells) {
            if (c < 0 || c >= maze.num_cells()) throw MazeError("blocked cell id out of range");
            blocked_[c] = 1;
        }
        if (blocked_[maze.start_cell]) throw MazeError("start cell cannot be blocked");
        const int n = maze.num_cells();
        dist_.assign(static_cast<std::size_t>(n) * n, -1);
        for (int s = 0; s < n; ++s) {
            if (blocked_[s]) continue;
            int* row = &dist_[static_cast<std::size_t>(s) * n];
            std::queue<int> q;
            q.push(s);
            row[s] = 0;
            while (!q.empty()) {
                const int c = q.front();
                q.pop();
                for (Action a : kActions) {
                    const int nb = maze.neighbor(c, a);
                    if (nb >= 0 && !blocked_[nb] && row[nb] < 0) {
                        row[nb] = row[c] + 1;
                        q.push(nb);
                    }
                }
            }
        }
    }

    const Maze& maze() const { return *maze_; }
    bool blocked(int cell) const { return blocked_[cell] != 0; }
    bool open(int cell) const { return cell >= 0 && cell < maze_->num_cells() && !blocked_[cell]; }

    // -1 when unreachable
    int geodesic(int from, int to) const {
        return dist_[static_cast<std::size_t>(from) * maze_->num_cells() + to];
    }

    bool reachable(int cell) const { return geodesic(maze_->start_cell, cell) >= 0; }

    int neighbor(int cell, Action a) const {
        const int n = maze_->neighbor(cell, a);
        return (n >= 0 && !blocked_[n]) ? n : -1;
    }

    // Reward-site reachability; the check on the blocked side is waived for
    // the blocked-arm tasks.
    void check_sites(TaskId task) const {
        const Side blocked_side = task_blocked_side(task);
        if (blocked_side != Side::Left && !reachable(maze_->left_reward))
            throw MazeError("left reward site unreachable under current blocking");
        if (blocked_side != Side::Right && !reachable(maze_->right_reward))
            throw MazeError("right reward site unreachable under current blocking");
    }

private:
    const Maze* maze_;
    std::vector<char> blocked_;
    std::vector<int> dist_;
};

// --- reward memory -----------------------------------------------------

// History of the last two rewarded sides; (L,R) activation levels follow
// from it: 1 for the last rewarded side, 0.5 for the penultimate one.
struct RewardMemory {
    Side last = Side::None;
    Side penult = Side::None;

    double l() const { return last == Side::Left ? 1.0 : (penult == Side::Left ? 0.5 : 0.0); }
    double r() const { return last == Side::Right ? 1.0 : (penult == Side::Right ? 0.5 : 0.0); }

    bool operator==(const RewardMemory&) const = default;
};

// Memory moves only on rewarded events.
inline RewardMemory update_memory(RewardMemory m, Side rewarded) {
    if (rewarded == Side::None) return m;
    return RewardMemory{rewarded, m.last};
}

// --- state coding -------------------------------------------------------

constexpr int kPlaceCells = 32;
constexpr int kStateDim = kPlaceCells + 2;

using StateVector = std::vector<double>;

// Linear place-field kernel over geodesic distance: 1 at the cell itself,
// 0 from `radius` onward. Fields shrink automatically behind blocked arms
// because distances are geodesic, not Manhattan.
struct PlaceKernel {
    double radius = 3.0;
    double operator()(int geodesic_dist) const {
        if (geodesic_dist < 0) return 0.0;
        const double v = (radius - geodesic_dist) / radius;
        return v > 0.0 ? v : 0.0;
    }
};

inline StateVector encode_state(const MazeView& view, int agent_cell, RewardMemory memory,
                                const PlaceKernel& kernel = {}) {
    if (!view.open(agent_cell)) throw MazeError("encode_state: agent cell blocked or out of range");
    const int n = view.maze().num_cells();
    StateVector s(static_cast<std::size_t>(n) + 2, 0.0);
    for (int i = 0; i < n; ++i) s[i] = kernel(view.geodesic(agent_cell, i));
    s[n] = memory.l();
    s[n + 1] = memory.r();
    return s;
}

// argmax over the place components; ties break toward the lowest cell id.
// All-zero place activity decodes to nothing (the "null state").
inline std::optional<int> decode_position(std::span<const double> state) {
    const std::size_t n = state.size() >= 2 ? state.size() - 2 : 0;
    int best = -1;
    double best_v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (state[i] > best_v) {
            best_v = state[i];
            best = static_cast<int>(i);
        }
    }
    if (best < 0) return std::nullopt;
    return best;
}

inline double mem_l(std::span<const double> state) { return state[state.size() - 2]; }
inline double mem_r(std::span<const double> state) { return state[state.size() - 1]; }

// Snap a raw activation to the nearest admissible memory level.
inline double nearest_memory_level(double v) {
    double best = 0.0, bd = std::abs(v);
    for (double level : {0.5, 1.0}) {
        const double d = std::abs(v - level);
        if (d < bd) {
            bd = d;
            best = level;
        }
    }
    return best;
}

// --- movement -----------------------------------------------------------

// All actions leading to an open cell, minus the one that would re-enter the
// previous cell (the agent cannot run backward). prev < 0 means no history.
inline std::vector<Action> valid_actions(const MazeView& view, int cell, int prev) {
    std::vector<Action> out;
    for (Action a : kActions) {
        const int n = view.neighbor(cell, a);
        if (n >= 0 && n != prev) out.push_back(a);
    }
    return out;
}

struct StepResult {
    int next_cell;
    double reward;
    Side rewarded;  // Side::None when the arrival was not rewarded
};

// One move. `last_rewarded` is the side of the most recent reward (drives the
// alternation contingency). Invalid actions signal a caller bug.
inline StepResult step(const MazeView& view, TaskId task, int cell, int prev, Action action,
                       Side last_rewarded, double reward_magnitude = 0.8) {
    const int next = view.neighbor(cell, action);
    if (next < 0) throw MazeError("step: action runs into a wall");
    if (next == prev) throw MazeError("step: backward move");
    const Side side = view.maze().site_side(next);
    if (side != Side::None && task_rewards(task, side, last_rewarded))
        return {next, reward_magnitude, side};
    return {next, 0.0, Side::None};
}

// Steady-state memory history for a task, used to start runs inside the
// regime the world model is trained on.
inline RewardMemory steady_memory(TaskId task) {
    switch (task) {
        case TaskId::RightBlockedLeft:
        case TaskId::Right: return {Side::Right, Side::Right};
        case TaskId::LeftBlockedRight:
        case TaskId::Left: return {Side::Left, Side::Left};
        case TaskId::Alternate: return {Side::Right, Side::Left};
    }
    return {};
}

}  // namespace dynaq
