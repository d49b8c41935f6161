// scratch: measure GALMO convergence on the alternation predecessor data
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "dynaq/galmo.hpp"
#include "dynaq/maze.hpp"
#include "dynaq/world_model.hpp"

using namespace dynaq;

int main(int argc, char** argv) {
    const int epochs = argc > 1 ? std::atoi(argv[1]) : 4000;
    const double radius = argc > 2 ? std::atof(argv[2]) : 3.0;
    const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1234;
    const int warmup = argc > 4 ? std::atoi(argv[4]) : 3000;
    const Maze maze = Maze::load(std::string(DYNAQ_SOURCE_DIR) + "/data/default.maze");
    CollectOptions opt;
    opt.kernel.radius = radius;
    const auto data = collect_exhaustive(maze, {TaskId::Alternate}, opt);
    std::printf("dataset: %zu samples, %zu multi-pred groups\n", data.size(),
                multi_predecessor_groups(data).size());

    for (Action a : kActions) {
        const SampleSet s = predecessor_samples(data, a);
        Rng rng(seed);
        Rng init = rng.fork(std::string("init_") + action_name(a));
        ExpertEnsemble ens(NetKind::P, 34, 34, init);
        GalmoConfig cfg;
        cfg.max_epochs = epochs;
        cfg.theta_warmup_epochs = warmup;
        Rng train_rng = rng.fork(std::string("train_") + action_name(a));
        const TrainResult res = train(ens, s, cfg, train_rng);
        std::vector<double> errs = res.final_min_errors;
        std::sort(errs.begin(), errs.end());
        std::printf("action %s: %2zu samples=%zu  med %.4f  q90 %.4f  max %.4f\n", action_name(a),
                    ens.size(), s.size(), errs[errs.size() / 2], errs[errs.size() * 9 / 10],
                    errs.back());
    }
    return 0;
}
