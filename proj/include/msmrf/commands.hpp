#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msmrf {

// Exit codes shared by every subcommand: 0 ok, 2 config/usage error,
// 3 inference failure, 4 data-shape failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInference = 3;
inline constexpr int kExitShape = 4;

struct SynthArgs {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;  // overrides the config seed
};

struct DetectArgs {
    std::string method;  // msstmrf | stmrf | threshold
    std::string data;
    std::string lattice;
    std::string config;  // model config JSON; optional for threshold
    std::string out_dir;
    std::uint64_t seed = 0;
    int burn_in = 500;
    int samples = 100;
    int thin = 5;
    int refit_every = 10;
    int chains = 1;
    bool write_marginals = false;
    bool write_region_cells = false;
};

struct EvaluateArgs {
    std::vector<std::string> pred_dirs;
    std::string truth_dir;  // empty = no truth scoring
    std::string data;
    std::string lattice;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& args);
int cmd_detect(const DetectArgs& args);
int cmd_evaluate(const EvaluateArgs& args);

}  // namespace msmrf
