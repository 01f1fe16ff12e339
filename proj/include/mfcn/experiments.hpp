#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfcn/config.hpp"

namespace mfcn {

inline constexpr const char* kCodeVersion = "0.1.0";

// Exit codes: 0 success, 1 runtime error, 2 config validation failure,
// 3 replay mismatch.
struct RunOptions {
    std::string command;
    std::string config_path;
    std::string out_dir;
    int threads = 0;  // 0 = hardware default
    std::optional<std::uint64_t> seed_override;
};

const std::vector<std::string>& experiment_commands();

int run_experiment(const RunOptions& options);

int replay_manifest(const std::string& manifest_path, int threads = 0);

}  // namespace mfcn
