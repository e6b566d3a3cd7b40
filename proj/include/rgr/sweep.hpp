#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rgr/analysis.hpp"
#include "rgr/config.hpp"

namespace rgr {

// Training-step cutoff for one grid point from the built-in table;
// 20,000 for points it does not list.
int default_step_cutoff(int m, int d_model);
int step_cutoff(const SweepConfig& sweep, int m, int d_model);

struct SweepJob {
    int m = 0;
    int d_model = 0;
    int h = 0;
    int total_key_dim = 0;
    Seed seed = 0;
    int max_steps = 0;

    bool operator==(const SweepJob&) const = default;
};

// Grid order: m, d_model, h, D_K, seed. D_K values not divisible by h are skipped.
std::vector<SweepJob> expand_grid(const SweepConfig& sweep);

// Hash of everything that changes a run's outcome besides its grid key.
std::string sweep_config_hash(const TrainConfig& train, const SweepConfig& sweep);

Json run_record_to_json(const RunRecord& r, const std::string& config_hash);
RunRecord run_record_from_json(const Json& j);

struct SweepLog {
    std::string config_hash;  // empty for an empty log
    std::vector<RunRecord> records;
};

// Reads a JSON-lines log; a torn final line (interrupted write) is ignored.
SweepLog read_sweep_log(const std::filesystem::path& path);

struct SweepOptions {
    int jobs = 1;
    bool serial = false;
    std::function<void(const SweepJob&, const RunRecord&)> on_record;  // called under the appender lock
};

struct SweepSummary {
    int total = 0;
    int skipped = 0;
    int completed = 0;
};

// Runs every grid job missing from the log and appends one line per run.
// Refuses to touch a log written under a different config hash.
SweepSummary run_sweep(const SweepConfig& sweep, const TrainConfig& train, const std::filesystem::path& log_path,
                       const SweepOptions& options = {});

}  // namespace rgr
