#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgr/io.hpp"
#include "rgr/train.hpp"

namespace rgr {

// Malformed or inconsistent configuration; the message carries the source
// name and either line:col (syntax) or a JSON pointer (schema).
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GraphConfig {
    std::string kind = "permutation";  // permutation | random | bounded
    int m = 64;
    std::int64_t m_prime = 0;
    int degree_cap = 0;
};

struct EmbedConfig {
    EmbeddingKind kind = EmbeddingKind::gaussian_unit_norm;
    int m = 64;
    int d_model = 32;
    double p_b = 0.1;
};

struct ConstructConfig {
    ConstructionSpec spec;
    int trials = 1;
};

struct RunConfig {
    int m = 64;
    int d_model = 32;
    int h = 1;
    int total_key_dim = 48;
};

struct StepCutoff {
    int m = 0;
    int d_model = 0;
    int steps = 0;
};

struct SweepConfig {
    std::vector<int> ms{64, 128};
    std::vector<int> d_models{16, 32};
    std::vector<int> heads{1, 2, 4, 8};
    std::vector<int> total_key_dims;  // used when non-empty
    std::vector<int> per_head_dims;   // otherwise D_K = h * d_k
    std::vector<Seed> seeds{1, 2, 3};
    std::vector<StepCutoff> cutoffs;  // overrides of the built-in table
};

struct AnalyzeConfig {
    double bar = 0.99;
    double alpha = 0.05;
    double level = 0.95;
    double pool_tolerance = 0.10;
    bool exclude_small_d_model = false;
};

struct Config {
    std::string source;
    Seed seed = 1;
    TrainConfig train;  // always present, defaults pre-filled
    std::optional<GraphConfig> graph;
    std::optional<EmbedConfig> embedding;
    std::optional<ConstructConfig> construction;
    std::optional<RunConfig> run;
    std::optional<SweepConfig> sweep;
    AnalyzeConfig analyze;
};

Config parse_config(const std::string& text, const std::string& source_name = "<config>");
Config load_config(const std::filesystem::path& path);

Json train_config_to_json(const TrainConfig& cfg);

// FNV-1a over the compact dump (object keys are sorted, so the dump is canonical).
std::uint64_t fnv1a64(const std::string& bytes) noexcept;
std::string hash_hex(std::uint64_t h);

struct RunManifest {
    std::string command;
    std::string config_hash;
    Seed seed = 0;
    std::string code_version;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;

    Json to_json() const;
};

std::string utc_timestamp();
const char* code_version() noexcept;

}  // namespace rgr
