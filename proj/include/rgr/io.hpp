#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "rgr/attn.hpp"

namespace rgr {

class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

// {"m":..,"edges":[[s,t],..]}
Json graph_to_json(const DirectedGraph& g);
// {"m":..,"pi":[..]}
Json permutation_to_json(const PermutationGraph& pi);

using AnyGraph = std::variant<DirectedGraph, PermutationGraph>;
// A "pi" member selects the permutation form.
AnyGraph graph_from_json(const Json& j);
DirectedGraph as_digraph(const AnyGraph& g);

Json contexts_to_json(const std::vector<Context>& contexts);
std::vector<Context> contexts_from_json(const Json& j);

// Binary files: one JSON header line, then little-endian float64 matrices
// in column-major order.
void write_embedding(const std::filesystem::path& path, const EmbeddingMatrix& X);
EmbeddingMatrix read_embedding(const std::filesystem::path& path);
void write_embedding_csv(std::ostream& out, const EmbeddingMatrix& X);

// Heads (W_Q then W_K per head), then the trace signatures when present.
void write_params(const std::filesystem::path& path, const AttentionParams& params);
AttentionParams read_params(const std::filesystem::path& path);

// source,target,head,score rows for every ordered pair, one row per head.
void write_scores_csv(std::ostream& out, const ScoreTensor& t, const Context& c);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace rgr
