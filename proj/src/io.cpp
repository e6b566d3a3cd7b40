#include "rgr/io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace rgr {

static_assert(std::endian::native == std::endian::little, "binary payloads assume a little-endian host");

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw format_error("cannot open " + path.string());
    }
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw format_error("cannot write " + path.string());
    }
    return out;
}

Json read_header(std::istream& in, const std::string& expected, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) {
        throw format_error(path.string() + ": missing header line");
    }
    Json header;
    try {
        header = Json::parse(line);
    } catch (const Json::parse_error& e) {
        throw format_error(path.string() + ": bad header: " + e.what());
    }
    if (!header.is_object() || header.value("format", "") != expected) {
        throw format_error(path.string() + ": expected a " + expected + " file");
    }
    return header;
}

void write_matrix(std::ostream& out, const Matrix& a) {
    out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols, const std::filesystem::path& path) {
    Matrix a(rows, cols);
    const auto bytes = static_cast<std::streamsize>(a.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(a.data()), bytes);
    if (in.gcount() != bytes) {
        throw format_error(path.string() + ": truncated payload");
    }
    return a;
}

template <class T>
T field(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw format_error(where + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw format_error(where + ": field '" + key + "' has the wrong type");
    }
}

}  // namespace

Json graph_to_json(const DirectedGraph& g) {
    Json edges = Json::array();
    for (const auto& e : g.edges()) {
        edges.push_back({e.source, e.target});
    }
    return {{"m", g.vertex_count()}, {"edges", std::move(edges)}};
}

Json permutation_to_json(const PermutationGraph& pi) {
    return {{"m", pi.size()}, {"pi", pi.map()}};
}

AnyGraph graph_from_json(const Json& j) {
    const std::string where = "graph";
    if (!j.is_object()) {
        throw format_error("graph: expected an object");
    }
    try {
        if (j.contains("pi")) {
            auto map = field<std::vector<int>>(j, "pi", where);
            if (j.contains("m") && field<int>(j, "m", where) != static_cast<int>(map.size())) {
                throw format_error("graph: m does not match the length of pi");
            }
            return PermutationGraph(std::move(map));
        }
        const int m = field<int>(j, "m", where);
        std::vector<Edge> edges;
        for (const auto& e : field<std::vector<std::array<int, 2>>>(j, "edges", where)) {
            edges.push_back({e[0], e[1]});
        }
        return DirectedGraph(m, std::move(edges));
    } catch (const std::invalid_argument& e) {
        throw format_error(std::string("graph: ") + e.what());
    }
}

DirectedGraph as_digraph(const AnyGraph& g) {
    if (const auto* pi = std::get_if<PermutationGraph>(&g)) {
        return pi->to_graph();
    }
    return std::get<DirectedGraph>(g);
}

Json contexts_to_json(const std::vector<Context>& contexts) {
    Json list = Json::array();
    for (const auto& c : contexts) {
        list.push_back(c.indices());
    }
    return {{"contexts", std::move(list)}};
}

std::vector<Context> contexts_from_json(const Json& j) {
    std::vector<Context> out;
    try {
        for (auto& idx : field<std::vector<std::vector<int>>>(j, "contexts", "contexts")) {
            out.emplace_back(std::move(idx));
        }
    } catch (const std::invalid_argument& e) {
        throw format_error(std::string("contexts: ") + e.what());
    }
    return out;
}

void write_embedding(const std::filesystem::path& path, const EmbeddingMatrix& X) {
    const Json header = {{"format", "rgr-embedding"}, {"m", X.m()},         {"d_model", X.d_model()},
                         {"kind", to_string(X.kind)}, {"p_B", X.p_b},       {"seed", X.seed}};
    auto out = open_out(path);
    out << header.dump() << '\n';
    write_matrix(out, X.rows);
}

EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto header = read_header(in, "rgr-embedding", path);
    const std::string where = path.string();
    EmbeddingMatrix X;
    X.kind = embedding_kind_from_string(field<std::string>(header, "kind", where));
    X.p_b = field<double>(header, "p_B", where);
    X.seed = field<Seed>(header, "seed", where);
    X.rows = read_matrix(in, field<int>(header, "m", where), field<int>(header, "d_model", where), path);
    return X;
}

void write_embedding_csv(std::ostream& out, const EmbeddingMatrix& X) {
    out << std::setprecision(17);
    for (int i = 0; i < X.m(); ++i) {
        for (int c = 0; c < X.d_model(); ++c) {
            out << (c ? "," : "") << X.rows(i, c);
        }
        out << '\n';
    }
}

void write_params(const std::filesystem::path& path, const AttentionParams& params) {
    params.validate();
    Json header = {{"format", "rgr-params"},
                   {"h", params.h()},
                   {"d_model", params.d_model()},
                   {"d_k", params.d_k()},
                   {"tau", params.tau},
                   {"construction", params.construction},
                   {"seed", params.seed}};
    if (params.trace) {
        const auto& tr = *params.trace;
        Json blocks = Json::array();
        for (const auto& b : tr.blocks) {
            blocks.push_back({{"sources", b.sources}, {"targets", b.targets}});
        }
        header["trace"] = {{"signature_kind", to_string(tr.kind)},
                           {"p", tr.p},
                           {"mu", tr.mu},
                           {"signature_rows", tr.signatures.rows()},
                           {"signature_cols", tr.signatures.cols()},
                           {"blocks", std::move(blocks)}};
    }
    auto out = open_out(path);
    // Full round-trip precision for tau.
    out << header.dump() << '\n';
    for (const auto& head : params.heads) {
        write_matrix(out, head.w_q);
        write_matrix(out, head.w_k);
    }
    if (params.trace) {
        write_matrix(out, params.trace->signatures);
    }
}

AttentionParams read_params(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto header = read_header(in, "rgr-params", path);
    const std::string where = path.string();
    const int h = field<int>(header, "h", where);
    const int d_model = field<int>(header, "d_model", where);
    const int d_k = field<int>(header, "d_k", where);
    if (h < 1 || d_model < 1 || d_k < 1) {
        throw format_error(where + ": non-positive shape in header");
    }
    AttentionParams params;
    params.tau = field<double>(header, "tau", where);
    params.construction = field<std::string>(header, "construction", where);
    params.seed = field<Seed>(header, "seed", where);
    for (int k = 0; k < h; ++k) {
        AttentionHead head;
        head.w_q = read_matrix(in, d_model, d_k, path);
        head.w_k = read_matrix(in, d_model, d_k, path);
        params.heads.push_back(std::move(head));
    }
    if (header.contains("trace")) {
        const auto& t = header.at("trace");
        ConstructionTrace tr;
        tr.kind = signature_kind_from_string(field<std::string>(t, "signature_kind", where));
        tr.p = field<double>(t, "p", where);
        tr.mu = field<double>(t, "mu", where);
        for (const auto& b : field<Json>(t, "blocks", where)) {
            tr.blocks.push_back({field<std::vector<int>>(b, "sources", where), field<std::vector<int>>(b, "targets", where)});
        }
        tr.signatures = read_matrix(in, field<int>(t, "signature_rows", where), field<int>(t, "signature_cols", where), path);
        params.trace = std::move(tr);
    }
    return params;
}

void write_scores_csv(std::ostream& out, const ScoreTensor& t, const Context& c) {
    out << std::setprecision(17) << "source,target,head,score\n";
    for (int p = 0; p < t.length(); ++p) {
        for (int q = 0; q < t.length(); ++q) {
            for (int k = 0; k < t.heads(); ++k) {
                out << c[p] << ',' << c[q] << ',' << k << ',' << t.per_head[static_cast<std::size_t>(k)](p, q) << '\n';
            }
        }
    }
}

Json read_json_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        throw format_error(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace rgr
