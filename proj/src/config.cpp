#include "rgr/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#ifndef RGR_CODE_VERSION
#define RGR_CODE_VERSION "0.0.0"
#endif

namespace rgr {

namespace {

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// Typed access to one JSON object; remembers which keys were read so that
// leftovers can be rejected as unknown.
class Section {
public:
    Section(const Json& j, std::string pointer, const std::string& source)
        : j_(j), pointer_(std::move(pointer)), source_(source) {
        if (!j_.is_object()) {
            fail("", "expected an object");
        }
    }

    template <class T>
    bool get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return false;
        }
        const Json& v = j_.at(key);
        convert(v, out, key);
        return true;
    }

    bool has(const char* key) const { return j_.contains(key); }
    void mark(const char* key) { seen_.insert(key); }

    Section child(const char* key) {
        seen_.insert(key);
        return Section(j_.at(key), pointer_ + "/" + key, source_);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) {
                fail(key, "unknown key");
            }
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw config_error(source_ + ": " + pointer_ + (key.empty() ? "" : "/" + key) + ": " + what);
    }

private:
    void convert(const Json& v, int& out, const char* key) const {
        if (!v.is_number_integer()) {
            fail(key, "expected an integer");
        }
        out = v.get<int>();
    }
    void convert(const Json& v, std::int64_t& out, const char* key) const {
        if (!v.is_number_integer()) {
            fail(key, "expected an integer");
        }
        out = v.get<std::int64_t>();
    }
    void convert(const Json& v, Seed& out, const char* key) const {
        if (!v.is_number_unsigned()) {
            fail(key, "expected a non-negative integer");
        }
        out = v.get<Seed>();
    }
    void convert(const Json& v, double& out, const char* key) const {
        if (!v.is_number()) {
            fail(key, "expected a number");
        }
        out = v.get<double>();
    }
    void convert(const Json& v, bool& out, const char* key) const {
        if (!v.is_boolean()) {
            fail(key, "expected true or false");
        }
        out = v.get<bool>();
    }
    void convert(const Json& v, std::string& out, const char* key) const {
        if (!v.is_string()) {
            fail(key, "expected a string");
        }
        out = v.get<std::string>();
    }
    template <class T>
    void convert(const Json& v, std::vector<T>& out, const char* key) const {
        if (!v.is_array()) {
            fail(key, "expected an array");
        }
        out.clear();
        for (const auto& item : v) {
            T x{};
            convert(item, x, key);
            out.push_back(x);
        }
    }

    const Json& j_;
    std::string pointer_;
    const std::string& source_;
    std::set<std::string> seen_;
};

void parse_train(Section s, TrainConfig& t) {
    s.get("lr", t.lr);
    s.get("alpha", t.alpha);
    s.get("ell", t.ell);
    s.get("rho", t.rho);
    s.get("max_steps", t.max_steps);
    s.get("eval_every", t.eval_every);
    s.get("patience", t.patience);
    s.get("val_pass", t.val_pass);
    s.get("n_val", t.n_val);
    s.get("n_test", t.n_test);
    s.get("beta1", t.beta1);
    s.get("beta2", t.beta2);
    s.get("eps", t.eps);
    s.get("weight_decay", t.weight_decay);
    std::string scale;
    if (s.get("init_scale", scale)) {
        if (scale == "std") {
            t.init_scale = InitScale::stddev;
        } else if (scale == "variance") {
            t.init_scale = InitScale::variance;
        } else {
            s.fail("init_scale", "expected \"std\" or \"variance\"");
        }
    }
    int ell_test = 0;
    if (s.get("ell_test", ell_test)) {
        t.ell_test = ell_test;
    }
    s.finish();
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        s.fail("", e.what());
    }
}

ConstructionKind construction_kind_from(const std::string& name, const Section& s) {
    if (name == "I") {
        return ConstructionKind::one_hot_permutation;
    }
    if (name == "II") {
        return ConstructionKind::compressive_permutation;
    }
    if (name == "III") {
        return ConstructionKind::general_embedding;
    }
    if (name == "IV") {
        return ConstructionKind::general_graph;
    }
    s.fail("kind", "expected one of I, II, III, IV");
}

void parse_construction(Section s, ConstructConfig& c) {
    std::string kind;
    if (!s.get("kind", kind)) {
        s.fail("kind", "required");
    }
    auto& spec = c.spec;
    spec.kind = construction_kind_from(kind, s);
    if (!s.get("m", spec.m)) {
        s.fail("m", "required");
    }
    s.get("d_model", spec.d_model);
    s.get("d_k", spec.d_k);
    s.get("p", spec.p);
    s.get("block_size", spec.block_size);
    s.get("mu", spec.mu);
    std::string name;
    if (s.get("embedding", name)) {
        try {
            spec.embedding = embedding_kind_from_string(name);
        } catch (const std::invalid_argument& e) {
            s.fail("embedding", e.what());
        }
    }
    s.get("p_b", spec.p_b);
    if (s.get("signatures", name)) {
        try {
            spec.signatures = signature_kind_from_string(name);
        } catch (const std::invalid_argument& e) {
            s.fail("signatures", e.what());
        }
    }
    s.get("m_prime", spec.m_prime);
    s.get("degree_cap", spec.degree_cap);
    s.get("trials", c.trials);
    s.finish();
    if (spec.m < 2) {
        s.fail("m", "must be at least 2");
    }
    if (c.trials < 1) {
        s.fail("trials", "must be positive");
    }
    if (spec.d_k < 0) {
        s.fail("d_k", "must be non-negative");
    }
    if (spec.kind == ConstructionKind::compressive_permutation && spec.d_model > spec.m) {
        s.fail("d_model", "Construction II needs d_model <= m");
    }
    if (spec.kind != ConstructionKind::one_hot_permutation && spec.d_model < 1) {
        s.fail("d_model", "must be positive");
    }
}

}  // namespace

Config parse_config(const std::string& text, const std::string& source_name) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        std::string what = e.what();
        // Drop the library's own prefix, keep its description.
        if (const auto pos = what.find("syntax error"); pos != std::string::npos) {
            what = what.substr(pos);
        }
        throw config_error(source_name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
    }

    Config cfg;
    cfg.source = source_name;
    Section s(root, "", cfg.source);
    s.get("seed", cfg.seed);
    if (s.has("train")) {
        parse_train(s.child("train"), cfg.train);
    }
    if (s.has("graph")) {
        auto g = s.child("graph");
        GraphConfig gc;
        g.get("kind", gc.kind);
        g.get("m", gc.m);
        g.get("m_prime", gc.m_prime);
        g.get("degree_cap", gc.degree_cap);
        g.finish();
        if (gc.kind != "permutation" && gc.kind != "random" && gc.kind != "bounded") {
            g.fail("kind", "expected permutation, random or bounded");
        }
        if (gc.m < 2) {
            g.fail("m", "must be at least 2");
        }
        cfg.graph = gc;
    }
    if (s.has("embedding")) {
        auto e = s.child("embedding");
        EmbedConfig ec;
        std::string kind;
        if (e.get("kind", kind)) {
            try {
                ec.kind = embedding_kind_from_string(kind);
            } catch (const std::invalid_argument& ex) {
                e.fail("kind", ex.what());
            }
        }
        e.get("m", ec.m);
        e.get("d_model", ec.d_model);
        e.get("p_b", ec.p_b);
        e.finish();
        if (ec.m < 1 || ec.d_model < 1) {
            e.fail("", "m and d_model must be positive");
        }
        cfg.embedding = ec;
    }
    if (s.has("construction")) {
        ConstructConfig cc;
        parse_construction(s.child("construction"), cc);
        cfg.construction = cc;
    }
    if (s.has("run")) {
        auto r = s.child("run");
        RunConfig rc;
        r.get("m", rc.m);
        r.get("d_model", rc.d_model);
        r.get("h", rc.h);
        r.get("D_K", rc.total_key_dim);
        r.finish();
        if (rc.h < 1 || rc.total_key_dim < 1 || rc.total_key_dim % rc.h != 0) {
            r.fail("D_K", "must be a positive multiple of h");
        }
        cfg.run = rc;
    }
    if (s.has("sweep")) {
        auto w = s.child("sweep");
        SweepConfig sc;
        w.get("m", sc.ms);
        w.get("d_model", sc.d_models);
        w.get("heads", sc.heads);
        w.get("total_key_dims", sc.total_key_dims);
        w.get("per_head_dims", sc.per_head_dims);
        w.get("seeds", sc.seeds);
        if (w.has("step_cutoffs")) {
            const Json& list = root.at("sweep").at("step_cutoffs");
            if (!list.is_array()) {
                w.fail("step_cutoffs", "expected an array");
            }
            for (std::size_t i = 0; i < list.size(); ++i) {
                Section item(list[i], "/sweep/step_cutoffs/" + std::to_string(i), cfg.source);
                StepCutoff c;
                item.get("m", c.m);
                item.get("d_model", c.d_model);
                item.get("steps", c.steps);
                item.finish();
                if (c.steps < 1) {
                    item.fail("steps", "must be positive");
                }
                sc.cutoffs.push_back(c);
            }
            w.mark("step_cutoffs");
        }
        w.finish();
        if (sc.total_key_dims.empty() == sc.per_head_dims.empty()) {
            w.fail("", "give exactly one of total_key_dims and per_head_dims");
        }
        if (sc.ms.empty() || sc.d_models.empty() || sc.heads.empty() || sc.seeds.empty()) {
            w.fail("", "m, d_model, heads and seeds must be non-empty");
        }
        cfg.sweep = sc;
    }
    if (s.has("analyze")) {
        auto a = s.child("analyze");
        a.get("bar", cfg.analyze.bar);
        a.get("alpha", cfg.analyze.alpha);
        a.get("level", cfg.analyze.level);
        a.get("pool_tolerance", cfg.analyze.pool_tolerance);
        a.get("exclude_small_d_model", cfg.analyze.exclude_small_d_model);
        a.finish();
    }
    s.finish();
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error(path.string() + ": cannot open");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

Json train_config_to_json(const TrainConfig& t) {
    Json j = {{"lr", t.lr},
              {"alpha", t.alpha},
              {"ell", t.ell},
              {"rho", t.rho},
              {"max_steps", t.max_steps},
              {"eval_every", t.eval_every},
              {"patience", t.patience},
              {"val_pass", t.val_pass},
              {"n_val", t.n_val},
              {"n_test", t.n_test},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"eps", t.eps},
              {"weight_decay", t.weight_decay},
              {"init_scale", t.init_scale == InitScale::stddev ? "std" : "variance"}};
    if (t.ell_test) {
        j["ell_test"] = *t.ell_test;
    }
    return j;
}

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json RunManifest::to_json() const {
    return {{"command", command}, {"config_hash", config_hash}, {"seed", seed},     {"code_version", code_version},
            {"started", started}, {"finished", finished},       {"outputs", outputs}};
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* code_version() noexcept {
    return RGR_CODE_VERSION;
}

}  // namespace rgr
