// rgrlab: generate graphs and embeddings, build and verify constructions,
// train, run sweeps and analyse sweep logs.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration or input error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rgr/sweep.hpp"

namespace fs = std::filesystem;
using namespace rgr;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kConfigError = 2;

struct Globals {
    std::string config;
    std::optional<Seed> seed;
    std::string out = ".";
    bool serial = false;
    int jobs = 1;
};

// Collects output paths and writes <out>/<command>.manifest.json at the end.
class Manifest {
public:
    Manifest(std::string command, const Globals& g) : g_(g) {
        m_.command = std::move(command);
        m_.started = utc_timestamp();
        m_.code_version = code_version();
        fs::create_directories(g.out);
    }

    fs::path path(const std::string& name) {
        const fs::path p = fs::path(g_.out) / name;
        m_.outputs.push_back(p.string());
        return p;
    }

    void finish(const std::string& config_hash, Seed seed) {
        m_.config_hash = config_hash;
        m_.seed = seed;
        m_.finished = utc_timestamp();
        write_json_file(fs::path(g_.out) / (m_.command + ".manifest.json"), m_.to_json());
    }

private:
    const Globals& g_;
    RunManifest m_;
};

struct Loaded {
    Config cfg;
    std::string hash;
    Seed seed = 1;
};

Loaded load(const Globals& g, bool required = true) {
    Loaded l;
    if (g.config.empty()) {
        if (required) {
            throw config_error("--config is required for this command");
        }
    } else {
        l.cfg = load_config(g.config);
        l.hash = hash_hex(fnv1a64(read_json_file(g.config).dump()));
    }
    l.seed = g.seed.value_or(l.cfg.seed);
    l.cfg.train.seed = l.seed;
    return l;
}

[[noreturn]] void missing_section(const Loaded& l, const char* section, const char* command) {
    throw config_error(l.cfg.source + ": /" + section + ": required by " + command);
}

Json report_json(const SeparationReport& r) {
    return {{"pass", r.pass},
            {"min_true_margin", r.min_true_margin},
            {"max_false_margin", r.max_false_margin},
            {"true_violations", r.true_violations},
            {"false_violations", r.false_violations}};
}

std::string kind_name(ConstructionKind k) {
    switch (k) {
        case ConstructionKind::one_hot_permutation:
            return "I";
        case ConstructionKind::compressive_permutation:
            return "II";
        case ConstructionKind::general_embedding:
            return "III";
        case ConstructionKind::general_graph:
            return "IV";
    }
    return "?";
}

void write_graph(const fs::path& path, const ConstructionDraw& d) {
    write_json_file(path, d.permutation ? permutation_to_json(*d.permutation) : graph_to_json(d.graph));
}

int cmd_gen_graph(const Globals& g) {
    const auto l = load(g);
    if (!l.cfg.graph) {
        missing_section(l, "graph", "gen-graph");
    }
    const auto& gc = *l.cfg.graph;
    Manifest man("gen-graph", g);
    const auto out = man.path("graph.json");
    if (gc.kind == "permutation") {
        write_json_file(out, permutation_to_json(random_derangement(gc.m, l.seed)));
    } else if (gc.kind == "random") {
        write_json_file(out, graph_to_json(random_directed_graph(gc.m, gc.m_prime, l.seed)));
    } else {
        write_json_file(out, graph_to_json(random_bounded_degree_digraph(gc.m, gc.m_prime, gc.degree_cap, l.seed)));
    }
    man.finish(l.hash, l.seed);
    std::cout << "wrote " << out.string() << "\n";
    return kOk;
}

int cmd_gen_embed(const Globals& g, bool csv) {
    const auto l = load(g);
    if (!l.cfg.embedding) {
        missing_section(l, "embedding", "gen-embed");
    }
    const auto& ec = *l.cfg.embedding;
    EmbeddingMatrix X;
    switch (ec.kind) {
        case EmbeddingKind::one_hot:
            X = gen_one_hot(ec.m);
            break;
        case EmbeddingKind::gaussian_unit_norm:
            X = gen_gaussian_unit_norm(ec.m, ec.d_model, l.seed);
            break;
        case EmbeddingKind::sparse_binary:
            X = gen_sparse_binary(ec.m, ec.d_model, ec.p_b, l.seed);
            break;
    }
    Manifest man("gen-embed", g);
    write_embedding(man.path("embedding.bin"), X);
    if (csv) {
        std::ofstream out(man.path("embedding.csv"));
        write_embedding_csv(out, X);
    }
    man.finish(l.hash, l.seed);
    std::cout << "wrote " << X.m() << " x " << X.d_model() << " " << to_string(X.kind) << " embedding\n";
    return kOk;
}

int cmd_construct(const Globals& g) {
    const auto l = load(g);
    if (!l.cfg.construction) {
        missing_section(l, "construction", "construct");
    }
    const auto& cc = *l.cfg.construction;
    const auto& spec = cc.spec;
    Manifest man("construct", g);
    Json report = {{"construction", kind_name(spec.kind)}, {"m", spec.m}, {"seed", l.seed}};
    bool pass = false;

    if (cc.trials == 1) {
        const auto draw = draw_construction(spec, l.seed);
        const auto sep = full_separation_check(draw.params, draw.embedding, draw.graph);
        pass = sep.pass;
        write_params(man.path("construct_params.bin"), draw.params);
        write_graph(man.path("construct_graph.json"), draw);
        write_embedding(man.path("construct_embedding.bin"), draw.embedding);
        report["separation"] = report_json(sep);
        report["heads"] = draw.params.h();
        report["d_k"] = draw.params.d_k();
        report["D_K"] = draw.params.total_key_dim();
        report["d_model"] = draw.params.d_model();
        report["tau"] = draw.params.tau;
        report["edges"] = draw.graph.edge_count();
        report["lower_bound_dk_b8"] = lower_bound_dk(spec.m, draw.graph.edge_count(), draw.params.d_model(), 8);
        report["lower_bound_note"] = "additive O(1) slack dropped";
        std::cout << "construction " << kind_name(spec.kind) << ": pass=" << (pass ? "true" : "false")
                  << " min_true_margin=" << sep.min_true_margin << " max_false_margin=" << sep.max_false_margin
                  << " D_K=" << draw.params.total_key_dim() << "\n";
    } else {
        const auto mc = monte_carlo_success(spec, cc.trials, l.seed);
        pass = mc.failures == 0;
        report["trials"] = mc.trials;
        report["failures"] = mc.failures;
        report["failure_rate"] = mc.failure_rate;
        report["min_true_margin"] = mc.min_true_margin;
        report["median_true_margin"] = mc.median_true_margin;
        report["median_false_margin"] = mc.median_false_margin;
        report["D_K"] = mc.outcomes.front().total_key_dim;
        std::cout << "construction " << kind_name(spec.kind) << ": " << mc.failures << "/" << mc.trials
                  << " draws failed\n";
    }
    report["pass"] = pass;
    write_json_file(man.path("construct_report.json"), report);
    man.finish(l.hash, l.seed);
    return pass ? kOk : kVerifyFailed;
}

struct VerifyInputs {
    std::string params;
    std::string graph;
    std::string embedding;
    bool scores = false;
};

int cmd_verify(const Globals& g, const VerifyInputs& in) {
    const auto l = load(g, false);
    const auto params = read_params(in.params);
    const auto any = graph_from_json(read_json_file(in.graph));
    const auto graph = as_digraph(any);
    const auto X = read_embedding(in.embedding);
    if (graph.vertex_count() != X.m() || params.d_model() != X.d_model()) {
        throw format_error("params, graph and embedding disagree on m or d_model");
    }

    const auto sep = full_separation_check(params, X, graph);
    const auto& t = l.cfg.train;
    const int ell = std::min(t.ell, X.m());
    std::vector<Context> contexts;
    double f1 = 0.0;
    if (const auto* pi = std::get_if<PermutationGraph>(&any)) {
        contexts = sample_contexts(*pi, t.n_test, ell, t.rho, l.seed, Stream::test_contexts);
        f1 = micro_f1(params, X, *pi, contexts);
    } else {
        Rng rng(l.seed, Stream::test_contexts);
        for (int i = 0; i < t.n_test; ++i) {
            contexts.push_back(sample_uniform_context(X.m(), ell, rng));
        }
        f1 = micro_f1(params, X, graph, contexts);
    }

    Manifest man("verify", g);
    Json report = {{"separation", report_json(sep)}, {"micro_f1", f1},       {"contexts", contexts.size()},
                   {"ell", ell},                     {"seed", l.seed},       {"pass", sep.pass}};
    write_json_file(man.path("verify_report.json"), report);
    if (in.scores) {
        std::ofstream out(man.path("verify_scores.csv"));
        write_scores_csv(out, head_scores(params, X, contexts.front()), contexts.front());
    }
    man.finish(l.hash, l.seed);
    std::cout << "pass=" << (sep.pass ? "true" : "false") << " micro_f1=" << f1 << " over " << contexts.size()
              << " contexts\n";
    return sep.pass ? kOk : kVerifyFailed;
}

int cmd_train(const Globals& g) {
    const auto l = load(g);
    if (!l.cfg.run) {
        missing_section(l, "run", "train");
    }
    const auto& r = *l.cfg.run;
    const auto res = train_run(r.m, r.d_model, r.h, r.total_key_dim, l.seed, l.cfg.train);
    Manifest man("train", g);
    write_params(man.path("train_params.bin"), res.final_params);
    {
        std::ofstream out(man.path("train_loss.csv"));
        out << "step,mean_loss\n" << std::setprecision(17);
        for (const auto& p : res.loss_curve) {
            out << p.step << ',' << p.mean_loss << '\n';
        }
    }
    const Json result = {{"m", r.m},
                         {"d_model", r.d_model},
                         {"h", r.h},
                         {"D_K", r.total_key_dim},
                         {"seed", l.seed},
                         {"test_f1", res.test_f1},
                         {"last_val_f1", res.last_val_f1},
                         {"steps", res.steps_used},
                         {"stopped_early", res.stopped_early},
                         {"train", train_config_to_json(l.cfg.train)}};
    write_json_file(man.path("train_result.json"), result);
    man.finish(l.hash, l.seed);
    std::cout << "test_f1=" << res.test_f1 << " steps=" << res.steps_used
              << (res.stopped_early ? " (early stop)" : "") << "\n";
    return kOk;
}

int cmd_sweep(const Globals& g, std::string log) {
    const auto l = load(g);
    if (!l.cfg.sweep) {
        missing_section(l, "sweep", "sweep");
    }
    Manifest man("sweep", g);
    const fs::path log_path = log.empty() ? man.path("sweep.jsonl") : fs::path(log);
    if (!log.empty()) {
        man.path(fs::relative(log_path, g.out).string());
    }
    SweepOptions opts;
    opts.jobs = g.jobs;
    opts.serial = g.serial;
    opts.on_record = [](const SweepJob& j, const RunRecord& r) {
        std::cerr << "m=" << j.m << " d_model=" << j.d_model << " h=" << j.h << " D_K=" << j.total_key_dim
                  << " seed=" << j.seed << " f1=" << r.test_f1 << " steps=" << r.steps << "\n";
    };
    const auto s = run_sweep(*l.cfg.sweep, l.cfg.train, log_path, opts);
    man.finish(l.hash, l.seed);
    std::cout << s.completed << " runs completed, " << s.skipped << " already in " << log_path.string() << "\n";
    return kOk;
}

std::vector<RunRecord> load_runs(const std::string& log) {
    const auto parsed = read_sweep_log(log);
    if (parsed.records.empty()) {
        throw format_error(log + ": sweep log has no records, nothing to report");
    }
    return parsed.records;
}

std::string opt_str(const std::optional<int>& v) {
    return v ? std::to_string(*v) : "";
}

Json opt_json(const std::optional<int>& v) {
    return v ? Json(*v) : Json(nullptr);
}

int cmd_analyze(const Globals& g, const std::string& log, bool exclude_flag) {
    const auto l = load(g, false);
    const auto& ac = l.cfg.analyze;
    const bool exclude = exclude_flag || ac.exclude_small_d_model;
    const auto records = aggregate_runs(load_runs(log), ac.level);

    std::map<std::pair<int, int>, std::vector<SweepRecord>> groups;
    for (const auto& r : records) {
        groups[{r.m, r.d_model}].push_back(r);
    }

    Json points = Json::array();
    Json warnings = Json::array();
    std::vector<Point> capacity;
    std::vector<Point> heads;
    Manifest man("analyze", g);
    std::ofstream csv(man.path("dk_star.csv"));
    csv << "m,d_model,x,dk_star,dk_star_optimistic,dk_star_conservative,h_star,h_min,h_max,excluded\n";
    csv << std::setprecision(17);
    for (const auto& [key, recs] : groups) {
        const auto [m, d] = key;
        const double x = m * std::log(static_cast<double>(m)) / d;
        const bool excluded = exclude && d == 16 && m > 64;
        const auto est = extract_dk_star(recs, ac.bar);
        const auto hi = optimal_heads_interval(recs, ac.alpha, ac.bar, ac.pool_tolerance);
        if (!est.central) {
            warnings.push_back("m=" + std::to_string(m) + " d_model=" + std::to_string(d) +
                               ": no configuration reaches the bar, D_K* absent");
        } else if (!excluded) {
            capacity.push_back({x, static_cast<double>(*est.central)});
            heads.push_back({static_cast<double>(m) / d, static_cast<double>(hi->h_star)});
        }
        Json p = {{"m", m},
                  {"d_model", d},
                  {"x", x},
                  {"dk_star", opt_json(est.central)},
                  {"dk_star_optimistic", opt_json(est.optimistic)},
                  {"dk_star_conservative", opt_json(est.conservative)},
                  {"h_star", opt_json(est.h_star)},
                  {"h_min", opt_json(est.h_min)},
                  {"h_max", opt_json(est.h_max)},
                  {"excluded", excluded}};
        if (hi) {
            p["head_pool"] = hi->pool;
            p["heads_retained"] = hi->retained;
        }
        points.push_back(std::move(p));
        csv << m << ',' << d << ',' << x << ',' << opt_str(est.central) << ',' << opt_str(est.optimistic) << ','
            << opt_str(est.conservative) << ',' << opt_str(est.h_star) << ',' << opt_str(est.h_min) << ','
            << opt_str(est.h_max) << ',' << (excluded ? 1 : 0) << '\n';
    }

    Json summary = {{"points", points}, {"bar", ac.bar}, {"alpha", ac.alpha}, {"level", ac.level},
                    {"log_base", "natural"}, {"excluded_small_d_model", exclude}};
    bool have_x = false;
    for (const auto& p : capacity) {
        have_x = have_x || p.x != 0.0;
    }
    if (capacity.size() >= 2 && have_x) {
        const auto fit = fit_scaling(capacity);
        summary["capacity_fit"] = {{"slope", fit.slope}, {"r_squared", fit.r_squared}, {"points", capacity.size()}};
        std::cout << "capacity law: D_K* = " << fit.slope << " * m ln m / d_model (R^2 = " << fit.r_squared << ", "
                  << capacity.size() << " points)\n";
    } else {
        warnings.push_back("capacity fit skipped: fewer than two usable D_K* points");
    }
    bool distinct_r = false;
    for (const auto& p : heads) {
        distinct_r = distinct_r || p.x != heads.front().x;
    }
    if (heads.size() >= 2 && distinct_r) {
        const auto fit = fit_affine(heads);
        summary["head_fit"] = {{"slope", fit.slope},
                               {"intercept", fit.intercept},
                               {"r_squared", fit.r_squared},
                               {"points", heads.size()}};
    } else {
        warnings.push_back("head fit skipped: needs two distinct m/d_model ratios");
    }
    summary["warnings"] = warnings;
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w.get<std::string>() << "\n";
    }
    write_json_file(man.path("analysis.json"), summary);
    man.finish(l.hash, l.seed);
    return kOk;
}

int cmd_report(const Globals& g, const std::string& log) {
    const auto l = load(g, false);
    const auto records = aggregate_runs(load_runs(log), l.cfg.analyze.level);
    Manifest man("report", g);
    std::ofstream csv(man.path("report.csv"));
    csv << "m,d_model,h,D_K,seeds,mean_f1,ci_low,ci_high\n" << std::setprecision(17);
    std::cout << std::left << std::setw(6) << "m" << std::setw(9) << "d_model" << std::setw(5) << "h" << std::setw(7)
              << "D_K" << std::setw(7) << "seeds" << "mean_f1 [ci]\n";
    for (const auto& r : records) {
        csv << r.m << ',' << r.d_model << ',' << r.h << ',' << r.total_key_dim << ',' << r.seeds << ',' << r.mean_f1
            << ',' << r.f1_ci_low << ',' << r.f1_ci_high << '\n';
        std::cout << std::setw(6) << r.m << std::setw(9) << r.d_model << std::setw(5) << r.h << std::setw(7)
                  << r.total_key_dim << std::setw(7) << r.seeds << std::fixed << std::setprecision(4) << r.mean_f1
                  << " [" << r.f1_ci_low << ", " << r.f1_ci_high << "]\n"
                  << std::defaultfloat;
    }
    man.finish(l.hash, l.seed);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relational graph recognition lab"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "override the config seed");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_flag("--serial", g.serial, "run sweep jobs one at a time");
    app.add_option("--jobs", g.jobs, "sweep worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    auto* gen_graph = app.add_subcommand("gen-graph", "draw a graph from the graph section");
    auto* gen_embed = app.add_subcommand("gen-embed", "draw an embedding from the embedding section");
    bool csv = false;
    gen_embed->add_flag("--csv", csv, "also write embedding.csv");
    auto* construct = app.add_subcommand("construct", "build a construction and check separation");
    auto* verify = app.add_subcommand("verify", "check stored params against a graph and embedding");
    VerifyInputs vin;
    verify->add_option("--params", vin.params, "params file")->required()->check(CLI::ExistingFile);
    verify->add_option("--graph", vin.graph, "graph JSON")->required()->check(CLI::ExistingFile);
    verify->add_option("--embedding", vin.embedding, "embedding file")->required()->check(CLI::ExistingFile);
    verify->add_flag("--scores", vin.scores, "write per-head scores for the first context");
    auto* train = app.add_subcommand("train", "train one (m, d_model, h, D_K) point from the run section");
    auto* sweep = app.add_subcommand("sweep", "run or resume the sweep grid");
    std::string sweep_log;
    sweep->add_option("--log", sweep_log, "sweep log (default <out>/sweep.jsonl)");
    auto* analyze = app.add_subcommand("analyze", "D_K*, h* and scaling fits from a sweep log");
    std::string analyze_log;
    bool exclude = false;
    analyze->add_option("--log", analyze_log, "sweep log")->required()->check(CLI::ExistingFile);
    analyze->add_flag("--exclude-small-d-model", exclude, "leave (d_model=16, m>64) points out of the fits");
    auto* report = app.add_subcommand("report", "per-point mean F1 and intervals from a sweep log");
    std::string report_log;
    report->add_option("--log", report_log, "sweep log")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*gen_graph) {
            return cmd_gen_graph(g);
        }
        if (*gen_embed) {
            return cmd_gen_embed(g, csv);
        }
        if (*construct) {
            return cmd_construct(g);
        }
        if (*verify) {
            return cmd_verify(g, vin);
        }
        if (*train) {
            return cmd_train(g);
        }
        if (*sweep) {
            return cmd_sweep(g, sweep_log);
        }
        if (*analyze) {
            return cmd_analyze(g, analyze_log, exclude);
        }
        if (*report) {
            return cmd_report(g, report_log);
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}
