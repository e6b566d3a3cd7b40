#include "rgr/sweep.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

namespace rgr {

int default_step_cutoff(int m, int d_model) {
    struct Row {
        int m;
        int d_model;
        int steps;
    };
    static constexpr Row table[] = {
        {64, 16, 20000},   {64, 32, 20000},   {64, 64, 20000},    {128, 16, 20000},   {128, 32, 20000},
        {128, 64, 20000},  {256, 16, 30000},  {256, 32, 20000},   {256, 64, 20000},   {512, 16, 80000},
        {512, 32, 20000},  {512, 64, 20000},  {1024, 128, 80000}, {2048, 256, 80000}, {4096, 512, 200000},
    };
    for (const auto& r : table) {
        if (r.m == m && r.d_model == d_model) {
            return r.steps;
        }
    }
    return 20000;
}

int step_cutoff(const SweepConfig& sweep, int m, int d_model) {
    for (const auto& c : sweep.cutoffs) {
        if (c.m == m && c.d_model == d_model) {
            return c.steps;
        }
    }
    return default_step_cutoff(m, d_model);
}

std::vector<SweepJob> expand_grid(const SweepConfig& sweep) {
    std::vector<SweepJob> jobs;
    for (int m : sweep.ms) {
        for (int d : sweep.d_models) {
            const int steps = step_cutoff(sweep, m, d);
            for (int h : sweep.heads) {
                std::vector<int> dks;
                if (!sweep.total_key_dims.empty()) {
                    for (int dk : sweep.total_key_dims) {
                        if (h > 0 && dk % h == 0) {
                            dks.push_back(dk);
                        }
                    }
                } else {
                    for (int per : sweep.per_head_dims) {
                        dks.push_back(h * per);
                    }
                }
                for (int dk : dks) {
                    for (Seed s : sweep.seeds) {
                        jobs.push_back({m, d, h, dk, s, steps});
                    }
                }
            }
        }
    }
    return jobs;
}

std::string sweep_config_hash(const TrainConfig& train, const SweepConfig& sweep) {
    Json j = train_config_to_json(train);
    j.erase("max_steps");
    Json cut = Json::array();
    for (const auto& c : sweep.cutoffs) {
        cut.push_back({c.m, c.d_model, c.steps});
    }
    j["step_cutoffs"] = std::move(cut);
    return hash_hex(fnv1a64(j.dump()));
}

Json run_record_to_json(const RunRecord& r, const std::string& config_hash) {
    Json j = {{"config_hash", config_hash}, {"m", r.m},         {"d_model", r.d_model},
              {"h", r.h},                   {"D_K", r.total_key_dim}, {"seed", r.seed},
              {"test_f1", r.test_f1},       {"steps", r.steps}, {"stopped_early", r.stopped_early}};
    if (r.ell > 0) {
        j["ell"] = r.ell;
    }
    if (r.ell_test > 0) {
        j["ell_test"] = r.ell_test;
    }
    return j;
}

RunRecord run_record_from_json(const Json& j) {
    RunRecord r;
    try {
        r.m = j.at("m").get<int>();
        r.d_model = j.at("d_model").get<int>();
        r.h = j.at("h").get<int>();
        r.total_key_dim = j.at("D_K").get<int>();
        r.seed = j.at("seed").get<Seed>();
        r.test_f1 = j.at("test_f1").get<double>();
        r.steps = j.at("steps").get<int>();
        r.stopped_early = j.at("stopped_early").get<bool>();
        r.ell = j.value("ell", 0);
        r.ell_test = j.value("ell_test", 0);
    } catch (const Json::exception& e) {
        throw format_error(std::string("sweep record: ") + e.what());
    }
    if (r.test_f1 < 0.0 || r.test_f1 > 1.0) {
        throw format_error("sweep record: test_f1 outside [0, 1]");
    }
    return r;
}

SweepLog read_sweep_log(const std::filesystem::path& path) {
    SweepLog log;
    std::ifstream in(path);
    if (!in) {
        return log;
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error&) {
            if (in.peek() == std::char_traits<char>::eof()) {
                break;  // torn tail
            }
            throw format_error(path.string() + ":" + std::to_string(line_no) + ": not valid JSON");
        }
        const auto hash = j.value("config_hash", std::string{});
        if (log.config_hash.empty()) {
            log.config_hash = hash;
        } else if (hash != log.config_hash) {
            throw format_error(path.string() + ":" + std::to_string(line_no) + ": mixed config hashes in one log");
        }
        log.records.push_back(run_record_from_json(j));
    }
    return log;
}

namespace {

// Cuts an interrupted final line so new records start on a fresh line.
void drop_torn_tail(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec || size == 0) {
        return;
    }
    std::ifstream in(path, std::ios::binary);
    std::string bytes(size, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    if (bytes.back() == '\n') {
        return;
    }
    const auto last = bytes.find_last_of('\n');
    in.close();
    std::filesystem::resize_file(path, last == std::string::npos ? 0 : last + 1);
}

}  // namespace

SweepSummary run_sweep(const SweepConfig& sweep, const TrainConfig& train, const std::filesystem::path& log_path,
                       const SweepOptions& options) {
    const std::string hash = sweep_config_hash(train, sweep);
    const SweepLog existing = read_sweep_log(log_path);
    if (!existing.config_hash.empty() && existing.config_hash != hash) {
        throw config_error(log_path.string() + ": log was written with config hash " + existing.config_hash +
                           ", current config hashes to " + hash);
    }
    std::set<std::tuple<int, int, int, int, Seed>> done;
    for (const auto& r : existing.records) {
        done.insert({r.m, r.d_model, r.h, r.total_key_dim, r.seed});
    }

    SweepSummary summary;
    std::vector<SweepJob> todo;
    for (const auto& job : expand_grid(sweep)) {
        ++summary.total;
        if (done.count({job.m, job.d_model, job.h, job.total_key_dim, job.seed})) {
            ++summary.skipped;
        } else {
            todo.push_back(job);
        }
    }

    drop_torn_tail(log_path);
    std::ofstream out(log_path, std::ios::app);
    if (!out) {
        throw format_error("cannot append to " + log_path.string());
    }
    std::mutex appender;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= todo.size()) {
                return;
            }
            const SweepJob& job = todo[idx];
            RunRecord rec;
            try {
                TrainConfig cfg = train;
                cfg.max_steps = job.max_steps;
                cfg.seed = job.seed;
                const auto result = train_run(job.m, job.d_model, job.h, job.total_key_dim, job.seed, cfg);
                rec = {job.m, job.d_model, job.h, job.total_key_dim, job.seed, result.test_f1, result.steps_used,
                       result.stopped_early, cfg.ell, cfg.ell_test.value_or(cfg.ell)};
            } catch (...) {
                std::lock_guard lock(appender);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = todo.size();
                return;
            }
            std::lock_guard lock(appender);
            out << run_record_to_json(rec, hash).dump() << '\n';
            out.flush();
            ++summary.completed;
            if (options.on_record) {
                options.on_record(job, rec);
            }
        }
    };

    const int n = options.serial ? 1 : std::max(1, options.jobs);
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return summary;
}

}  // namespace rgr
