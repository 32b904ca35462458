#include "latmed/benchmark.hpp"

#include "latmed/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <thread>

namespace latmed {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

struct Outcome {
    std::optional<ReplicationMetrics> metrics;
    std::string error;
};

}  // namespace

Method parse_method(const std::string& name) {
    if (name == "prop_fm") return Method::PropFm;
    if (name == "prop_ae") return Method::PropAe;
    if (name == "lsem") return Method::Lsem;
    throw InvalidInput("unknown method '" + name + "' (expected prop_fm, prop_ae or lsem)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::PropFm: return "prop_fm";
        case Method::PropAe: return "prop_ae";
        case Method::Lsem: return "lsem";
    }
    return "lsem";
}

void BenchmarkConfig::validate() const {
    if (replications < 1) throw InvalidInput("config key 'replications': must be at least 1");
    if (methods.empty()) throw InvalidInput("config key 'methods': must list at least one method");
    if (settings.empty()) throw InvalidInput("config key 'settings': must list at least one setting");
    if (!(test_fraction > 0 && test_fraction < 1)) {
        throw InvalidInput("config key 'test_fraction': must lie in (0, 1)");
    }
    for (const auto& s : settings) s.sim.validate();
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (cell + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ (rep + 0x85157af5ULL));
    return h;
}

std::pair<std::vector<Index>, std::vector<Index>> train_test_split(Index n, double test_fraction,
                                                                   std::uint64_t seed) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - test_fraction)));
    std::vector<Index> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Index> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

ReplicationMetrics run_method(Method method, const MediationDataset& ds, const BenchmarkConfig& config,
                              std::uint64_t seed) {
    if (!ds.truth) throw InvalidInput("benchmark datasets must carry simulation truth");
    AutoencoderConfig ae = config.autoencoder;
    ae.seed = seed;

    auto fit_models = [&](const MediationDataset& d) -> FitResult {
        switch (method) {
            case Method::PropFm: return fit(d, config.backfit);
            case Method::PropAe: return fit_ae(d, config.backfit, ae);
            case Method::Lsem: break;
        }
        FitResult f;
        f.models = lsem_fit(d).models;
        return f;
    };

    ReplicationMetrics out;
    const FitResult full = fit_models(ds);
    const BiasEntry bias = bias_report(estimate_effects(full.models, ds), *ds.truth);
    out.bias_total = bias.bias_total;
    out.bias_med = bias.bias_med;

    if (config.compute_mse) {
        const auto [train_rows, test_rows] = train_test_split(ds.n(), config.test_fraction, splitmix64(seed));
        const MediationDataset train = ds.subset(train_rows);
        const MediationDataset test = ds.subset(test_rows);
        const FitResult f = fit_models(train);
        out.mse_outcome = method == Method::Lsem ? outcome_mse(f.models, test) : outcome_mse(f, test);
    }
    return out;
}

std::vector<CellResult> run_benchmark(const BenchmarkConfig& config) {
    config.validate();
    const std::size_t n_settings = config.settings.size();
    const std::size_t n_methods = config.methods.size();
    const auto reps = static_cast<std::size_t>(config.replications);

    // outcomes[(setting * reps + rep) * n_methods + method]
    std::vector<Outcome> outcomes(n_settings * reps * n_methods);
    std::atomic<std::size_t> next{0};
    const std::size_t tasks = n_settings * reps;

    auto worker = [&] {
        for (std::size_t task = next++; task < tasks; task = next++) {
            const std::size_t s = task / reps;
            const std::size_t r = task % reps;
            const std::uint64_t seed = replication_seed(config.master_seed, s, r);
            std::optional<MediationDataset> ds;
            std::string gen_error;
            try {
                LinearSimConfig sim = config.settings[s].sim;
                sim.seed = seed;
                ds = generate(config.settings[s].generator, sim);
            } catch (const std::exception& e) {
                gen_error = std::string("generation failed: ") + e.what();
            }
            for (std::size_t m = 0; m < n_methods; ++m) {
                Outcome& slot = outcomes[task * n_methods + m];
                if (!ds) {
                    slot.error = gen_error;
                    continue;
                }
                try {
                    slot.metrics = run_method(config.methods[m], *ds, config, seed);
                } catch (const std::exception& e) {
                    slot.error = e.what();
                }
            }
        }
    };

    unsigned jobs = config.jobs > 0 ? static_cast<unsigned>(config.jobs) : std::thread::hardware_concurrency();
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<CellResult> cells;
    for (std::size_t s = 0; s < n_settings; ++s) {
        for (std::size_t m = 0; m < n_methods; ++m) {
            CellResult cell;
            cell.setting = config.settings[s].name;
            cell.generator = config.settings[s].generator;
            cell.n = config.settings[s].sim.n;
            cell.k = config.settings[s].sim.k;
            cell.method = config.methods[m];
            std::vector<ReplicationMetrics> ok;
            for (std::size_t r = 0; r < reps; ++r) {
                const Outcome& o = outcomes[(s * reps + r) * n_methods + m];
                if (o.metrics) {
                    ok.push_back(*o.metrics);
                } else {
                    if (cell.failed++ == 0) cell.first_error = o.error;
                }
            }
            cell.report = aggregate(ok);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

void write_report_csv(std::ostream& out, const std::vector<CellResult>& cells) {
    out << "setting,generator,n,k,method,replications,failed,bias_total_mean,bias_total_sd,"
           "bias_med_mean,bias_med_sd,mse_mean,mse_sd,error\n";
    char buf[256];
    for (const auto& c : cells) {
        const BiasReport& r = c.report;
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.bias_total, r.sd_bias_total,
                      r.bias_med, r.sd_bias_med, r.mse_outcome, r.sd_mse_outcome);
        out << csv_field(c.setting) << ',' << to_string(c.generator) << ',' << c.n << ',' << c.k << ','
            << to_string(c.method) << ',' << r.replications << ',' << c.failed << ',' << buf << ','
            << csv_field(c.first_error) << '\n';
    }
}

BenchmarkConfig benchmark_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidInput("benchmark config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        static const std::vector<std::string> known{"master_seed", "replications", "jobs",        "methods",
                                                    "settings",    "backfit",      "autoencoder", "compute_mse",
                                                    "test_fraction"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidInput("unknown benchmark config key '" + key + "'");
        }
    }
    BenchmarkConfig c;
    try {
        if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("replications")) c.replications = j.at("replications").get<int>();
        if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
        if (j.contains("compute_mse")) c.compute_mse = j.at("compute_mse").get<bool>();
        if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("benchmark config: ") + e.what());
    }
    if (j.contains("backfit")) c.backfit = backfit_from_json(j.at("backfit"));
    if (j.contains("autoencoder")) c.autoencoder = autoencoder_from_json(j.at("autoencoder"));
    if (!j.contains("settings")) throw InvalidInput("missing required config key 'settings'");
    std::size_t index = 0;
    for (Json s : j.at("settings")) {
        BenchmarkSetting setting;
        if (s.contains("name")) {
            setting.name = s.at("name").get<std::string>();
            s.erase("name");
        } else {
            setting.name = "setting" + std::to_string(index);
        }
        const SimulationRequest req = simulation_from_json(s);
        setting.generator = req.generator;
        setting.sim = req.config;
        c.settings.push_back(std::move(setting));
        ++index;
    }
    c.validate();
    return c;
}

}  // namespace latmed
