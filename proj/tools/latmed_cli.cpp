#include "latmed/autoencoder.hpp"
#include "latmed/backfit.hpp"
#include "latmed/benchmark.hpp"
#include "latmed/diagnostics.hpp"
#include "latmed/effects.hpp"
#include "latmed/io.hpp"
#include "latmed/simulation.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace latmed;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct FitFlags {
    std::string model = "fm";
    std::optional<Index> rank;
    std::optional<double> lambda;
    std::optional<double> step;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<std::uint64_t> seed;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--model", f.model, "confounding model")->check(CLI::IsMember({"fm", "ae"}));
    cmd->add_option("--rank", f.rank, "surrogate confounder dimension r");
    cmd->add_option("--lambda", f.lambda, "weight of the residual-correlation penalty");
    cmd->add_option("--step", f.step, "gradient step for the surrogate confounder");
    cmd->add_option("--tol", f.tol, "relative loss change that stops backfitting");
    cmd->add_option("--max-iter", f.max_iter, "maximum backfitting cycles");
    cmd->add_option("--seed", f.seed, "autoencoder initialization seed");
}

void apply(const FitFlags& f, BackfitConfig& b, AutoencoderConfig& a) {
    if (f.rank) b.rank = a.rank = *f.rank;
    if (f.lambda) b.lambda = *f.lambda;
    if (f.step) b.step = *f.step;
    if (f.tol) b.stop_tol = *f.tol;
    if (f.max_iter) b.max_iter = *f.max_iter;
    if (f.seed) a.seed = *f.seed;
}

std::string sibling(const std::string& path, const std::string& suffix) {
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    const std::string stem = (dot != std::string::npos && (slash == std::string::npos || dot > slash))
                                 ? path.substr(0, dot)
                                 : path;
    return stem + suffix;
}

void emit(const std::string& out, const Json& j) {
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(out, j);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mediation analysis with latent-confounder adjustment"};
    app.require_subcommand(1);

    // simulate
    std::string sim_config;
    std::string sim_out = "data.csv";
    std::optional<std::uint64_t> sim_seed;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset and its truth sidecar");
    simulate->add_option("--config", sim_config, "simulation config JSON")->required();
    simulate->add_option("--out", sim_out, "dataset CSV path (truth goes to <stem>.truth.json)");
    simulate->add_option("--seed", sim_seed, "overrides the config seed");

    // fit
    std::string fit_data;
    std::string fit_config;
    std::string fit_out = "fit.json";
    FitFlags fit_flags;
    auto* fitcmd = app.add_subcommand("fit", "fit output models and the surrogate confounder");
    fitcmd->add_option("--data", fit_data, "dataset CSV")->required();
    fitcmd->add_option("--config", fit_config, "JSON with optional 'backfit' and 'autoencoder' objects");
    fitcmd->add_option("--out", fit_out, "fit JSON path (U_hat goes to <stem>.uhat.csv)");
    add_fit_flags(fitcmd, fit_flags);

    // effects
    std::string eff_fit;
    std::string eff_data;
    std::string eff_out;
    auto* effects = app.add_subcommand("effects", "estimate mediation, direct and total effects");
    effects->add_option("--fit", eff_fit, "fit JSON written by 'fit'")->required();
    effects->add_option("--data", eff_data, "dataset CSV")->required();
    effects->add_option("--out", eff_out, "effects JSON path (stdout when omitted)");

    // rank-select
    std::string rank_data;
    auto* rank = app.add_subcommand("rank-select", "residual PCA eigenvalues and eigengap rank");
    rank->add_option("--data", rank_data, "dataset CSV")->required();

    // benchmark
    std::string bench_config;
    std::string bench_out;
    std::optional<int> bench_jobs;
    std::optional<std::uint64_t> bench_seed;
    auto* bench = app.add_subcommand("benchmark", "Monte Carlo bias and prediction benchmark");
    bench->add_option("--config", bench_config, "benchmark config JSON")->required();
    bench->add_option("--out", bench_out, "report CSV path (stdout when omitted)");
    bench->add_option("--jobs", bench_jobs, "concurrent replications");
    bench->add_option("--seed", bench_seed, "master seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*simulate) {
            SimulationRequest req = simulation_from_json(read_json(sim_config));
            if (sim_seed) req.config.seed = *sim_seed;
            const MediationDataset ds = generate(req.generator, req.config);
            write_csv(sim_out, ds);
            Json side = {{"generator", to_string(req.generator)},
                         {"config", to_json(req.config)},
                         {"truth", to_json(*ds.truth)}};
            write_json(sibling(sim_out, ".truth.json"), side);
        } else if (*fitcmd) {
            BackfitConfig bcfg;
            AutoencoderConfig acfg;
            if (!fit_config.empty()) {
                const Json j = read_json(fit_config);
                if (j.contains("backfit")) bcfg = backfit_from_json(j.at("backfit"));
                if (j.contains("autoencoder")) acfg = autoencoder_from_json(j.at("autoencoder"));
            }
            apply(fit_flags, bcfg, acfg);
            const MediationDataset ds = read_csv(fit_data);
            const FitResult result = fit_flags.model == "ae" ? fit_ae(ds, bcfg, acfg) : fit(ds, bcfg);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
            write_json(fit_out, to_json(result));
            write_matrix_csv(sibling(fit_out, ".uhat.csv"), result.confounder.u_hat, "U");
        } else if (*effects) {
            const FitResult f = fit_from_json(read_json(eff_fit));
            const MediationDataset ds = read_csv(eff_data);
            emit(eff_out, to_json(estimate_effects(f, ds)));
        } else if (*rank) {
            const MediationDataset ds = read_csv(rank_data);
            const Vector ev = residual_pca(ds, lsem_fit(ds).models);
            std::cout << "eigenvalues:";
            for (Index i = 0; i < ev.size(); ++i) std::cout << ' ' << ev(i);
            std::cout << "\nrank: " << select_rank(ev) << '\n';
        } else if (*bench) {
            BenchmarkConfig cfg = benchmark_from_json(read_json(bench_config));
            if (bench_jobs) cfg.jobs = *bench_jobs;
            if (bench_seed) cfg.master_seed = *bench_seed;
            const auto cells = run_benchmark(cfg);
            if (bench_out.empty()) {
                write_report_csv(std::cout, cells);
            } else {
                std::ofstream out(bench_out);
                if (!out) throw InvalidInput("cannot open '" + bench_out + "' for writing");
                write_report_csv(out, cells);
            }
        }
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalError;
    }
    return 0;
}
