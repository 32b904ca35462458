#pragma once

#include "latmed/autoencoder.hpp"
#include "latmed/backfit.hpp"
#include "latmed/effects.hpp"
#include "latmed/io.hpp"
#include "latmed/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace latmed {

enum class Method { PropFm, PropAe, Lsem };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct BenchmarkSetting {
    std::string name;
    Generator generator = Generator::Linear;
    LinearSimConfig sim;  // seed is replaced per replication
};

struct BenchmarkConfig {
    std::uint64_t master_seed = 1;
    int replications = 50;
    int jobs = 1;
    std::vector<Method> methods{Method::PropFm, Method::Lsem};
    std::vector<BenchmarkSetting> settings;
    BackfitConfig backfit;
    AutoencoderConfig autoencoder;
    /// When set, each replication also fits on an 80/20 split (see
    /// test_fraction) and reports the held-out outcome MSE.
    bool compute_mse = true;
    double test_fraction = 0.2;

    void validate() const;
};

struct CellResult {
    std::string setting;
    Generator generator = Generator::Linear;
    Index n = 0;
    Index k = 0;
    Method method = Method::Lsem;
    BiasReport report;
    int failed = 0;
    std::string first_error;
};

/// Deterministic per-replication seed from (master seed, cell, replication).
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep);

/// Rows of a seeded permutation: the first round(n * (1 - test_fraction))
/// are training rows.
std::pair<std::vector<Index>, std::vector<Index>> train_test_split(Index n, double test_fraction,
                                                                   std::uint64_t seed);

/// One method on one dataset: bias from a fit on all rows, MSE from a fit on
/// the training split (when requested).
ReplicationMetrics run_method(Method method, const MediationDataset& dataset, const BenchmarkConfig& config,
                              std::uint64_t seed);

/// Cells are ordered by setting, then method. Replications run on up to
/// `jobs` threads; a replication that throws is counted in `failed`.
std::vector<CellResult> run_benchmark(const BenchmarkConfig& config);

/// Columns: setting,generator,n,k,method,replications,failed,
/// bias_total_mean,bias_total_sd,bias_med_mean,bias_med_sd,mse_mean,mse_sd,error
void write_report_csv(std::ostream& out, const std::vector<CellResult>& cells);

BenchmarkConfig benchmark_from_json(const Json& j);

}  // namespace latmed
