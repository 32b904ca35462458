#pragma once

#include "latmed/dataset.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace latmed {

using Rng = std::mt19937_64;

/// Step function: value a[l] on [b[l], b[l+1]).
struct PiecewiseSpec {
    std::vector<double> a;
    std::vector<double> b;  // strictly ascending, b.front() = -inf, b.back() = +inf

    void validate() const;
};

double piecewise(double u, const PiecewiseSpec& spec);

/// Value/cutoff tables of the nonlinear generators, indexed 1..8.
const PiecewiseSpec& piecewise_table(int which);

struct LinearSimConfig {
    Index n = 2000;
    Index k = 2;
    Index p = 2;
    double alpha_y = 1.0;
    Vector beta_m;   // k
    Vector beta_y;   // k
    Vector gamma_y;  // p
    Matrix gamma_m;  // p x k
    Vector eta;      // k + 1: eta(0) for Y, eta(j) for M_j
    double noise_sd = 1.0;
    // Per-block overrides of noise_sd; non-positive means "use noise_sd".
    double mediator_noise_sd = 0.0;
    double outcome_noise_sd = 0.0;
    double treat_scale = 0.4;
    /// Spread of each mixture component of U (a standard deviation).
    double confounder_sd = 1.5;
    std::uint64_t seed = 0;

    double mediator_sd() const { return mediator_noise_sd > 0 ? mediator_noise_sd : noise_sd; }
    double outcome_sd() const { return outcome_noise_sd > 0 ? outcome_noise_sd : noise_sd; }

    /// alpha = 1, beta_m = 1, beta_y = 0.5, gamma = 0.5, eta = 1, noise sd 1.
    static LinearSimConfig defaults(Index n, Index k, Index p = 2);
    /// Weak confounding and smaller noise, tuned so that the linear SEM
    /// baseline shows the bias levels of the benchmark tables.
    static LinearSimConfig table1_profile(Index n, Index k);

    /// Throws InvalidInput naming the offending field.
    void validate() const;
};

/// U_i ~ 0.5 N(-2, sd^2) + 0.5 N(2, sd^2).
Vector gen_confounder(Index n, std::uint64_t seed, double component_sd = 1.5);
Vector gen_confounder(Index n, Rng& rng, double component_sd = 1.5);

MediationDataset gen_linear(const LinearSimConfig& config);

/// Nonlinear settings with k = 5 on the linear skeleton of `config`
/// (eta is ignored; g-functions of U replace eta * U).
MediationDataset gen_nonlinear_lowrank(const LinearSimConfig& config, std::uint64_t seed);
MediationDataset gen_nonlinear_fullrank(const LinearSimConfig& config, std::uint64_t seed);

/// Confounding functions evaluated per subject: g_m is n x 5, g_y is n.
struct ConfoundingEffects {
    Matrix g_m;
    Vector g_y;

    /// n x 6 matrix (g_M1..g_M5, g_Y).
    Matrix stacked() const;
};

ConfoundingEffects lowrank_effects(const Vector& u);
ConfoundingEffects fullrank_effects(const Vector& u, const Vector& treatment);

enum class Generator { Linear, LowRank, FullRank };

Generator parse_generator(const std::string& name);
std::string to_string(Generator g);

/// Dispatches on the generator, seeding from config.seed.
MediationDataset generate(Generator generator, const LinearSimConfig& config);

}  // namespace latmed
