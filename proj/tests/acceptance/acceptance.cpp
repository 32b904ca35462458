// Acceptance suite. Run with a criterion number (1-8) or "all"; prints one
// PASS/FAIL line per criterion and exits nonzero if any criterion fails.

#include "latmed/autoencoder.hpp"
#include "latmed/backfit.hpp"
#include "latmed/benchmark.hpp"
#include "latmed/diagnostics.hpp"
#include "latmed/effects.hpp"
#include "latmed/simulation.hpp"

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace latmed;

namespace {

// Cycle cap for the autoencoder alternation in the benchmark criteria.
constexpr int kAeCycles = 30;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [not met]");
    }
};

std::string fmt(double v, const char* spec = "%.3f") {
    char buf[32];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

BenchmarkSetting setting(const std::string& name, Generator g, Index n, Index k) {
    BenchmarkSetting s;
    s.name = name;
    s.generator = g;
    s.sim = LinearSimConfig::table1_profile(n, k);
    return s;
}

// Mean metrics keyed by method for one setting.
std::map<Method, BiasReport> bench(const BenchmarkSetting& s, const std::vector<Method>& methods, int reps,
                                   bool mse) {
    std::map<Method, BiasReport> out;
    for (Method m : methods) {
        BenchmarkConfig c;
        c.master_seed = 20240501;
        c.replications = reps;
        c.jobs = 0;
        c.methods = {m};
        c.settings = {s};
        c.compute_mse = mse;
        if (m == Method::PropAe) c.backfit.max_iter = kAeCycles;
        const auto cells = run_benchmark(c);
        if (cells[0].failed > 0) {
            std::cerr << to_string(m) << ": " << cells[0].failed << " failed replications, first: "
                      << cells[0].first_error << '\n';
        }
        out[m] = cells[0].report;
    }
    return out;
}

Outcome criterion1() {
    auto r = bench(setting("linear_k2", Generator::Linear, 2000, 2), {Method::PropFm, Method::Lsem}, 50, false);
    const double fm = r[Method::PropFm].bias_total;
    const double ls = r[Method::Lsem].bias_total;
    Outcome o;
    o.require(fm <= 0.35, "prop_fm bias_total " + fmt(fm) + " <= 0.35");
    o.require(fm <= 0.6 * ls, "<= 0.6 x lsem " + fmt(ls));
    return o;
}

Outcome criterion2() {
    auto r = bench(setting("linear_k2", Generator::Linear, 2000, 2), {Method::Lsem}, 50, false);
    const BiasReport& l = r[Method::Lsem];
    Outcome o;
    o.require(l.bias_total >= 0.45 && l.bias_total <= 0.85, "lsem bias_total " + fmt(l.bias_total) + " in [0.45, 0.85]");
    o.require(l.bias_med >= 0.9 && l.bias_med <= 1.4, "lsem bias_med " + fmt(l.bias_med) + " in [0.9, 1.4]");
    return o;
}

Outcome criterion3() {
    auto r = bench(setting("linear_k5", Generator::Linear, 2000, 5), {Method::PropFm, Method::PropAe, Method::Lsem},
                   50, false);
    Outcome o;
    o.require(r[Method::PropFm].bias_total <= 0.4, "prop_fm bias_total " + fmt(r[Method::PropFm].bias_total) + " <= 0.4");
    o.require(r[Method::PropAe].bias_total <= 1.2, "prop_ae bias_total " + fmt(r[Method::PropAe].bias_total) + " <= 1.2");
    o.detail += " (lsem " + fmt(r[Method::Lsem].bias_total) + ")";
    return o;
}

Outcome criterion4() {
    auto r = bench(setting("lowrank", Generator::LowRank, 2000, 5), {Method::PropFm, Method::Lsem}, 30, false);
    const double fm = r[Method::PropFm].bias_total;
    const double ls = r[Method::Lsem].bias_total;
    Outcome o;
    o.require(fm < ls, "prop_fm bias_total " + fmt(fm, "%.6f") + " < lsem " + fmt(ls, "%.6f"));
    o.require(fm <= 0.5 * ls, "ratio " + fmt(fm / ls) + " <= 0.5");
    return o;
}

Outcome criterion5() {
    auto r = bench(setting("fullrank", Generator::FullRank, 3000, 5), {Method::PropFm, Method::PropAe, Method::Lsem},
                   30, false);
    const double fm = r[Method::PropFm].bias_total;
    const double ae = r[Method::PropAe].bias_total;
    const double ls = r[Method::Lsem].bias_total;
    Outcome o;
    o.require(ae < ls, "prop_ae " + fmt(ae, "%.6f") + " < lsem " + fmt(ls, "%.6f"));
    o.require(fm < ls, "prop_fm " + fmt(fm, "%.6f") + " < lsem " + fmt(ls, "%.6f"));
    o.require(ae <= fm + 0.5, "prop_ae <= prop_fm + 0.5");
    return o;
}

Outcome criterion6() {
    const auto c = LinearSimConfig::defaults(10000, 5);
    const auto ds = gen_nonlinear_fullrank(c, 606);
    const Vector& u = ds.truth->u_true;
    const double low = leading_component_share(lowrank_effects(u).stacked());
    const double full = leading_component_share(fullrank_effects(u, ds.treatment).stacked());
    Outcome o;
    o.require(low >= 0.50 && low <= 0.60, "low-rank share " + fmt(low) + " in [0.50, 0.60]");
    o.require(full >= 0.33 && full <= 0.43, "full-rank share " + fmt(full) + " in [0.33, 0.43]");
    return o;
}

MediationDataset linear(Index n, Index k, std::uint64_t seed, bool confounded = true) {
    auto c = LinearSimConfig::defaults(n, k);
    if (!confounded) c.eta = Vector::Zero(k + 1);
    c.seed = seed;
    return gen_linear(c);
}

Matrix gaussian(Index r, Index c, Rng& rng) {
    std::normal_distribution<double> norm(0.0, 1.0);
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = norm(rng);
    return m;
}

double penalty_fd_error(Rng& rng) {
    const Index n = 20, k = 3;
    ObservedResiduals obs;
    obs.link = TreatmentLink::Linear;
    obs.l_obs = gaussian(n, k + 2, rng);
    obs.treatment = Vector::Zero(n);
    obs.treatment_logit = Vector::Zero(n);
    const Matrix u = gaussian(n, 2, rng);
    const Matrix a = gaussian(2, k + 2, rng);
    const ConfounderState st{u, FactorLoading{a}};
    const Matrix g = penalty_gradient_u(st, obs);
    const double h = 1e-6;
    double num = 0, den = 0;
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < 2; ++c) {
            Matrix hi = u, lo = u;
            hi(i, c) += h;
            lo(i, c) -= h;
            const double fd = (penalty(residuals(obs, hi * a)) - penalty(residuals(obs, lo * a))) / (2 * h);
            num = std::max(num, std::abs(g(i, c) - fd));
            den = std::max(den, std::abs(fd));
        }
    return num / den;
}

double ae_fd_error(Rng& rng, std::uint64_t seed) {
    AutoencoderConfig c;
    c.hidden_width = 6;
    c.seed = seed;
    const AutoencoderWeights w = make_autoencoder(4, c);
    const Matrix batch = gaussian(15, 4, rng);
    const Vector theta = flatten(w);
    const Vector g = flatten(ae_gradient(w, batch));
    const double h = 1e-5;
    double num = 0, den = 0;
    for (Index i = 0; i < theta.size(); ++i) {
        AutoencoderWeights hi = w, lo = w;
        Vector th = theta;
        th(i) += h;
        unflatten(hi, th);
        th(i) -= 2 * h;
        unflatten(lo, th);
        const double fd = (ae_loss(hi, batch) - ae_loss(lo, batch)) / (2 * h);
        num = std::max(num, std::abs(g(i) - fd));
        den = std::max(den, std::abs(fd));
    }
    return num / den;
}

double identity_error(const OutputModels& m, const MediationDataset& ds) {
    const EffectEstimates e = estimate_effects(m, ds);
    double err = std::max(std::abs(e.tau - e.delta1 - e.zeta0), std::abs(e.tau - e.delta0 - e.zeta1));
    for (int t : {0, 1}) {
        double sum = 0;
        for (int j = 0; j < ds.k(); ++j) sum += estimate_subset_delta(m, ds, {j}, t);
        err = std::max(err, std::abs(sum - (t ? e.delta1 : e.delta0)));
    }
    return err;
}

Outcome criterion7() {
    Outcome o;
    Rng rng(7007);

    double pen = 0, ae = 0;
    for (int i = 0; i < 100; ++i) pen = std::max(pen, penalty_fd_error(rng));
    for (int i = 0; i < 100; ++i) ae = std::max(ae, ae_fd_error(rng, static_cast<std::uint64_t>(i)));
    o.require(pen < 1e-5, "penalty gradient rel err " + fmt(pen, "%.2e") + " < 1e-5");
    o.require(ae < 1e-4, "autoencoder gradient rel err " + fmt(ae, "%.2e") + " < 1e-4");

    double ident = 0, climb = 0, audit = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto ds = linear(800, 2, 7100 + s);
        const FitResult f = fit(ds, BackfitConfig{});
        for (std::size_t i = 1; i < f.loss_trace.size(); ++i)
            climb = std::max(climb, f.loss_trace[i] - f.loss_trace[i - 1]);
        ident = std::max(ident, identity_error(f.models, ds));
        ident = std::max(ident, identity_error(lsem_fit(ds).models, ds));
        audit = std::max(audit, residual_audit(f.residuals.e).max_off_diagonal);
    }
    {
        BackfitConfig b;
        b.max_iter = 3;
        AutoencoderConfig a;
        a.epochs_per_cycle = 20;
        const auto ds = linear(800, 3, 7200);
        ident = std::max(ident, identity_error(fit_ae(ds, b, a).models, ds));
    }
    o.require(ident < 1e-10, "effect identities max err " + fmt(ident, "%.2e") + " < 1e-10");
    o.require(climb <= 1e-6, "max per-cycle loss increase " + fmt(climb, "%.2e") + " <= 1e-6");
    o.require(audit < 0.1, "residual audit max |corr| " + fmt(audit) + " < 0.1");

    int rank_one = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto ds = linear(2000, 2, 7300 + s);
        if (select_rank(residual_pca(ds, lsem_fit(ds).models)) == 1) ++rank_one;
    }
    o.require(rank_one >= 45, "eigengap r=1 in " + std::to_string(rank_one) + "/50");

    std::vector<double> fm_tau, ls_tau;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto ds = linear(2000, 2, 7400 + s, false);
        fm_tau.push_back(estimate_effects(fit(ds, BackfitConfig{}).models, ds).tau);
        ls_tau.push_back(lsem_fit(ds).effects.tau);
    }
    double mean = 0, var = 0, gap = 0;
    for (double v : ls_tau) mean += v / 20.0;
    for (double v : ls_tau) var += (v - mean) * (v - mean) / 19.0;
    for (std::size_t i = 0; i < fm_tau.size(); ++i) gap = std::max(gap, std::abs(fm_tau[i] - ls_tau[i]));
    o.require(gap <= 3.0 * std::sqrt(var), "no confounding: max |tau_fm - tau_lsem| " + fmt(gap) + " <= 3 sd " +
                                               fmt(3.0 * std::sqrt(var)));

    bool same = true;
    for (Generator g : {Generator::Linear, Generator::LowRank, Generator::FullRank}) {
        auto c = LinearSimConfig::defaults(300, g == Generator::Linear ? 2 : 5);
        c.seed = 77;
        same = same && generate(g, c).outcome == generate(g, c).outcome;
    }
    same = same && gen_confounder(50, 3) == gen_confounder(50, 3);
    const auto ds = linear(500, 2, 78);
    same = same && fit(ds, BackfitConfig{}).confounder.u_hat == fit(ds, BackfitConfig{}).confounder.u_hat;
    BackfitConfig b;
    b.max_iter = 3;
    AutoencoderConfig a;
    a.epochs_per_cycle = 20;
    a.seed = 5;
    same = same && fit_ae(ds, b, a).g_hat == fit_ae(ds, b, a).g_hat;
    BenchmarkConfig bc;
    bc.replications = 2;
    bc.settings = {setting("det", Generator::Linear, 300, 2)};
    std::ostringstream r1, r2, r3;
    write_report_csv(r1, run_benchmark(bc));
    write_report_csv(r2, run_benchmark(bc));
    bc.jobs = 2;
    write_report_csv(r3, run_benchmark(bc));
    same = same && r1.str() == r2.str() && r1.str() == r3.str();
    o.require(same, "determinism contracts");
    return o;
}

Outcome criterion8() {
    auto r = bench(setting("linear_k2", Generator::Linear, 2000, 2), {Method::PropFm, Method::Lsem}, 50, true);
    const double fm = r[Method::PropFm].mse_outcome;
    const double ls = r[Method::Lsem].mse_outcome;
    Outcome o;
    o.require(fm < ls, "prop_fm test mse " + fmt(fm, "%.6f") + " < lsem " + fmt(ls, "%.6f"));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::function<Outcome()>> criteria{
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
        {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};
    const std::string which = argc > 1 ? argv[1] : "all";
    std::vector<int> run;
    if (which == "all") {
        for (const auto& [k, _] : criteria) run.push_back(k);
    } else {
        const int k = std::atoi(which.c_str());
        if (!criteria.count(k)) {
            std::cerr << "usage: latmed_acceptance [1-8|all]\n";
            return 2;
        }
        run.push_back(k);
    }
    bool ok = true;
    for (int k : run) {
        Outcome o;
        try {
            o = criteria.at(k)();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << std::endl;
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
