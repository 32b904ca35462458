#include "latmed/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace latmed {

namespace {

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t row, std::size_t col) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw InvalidInput("CSV row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                           ": not a number: '" + s + "'");
    }
    return v;
}

int indexed(const std::string& name, char prefix) {
    if (name.size() < 2 || name[0] != prefix) return -1;
    for (std::size_t i = 1; i < name.size(); ++i)
        if (name[i] < '0' || name[i] > '9') return -1;
    return std::stoi(name.substr(1));
}

template <class F>
auto keyed(const std::string& key, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("config key '" + key + "': " + e.what());
    }
}

double get_double(const Json& j, const std::string& key) {
    return keyed(key, [&] { return j.at(key).get<double>(); });
}

Index get_index(const Json& j, const std::string& key) {
    return keyed(key, [&] {
        const auto v = j.at(key).get<long long>();
        return static_cast<Index>(v);
    });
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& what) {
    if (!j.is_object()) throw InvalidInput(what + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw InvalidInput("unknown " + what + " key '" + key + "'");
    }
}

std::string link_name(TreatmentLink l) { return l == TreatmentLink::Logistic ? "logistic" : "linear"; }

TreatmentLink parse_link(const std::string& s) {
    if (s == "logistic") return TreatmentLink::Logistic;
    if (s == "linear") return TreatmentLink::Linear;
    throw InvalidInput("config key 'link': expected logistic or linear, got '" + s + "'");
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "tanh";
}

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "identity") return Activation::Identity;
    throw InvalidInput("config key 'activation': expected tanh, relu or identity, got '" + s + "'");
}

Json layers_json(const std::vector<DenseLayer>& layers) {
    Json arr = Json::array();
    for (const auto& l : layers) {
        arr.push_back({{"weight", to_json(l.weight)},
                       {"bias", to_json(l.bias)},
                       {"activation", activation_name(l.activation)}});
    }
    return arr;
}

std::vector<DenseLayer> layers_from_json(const Json& arr) {
    std::vector<DenseLayer> out;
    for (const auto& j : arr) {
        DenseLayer l;
        l.weight = matrix_from_json(j, "weight");
        l.bias = vector_from_json(j, "bias");
        l.activation = parse_activation(j.at("activation").get<std::string>());
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace

void write_csv(std::ostream& out, const MediationDataset& ds, bool include_u) {
    require_valid(ds);
    const bool with_u = include_u && ds.truth && ds.truth->u_true.size() == ds.n();
    out << "T";
    for (Index j = 0; j < ds.k(); ++j) out << ",M" << j + 1;
    out << ",Y";
    for (Index j = 0; j < ds.p(); ++j) out << ",X" << j + 1;
    if (with_u) out << ",U";
    out << '\n';
    for (Index i = 0; i < ds.n(); ++i) {
        out << format(ds.treatment(i));
        for (Index j = 0; j < ds.k(); ++j) out << ',' << format(ds.mediators(i, j));
        out << ',' << format(ds.outcome(i));
        for (Index j = 0; j < ds.p(); ++j) out << ',' << format(ds.covariates(i, j));
        if (with_u) out << ',' << format(ds.truth->u_true(i));
        out << '\n';
    }
}

void write_csv(const std::string& path, const MediationDataset& ds, bool include_u) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
    write_csv(out, ds, include_u);
}

MediationDataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("CSV is empty");
    const auto header = split(line);

    int t_col = -1;
    int y_col = -1;
    int u_col = -1;
    std::vector<int> m_cols;
    std::vector<int> x_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        const int ci = static_cast<int>(c);
        if (h == "T") {
            t_col = ci;
        } else if (h == "Y") {
            y_col = ci;
        } else if (h == "U") {
            u_col = ci;
        } else if (int j = indexed(h, 'M'); j >= 1) {
            if (static_cast<int>(m_cols.size()) < j) m_cols.resize(static_cast<std::size_t>(j), -1);
            m_cols[static_cast<std::size_t>(j - 1)] = ci;
        } else if (int jx = indexed(h, 'X'); jx >= 1) {
            if (static_cast<int>(x_cols.size()) < jx) x_cols.resize(static_cast<std::size_t>(jx), -1);
            x_cols[static_cast<std::size_t>(jx - 1)] = ci;
        } else {
            throw InvalidInput("unexpected CSV column '" + h + "'");
        }
    }
    if (t_col < 0 || y_col < 0) throw InvalidInput("CSV header needs T and Y columns");
    if (m_cols.empty()) throw InvalidInput("CSV header needs at least one mediator column M1");
    for (std::size_t j = 0; j < m_cols.size(); ++j)
        if (m_cols[j] < 0) throw InvalidInput("CSV header is missing column M" + std::to_string(j + 1));
    for (std::size_t j = 0; j < x_cols.size(); ++j)
        if (x_cols[j] < 0) throw InvalidInput("CSV header is missing column X" + std::to_string(j + 1));

    std::vector<std::vector<double>> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw InvalidInput("CSV row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                               " fields, header has " + std::to_string(header.size()));
        }
        std::vector<double> r(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) r[c] = parse_number(cells[c], row_no, c);
        rows.push_back(std::move(r));
    }

    const auto n = static_cast<Index>(rows.size());
    const auto k = static_cast<Index>(m_cols.size());
    const auto p = static_cast<Index>(x_cols.size());
    MediationDataset ds;
    ds.treatment.resize(n);
    ds.mediators.resize(n, k);
    ds.outcome.resize(n);
    ds.covariates.resize(n, p);
    Vector u(u_col >= 0 ? n : 0);
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        ds.treatment(i) = r[static_cast<std::size_t>(t_col)];
        ds.outcome(i) = r[static_cast<std::size_t>(y_col)];
        for (Index j = 0; j < k; ++j) ds.mediators(i, j) = r[static_cast<std::size_t>(m_cols[static_cast<std::size_t>(j)])];
        for (Index j = 0; j < p; ++j) ds.covariates(i, j) = r[static_cast<std::size_t>(x_cols[static_cast<std::size_t>(j)])];
        if (u_col >= 0) u(i) = r[static_cast<std::size_t>(u_col)];
    }
    if (u_col >= 0) {
        ds.truth = SimulationTruth{};
        ds.truth->u_true = std::move(u);
    }
    return ds;
}

MediationDataset read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open dataset '" + path + "'");
    return read_csv(in);
}

void write_matrix_csv(const std::string& path, const Matrix& m, const std::string& prefix) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << j + 1;
    out << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format(m(i, j));
        out << '\n';
    }
}

Json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

Vector vector_from_json(const Json& j, const std::string& key) {
    return keyed(key, [&] {
        const auto v = j.at(key).get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    });
}

Matrix matrix_from_json(const Json& j, const std::string& key) {
    return keyed(key, [&] {
        const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
        const auto r = static_cast<Index>(rows.size());
        const Index c = r ? static_cast<Index>(rows[0].size()) : 0;
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (static_cast<Index>(row.size()) != c) throw InvalidInput("config key '" + key + "': ragged matrix");
            for (Index jj = 0; jj < c; ++jj) m(i, jj) = row[static_cast<std::size_t>(jj)];
        }
        return m;
    });
}

Json to_json(const SimulationTruth& t) {
    return {{"alpha_y", t.alpha_y},         {"beta_m", to_json(t.beta_m)},
            {"beta_y", to_json(t.beta_y)},  {"gamma_y", to_json(t.gamma_y)},
            {"gamma_m", to_json(t.gamma_m)}, {"eta", to_json(t.eta)},
            {"true_total", t.true_total},   {"true_mediation", t.true_mediation}};
}

Json to_json(const LinearSimConfig& c) {
    return {{"n", c.n},
            {"k", c.k},
            {"p", c.p},
            {"alpha_y", c.alpha_y},
            {"beta_m", to_json(c.beta_m)},
            {"beta_y", to_json(c.beta_y)},
            {"gamma_y", to_json(c.gamma_y)},
            {"gamma_m", to_json(c.gamma_m)},
            {"eta", to_json(c.eta)},
            {"noise_sd", c.noise_sd},
            {"mediator_noise_sd", c.mediator_noise_sd},
            {"outcome_noise_sd", c.outcome_noise_sd},
            {"treat_scale", c.treat_scale},
            {"confounder_sd", c.confounder_sd},
            {"seed", c.seed}};
}

Json to_json(const BackfitConfig& c) {
    return {{"rank", c.rank},
            {"lambda", c.lambda},
            {"step", c.step},
            {"tol", c.stop_tol},
            {"max_iter", c.max_iter},
            {"u_steps_per_iter", c.u_steps_per_iter},
            {"link", link_name(c.link)},
            {"freeze_loadings", c.freeze_loadings}};
}

Json to_json(const AutoencoderConfig& c) {
    return {{"rank", c.rank},
            {"hidden_width", c.hidden_width},
            {"activation", activation_name(c.activation)},
            {"epochs_per_cycle", c.epochs_per_cycle},
            {"learn_rate", c.learn_rate},
            {"weight_init_scale", c.weight_init_scale},
            {"seed", c.seed}};
}

Json to_json(const OutputModels& m) {
    return {{"link", link_name(m.link)}, {"f_t", to_json(m.f_t)}, {"f_m", to_json(m.f_m)}, {"f_y", to_json(m.f_y)}};
}

Json to_json(const AutoencoderWeights& w) {
    return {{"encoder", layers_json(w.encoder)},
            {"decoder", layers_json(w.decoder)},
            {"input_mean", to_json(w.input_mean)},
            {"input_scale", to_json(w.input_scale)}};
}

Json to_json(const FitResult& f) {
    Json j = {{"models", to_json(f.models)},
              {"rank", f.confounder.rank()},
              {"loss_trace", f.loss_trace},
              {"penalty_final", f.penalty_final},
              {"iterations", f.iterations},
              {"converged", f.converged},
              {"warnings", f.warnings}};
    if (f.confounder.is_factor()) {
        j["model"] = "fm";
        j["loadings"] = to_json(f.confounder.loadings());
    } else {
        j["model"] = "ae";
        j["autoencoder"] = to_json(f.confounder.autoencoder());
    }
    return j;
}

Json to_json(const EffectEstimates& e) {
    Json subsets = Json::array();
    for (const auto& [key, value] : e.subset_deltas) subsets.push_back({{"mediators", key}, {"delta1", value}});
    return {{"delta0", e.delta0}, {"delta1", e.delta1}, {"zeta0", e.zeta0},
            {"zeta1", e.zeta1},   {"tau", e.tau},       {"subset_deltas", subsets}};
}

SimulationRequest simulation_from_json(const Json& j) {
    static const std::set<std::string> known{
        "generator", "n", "k", "p", "profile", "seed", "alpha_y", "beta_m", "beta_y", "gamma_y", "gamma_m",
        "eta", "noise_sd", "mediator_noise_sd", "outcome_noise_sd", "treat_scale", "confounder_sd"};
    reject_unknown(j, known, "simulation config");
    SimulationRequest req;
    if (j.contains("generator")) {
        req.generator = parse_generator(keyed("generator", [&] { return j.at("generator").get<std::string>(); }));
    }
    if (!j.contains("n")) throw InvalidInput("missing required config key 'n'");
    const Index n = get_index(j, "n");
    const Index k = j.contains("k") ? get_index(j, "k") : (req.generator == Generator::Linear ? 2 : 5);
    const Index p = j.contains("p") ? get_index(j, "p") : 2;
    if (n < 2) throw InvalidInput("config key 'n': must be at least 2");
    if (k < 1) throw InvalidInput("config key 'k': must be at least 1");
    if (p < 0) throw InvalidInput("config key 'p': must be non-negative");

    const std::string profile = j.contains("profile")
                                    ? keyed("profile", [&] { return j.at("profile").get<std::string>(); })
                                    : "default";
    if (profile == "default") {
        req.config = LinearSimConfig::defaults(n, k, p);
    } else if (profile == "table1") {
        if (p != 2) throw InvalidInput("config key 'p': the table1 profile fixes p = 2");
        req.config = LinearSimConfig::table1_profile(n, k);
    } else {
        throw InvalidInput("config key 'profile': expected default or table1, got '" + profile + "'");
    }
    auto& c = req.config;
    if (j.contains("seed")) c.seed = keyed("seed", [&] { return j.at("seed").get<std::uint64_t>(); });
    if (j.contains("alpha_y")) c.alpha_y = get_double(j, "alpha_y");
    if (j.contains("beta_m")) c.beta_m = vector_from_json(j, "beta_m");
    if (j.contains("beta_y")) c.beta_y = vector_from_json(j, "beta_y");
    if (j.contains("gamma_y")) c.gamma_y = vector_from_json(j, "gamma_y");
    if (j.contains("gamma_m")) c.gamma_m = matrix_from_json(j, "gamma_m");
    if (j.contains("eta")) c.eta = vector_from_json(j, "eta");
    if (j.contains("noise_sd")) c.noise_sd = get_double(j, "noise_sd");
    if (j.contains("mediator_noise_sd")) c.mediator_noise_sd = get_double(j, "mediator_noise_sd");
    if (j.contains("outcome_noise_sd")) c.outcome_noise_sd = get_double(j, "outcome_noise_sd");
    if (j.contains("treat_scale")) c.treat_scale = get_double(j, "treat_scale");
    if (j.contains("confounder_sd")) c.confounder_sd = get_double(j, "confounder_sd");
    c.validate();
    return req;
}

BackfitConfig backfit_from_json(const Json& j, BackfitConfig c) {
    reject_unknown(j, {"rank", "lambda", "step", "tol", "max_iter", "u_steps_per_iter", "link", "freeze_loadings"},
                   "backfit config");
    if (j.contains("rank")) c.rank = get_index(j, "rank");
    if (j.contains("lambda")) c.lambda = get_double(j, "lambda");
    if (j.contains("step")) c.step = get_double(j, "step");
    if (j.contains("tol")) c.stop_tol = get_double(j, "tol");
    if (j.contains("max_iter")) c.max_iter = static_cast<int>(get_index(j, "max_iter"));
    if (j.contains("u_steps_per_iter")) c.u_steps_per_iter = static_cast<int>(get_index(j, "u_steps_per_iter"));
    if (j.contains("link")) c.link = parse_link(keyed("link", [&] { return j.at("link").get<std::string>(); }));
    if (j.contains("freeze_loadings")) {
        c.freeze_loadings = keyed("freeze_loadings", [&] { return j.at("freeze_loadings").get<bool>(); });
    }
    return c;
}

AutoencoderConfig autoencoder_from_json(const Json& j, AutoencoderConfig c) {
    reject_unknown(j,
                   {"rank", "hidden_width", "activation", "epochs_per_cycle", "learn_rate", "weight_init_scale", "seed"},
                   "autoencoder config");
    if (j.contains("rank")) c.rank = get_index(j, "rank");
    if (j.contains("hidden_width")) c.hidden_width = get_index(j, "hidden_width");
    if (j.contains("activation")) {
        c.activation = parse_activation(keyed("activation", [&] { return j.at("activation").get<std::string>(); }));
    }
    if (j.contains("epochs_per_cycle")) c.epochs_per_cycle = static_cast<int>(get_index(j, "epochs_per_cycle"));
    if (j.contains("learn_rate")) c.learn_rate = get_double(j, "learn_rate");
    if (j.contains("weight_init_scale")) c.weight_init_scale = get_double(j, "weight_init_scale");
    if (j.contains("seed")) c.seed = keyed("seed", [&] { return j.at("seed").get<std::uint64_t>(); });
    return c;
}

OutputModels models_from_json(const Json& j) {
    OutputModels m;
    m.link = parse_link(keyed("link", [&] { return j.at("link").get<std::string>(); }));
    m.f_t = vector_from_json(j, "f_t");
    m.f_m = matrix_from_json(j, "f_m");
    m.f_y = vector_from_json(j, "f_y");
    return m;
}

AutoencoderWeights autoencoder_weights_from_json(const Json& j) {
    AutoencoderWeights w;
    w.encoder = keyed("encoder", [&] { return layers_from_json(j.at("encoder")); });
    w.decoder = keyed("decoder", [&] { return layers_from_json(j.at("decoder")); });
    w.input_mean = vector_from_json(j, "input_mean");
    w.input_scale = vector_from_json(j, "input_scale");
    return w;
}

FitResult fit_from_json(const Json& j) {
    FitResult f;
    f.models = models_from_json(keyed("models", [&] { return j.at("models"); }));
    const std::string model = keyed("model", [&] { return j.at("model").get<std::string>(); });
    if (model == "fm") {
        const Matrix a = matrix_from_json(j, "loadings");
        f.confounder.effect_model = FactorLoading{a};
        f.confounder.u_hat.resize(0, a.rows());
    } else if (model == "ae") {
        f.confounder.effect_model = autoencoder_weights_from_json(j.at("autoencoder"));
    } else {
        throw InvalidInput("config key 'model': expected fm or ae, got '" + model + "'");
    }
    if (j.contains("loss_trace")) f.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    if (j.contains("penalty_final")) f.penalty_final = get_double(j, "penalty_final");
    if (j.contains("iterations")) f.iterations = static_cast<int>(get_index(j, "iterations"));
    if (j.contains("converged")) f.converged = j.at("converged").get<bool>();
    return f;
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("malformed JSON in '" + path + "': " + e.what());
    }
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

}  // namespace latmed
