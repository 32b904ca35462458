#include "latmed/autoencoder.hpp"

#include "latmed/regression.hpp"

#include <cmath>
#include <random>
#include <string>

namespace latmed {

namespace {

constexpr int kMaxHalvings = 30;

Matrix activate(const Matrix& a, Activation f) {
    switch (f) {
        case Activation::Tanh: return a.array().tanh().matrix();
        case Activation::Relu: return a.cwiseMax(0.0);
        case Activation::Identity: return a;
    }
    return a;
}

// Derivative expressed through the pre-activation.
Matrix activate_prime(const Matrix& a, Activation f) {
    switch (f) {
        case Activation::Tanh: return (1.0 - a.array().tanh().square()).matrix();
        case Activation::Relu: return (a.array() > 0.0).cast<double>().matrix();
        case Activation::Identity: return Matrix::Ones(a.rows(), a.cols());
    }
    return Matrix::Ones(a.rows(), a.cols());
}

std::vector<const DenseLayer*> stack(const AutoencoderWeights& w) {
    std::vector<const DenseLayer*> layers;
    for (const auto& l : w.encoder) layers.push_back(&l);
    for (const auto& l : w.decoder) layers.push_back(&l);
    return layers;
}

Matrix standardize(const AutoencoderWeights& w, const Matrix& x) {
    if (x.cols() != w.input_width()) {
        throw InvalidInput("dimension mismatch: autoencoder expects " + std::to_string(w.input_width()) +
                           " input columns, got " + std::to_string(x.cols()));
    }
    Matrix z = x.rowwise() - w.input_mean.transpose();
    return z * w.input_scale.cwiseInverse().asDiagonal();
}

Matrix apply(const DenseLayer& l, const Matrix& h) {
    Matrix a = h * l.weight.transpose();
    a.rowwise() += l.bias.transpose();
    return a;
}

Matrix run(const std::vector<DenseLayer>& layers, Matrix h) {
    for (const auto& l : layers) h = activate(apply(l, h), l.activation);
    return h;
}

void check_shapes(const AutoencoderWeights& w) {
    if (w.encoder.empty() || w.decoder.empty()) throw InvalidInput("autoencoder needs encoder and decoder layers");
    Index width = w.encoder.front().inputs();
    for (const auto* l : stack(w)) {
        if (l->inputs() != width || l->bias.size() != l->outputs()) {
            throw InvalidInput("autoencoder layer shapes are inconsistent");
        }
        width = l->outputs();
    }
    if (width != w.input_width()) throw InvalidInput("autoencoder output width must equal input width");
    if (w.input_mean.size() != w.input_width() || w.input_scale.size() != w.input_width()) {
        throw InvalidInput("autoencoder standardization has the wrong length");
    }
}

}  // namespace

void AutoencoderConfig::validate() const {
    if (rank < 1) throw InvalidInput("invalid autoencoder config field 'rank': must be at least 1");
    if (hidden_width < rank) {
        throw InvalidInput("invalid autoencoder config field 'hidden_width': must be at least rank");
    }
    if (epochs_per_cycle < 1) throw InvalidInput("invalid autoencoder config field 'epochs_per_cycle'");
    if (!(learn_rate > 0)) throw InvalidInput("invalid autoencoder config field 'learn_rate': must be positive");
    if (!(weight_init_scale >= 0)) throw InvalidInput("invalid autoencoder config field 'weight_init_scale'");
}

AutoencoderWeights make_autoencoder(Index input_width, const AutoencoderConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    auto layer = [&](Index in, Index out, Activation f) {
        DenseLayer l;
        l.weight.resize(out, in);
        const double sd = config.weight_init_scale / std::sqrt(static_cast<double>(in));
        for (Index i = 0; i < out; ++i)
            for (Index j = 0; j < in; ++j) l.weight(i, j) = sd * norm(rng);
        l.bias = Vector::Zero(out);
        l.activation = f;
        return l;
    };
    AutoencoderWeights w;
    w.encoder.push_back(layer(input_width, config.hidden_width, config.activation));
    w.encoder.push_back(layer(config.hidden_width, config.rank, Activation::Identity));
    w.decoder.push_back(layer(config.rank, config.hidden_width, config.activation));
    w.decoder.push_back(layer(config.hidden_width, input_width, Activation::Identity));
    w.input_mean = Vector::Zero(input_width);
    w.input_scale = Vector::Ones(input_width);
    return w;
}

AeOutput ae_forward(const AutoencoderWeights& weights, const Vector& input) {
    check_shapes(weights);
    const Matrix x = input.transpose();
    const Matrix code = run(weights.encoder, standardize(weights, x));
    Matrix out = run(weights.decoder, code);
    out = out * weights.input_scale.asDiagonal();
    out.rowwise() += weights.input_mean.transpose();
    return {code.row(0).transpose(), out.row(0).transpose()};
}

Matrix ae_encode(const AutoencoderWeights& weights, const Matrix& inputs) {
    check_shapes(weights);
    return run(weights.encoder, standardize(weights, inputs));
}

Matrix ae_reconstruct(const AutoencoderWeights& weights, const Matrix& inputs) {
    Matrix out = run(weights.decoder, ae_encode(weights, inputs));
    out = out * weights.input_scale.asDiagonal();
    out.rowwise() += weights.input_mean.transpose();
    return out;
}

double ae_loss(const AutoencoderWeights& weights, const Matrix& batch) {
    check_shapes(weights);
    if (batch.rows() == 0) throw InvalidInput("empty autoencoder batch");
    const Matrix z = standardize(weights, batch);
    const Matrix out = run(weights.decoder, run(weights.encoder, z));
    return (out - z).squaredNorm() / static_cast<double>(batch.rows());
}

AutoencoderWeights ae_gradient(const AutoencoderWeights& weights, const Matrix& batch) {
    check_shapes(weights);
    if (batch.rows() == 0) throw InvalidInput("empty autoencoder batch");
    const auto layers = stack(weights);
    const std::size_t depth = layers.size();

    std::vector<Matrix> pre(depth);
    std::vector<Matrix> post(depth + 1);
    post[0] = standardize(weights, batch);
    for (std::size_t l = 0; l < depth; ++l) {
        pre[l] = apply(*layers[l], post[l]);
        post[l + 1] = activate(pre[l], layers[l]->activation);
    }

    AutoencoderWeights grad;
    grad.encoder.resize(weights.encoder.size());
    grad.decoder.resize(weights.decoder.size());
    auto slot = [&](std::size_t l) -> DenseLayer& {
        return l < weights.encoder.size() ? grad.encoder[l] : grad.decoder[l - weights.encoder.size()];
    };

    Matrix upstream = 2.0 * (post[depth] - post[0]) / static_cast<double>(batch.rows());
    for (std::size_t l = depth; l-- > 0;) {
        const Matrix delta = upstream.cwiseProduct(activate_prime(pre[l], layers[l]->activation));
        DenseLayer& g = slot(l);
        g.activation = layers[l]->activation;
        g.weight = delta.transpose() * post[l];
        g.bias = delta.colwise().sum().transpose();
        if (l > 0) upstream = delta * layers[l]->weight;
    }
    return grad;
}

Vector flatten(const AutoencoderWeights& weights) {
    Index size = 0;
    for (const auto* l : stack(weights)) size += l->weight.size() + l->bias.size();
    Vector v(size);
    Index at = 0;
    for (const auto* l : stack(weights)) {
        for (Index i = 0; i < l->weight.rows(); ++i)
            for (Index j = 0; j < l->weight.cols(); ++j) v(at++) = l->weight(i, j);
        for (Index i = 0; i < l->bias.size(); ++i) v(at++) = l->bias(i);
    }
    return v;
}

void unflatten(AutoencoderWeights& weights, const Vector& values) {
    Index at = 0;
    auto fill = [&](DenseLayer& l) {
        for (Index i = 0; i < l.weight.rows(); ++i)
            for (Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = values(at++);
        for (Index i = 0; i < l.bias.size(); ++i) l.bias(i) = values(at++);
    };
    if (values.size() != flatten(weights).size()) throw InvalidInput("unflatten: wrong parameter count");
    for (auto& l : weights.encoder) fill(l);
    for (auto& l : weights.decoder) fill(l);
}

AeTrainResult ae_train(const Matrix& g_matrix, const AutoencoderConfig& config,
                       const std::optional<AutoencoderWeights>& warm_start) {
    config.validate();
    if (!g_matrix.allFinite()) throw InvalidInput("ae_train: non-finite entry in the input matrix");
    if (g_matrix.rows() == 0) throw InvalidInput("ae_train: empty input");

    AeTrainResult out;
    out.weights = warm_start ? *warm_start : make_autoencoder(g_matrix.cols(), config);
    if (out.weights.input_width() != g_matrix.cols()) {
        throw InvalidInput("ae_train: warm start width differs from the input");
    }
    const double n = static_cast<double>(g_matrix.rows());
    out.weights.input_mean = g_matrix.colwise().mean().transpose();
    out.weights.input_scale.resize(g_matrix.cols());
    for (Index j = 0; j < g_matrix.cols(); ++j) {
        const double sd = std::sqrt((g_matrix.col(j).array() - out.weights.input_mean(j)).square().sum() / n);
        out.weights.input_scale(j) = sd > 1e-12 ? sd : 1.0;
    }

    double current = ae_loss(out.weights, g_matrix);
    if (!std::isfinite(current)) throw StepSizeError("autoencoder loss is not finite; reduce the learning rate");
    out.loss_trace.push_back(current);

    double rate = config.learn_rate;
    AutoencoderWeights trial = out.weights;
    auto step_to = [&](const AutoencoderWeights& grad, double r) {
        for (std::size_t l = 0; l < trial.encoder.size(); ++l) {
            trial.encoder[l].weight = out.weights.encoder[l].weight - r * grad.encoder[l].weight;
            trial.encoder[l].bias = out.weights.encoder[l].bias - r * grad.encoder[l].bias;
        }
        for (std::size_t l = 0; l < trial.decoder.size(); ++l) {
            trial.decoder[l].weight = out.weights.decoder[l].weight - r * grad.decoder[l].weight;
            trial.decoder[l].bias = out.weights.decoder[l].bias - r * grad.decoder[l].bias;
        }
    };
    for (int epoch = 0; epoch < config.epochs_per_cycle; ++epoch) {
        const AutoencoderWeights grad = ae_gradient(out.weights, g_matrix);
        bool finite = true;
        for (const auto* l : stack(grad)) finite = finite && l->weight.allFinite() && l->bias.allFinite();
        if (!finite) throw StepSizeError("autoencoder gradient diverged; reduce the learning rate");
        bool accepted = false;
        for (int h = 0; h < kMaxHalvings; ++h) {
            step_to(grad, rate);
            const double value = ae_loss(trial, g_matrix);
            if (std::isfinite(value) && value <= current) {
                std::swap(out.weights, trial);
                current = value;
                accepted = true;
                rate *= 1.05;
                break;
            }
            rate *= 0.5;
        }
        if (!accepted) break;
        out.loss_trace.push_back(current);
    }
    out.u_hat = ae_encode(out.weights, g_matrix);
    return out;
}

FitResult fit_ae(const MediationDataset& ds, const BackfitConfig& backfit, const AutoencoderConfig& ae) {
    require_valid(ds);
    backfit.validate(ds.k());
    ae.validate();
    if (ds.n() <= ds.k() + ds.p() + 2) {
        throw InvalidInput("insufficient sample: n must exceed k + p + 2");
    }
    const Index width = ds.layout().width();

    FitResult result;
    if (ds.k() == 1) {
        result.warnings.emplace_back(
            "k = 1: a single mediator cannot separate the latent confounder from noise");
    }

    auto evaluate = [&](const OutputModels& models, const Matrix& g_hat) {
        ObservedResiduals obs = observed_residuals(ds, models);
        obs.link = TreatmentLink::Linear;
        return std::make_pair(loss_parts(obs, g_hat, backfit.lambda).total, obs);
    };

    OutputModels models = update_f(ds, Matrix::Zero(ds.n(), width), TreatmentLink::Logistic);
    Matrix g_hat = Matrix::Zero(ds.n(), width);
    auto [current, obs] = evaluate(models, g_hat);
    result.loss_trace.push_back(current);

    std::optional<AutoencoderWeights> weights;
    Matrix u_hat = Matrix::Zero(ds.n(), ae.rank);

    for (int it = 1; it <= backfit.max_iter; ++it) {
        const double previous = current;
        // (a) targets, (b) autoencode them
        AeTrainResult trained = ae_train(obs.l_obs, ae, weights);
        const Matrix g_new = ae_reconstruct(trained.weights, obs.l_obs);
        // (c) refit the output models on partial residuals
        const OutputModels m_new = update_f(ds, g_new, TreatmentLink::Logistic, false);
        // (d) loss
        auto [value, obs_new] = evaluate(m_new, g_new);
        result.iterations = it;
        if (!(value <= previous)) break;  // keep the previous cycle

        models = m_new;
        g_hat = g_new;
        obs = std::move(obs_new);
        weights = std::move(trained.weights);
        u_hat = std::move(trained.u_hat);
        current = value;
        result.loss_trace.push_back(current);
        if (previous <= 0 || std::abs(previous - current) / previous < backfit.stop_tol) {
            result.converged = true;
            break;
        }
    }
    if (!weights) {
        // No cycle improved on the plain fit; keep one trained network for the record.
        AeTrainResult trained = ae_train(obs.l_obs, ae);
        weights = std::move(trained.weights);
        u_hat = std::move(trained.u_hat);
    }
    if (!result.converged && result.iterations < backfit.max_iter) result.converged = true;

    result.models = std::move(models);
    result.confounder.u_hat = std::move(u_hat);
    result.confounder.effect_model = std::move(*weights);
    result.g_hat = g_hat;
    result.residuals.e = residuals(obs, g_hat);
    result.penalty_final = loss_parts(obs, g_hat, 0.0).penalty;
    return result;
}

}  // namespace latmed
