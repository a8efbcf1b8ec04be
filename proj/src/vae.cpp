#include "tsad/vae.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsad::vae {

VaeModel VaeModel::create(const VaeConfig& config, std::uint64_t seed) {
    if (config.input_dim <= 0 || config.latent_dim <= 0 || config.hidden <= 0) {
        throw SpecError("vae dimensions must be positive");
    }
    using nn::Activation;
    using nn::LayerKind;
    VaeModel m;
    m.input_dim = config.input_dim;
    m.latent_dim = config.latent_dim;
    m.encoder_spec.layers = {
        {LayerKind::dense, config.input_dim, config.hidden, Activation::tanh},
        {LayerKind::dense, config.hidden, 2 * config.latent_dim, Activation::identity},
    };
    m.decoder_spec.layers = {
        {LayerKind::dense, config.latent_dim, config.hidden, Activation::tanh},
        {LayerKind::dense, config.hidden, config.input_dim, Activation::identity},
    };
    m.encoder = nn::init_network(m.encoder_spec, seed);
    m.decoder = nn::init_network(m.decoder_spec, seed + 1);
    return m;
}

void VaeModel::validate() const {
    encoder_spec.validate();
    decoder_spec.validate();
    if (encoder_spec.input_width() != input_dim || encoder_spec.output_width() != 2 * latent_dim ||
        decoder_spec.input_width() != latent_dim || decoder_spec.output_width() != input_dim) {
        throw SpecError("vae encoder/decoder widths are inconsistent with latent/input dims");
    }
}

namespace {

void check_input(const VaeModel& model, Eigen::Index rows) {
    if (rows != model.input_dim) {
        throw ShapeError("vae expects windows of " + std::to_string(model.input_dim) +
                         " values, got " + std::to_string(rows));
    }
}

}  // namespace

VaeOutput encode_decode(const VaeModel& model, const Vector& x, const Vector* noise,
                        std::mt19937_64& rng) {
    check_input(model, x.size());
    const Matrix enc = nn::predict(model.encoder, model.encoder_spec, x);
    VaeOutput out;
    out.mu = enc.col(0).head(model.latent_dim);
    out.log_var = enc.col(0).tail(model.latent_dim);
    Vector eps(model.latent_dim);
    if (noise) {
        if (noise->size() != model.latent_dim) throw ShapeError("noise must have latent_dim entries");
        eps = *noise;
    } else {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
    }
    out.z = out.mu + ((0.5 * out.log_var.array()).exp() * eps.array()).matrix();
    out.x_hat = nn::predict(model.decoder, model.decoder_spec, out.z).col(0);
    return out;
}

double kl_divergence(const Vector& mu, const Vector& log_var) {
    return -0.5 * (1.0 + log_var.array() - mu.array().square() - log_var.array().exp()).sum();
}

ElboTerms elbo_loss(const VaeModel& model, const Vector& x, const VaeOutput& output) {
    check_input(model, x.size());
    if (output.x_hat.size() != x.size()) throw ShapeError("reconstruction width mismatch");
    ElboTerms t;
    t.recon = (x - output.x_hat).squaredNorm();
    t.kl = kl_divergence(output.mu, output.log_var);
    t.total = t.recon + t.kl;
    if (!std::isfinite(t.total)) throw NumericError("non-finite ELBO");
    return t;
}

ElboTerms batch_elbo(const VaeModel& model, const Matrix& batch, const Matrix& noise) {
    check_input(model, batch.rows());
    const Eigen::Index n = batch.cols();
    const Matrix enc = nn::predict(model.encoder, model.encoder_spec, batch);
    const auto mu = enc.topRows(model.latent_dim);
    const auto lv = enc.bottomRows(model.latent_dim);
    const Matrix z = mu + ((0.5 * lv.array()).exp() * noise.array()).matrix();
    const Matrix x_hat = nn::predict(model.decoder, model.decoder_spec, z);
    ElboTerms t;
    t.recon = (batch - x_hat).squaredNorm() / static_cast<double>(n);
    t.kl = -0.5 * (1.0 + lv.array() - mu.array().square() - lv.array().exp()).sum() /
           static_cast<double>(n);
    t.total = t.recon + t.kl;
    return t;
}

ElboTerms accumulate_elbo_gradients(VaeModel& model, const Matrix& batch, const Matrix& noise) {
    check_input(model, batch.rows());
    const Eigen::Index n = batch.cols();
    const Eigen::Index L = model.latent_dim;
    if (noise.rows() != L || noise.cols() != n) throw ShapeError("noise must be latent_dim x batch");
    const double inv_n = 1.0 / static_cast<double>(n);

    auto enc = nn::forward(model.encoder, model.encoder_spec, batch);
    const Matrix mu = enc.output.topRows(L);
    const Matrix lv = enc.output.bottomRows(L);
    const Matrix sigma = (0.5 * lv.array()).exp().matrix();
    const Matrix z = mu + (sigma.array() * noise.array()).matrix();
    auto dec = nn::forward(model.decoder, model.decoder_spec, z);

    ElboTerms t;
    const Matrix diff = dec.output - batch;
    t.recon = diff.squaredNorm() * inv_n;
    t.kl = -0.5 * (1.0 + lv.array() - mu.array().square() - lv.array().exp()).sum() * inv_n;
    t.total = t.recon + t.kl;
    if (!std::isfinite(t.total)) throw NumericError("non-finite ELBO during training");

    const Matrix dz = nn::backward(model.decoder, model.decoder_spec, dec.tape, 2.0 * inv_n * diff);
    Matrix denc(2 * L, n);
    denc.topRows(L) = dz + inv_n * mu;
    denc.bottomRows(L) = (0.5 * dz.array() * noise.array() * sigma.array() +
                          0.5 * inv_n * (lv.array().exp() - 1.0)).matrix();
    nn::backward(model.encoder, model.encoder_spec, enc.tape, denc);
    return t;
}

std::vector<EpochLog> train_vae(VaeModel& model, const Matrix& windows, const TrainConfig& config) {
    if (windows.rows() == 0) throw DataError("cannot train the VAE on an empty dataset");
    check_input(model, windows.cols());
    if (config.batch_size <= 0) throw ArgumentError("batch_size must be positive");
    std::vector<EpochLog> log;
    if (config.epochs <= 0) return log;

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    nn::AdamState enc_state;
    nn::AdamState dec_state;
    const auto count = static_cast<std::size_t>(windows.rows());
    const std::size_t batch = std::min(count, static_cast<std::size_t>(config.batch_size));
    std::vector<Eigen::Index> order(count);
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochLog entry;
        entry.epoch = epoch;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < count; start += batch) {
            const std::size_t len = std::min(batch, count - start);
            Matrix x(model.input_dim, static_cast<Eigen::Index>(len));
            for (std::size_t j = 0; j < len; ++j) x.col(static_cast<Eigen::Index>(j)) = windows.row(order[start + j]).transpose();
            Matrix eps(model.latent_dim, static_cast<Eigen::Index>(len));
            for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
            const auto terms = accumulate_elbo_gradients(model, x, eps);
            nn::optimizer_step(model.encoder, config.learning_rate, enc_state);
            nn::optimizer_step(model.decoder, config.learning_rate, dec_state);
            const auto w = static_cast<double>(len);
            entry.total += terms.total * w;
            entry.recon += terms.recon * w;
            entry.kl += terms.kl * w;
            seen += len;
        }
        entry.total /= static_cast<double>(seen);
        entry.recon /= static_cast<double>(seen);
        entry.kl /= static_cast<double>(seen);
        log.push_back(entry);
    }
    return log;
}

Vector reconstruction_errors(const VaeModel& model, const Matrix& windows) {
    check_input(model, windows.cols());
    const Matrix x = windows.transpose();
    const Matrix enc = nn::predict(model.encoder, model.encoder_spec, x);
    const Matrix x_hat = nn::predict(model.decoder, model.decoder_spec, enc.topRows(model.latent_dim));
    return (x - x_hat).colwise().squaredNorm().transpose() / static_cast<double>(model.input_dim);
}

double reconstruction_error(const VaeModel& model, const Vector& x) {
    check_input(model, x.size());
    return reconstruction_errors(model, x.transpose())[0];
}

}  // namespace tsad::vae
