#pragma once

#include "tsad/nn.hpp"

#include <optional>
#include <random>
#include <vector>

namespace tsad::vae {

struct VaeConfig {
    int input_dim = 0;  // n_steps
    int latent_dim = 4;
    int hidden = 32;
};

// Encoder emits [mu; log_var] stacked (2 * latent_dim rows); decoder maps a
// latent sample back to input_dim.
struct VaeModel {
    nn::NetworkSpec encoder_spec;
    nn::NetworkSpec decoder_spec;
    nn::ParameterStore encoder;
    nn::ParameterStore decoder;
    int input_dim = 0;
    int latent_dim = 0;

    static VaeModel create(const VaeConfig& config, std::uint64_t seed);
    // Checks the width invariants between encoder, decoder and latent size.
    void validate() const;
};

struct VaeOutput {
    Vector mu;
    Vector log_var;
    Vector z;
    Vector x_hat;
};

// z = mu + exp(0.5 * log_var) * eps with eps ~ N(0, I), or the supplied eps.
VaeOutput encode_decode(const VaeModel& model, const Vector& x, const Vector* noise,
                        std::mt19937_64& rng);

struct ElboTerms {
    double total = 0.0;  // negative ELBO = recon + kl
    double recon = 0.0;  // sum over dimensions of squared error
    double kl = 0.0;
};

double kl_divergence(const Vector& mu, const Vector& log_var);
ElboTerms elbo_loss(const VaeModel& model, const Vector& x, const VaeOutput& output);

// Mean negative ELBO over the columns of `batch` with the given noise
// (latent_dim x batch). Accumulates the gradient of that mean into the encoder
// and decoder gradient slots.
ElboTerms accumulate_elbo_gradients(VaeModel& model, const Matrix& batch, const Matrix& noise);

// Same objective without gradients, for finite-difference checks.
ElboTerms batch_elbo(const VaeModel& model, const Matrix& batch, const Matrix& noise);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct EpochLog {
    int epoch = 0;
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

// Minibatch Adam on the negative ELBO. `windows` holds one window per row.
// A batch size larger than the dataset becomes one full batch per epoch.
std::vector<EpochLog> train_vae(VaeModel& model, const Matrix& windows, const TrainConfig& config);

// Mean squared reconstruction error with z pinned to mu.
double reconstruction_error(const VaeModel& model, const Vector& x);
// Row-wise scores for a window matrix.
Vector reconstruction_errors(const VaeModel& model, const Matrix& windows);

}  // namespace tsad::vae
