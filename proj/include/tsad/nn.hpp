#pragma once

#include "tsad/timeseries.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

// Minimal neural substrate: dense and LSTM-style recurrent layers with
// hand-written backward passes, an Adam optimizer and a finite-difference
// gradient checker. Batches are column-major: each column of an input matrix
// is one sample. A recurrent first layer reads a column as a sequence of
// (rows / input_width) steps laid out step after step.
namespace tsad::nn {

enum class LayerKind { dense, recurrent };
enum class Activation { tanh, relu, identity, sigmoid };

const char* to_string(LayerKind kind);
const char* to_string(Activation act);
LayerKind parse_layer_kind(const std::string& text);
Activation parse_activation(const std::string& text);

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int in = 0;
    int out = 0;
    Activation activation = Activation::identity;

    bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;

    // Throws SpecError on empty specs, non-positive widths, width mismatches
    // or a recurrent layer anywhere but first.
    void validate() const;
    int input_width() const { return layers.front().in; }
    int output_width() const { return layers.back().out; }
    bool recurrent() const { return !layers.empty() && layers.front().kind == LayerKind::recurrent; }

    bool operator==(const NetworkSpec&) const = default;
};

struct Parameter {
    Matrix value;
    Matrix grad;
};

// Named tensors of one network, each paired with a same-shape gradient slot.
class ParameterStore {
public:
    using Map = std::map<std::string, Parameter>;

    Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Map::iterator begin() { return entries_.begin(); }
    Map::iterator end() { return entries_.end(); }
    Map::const_iterator begin() const { return entries_.begin(); }
    Map::const_iterator end() const { return entries_.end(); }
    std::size_t tensor_count() const { return entries_.size(); }
    std::size_t scalar_count() const;

    void zero_grads();
    // Copies values (not gradients) from a store with identical layout.
    void copy_values_from(const ParameterStore& other);

    std::uint64_t seed = 0;

    // Bumped whenever parameter values change through the library; tapes
    // remember the version they were recorded against.
    std::uint64_t version() const { return version_; }
    void mark_modified() { ++version_; }

    bool values_equal(const ParameterStore& other) const;

private:
    Map entries_;
    std::uint64_t version_ = 0;
};

ParameterStore init_network(const NetworkSpec& spec, std::uint64_t seed);

struct LayerCache {
    Matrix input;   // dense: layer input; recurrent: full sequence input
    Matrix pre;     // dense pre-activation
    Matrix output;  // dense activation output / recurrent final hidden state
    // recurrent, one entry per step
    std::vector<Matrix> gate_i, gate_f, gate_o, cand, cell, cell_act, hidden;
};

struct Tape {
    const ParameterStore* store = nullptr;
    std::uint64_t version = 0;
    std::size_t layer_count = 0;
    std::vector<LayerCache> layers;
};

struct ForwardResult {
    Matrix output;
    Tape tape;
};

ForwardResult forward(const ParameterStore& store, const NetworkSpec& spec, const Matrix& input);
// Forward pass without recording a tape.
Matrix predict(const ParameterStore& store, const NetworkSpec& spec, const Matrix& input);

// Adds d(loss)/d(parameter) into the gradient slots and returns d(loss)/d(input).
Matrix backward(ParameterStore& store, const NetworkSpec& spec, const Tape& tape,
                const Matrix& output_grad);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::map<std::string, std::pair<Matrix, Matrix>> moments;
};

// One bias-corrected Adam update, then gradients are zeroed. Rejects the whole
// update with NumericError if any gradient entry is non-finite.
void optimizer_step(ParameterStore& store, double learning_rate, AdamState& state);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t parameters_checked = 0;
    std::string worst_parameter;
    bool pass = false;
};

// |a - n| / max(|a| + |n|, floor); keeps near-zero gradients from dominating.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Compares gradients already accumulated in `stores` against central
// differences of `loss`. `loss` must recompute the objective from the current
// parameter values. Parameter values are restored afterwards.
GradCheckReport check_gradients(std::span<ParameterStore* const> stores,
                                const std::function<double()>& loss, double tolerance,
                                double step = 1e-5);

// Random network, random batch and quadratic loss; analytic vs numeric.
GradCheckReport gradient_check(const NetworkSpec& spec, std::uint64_t seed, double tolerance);

}  // namespace tsad::nn
