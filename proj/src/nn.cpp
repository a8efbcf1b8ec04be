#include "tsad/nn.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tsad::nn {

const char* to_string(LayerKind kind) {
    return kind == LayerKind::dense ? "dense" : "recurrent";
}

const char* to_string(Activation act) {
    switch (act) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

LayerKind parse_layer_kind(const std::string& text) {
    if (text == "dense") return LayerKind::dense;
    if (text == "recurrent") return LayerKind::recurrent;
    throw SpecError("unknown layer kind: " + text);
}

Activation parse_activation(const std::string& text) {
    if (text == "tanh") return Activation::tanh;
    if (text == "relu") return Activation::relu;
    if (text == "identity") return Activation::identity;
    if (text == "sigmoid") return Activation::sigmoid;
    throw SpecError("unknown activation: " + text);
}

void NetworkSpec::validate() const {
    if (layers.empty()) throw SpecError("network needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.in <= 0 || l.out <= 0) {
            throw SpecError("layer " + std::to_string(i) + " has a non-positive width");
        }
        if (l.kind == LayerKind::recurrent && i != 0) {
            throw SpecError("recurrent layers are only supported as the first layer");
        }
        if (i > 0 && layers[i - 1].out != l.in) {
            throw SpecError("width mismatch between layer " + std::to_string(i - 1) + " (out " +
                            std::to_string(layers[i - 1].out) + ") and layer " + std::to_string(i) +
                            " (in " + std::to_string(l.in) + ")");
        }
    }
}

// --- ParameterStore ---------------------------------------------------------

Parameter& ParameterStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (entries_.count(name)) throw ContractError("duplicate parameter name: " + name);
    auto& p = entries_[name];
    p.value = Matrix::Zero(rows, cols);
    p.grad = Matrix::Zero(rows, cols);
    return p;
}

Parameter& ParameterStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : entries_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParameterStore::zero_grads() {
    for (auto& [name, p] : entries_) p.grad.setZero();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
    if (other.entries_.size() != entries_.size()) throw ContractError("parameter layout mismatch");
    for (auto& [name, p] : entries_) {
        const auto& src = other.at(name);
        if (src.value.rows() != p.value.rows() || src.value.cols() != p.value.cols()) {
            throw ContractError("parameter shape mismatch: " + name);
        }
        p.value = src.value;
    }
    mark_modified();
}

bool ParameterStore::values_equal(const ParameterStore& other) const {
    if (other.entries_.size() != entries_.size()) return false;
    for (const auto& [name, p] : entries_) {
        auto it = other.entries_.find(name);
        if (it == other.entries_.end()) return false;
        if (it->second.value.rows() != p.value.rows() || it->second.value.cols() != p.value.cols())
            return false;
        if (it->second.value != p.value) return false;
    }
    return true;
}

namespace {

std::string pname(std::size_t layer, const char* suffix) {
    return "l" + std::to_string(layer) + "." + suffix;
}

void fill_uniform(Matrix& m, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

Matrix activate(Activation act, const Matrix& pre) {
    switch (act) {
        // 1 - 2 / (e^{2x} + 1) keeps to the vectorized exp path.
        case Activation::tanh: return (1.0 - 2.0 / ((2.0 * pre.array()).exp() + 1.0)).matrix();
        case Activation::relu: return pre.array().max(0.0).matrix();
        case Activation::identity: return pre;
        case Activation::sigmoid: return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
    }
    return pre;
}

// Derivative of the activation expressed through its output alone (relu: out > 0
// exactly when pre > 0).
Matrix activation_grad(Activation act, const Matrix& out) {
    switch (act) {
        case Activation::tanh: return (1.0 - out.array().square()).matrix();
        case Activation::relu: return (out.array() > 0.0).cast<double>().matrix();
        case Activation::identity: return Matrix::Ones(out.rows(), out.cols());
        case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    }
    return Matrix::Ones(out.rows(), out.cols());
}

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

Matrix run_forward(const ParameterStore& store, const NetworkSpec& spec, const Matrix& input,
                   Tape* tape) {
    spec.validate();
    const auto& first = spec.layers.front();
    if (first.kind == LayerKind::dense && input.rows() != first.in) {
        throw ShapeError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                         std::to_string(first.in));
    }
    if (first.kind == LayerKind::recurrent &&
        (input.rows() == 0 || input.rows() % first.in != 0)) {
        throw ShapeError("sequence input rows (" + std::to_string(input.rows()) +
                         ") must be a positive multiple of the step width " +
                         std::to_string(first.in));
    }
    if (tape) {
        tape->store = &store;
        tape->version = store.version();
        tape->layer_count = spec.layers.size();
        tape->layers.assign(spec.layers.size(), LayerCache{});
    }

    Matrix x = input;
    const Eigen::Index batch = input.cols();
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto& layer = spec.layers[li];
        LayerCache* cache = tape ? &tape->layers[li] : nullptr;
        if (layer.kind == LayerKind::dense) {
            const auto& w = store.at(pname(li, "w")).value;
            const auto& b = store.at(pname(li, "b")).value;
            Matrix pre = w * x;
            pre.colwise() += b.col(0);
            Matrix out = activate(layer.activation, pre);
            if (cache) {
                cache->input = std::move(x);
                cache->output = out;
            }
            x = std::move(out);
            continue;
        }

        // Gates are stacked [input; forget; output; candidate] in wx, wh and b.
        const auto& wx = store.at(pname(li, "wx")).value;
        const auto& wh = store.at(pname(li, "wh")).value;
        const auto& b = store.at(pname(li, "b")).value;
        const Eigen::Index h = layer.out;
        const Eigen::Index steps = x.rows() / layer.in;
        Matrix hidden = Matrix::Zero(h, batch);
        Matrix cell = Matrix::Zero(h, batch);
        Matrix z(4 * h, batch);
        for (Eigen::Index t = 0; t < steps; ++t) {
            z.noalias() = wx * x.middleRows(t * layer.in, layer.in);
            z.noalias() += wh * hidden;
            z.colwise() += b.col(0);
            Matrix gi = sigmoid(z.middleRows(0, h));
            Matrix gf = sigmoid(z.middleRows(h, h));
            Matrix go = sigmoid(z.middleRows(2 * h, h));
            Matrix gg = activate(layer.activation, z.middleRows(3 * h, h));
            cell = (gf.array() * cell.array() + gi.array() * gg.array()).matrix();
            Matrix ca = activate(layer.activation, cell);
            hidden = (go.array() * ca.array()).matrix();
            if (cache) {
                cache->gate_i.push_back(std::move(gi));
                cache->gate_f.push_back(std::move(gf));
                cache->gate_o.push_back(std::move(go));
                cache->cand.push_back(std::move(gg));
                cache->cell.push_back(cell);
                cache->cell_act.push_back(std::move(ca));
                cache->hidden.push_back(hidden);
            }
        }
        if (cache) {
            cache->input = x;
            cache->output = hidden;
        }
        x = std::move(hidden);
    }
    return x;
}

}  // namespace

ParameterStore init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParameterStore store;
    store.seed = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto& l = spec.layers[li];
        if (l.kind == LayerKind::dense) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
            fill_uniform(store.add(pname(li, "w"), l.out, l.in).value, scale, rng);
            fill_uniform(store.add(pname(li, "b"), l.out, 1).value, scale, rng);
        } else {
            const double scale = 1.0 / std::sqrt(static_cast<double>(l.in + l.out));
            fill_uniform(store.add(pname(li, "wx"), 4 * l.out, l.in).value, scale, rng);
            fill_uniform(store.add(pname(li, "wh"), 4 * l.out, l.out).value, scale, rng);
            fill_uniform(store.add(pname(li, "b"), 4 * l.out, 1).value, scale, rng);
        }
    }
    return store;
}

ForwardResult forward(const ParameterStore& store, const NetworkSpec& spec, const Matrix& input) {
    ForwardResult result;
    result.output = run_forward(store, spec, input, &result.tape);
    return result;
}

Matrix predict(const ParameterStore& store, const NetworkSpec& spec, const Matrix& input) {
    return run_forward(store, spec, input, nullptr);
}

Matrix backward(ParameterStore& store, const NetworkSpec& spec, const Tape& tape,
                const Matrix& output_grad) {
    if (tape.store != &store || tape.version != store.version() ||
        tape.layer_count != spec.layers.size() || tape.layers.size() != spec.layers.size()) {
        throw ContractError("tape does not match this store/spec (stale or foreign tape)");
    }
    const auto& last_cache = tape.layers.back();
    if (output_grad.rows() != last_cache.output.rows() ||
        output_grad.cols() != last_cache.output.cols()) {
        throw ShapeError("output gradient shape does not match the recorded output");
    }

    Matrix grad = output_grad;
    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const auto& layer = spec.layers[li];
        const auto& cache = tape.layers[li];
        if (layer.kind == LayerKind::dense) {
            auto& w = store.at(pname(li, "w"));
            auto& b = store.at(pname(li, "b"));
            Matrix dpre = (grad.array() * activation_grad(layer.activation, cache.output).array()).matrix();
            w.grad.noalias() += dpre * cache.input.transpose();
            b.grad.col(0) += dpre.rowwise().sum();
            grad = w.value.transpose() * dpre;
            continue;
        }

        auto& wx = store.at(pname(li, "wx"));
        auto& wh = store.at(pname(li, "wh"));
        auto& b = store.at(pname(li, "b"));
        const Eigen::Index h = layer.out;
        const Eigen::Index steps = static_cast<Eigen::Index>(cache.hidden.size());
        const Eigen::Index batch = grad.cols();
        Matrix dinput = Matrix::Zero(cache.input.rows(), batch);
        Matrix dh_next = Matrix::Zero(h, batch);
        Matrix dc_next = Matrix::Zero(h, batch);
        Matrix dz(4 * h, batch);
        const Matrix zeros = Matrix::Zero(h, batch);
        for (Eigen::Index t = steps; t-- > 0;) {
            const auto& gi = cache.gate_i[t];
            const auto& gf = cache.gate_f[t];
            const auto& go = cache.gate_o[t];
            const auto& gg = cache.cand[t];
            const auto& ca = cache.cell_act[t];
            const Matrix& c_prev = t > 0 ? cache.cell[t - 1] : zeros;
            const Matrix& h_prev = t > 0 ? cache.hidden[t - 1] : zeros;

            Matrix dh = dh_next;
            if (t == steps - 1) dh += grad;
            Matrix dc = (dh.array() * go.array() *
                         activation_grad(layer.activation, ca).array()).matrix() + dc_next;
            dz.middleRows(0, h) = (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
            dz.middleRows(h, h) = (dc.array() * c_prev.array() * gf.array() * (1.0 - gf.array())).matrix();
            dz.middleRows(2 * h, h) = (dh.array() * ca.array() * go.array() * (1.0 - go.array())).matrix();
            dz.middleRows(3 * h, h) = (dc.array() * gi.array() *
                                       activation_grad(layer.activation, gg).array()).matrix();
            dc_next = (dc.array() * gf.array()).matrix();

            const auto x_t = cache.input.middleRows(t * layer.in, layer.in);
            wx.grad.noalias() += dz * x_t.transpose();
            wh.grad.noalias() += dz * h_prev.transpose();
            b.grad.col(0) += dz.rowwise().sum();
            dh_next.noalias() = wh.value.transpose() * dz;
            dinput.middleRows(t * layer.in, layer.in).noalias() = wx.value.transpose() * dz;
        }
        grad = std::move(dinput);
    }
    return grad;
}

void optimizer_step(ParameterStore& store, double learning_rate, AdamState& state) {
    for (const auto& [name, p] : store) {
        if (!p.grad.allFinite()) throw NumericError("non-finite gradient in parameter " + name);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : store) {
        auto it = state.moments.find(name);
        if (it == state.moments.end()) {
            it = state.moments
                     .emplace(name, std::make_pair(Matrix::Zero(p.value.rows(), p.value.cols()),
                                                   Matrix::Zero(p.value.rows(), p.value.cols())))
                     .first;
        }
        auto& [m, v] = it->second;
        m = state.beta1 * m + (1.0 - state.beta1) * p.grad;
        v = state.beta2 * v + (1.0 - state.beta2) * p.grad.cwiseProduct(p.grad);
        p.value.array() -= learning_rate * (m.array() / bc1) /
                           ((v.array() / bc2).sqrt() + state.epsilon);
    }
    store.zero_grads();
    store.mark_modified();
}

double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

GradCheckReport check_gradients(std::span<ParameterStore* const> stores,
                                const std::function<double()>& loss, double tolerance,
                                double step) {
    GradCheckReport report;
    for (std::size_t si = 0; si < stores.size(); ++si) {
        for (auto& [name, p] : *stores[si]) {
            for (Eigen::Index k = 0; k < p.value.size(); ++k) {
                double& w = p.value.data()[k];
                const double saved = w;
                w = saved + step;
                const double up = loss();
                w = saved - step;
                const double down = loss();
                w = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double err = relative_error(p.grad.data()[k], numeric);
                ++report.parameters_checked;
                if (report.worst_parameter.empty() || err > report.max_rel_error) {
                    report.max_rel_error = err;
                    report.worst_parameter = "store" + std::to_string(si) + ":" + name;
                }
            }
        }
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

GradCheckReport gradient_check(const NetworkSpec& spec, std::uint64_t seed, double tolerance) {
    spec.validate();
    ParameterStore store = init_network(spec, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);

    constexpr Eigen::Index kBatch = 3;
    constexpr Eigen::Index kSteps = 4;
    const Eigen::Index rows = spec.recurrent() ? spec.input_width() * kSteps : spec.input_width();
    Matrix input(rows, kBatch);
    Matrix target(spec.output_width(), kBatch);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = normal(rng);

    auto loss = [&] {
        const Matrix out = predict(store, spec, input);
        return 0.5 * (out - target).squaredNorm();
    };
    auto fwd = forward(store, spec, input);
    backward(store, spec, fwd.tape, fwd.output - target);
    ParameterStore* stores[] = {&store};
    return check_gradients(stores, loss, tolerance);
}

}  // namespace tsad::nn
