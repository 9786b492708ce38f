#include "uncproxy/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uncproxy/error.hpp"
#include "uncproxy/rng.hpp"

namespace uncproxy {

namespace {

constexpr double kLogClip = 1e-12;

void require_probability(double p) {
    if (!(p > 0.0 && p < 1.0))
        fail(ErrorKind::invalid_input, "dropout probability must lie in (0, 1), got " + std::to_string(p));
}

void check_masks(const NetworkParams& params, const DropoutMasks& masks) {
    require_probability(masks.p);
    if (masks.masks.size() + 1 != params.layers.size())
        fail(ErrorKind::invalid_input, "mask set does not match the network depth");
    for (std::size_t k = 0; k < masks.masks.size(); ++k)
        if (masks.masks[k].size() != params.layers[k + 1].in_dim())
            fail(ErrorKind::invalid_input, "mask width does not match layer " + std::to_string(k + 1));
}

}  // namespace

void NetworkParams::validate() const {
    if (layers.empty()) fail(ErrorKind::invalid_input, "network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const Layer& l = layers[k];
        if (l.in_dim() == 0 || l.out_dim() == 0)
            fail(ErrorKind::invalid_input, "layer " + std::to_string(k) + " has a zero dimension");
        if (l.bias.size() != l.out_dim())
            fail(ErrorKind::invalid_input, "layer " + std::to_string(k) + " bias length mismatch");
        if (!l.weight.all_finite() || !std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); }))
            fail(ErrorKind::invalid_input, "layer " + std::to_string(k) + " has non-finite parameters");
        if (k > 0 && layers[k - 1].out_dim() != l.in_dim())
            fail(ErrorKind::invalid_input, "layer " + std::to_string(k) + " input does not chain");
    }
    if (layers.back().activation != Activation::identity)
        fail(ErrorKind::invalid_input, "final layer must emit logits (identity activation)");
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.data().size() + l.bias.size();
    return n;
}

double NetworkParams::squared_norm() const {
    double s = 0.0;
    for (const auto& l : layers) {
        for (double w : l.weight.data()) s += w * w;
        for (double b : l.bias) s += b * b;
    }
    return s;
}

void TrainConfig::validate() const {
    require_probability(dropout_p);
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail(ErrorKind::invalid_input, "learning rate must be positive");
    if (batch_size == 0) fail(ErrorKind::invalid_input, "batch size must be positive");
    if (weight_decay && (!(*weight_decay >= 0.0) || !std::isfinite(*weight_decay)))
        fail(ErrorKind::invalid_input, "weight decay must be non-negative");
    if (mc_samples_T == 0) fail(ErrorKind::invalid_input, "mc_samples_T must be at least 1");
}

double TrainConfig::effective_weight_decay(std::size_t n_train) const {
    if (weight_decay) return *weight_decay;
    return (1.0 - dropout_p) / (2.0 * static_cast<double>(n_train));
}

void Dataset::validate() const {
    if (features.rows() == 0 || features.cols() == 0 || soft_labels.cols() == 0)
        fail(ErrorKind::invalid_input, "dataset must have N, D, C > 0");
    if (soft_labels.rows() != features.rows())
        fail(ErrorKind::invalid_input, "features and soft labels disagree on N");
    if (sample_ids.size() != features.rows())
        fail(ErrorKind::invalid_input, "sample id count disagrees with N");
    for (std::size_t i = 0; i < soft_labels.rows(); ++i) {
        const auto row = soft_labels.row(i);
        const double sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-9 || std::any_of(row.begin(), row.end(), [](double v) { return v < 0.0; }))
            fail(ErrorKind::invalid_input, "soft label row " + std::to_string(i) + " is not a distribution");
    }
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
    Batch b{Matrix(rows.size(), data.features.cols()), Matrix(rows.size(), data.soft_labels.cols())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::ranges::copy(data.features.row(rows[i]), b.features.row(i).begin());
        std::ranges::copy(data.soft_labels.row(rows[i]), b.soft_labels.row(i).begin());
    }
    return b;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) fail(ErrorKind::invalid_input, "softmax of an empty vector");
    for (double z : logits)
        if (!std::isfinite(z)) fail(ErrorKind::invalid_input, "softmax input is not finite");
    const double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - zmax);
        sum += out[c];
    }
    for (double& v : out) v /= sum;
    return out;
}

DropoutMasks sample_dropout_masks(const NetworkParams& params, double p, std::uint64_t seed) {
    require_probability(p);
    DropoutMasks m{p, {}};
    for (std::size_t k = 1; k < params.layers.size(); ++k) {
        Rng rng(seed, {k});
        std::vector<std::uint8_t> mask(params.layers[k].in_dim());
        for (auto& bit : mask) bit = rng.uniform01() >= p ? 1 : 0;
        m.masks.push_back(std::move(mask));
    }
    return m;
}

DropoutMasks all_ones_masks(const NetworkParams& params, double p) {
    require_probability(p);
    DropoutMasks m{p, {}};
    for (std::size_t k = 1; k < params.layers.size(); ++k) m.masks.emplace_back(params.layers[k].in_dim(), 1);
    return m;
}

ForwardTrace forward_trace(const NetworkParams& params, std::span<const double> x, const DropoutMasks* masks) {
    if (params.layers.empty()) fail(ErrorKind::invalid_input, "network has no layers");
    if (x.size() != params.input_dim())
        fail(ErrorKind::invalid_input, "feature dimension " + std::to_string(x.size()) + " != network input " +
                                           std::to_string(params.input_dim()));
    if (masks) check_masks(params, *masks);

    ForwardTrace trace;
    std::vector<double> act(x.begin(), x.end());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const Layer& layer = params.layers[k];
        if (masks && k > 0) {
            const double scale = 1.0 / (1.0 - masks->p);
            const auto& mask = masks->masks[k - 1];
            for (std::size_t j = 0; j < act.size(); ++j) act[j] = mask[j] ? act[j] * scale : 0.0;
        }
        std::vector<double> z(layer.bias);
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            const auto w = layer.weight.row(r);
            double s = 0.0;
            for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * act[c];
            z[r] += s;
        }
        trace.inputs.push_back(std::move(act));
        act = z;
        if (layer.activation == Activation::relu)
            for (double& v : act) v = v > 0.0 ? v : 0.0;
        trace.pre_activations.push_back(std::move(z));
    }
    return trace;
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> x) {
    auto trace = forward_trace(params, x, nullptr);
    return std::move(trace.pre_activations.back());
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> x, const DropoutMasks& masks) {
    auto trace = forward_trace(params, x, &masks);
    return std::move(trace.pre_activations.back());
}

namespace {

double cross_entropy(std::span<const double> probs, std::span<const double> target) {
    double ce = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c)
        if (target[c] != 0.0) ce -= target[c] * std::log(std::max(probs[c], kLogClip));
    return ce;
}

void check_batch(const NetworkParams& params, const Batch& batch, std::span<const DropoutMasks> masks) {
    if (batch.features.rows() == 0) fail(ErrorKind::empty_input, "loss over an empty batch");
    if (batch.soft_labels.rows() != batch.features.rows() || batch.soft_labels.cols() != params.output_dim())
        fail(ErrorKind::invalid_input, "batch labels do not match the network output");
    if (!masks.empty() && masks.size() != batch.features.rows())
        fail(ErrorKind::invalid_input, "need exactly one mask set per batch row");
}

}  // namespace

double loss(const NetworkParams& params, const Batch& batch, double weight_decay, std::span<const DropoutMasks> masks) {
    check_batch(params, batch, masks);
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.features.rows(); ++i) {
        const auto logits = masks.empty() ? forward(params, batch.features.row(i))
                                          : forward(params, batch.features.row(i), masks[i]);
        sum += cross_entropy(softmax(logits), batch.soft_labels.row(i));
    }
    return sum / static_cast<double>(batch.features.rows()) + weight_decay * params.squared_norm();
}

LossGradient loss_gradient(const NetworkParams& params, const Batch& batch, double weight_decay,
                           std::span<const DropoutMasks> masks) {
    check_batch(params, batch, masks);
    const std::size_t L = params.layers.size();
    LossGradient out;
    for (const auto& l : params.layers) {
        out.grad.weight.emplace_back(l.out_dim(), l.in_dim());
        out.grad.bias.emplace_back(l.out_dim(), 0.0);
    }

    double ce_sum = 0.0;
    for (std::size_t i = 0; i < batch.features.rows(); ++i) {
        const DropoutMasks* m = masks.empty() ? nullptr : &masks[i];
        const auto trace = forward_trace(params, batch.features.row(i), m);
        const auto probs = softmax(trace.logits());
        const auto target = batch.soft_labels.row(i);
        ce_sum += cross_entropy(probs, target);

        double target_mass = 0.0;
        for (double y : target) target_mass += y;
        std::vector<double> delta(probs.size());
        for (std::size_t c = 0; c < probs.size(); ++c) delta[c] = probs[c] * target_mass - target[c];

        for (std::size_t k = L; k-- > 0;) {
            const Layer& layer = params.layers[k];
            const auto& in = trace.inputs[k];
            Matrix& gw = out.grad.weight[k];
            for (std::size_t r = 0; r < layer.out_dim(); ++r) {
                out.grad.bias[k][r] += delta[r];
                auto grow = gw.row(r);
                for (std::size_t c = 0; c < in.size(); ++c) grow[c] += delta[r] * in[c];
            }
            if (k == 0) break;

            // Back through the weights, the mask scaling, then the previous ReLU.
            std::vector<double> d_in(layer.in_dim(), 0.0);
            for (std::size_t r = 0; r < layer.out_dim(); ++r) {
                const auto w = layer.weight.row(r);
                for (std::size_t c = 0; c < w.size(); ++c) d_in[c] += w[c] * delta[r];
            }
            if (m) {
                const double scale = 1.0 / (1.0 - m->p);
                const auto& mask = m->masks[k - 1];
                for (std::size_t c = 0; c < d_in.size(); ++c) d_in[c] = mask[c] ? d_in[c] * scale : 0.0;
            }
            const auto& z_prev = trace.pre_activations[k - 1];
            if (params.layers[k - 1].activation == Activation::relu)
                for (std::size_t c = 0; c < d_in.size(); ++c)
                    if (!(z_prev[c] > 0.0)) d_in[c] = 0.0;
            delta = std::move(d_in);
        }
    }

    const double inv_n = 1.0 / static_cast<double>(batch.features.rows());
    for (std::size_t k = 0; k < L; ++k) {
        const auto w = params.layers[k].weight.data();
        auto gw = out.grad.weight[k].data();
        for (std::size_t j = 0; j < gw.size(); ++j) gw[j] = gw[j] * inv_n + 2.0 * weight_decay * w[j];
        const auto& b = params.layers[k].bias;
        for (std::size_t j = 0; j < b.size(); ++j) out.grad.bias[k][j] = out.grad.bias[k][j] * inv_n + 2.0 * weight_decay * b[j];
    }
    out.loss = ce_sum * inv_n + weight_decay * params.squared_norm();
    return out;
}

NetworkParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2) fail(ErrorKind::invalid_input, "architecture needs input and output sizes");
    for (std::size_t s : layer_sizes)
        if (s == 0) fail(ErrorKind::invalid_input, "architecture contains a zero-width layer");
    NetworkParams params;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        const std::size_t fan_in = layer_sizes[k];
        const std::size_t fan_out = layer_sizes[k + 1];
        Rng rng(seed, {stream_tag::init, k});
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        Layer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0),
                    k + 2 == layer_sizes.size() ? Activation::identity : Activation::relu};
        for (double& w : layer.weight.data()) w = sd * rng.normal();
        params.layers.push_back(std::move(layer));
    }
    return params;
}

TrainResult train(const Dataset& data, const TrainConfig& config, std::span<const std::size_t> layer_sizes) {
    data.validate();
    config.validate();
    if (layer_sizes.size() < 2 || layer_sizes.front() != data.features.cols() ||
        layer_sizes.back() != data.soft_labels.cols())
        fail(ErrorKind::invalid_input, "architecture does not match dataset dimensions");

    TrainResult result{init_params(layer_sizes, config.seed), {}};
    NetworkParams& params = result.params;
    const std::size_t n = data.size();
    const double wd = config.effective_weight_decay(n);

    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(config.seed, {stream_tag::shuffle, epoch});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const Batch batch = make_batch(data, rows);
            std::vector<DropoutMasks> masks;
            masks.reserve(rows.size());
            for (std::size_t j = start; j < stop; ++j)
                masks.push_back(sample_dropout_masks(
                    params, config.dropout_p, stream_seed(config.seed, {stream_tag::train_mask, epoch, j})));

            LossGradient lg;
            try {
                lg = loss_gradient(params, batch, wd, masks);
            } catch (const Error& e) {
                // Inputs were validated up front, so a non-finite value here came from the updates.
                if (e.kind() != ErrorKind::invalid_input) throw;
                fail(ErrorKind::training_diverged, "training diverged (" + std::string(e.what()) + ") in epoch " +
                                                       std::to_string(epoch));
            }
            if (!std::isfinite(lg.loss))
                fail(ErrorKind::training_diverged, "training diverged (non-finite loss) in epoch " + std::to_string(epoch));
            for (std::size_t k = 0; k < params.layers.size(); ++k) {
                auto w = params.layers[k].weight.data();
                const auto gw = lg.grad.weight[k].data();
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= config.learning_rate * gw[j];
                auto& b = params.layers[k].bias;
                for (std::size_t j = 0; j < b.size(); ++j) b[j] -= config.learning_rate * lg.grad.bias[k][j];
            }
            epoch_loss += lg.loss * static_cast<double>(rows.size());
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss) || !params.layers.back().weight.all_finite())
            fail(ErrorKind::training_diverged, "training diverged (non-finite parameters) in epoch " + std::to_string(epoch));
        result.loss_trace.push_back(epoch_loss);
    }
    return result;
}

McPrediction mc_predict(const NetworkParams& params, std::span<const double> x, std::size_t T, double p,
                        std::uint64_t seed, std::string sample_id) {
    if (T == 0) fail(ErrorKind::invalid_input, "mc_predict needs T >= 1");
    Matrix probs(T, params.output_dim());
    for (std::size_t t = 0; t < T; ++t) {
        const auto masks = sample_dropout_masks(params, p, stream_seed(seed, {stream_tag::mc_pass, t}));
        const auto row = softmax(forward(params, x, masks));
        std::ranges::copy(row, probs.row(t).begin());
    }
    return McPrediction(std::move(sample_id), std::move(probs));
}

}  // namespace uncproxy
