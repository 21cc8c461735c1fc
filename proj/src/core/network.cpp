#include "core/network.hpp"

#include <cmath>
#include <cstring>

#include "core/common.hpp"

namespace avatar {

BatchNormLayer BatchNormLayer::create(std::size_t features) {
    require(features > 0, ErrorCategory::invalid_argument, "batchnorm: feature count must be positive");
    BatchNormLayer layer;
    layer.features = features;
    layer.gamma = Tensor::full({features}, 1.0, true);
    layer.beta = Tensor::zeros({features}, true);
    layer.running_mean.assign(features, 0.0);
    layer.running_var.assign(features, 1.0);
    return layer;
}

Tensor BatchNormLayer::forward(const Tensor& x, BnMode mode) {
    require(x.rank() == 3, ErrorCategory::invalid_argument,
            "batchnorm: expected N x T x F input, got " + shape_to_string(x.shape()));
    require(x.dim(2) == features, ErrorCategory::invalid_argument,
            "batchnorm: feature count mismatch: input " + shape_to_string(x.shape()) +
                " vs layer features " + std::to_string(features));

    Tensor normalized;
    if (mode == BnMode::train) {
        require(x.dim(0) * x.dim(1) >= 2, ErrorCategory::invalid_argument,
                "batchnorm: train mode needs at least 2 samples across batch and time");
        Tensor mu = mean(mean(x, 0, true), 1, true);              // 1 x 1 x F
        Tensor centered = sub(x, mu);
        Tensor var = mean(mean(square(centered), 0, true), 1, true);
        normalized = div(centered, sqrt(affine(var, 1.0, epsilon)));

        auto mu_v = mu.values();
        auto var_v = var.values();
        for (std::size_t f = 0; f < features; ++f) {
            running_mean[f] = momentum * running_mean[f] + (1.0 - momentum) * mu_v[f];
            running_var[f] = momentum * running_var[f] + (1.0 - momentum) * var_v[f];
        }
    } else {
        std::vector<double> inv(features), neg_mu(features);
        for (std::size_t f = 0; f < features; ++f) {
            inv[f] = 1.0 / std::sqrt(running_var[f] + epsilon);
            neg_mu[f] = -running_mean[f];
        }
        Tensor shift = Tensor::from_values({features}, std::move(neg_mu));
        Tensor scale = Tensor::from_values({features}, std::move(inv));
        normalized = mul(add(x, shift), scale);
    }
    return add(mul(normalized, gamma), beta);
}

std::vector<Tensor> BatchNormLayer::parameters() { return {gamma, beta}; }

void BatchNormLayer::collect_named(const std::string& prefix,
                                   std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

RegularizedGruStack RegularizedGruStack::create(std::size_t input_size, std::size_t hidden_size,
                                                std::size_t output_size, std::size_t layer_count,
                                                bool use_batch_norm, HeadActivation activation,
                                                SeededRng& rng) {
    require(input_size > 0 && hidden_size > 0 && output_size > 0 && layer_count > 0,
            ErrorCategory::invalid_argument, "stack: all dimensions must be positive");
    RegularizedGruStack stack;
    stack.input_size = input_size;
    stack.hidden_size = hidden_size;
    stack.output_size = output_size;
    stack.head_activation = activation;
    for (std::size_t i = 0; i < layer_count; ++i) {
        const std::size_t in = i == 0 ? input_size : hidden_size;
        StackLayer layer;
        if (use_batch_norm) layer.batch_norm = BatchNormLayer::create(in);
        layer.cell = GruCell::create(in, hidden_size, rng);
        stack.layers.push_back(std::move(layer));
    }
    stack.head_weight = init_weight(hidden_size, output_size, rng);
    stack.head_bias = Tensor::zeros({output_size}, true);
    return stack;
}

Tensor RegularizedGruStack::run(const Tensor& x, BnMode mode) {
    require(x.rank() == 3, ErrorCategory::invalid_argument,
            "run_network: expected N x T x F input, got " + shape_to_string(x.shape()));
    require(x.dim(2) == input_size, ErrorCategory::invalid_argument,
            "run_network: input feature count " + std::to_string(x.dim(2)) +
                " does not match stack input size " + std::to_string(input_size));
    require(x.dim(1) >= 1, ErrorCategory::invalid_argument, "run_network: empty time axis");

    const std::size_t n = x.dim(0);
    const std::size_t t_len = x.dim(1);
    Tensor seq = x;
    for (StackLayer& layer : layers) {
        if (layer.batch_norm) seq = layer.batch_norm->forward(seq, mode);
        Tensor h = Tensor::zeros({n, hidden_size});
        std::vector<Tensor> hidden_steps;
        hidden_steps.reserve(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            h = gru_step(layer.cell, select_time(seq, t), h);
            hidden_steps.push_back(h);
        }
        seq = stack_time(hidden_steps);
    }
    Tensor out = add(matmul(seq, head_weight), head_bias);
    if (head_activation == HeadActivation::sigmoid) out = sigmoid(out);
    return out;
}

bool RegularizedGruStack::has_batch_norm() const {
    for (const StackLayer& layer : layers)
        if (layer.batch_norm) return true;
    return false;
}

std::vector<Tensor> RegularizedGruStack::parameters() {
    std::vector<Tensor> params;
    for (StackLayer& layer : layers) {
        if (layer.batch_norm)
            for (Tensor& p : layer.batch_norm->parameters()) params.push_back(p);
        for (Tensor& p : layer.cell.parameters()) params.push_back(p);
    }
    params.push_back(head_weight);
    params.push_back(head_bias);
    return params;
}

void RegularizedGruStack::collect_named(const std::string& prefix,
                                        std::vector<std::pair<std::string, Tensor>>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string layer_prefix = prefix + ".layer" + std::to_string(i);
        if (layers[i].batch_norm) layers[i].batch_norm->collect_named(layer_prefix + ".bn", out);
        layers[i].cell.collect_named(layer_prefix + ".gru", out);
    }
    out.emplace_back(prefix + ".head.w", head_weight);
    out.emplace_back(prefix + ".head.b", head_bias);
}

void RegularizedGruStack::collect_named_buffers(
    const std::string& prefix, std::vector<std::pair<std::string, std::vector<double>*>>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].batch_norm) continue;
        const std::string layer_prefix = prefix + ".layer" + std::to_string(i) + ".bn";
        out.emplace_back(layer_prefix + ".running_mean", &layers[i].batch_norm->running_mean);
        out.emplace_back(layer_prefix + ".running_var", &layers[i].batch_norm->running_var);
    }
}

AvatarModel AvatarModel::init(const ModelDims& dims, SeededRng& rng) {
    require(dims.feature_dim > 0 && dims.latent_dim > 0 && dims.hidden_size > 0 &&
                dims.layer_count > 0,
            ErrorCategory::invalid_argument, "init_model: dimensions must be positive");
    AvatarModel model;
    model.dims = dims;
    model.encoder = RegularizedGruStack::create(dims.feature_dim, dims.hidden_size,
                                                dims.latent_dim, dims.layer_count,
                                                dims.use_batch_norm, HeadActivation::linear, rng);
    model.decoder = RegularizedGruStack::create(dims.latent_dim, dims.hidden_size,
                                                dims.feature_dim, dims.layer_count,
                                                dims.use_batch_norm, HeadActivation::sigmoid, rng);
    model.supervisor = RegularizedGruStack::create(dims.feature_dim, dims.hidden_size,
                                                   dims.feature_dim, dims.layer_count,
                                                   dims.use_batch_norm, HeadActivation::sigmoid, rng);
    // Batch norm would make the discriminator overly strong, so its stack
    // stays plain regardless of the RG setting.
    model.discriminator = RegularizedGruStack::create(dims.latent_dim, dims.hidden_size, 1,
                                                      dims.layer_count, false,
                                                      HeadActivation::sigmoid, rng);
    return model;
}

std::vector<Tensor> AvatarModel::autoencoder_parameters() {
    std::vector<Tensor> params = encoder.parameters();
    for (Tensor& p : decoder.parameters()) params.push_back(p);
    return params;
}

std::vector<Tensor> AvatarModel::all_parameters() {
    std::vector<Tensor> params = encoder.parameters();
    for (Tensor& p : decoder.parameters()) params.push_back(p);
    for (Tensor& p : supervisor.parameters()) params.push_back(p);
    for (Tensor& p : discriminator.parameters()) params.push_back(p);
    return params;
}

void AvatarModel::zero_all_grads() {
    for (Tensor& p : all_parameters()) p.zero_grad();
}

std::vector<std::pair<std::string, Tensor>> AvatarModel::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> named;
    encoder.collect_named("encoder", named);
    decoder.collect_named("decoder", named);
    supervisor.collect_named("supervisor", named);
    discriminator.collect_named("discriminator", named);
    return named;
}

std::vector<std::pair<std::string, std::vector<double>*>> AvatarModel::named_buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> named;
    encoder.collect_named_buffers("encoder", named);
    decoder.collect_named_buffers("decoder", named);
    supervisor.collect_named_buffers("supervisor", named);
    discriminator.collect_named_buffers("discriminator", named);
    return named;
}

std::uint64_t parameter_fingerprint(const std::vector<Tensor>& params) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001b3ULL;
        }
    };
    for (const Tensor& p : params) {
        auto v = p.values();
        mix(v.data(), v.size() * sizeof(double));
    }
    return hash;
}

}  // namespace avatar
