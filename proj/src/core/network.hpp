#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/cells.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace avatar {

enum class BnMode { train, inference };
enum class HeadActivation { linear, sigmoid };

// Normalizes each feature over the joint batch-and-time axis. gamma/beta are
// trainable; running statistics are buffers updated only in train mode.
struct BatchNormLayer {
    std::size_t features = 0;
    Tensor gamma, beta;
    std::vector<double> running_mean, running_var;
    double momentum = 0.9;
    double epsilon = 1e-5;

    static BatchNormLayer create(std::size_t features);
    Tensor forward(const Tensor& x, BnMode mode);

    std::vector<Tensor> parameters();
    void collect_named(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor>>& out);
};

struct StackLayer {
    std::optional<BatchNormLayer> batch_norm;
    GruCell cell;
};

// Stack of (batch norm, GRU) layers unrolled over time with zero initial
// hidden state, followed by a per-step affine head.
struct RegularizedGruStack {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    std::size_t output_size = 0;
    std::vector<StackLayer> layers;
    Tensor head_weight, head_bias;
    HeadActivation head_activation = HeadActivation::linear;

    static RegularizedGruStack create(std::size_t input_size, std::size_t hidden_size,
                                      std::size_t output_size, std::size_t layer_count,
                                      bool use_batch_norm, HeadActivation activation,
                                      SeededRng& rng);

    // x: N x T x input_size -> N x T x output_size.
    Tensor run(const Tensor& x, BnMode mode);

    bool has_batch_norm() const;
    std::vector<Tensor> parameters();
    void collect_named(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor>>& out);
    void collect_named_buffers(const std::string& prefix,
                               std::vector<std::pair<std::string, std::vector<double>*>>& out);
};

struct ModelDims {
    std::size_t feature_dim = 0;
    std::size_t latent_dim = 24;
    std::size_t hidden_size = 24;
    std::size_t layer_count = 3;
    bool use_batch_norm = true;  // regularized GRU; dropped by the RG ablation
};

// The four AVATAR networks. The discriminator never carries batch norm and
// emits per-step probabilities; callers average them over time into one
// sequence score.
struct AvatarModel {
    ModelDims dims;
    RegularizedGruStack encoder;        // F -> H, linear head
    RegularizedGruStack decoder;        // H -> F, sigmoid head
    RegularizedGruStack supervisor;     // F -> F, sigmoid head
    RegularizedGruStack discriminator;  // H -> 1, sigmoid head, no batch norm
    bool trained = false;

    static AvatarModel init(const ModelDims& dims, SeededRng& rng);

    std::vector<Tensor> autoencoder_parameters();
    std::vector<Tensor> all_parameters();
    void zero_all_grads();
    std::vector<std::pair<std::string, Tensor>> named_parameters();
    // Batch-norm running statistics (non-trainable state).
    std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();
};

// Order-sensitive FNV-1a over the raw bytes of every tensor; used to assert
// which parameter sets an update touched.
std::uint64_t parameter_fingerprint(const std::vector<Tensor>& params);

}  // namespace avatar
