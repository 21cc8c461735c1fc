#include "core/losses.hpp"

#include "core/common.hpp"

namespace avatar {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), ErrorCategory::invalid_argument,
            std::string(op) + ": shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                shape_to_string(b.shape()));
}

void check_sequence(const char* op, const Tensor& x) {
    require(x.rank() == 3, ErrorCategory::invalid_argument,
            std::string(op) + ": expected N x T x F input, got " + shape_to_string(x.shape()));
}

// mean_batch( sum_t ||a_t - b_t||_2 )
Tensor step_norm_loss(const Tensor& a, const Tensor& b) {
    Tensor diff = sub(a, b);
    Tensor per_step = sqrt(sum(square(diff), 2));  // N x T
    return mean(sum(per_step, 1));
}

}  // namespace

Tensor recon_loss(const Tensor& x, const Tensor& x_ae) {
    check_sequence("recon_loss", x);
    check_same_shape("recon_loss", x, x_ae);
    return step_norm_loss(x, x_ae);
}

Tensor joint_recon_loss(const Tensor& x, const Tensor& x_ae, const Tensor& x_sup) {
    check_sequence("joint_recon_loss", x);
    check_same_shape("joint_recon_loss", x, x_ae);
    check_same_shape("joint_recon_loss", x, x_sup);
    return add(step_norm_loss(x, x_ae), step_norm_loss(x, x_sup));
}

Tensor supervised_loss(const Tensor& x_ae, const Tensor& y_hat) {
    check_sequence("supervised_loss", x_ae);
    check_same_shape("supervised_loss", x_ae, y_hat);
    const std::size_t t_len = x_ae.dim(1);
    require(t_len >= 3, ErrorCategory::invalid_argument,
            "supervised_loss: needs at least 3 time steps, got " + std::to_string(t_len));
    Tensor one_step = step_norm_loss(slice_time(y_hat, 0, t_len - 1), slice_time(x_ae, 1, t_len));
    Tensor two_step = step_norm_loss(slice_time(y_hat, 0, t_len - 2), slice_time(x_ae, 2, t_len));
    return add(one_step, two_step);
}

Tensor supervised_loss(const Tensor& x_ae, RegularizedGruStack& supervisor, BnMode mode) {
    return supervised_loss(x_ae, supervisor.run(x_ae, mode));
}

Tensor mean_loss(const Tensor& z, const Tensor& z_hat) {
    check_sequence("mean_loss", z);
    check_same_shape("mean_loss", z, z_hat);
    Tensor diff = abs(sub(mean(z, 0), mean(z_hat, 0)));  // T x H
    return sum(mean(diff, 1));
}

Tensor std_loss(const Tensor& z, const Tensor& z_hat) {
    check_sequence("std_loss", z);
    check_same_shape("std_loss", z, z_hat);
    require(z.dim(0) >= 2, ErrorCategory::invalid_argument,
            "std_loss: needs a batch of at least 2 sequences");
    auto batch_var = [](const Tensor& t) {
        Tensor centered = sub(t, mean(t, 0, true));
        return mean(square(centered), 0);  // T x H, biased
    };
    Tensor diff = abs(sub(batch_var(z), batch_var(z_hat)));
    return sum(mean(diff, 1));
}

Tensor distribution_loss(const Tensor& z, const Tensor& z_hat) {
    return add(mean_loss(z, z_hat), std_loss(z, z_hat));
}

AdversarialLosses adversarial_losses(const Tensor& d_real, const Tensor& d_fake) {
    for (double v : d_real.values())
        require(v > 0.0 && v < 1.0, ErrorCategory::invalid_argument,
                "adversarial_losses: d_real probability outside (0,1)");
    for (double v : d_fake.values())
        require(v > 0.0 && v < 1.0, ErrorCategory::invalid_argument,
                "adversarial_losses: d_fake probability outside (0,1)");
    constexpr double kEps = 1e-7;
    Tensor real = clamp(d_real, kEps, 1.0 - kEps);
    Tensor fake = clamp(d_fake, kEps, 1.0 - kEps);
    Tensor disc = sub(affine(mean(log(real)), -1.0, 0.0), mean(log(affine(fake, -1.0, 1.0))));
    Tensor gen = affine(mean(log(fake)), -1.0, 0.0);
    return {gen, disc};
}

Tensor combined_ae_loss(const Tensor& l_r_joint, const Tensor& l_ad_generator, const Tensor& l_s,
                        const Tensor& l_d) {
    return add(add(l_r_joint, l_ad_generator), add(l_s, l_d));
}

Tensor sequence_score(const Tensor& per_step_probs) {
    require(per_step_probs.rank() == 3 && per_step_probs.dim(2) == 1,
            ErrorCategory::invalid_argument,
            "sequence_score: expected N x T x 1 probabilities, got " +
                shape_to_string(per_step_probs.shape()));
    return reshape(mean(per_step_probs, 1), {per_step_probs.dim(0)});
}

}  // namespace avatar
