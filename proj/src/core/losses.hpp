#pragma once

#include "core/network.hpp"
#include "core/tensor.hpp"

namespace avatar {

// Scalar components of one training step. l_d = l_mean + l_std and
// l_ae = l_r_joint + l_ad_generator + l_s + l_d with unit weights; terms
// inactive in a stage or ablation are zero.
struct LossBreakdown {
    double l_r = 0.0;
    double l_r_joint = 0.0;
    double l_s = 0.0;
    double l_mean = 0.0;
    double l_std = 0.0;
    double l_d = 0.0;
    double l_ad_generator = 0.0;
    double l_ad_discriminator = 0.0;
    double l_ae = 0.0;
};

// Mean over the batch of the time-summed per-step Euclidean feature norm
// of x - x_ae.
Tensor recon_loss(const Tensor& x, const Tensor& x_ae);

// recon_loss(x, x_ae) + recon_loss(x, x_sup).
Tensor joint_recon_loss(const Tensor& x, const Tensor& x_ae, const Tensor& x_sup);

// One-step and two-step prediction penalties from precomputed supervisor
// output y_hat over x_ae: y_hat[t] vs x_ae[t+1] and y_hat[t] vs x_ae[t+2].
Tensor supervised_loss(const Tensor& x_ae, const Tensor& y_hat);
// Contract form: runs the supervisor over x_ae itself.
Tensor supervised_loss(const Tensor& x_ae, RegularizedGruStack& supervisor, BnMode mode);

// Per (t, h): |batch mean difference|; mean over latent dims, sum over time.
Tensor mean_loss(const Tensor& z, const Tensor& z_hat);

// Per (t, h): |biased batch variance difference|; mean over latent dims,
// sum over time. Implements the formula literally: squared deviations with
// 1/N and no square root.
Tensor std_loss(const Tensor& z, const Tensor& z_hat);

Tensor distribution_loss(const Tensor& z, const Tensor& z_hat);

struct AdversarialLosses {
    Tensor generator;      // non-saturating: -mean log D(fake)
    Tensor discriminator;  // -mean log D(real) - mean log(1 - D(fake))
};

// Inputs are probabilities in (0,1); they are clamped to
// [1e-7, 1 - 1e-7] before the logs.
AdversarialLosses adversarial_losses(const Tensor& d_real, const Tensor& d_fake);

// l_r_joint + l_ad_generator + l_s + l_d, unit weights.
Tensor combined_ae_loss(const Tensor& l_r_joint, const Tensor& l_ad_generator, const Tensor& l_s,
                        const Tensor& l_d);

// Collapses per-step discriminator probabilities (N x T x 1) into one score
// per sequence by averaging over time.
Tensor sequence_score(const Tensor& per_step_probs);

}  // namespace avatar
