// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hatewatch/tensor.hpp"
#include "hatewatch/types.hpp"

// Loss terms of the disentanglement objective.
//
// Each term has two forms: a typed form operating on domain objects, and a
// batch form over matrices that also returns the analytic gradient with
// respect to its tensor inputs. The typed forms delegate to the batch forms.
//
// Conventions shared by every term:
//  * probabilities are clamped to [kProbFloor, 1] before any log; a clamped
//    entry contributes zero gradient;
//  * terms over the high-confidence set are 0 when the set is empty;
//  * kl_causal and recon_loss are means over the batch.
namespace hatewatch::losses {

inline constexpr double kProbFloor = 1e-8;

/// Value and gradient of a scalar loss with respect to one matrix input.
struct ValueGrad {
    double value = 0.0;
    Matrix grad;
};

/// 1 - H(p) / ln C, natural-log entropy. Throws ConfigError when C < 2.
double confidence_weight(std::span<const double> probs);

/// Builds a SoftLabel and fills its confidence.
SoftLabel make_soft_label(std::vector<double> probs);

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

struct LabeledLatent {
    TargetLatent latent;
    SoftLabel label;
};

struct HighConfidenceSet {
    std::vector<LabeledLatent> members;
    std::vector<std::size_t> batch_index;  // position of each member in the batch

    std::size_t size() const { return members.size(); }
    bool empty() const { return members.empty(); }
};

/// Members whose confidence is >= eta, in batch order.
HighConfidenceSet select_high_confidence(std::span<const LabeledLatent> batch, double eta);
/// Index-only variant used by the training loop.
std::vector<std::size_t> select_high_confidence(std::span<const double> confidences, double eta);

/// 1 when both labels share their argmax class, else 0.
int pair_similarity(const SoftLabel& a, const SoftLabel& b);

/// w * d^2 + (1 - w) * max(0, beta - d)^2 with d the Euclidean distance.
double contrastive_pair(std::span<const double> a, std::span<const double> b, int w, double beta);

/// Sum of contrastive_pair over ordered pairs (i, j), i != j.
double contrastive_loss(const HighConfidenceSet& s, double beta);
/// Batch form: `latents` is |S| x h_disc, `classes` the argmax class per row.
ValueGrad contrastive_loss_grad(const Matrix& latents, std::span<const int> classes, double beta);

/// Mean over S of KL(uniform || f). `classifier_probs` has one row per member.
double conf_regularizer(const HighConfidenceSet& s, const Matrix& classifier_probs);
ValueGrad conf_regularizer_grad(const Matrix& classifier_probs);

/// (1/|S|) sum_i w_i KL(pseudo_i || f_i), w_i the pseudo-label confidence.
double target_loss(const HighConfidenceSet& s, const Matrix& classifier_probs);
ValueGrad target_loss_grad(const Matrix& pseudo, std::span<const double> weights, const Matrix& classifier_probs);

/// -sum_i log p[i][id_i] over unmasked positions. Throws DataError when an
/// id is outside the vocabulary.
double recon_loss(const TokenSequence& true_ids, const Matrix& predicted_probs);
/// Batch form: `probs` stacks `batch` blocks of seq rows each; returns the
/// mean over sequences of the per-sequence sums.
ValueGrad recon_loss_grad(const Matrix& probs, std::span<const int> ids, std::span<const std::uint8_t> mask,
                          int batch);

/// 0.5 * sum_k (mu^2 + sigma^2 - ln sigma^2 - 1).
double kl_causal(const CausalLatent& c);
struct KlGrad {
    double value = 0.0;
    Matrix dmu;
    Matrix dsigma;
};
/// Batch mean over rows of `mu` and `sigma`.
KlGrad kl_causal_grad(const Matrix& mu, const Matrix& sigma);

/// Mean negative log-likelihood of `labels` under the row distributions.
double hate_loss(const Matrix& preds, std::span<const int> labels);
ValueGrad hate_loss_grad(const Matrix& preds, std::span<const int> labels);

struct LossParts {
    double contrastive = 0.0;
    double conf = 0.0;
    double target = 0.0;
    double recon = 0.0;
    double kl_causal = 0.0;
    double hate = 0.0;
};

struct LossCoefficients {
    double alpha_t = 0.05;
    double alpha_c = 0.05;
    double delta_cont = 0.001;
    double delta_conf = 0.001;
};

/// Every term of one step plus the composed objective.
struct LossBreakdown {
    double contrastive = 0.0;
    double conf = 0.0;
    double target = 0.0;
    double recon = 0.0;
    double kl_causal = 0.0;
    double vae = 0.0;
    double hate = 0.0;
    double total = 0.0;

    /// target + delta_cont * contrastive + delta_conf * conf
    double target_objective(const LossCoefficients& k) const {
        return target + k.delta_cont * contrastive + k.delta_conf * conf;
    }
    /// True when vae and total match their definitions to `rel_tol`.
    bool audit(const LossCoefficients& k, double rel_tol = 1e-6) const;
    std::string to_string() const;
};

/// Throws NumericError naming the first non-finite part.
LossBreakdown compose_losses(const LossParts& parts, const LossCoefficients& coeffs);

}  // namespace hatewatch::losses
