// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hatewatch/errors.hpp"

namespace hatewatch::losses {

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0); }

// d/dp log(clamp(p)); zero where the clamp is active.
double dlog(double p) { return (p < kProbFloor || p > 1.0) ? 0.0 : 1.0 / p; }

Matrix stack_latents(const HighConfidenceSet& s) {
    if (s.empty()) return Matrix();
    const int dim = static_cast<int>(s.members.front().latent.vector.size());
    Matrix m(static_cast<int>(s.size()), dim);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& v = s.members[i].latent.vector;
        if (static_cast<int>(v.size()) != dim) throw ConfigError("contrastive_loss: latent dimensions differ");
        std::copy(v.begin(), v.end(), m.row(static_cast<int>(i)).begin());
    }
    return m;
}

void check_rows(const HighConfidenceSet& s, const Matrix& probs, const char* what) {
    if (static_cast<std::size_t>(probs.rows()) != s.size())
        throw ConfigError(std::string(what) + ": expected one probability row per member");
}

bool rel_close(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

double confidence_weight(std::span<const double> probs) {
    const std::size_t c = probs.size();
    if (c < 2) throw ConfigError("confidence_weight: need at least 2 classes, got " + std::to_string(c));
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(clamp_prob(p));
    return std::clamp(1.0 - h / std::log(static_cast<double>(c)), 0.0, 1.0);
}

SoftLabel make_soft_label(std::vector<double> probs) {
    SoftLabel s;
    s.confidence = confidence_weight(probs);
    s.probs = std::move(probs);
    return s;
}

int argmax(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

HighConfidenceSet select_high_confidence(std::span<const LabeledLatent> batch, double eta) {
    HighConfidenceSet s;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (batch[i].label.confidence >= eta) {
            s.members.push_back(batch[i]);
            s.batch_index.push_back(i);
        }
    return s;
}

std::vector<std::size_t> select_high_confidence(std::span<const double> confidences, double eta) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < confidences.size(); ++i)
        if (confidences[i] >= eta) out.push_back(i);
    return out;
}

int pair_similarity(const SoftLabel& a, const SoftLabel& b) {
    if (a.probs.size() != b.probs.size()) throw ConfigError("pair_similarity: class counts differ");
    return argmax(a.probs) == argmax(b.probs) ? 1 : 0;
}

double contrastive_pair(std::span<const double> a, std::span<const double> b, int w, double beta) {
    if (a.size() != b.size()) throw ConfigError("contrastive_pair: dimension mismatch");
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    if (w == 1) return d2;
    const double gap = std::max(0.0, beta - std::sqrt(d2));
    return gap * gap;
}

ValueGrad contrastive_loss_grad(const Matrix& latents, std::span<const int> classes, double beta) {
    const int n = latents.rows(), dim = latents.cols();
    if (static_cast<int>(classes.size()) != n) throw ConfigError("contrastive_loss: one class per latent required");
    ValueGrad out{0.0, Matrix(n, dim)};
    // Each unordered pair appears twice among ordered pairs with equal value.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (int k = 0; k < dim; ++k) d2 += (latents(i, k) - latents(j, k)) * (latents(i, k) - latents(j, k));
            double coef = 0.0;  // dl/d(x_i) = coef * (x_i - x_j)
            if (classes[static_cast<std::size_t>(i)] == classes[static_cast<std::size_t>(j)]) {
                out.value += 2.0 * d2;
                coef = 2.0;
            } else {
                const double d = std::sqrt(d2);
                const double gap = beta - d;
                if (gap > 0.0) {
                    out.value += 2.0 * gap * gap;
                    coef = d > 0.0 ? -2.0 * gap / d : 0.0;
                }
            }
            if (coef == 0.0) continue;
            for (int k = 0; k < dim; ++k) {
                const double g = 2.0 * coef * (latents(i, k) - latents(j, k));
                out.grad(i, k) += g;
                out.grad(j, k) -= g;
            }
        }
    return out;
}

double contrastive_loss(const HighConfidenceSet& s, double beta) {
    if (s.size() <= 1) return 0.0;
    std::vector<int> classes;
    classes.reserve(s.size());
    for (const auto& m : s.members) classes.push_back(argmax(m.label.probs));
    return contrastive_loss_grad(stack_latents(s), classes, beta).value;
}

ValueGrad conf_regularizer_grad(const Matrix& probs) {
    const int n = probs.rows(), c = probs.cols();
    ValueGrad out{0.0, Matrix(n, c)};
    if (n == 0) return out;
    const double u = 1.0 / c;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k) {
            out.value += u * (std::log(u) - std::log(clamp_prob(probs(i, k))));
            out.grad(i, k) = -u * dlog(probs(i, k)) / n;
        }
    out.value /= n;
    return out;
}

double conf_regularizer(const HighConfidenceSet& s, const Matrix& classifier_probs) {
    if (s.empty()) return 0.0;
    check_rows(s, classifier_probs, "conf_regularizer");
    return conf_regularizer_grad(classifier_probs).value;
}

ValueGrad target_loss_grad(const Matrix& pseudo, std::span<const double> weights, const Matrix& probs) {
    const int n = probs.rows(), c = probs.cols();
    if (!pseudo.same_shape(probs) || static_cast<int>(weights.size()) != n)
        throw ConfigError("target_loss: pseudo-labels, weights and predictions must align");
    ValueGrad out{0.0, Matrix(n, c)};
    if (n == 0) return out;
    for (int i = 0; i < n; ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        double kl = 0.0;
        for (int k = 0; k < c; ++k) {
            const double y = pseudo(i, k);
            if (y > 0.0) kl += y * (std::log(clamp_prob(y)) - std::log(clamp_prob(probs(i, k))));
            out.grad(i, k) = -w * y * dlog(probs(i, k)) / n;
        }
        out.value += w * kl;
    }
    out.value /= n;
    return out;
}

double target_loss(const HighConfidenceSet& s, const Matrix& classifier_probs) {
    if (s.empty()) return 0.0;
    check_rows(s, classifier_probs, "target_loss");
    Matrix pseudo(static_cast<int>(s.size()), classifier_probs.cols());
    std::vector<double> w;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& p = s.members[i].label.probs;
        if (static_cast<int>(p.size()) != classifier_probs.cols()) throw ConfigError("target_loss: class count mismatch");
        std::copy(p.begin(), p.end(), pseudo.row(static_cast<int>(i)).begin());
        w.push_back(s.members[i].label.confidence);
    }
    return target_loss_grad(pseudo, w, classifier_probs).value;
}

ValueGrad recon_loss_grad(const Matrix& probs, std::span<const int> ids, std::span<const std::uint8_t> mask,
                          int batch) {
    const int rows = probs.rows(), vocab = probs.cols();
    if (ids.size() != static_cast<std::size_t>(rows) || mask.size() != ids.size())
        throw ConfigError("recon_loss: ids/mask must have one entry per probability row");
    if (batch <= 0) throw ConfigError("recon_loss: batch must be positive");
    ValueGrad out{0.0, Matrix(rows, vocab)};
    for (int i = 0; i < rows; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= vocab)
            throw DataError("recon_loss: token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(vocab));
        out.value -= std::log(clamp_prob(probs(i, id)));
        out.grad(i, id) = -dlog(probs(i, id)) / batch;
    }
    out.value /= batch;
    return out;
}

double recon_loss(const TokenSequence& true_ids, const Matrix& predicted_probs) {
    if (true_ids.attention_mask.size() != true_ids.token_ids.size())
        throw ConfigError("recon_loss: mask length differs from id length");
    return recon_loss_grad(predicted_probs, true_ids.token_ids, true_ids.attention_mask, 1).value;
}

KlGrad kl_causal_grad(const Matrix& mu, const Matrix& sigma) {
    if (!mu.same_shape(sigma)) throw ConfigError("kl_causal: mu and sigma shapes differ");
    const int n = mu.rows();
    KlGrad out{0.0, Matrix(mu.rows(), mu.cols()), Matrix(mu.rows(), mu.cols())};
    if (n == 0) return out;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu[i], s = sigma[i];
        if (!(s > 0.0)) throw NumericError("kl_causal", "sigma must be positive");
        out.value += 0.5 * (m * m + s * s - std::log(s * s) - 1.0);
        out.dmu[i] = m / n;
        out.dsigma[i] = (s - 1.0 / s) / n;
    }
    out.value /= n;
    return out;
}

double kl_causal(const CausalLatent& c) {
    return kl_causal_grad(Matrix::row_vector(c.mu), Matrix::row_vector(c.sigma)).value;
}

ValueGrad hate_loss_grad(const Matrix& preds, std::span<const int> labels) {
    const int n = preds.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw ConfigError("hate_loss: " + std::to_string(n) + " predictions vs " + std::to_string(labels.size()) +
                          " labels");
    ValueGrad out{0.0, Matrix(preds.rows(), preds.cols())};
    if (n == 0) return out;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= preds.cols()) throw DataError("hate_loss: label out of range");
        out.value -= std::log(clamp_prob(preds(i, y)));
        out.grad(i, y) = -dlog(preds(i, y)) / n;
    }
    out.value /= n;
    return out;
}

double hate_loss(const Matrix& preds, std::span<const int> labels) { return hate_loss_grad(preds, labels).value; }

bool LossBreakdown::audit(const LossCoefficients& k, double rel_tol) const {
    const double expect_vae = recon + k.alpha_t * target_objective(k) + k.alpha_c * kl_causal;
    return rel_close(vae, expect_vae, rel_tol) && rel_close(total, hate + vae, rel_tol);
}

std::string LossBreakdown::to_string() const {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "total=%.6g hate=%.6g vae=%.6g recon=%.6g kl_causal=%.6g target=%.6g contrastive=%.6g conf=%.6g",
                  total, hate, vae, recon, kl_causal, target, contrastive, conf);
    return buf;
}

LossBreakdown compose_losses(const LossParts& p, const LossCoefficients& k) {
    const std::pair<const char*, double> named[] = {{"contrastive", p.contrastive}, {"conf", p.conf},
                                                    {"target", p.target},           {"recon", p.recon},
                                                    {"kl_causal", p.kl_causal},     {"hate", p.hate}};
    for (const auto& [name, v] : named)
        if (!std::isfinite(v)) throw NumericError(name, "value " + std::to_string(v));
    LossBreakdown b;
    b.contrastive = p.contrastive;
    b.conf = p.conf;
    b.target = p.target;
    b.recon = p.recon;
    b.kl_causal = p.kl_causal;
    b.hate = p.hate;
    b.vae = b.recon + k.alpha_t * b.target_objective(k) + k.alpha_c * b.kl_causal;
    b.total = b.hate + b.vae;
    return b;
}

}  // namespace hatewatch::losses
