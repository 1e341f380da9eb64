// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace hatewatch {

namespace {

constexpr char kParamMagic[8] = {'H', 'W', 'P', 'A', 'R', 'A', 'M', '1'};
constexpr char kAdamMagic[8] = {'H', 'W', 'A', 'D', 'A', 'M', 'W', '1'};
constexpr int kEvalBatch = 256;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("checkpoint file truncated");
    return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put<std::int32_t>(out, m.rows());
    put<std::int32_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix get_matrix(std::istream& in) {
    const auto rows = get<std::int32_t>(in);
    const auto cols = get<std::int32_t>(in);
    if (rows < 0 || cols < 0) throw DataError("checkpoint has a negative shape");
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint file truncated");
    return m;
}

void check_magic(std::istream& in, const char (&magic)[8], const std::filesystem::path& path) {
    char buf[8];
    in.read(buf, 8);
    if (!in || std::memcmp(buf, magic, 8) != 0) throw DataError(path.string() + " is not a checkpoint file");
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void log_to(const TrainOptions& o, const std::string& msg) {
    if (o.log) o.log(msg);
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "params.bin", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "params.bin").string());
        out.write(kParamMagic, 8);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
        for (const auto& p : params.all()) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
            out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
            put_matrix(out, p.value);
        }
    }
    {
        std::ofstream out(dir / "optimizer.bin", std::ios::binary);
        out.write(kAdamMagic, 8);
        put<std::int64_t>(out, optimizer.steps());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(optimizer.first_moments().size()));
        for (std::size_t i = 0; i < optimizer.first_moments().size(); ++i) {
            put_matrix(out, optimizer.first_moments()[i]);
            put_matrix(out, optimizer.second_moments()[i]);
        }
    }
    std::ofstream(dir / "config.json") << nlohmann::json{{"config", config.to_json()}, {"config_hash", config_hash()},
                                                          {"vocab_size", config.model.vocab_size}}
                                              .dump(2)
                                       << '\n';
    std::ofstream(dir / "vocab.json") << vocab.to_json().dump() << '\n';
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : history) hist.push_back({{"step", h.step}, {"macro_f1", h.macro_f1}});
    std::ofstream(dir / "metrics.json") << nlohmann::json{{"step", step}, {"validation", hist}}.dump(2) << '\n';
}

Checkpoint Checkpoint::load(const std::filesystem::path& dir) {
    Checkpoint c;
    const auto cfg = read_json(dir / "config.json");
    c.config = TrainConfig::from_json(cfg.at("config"));
    c.vocab = Vocabulary::from_json(read_json(dir / "vocab.json"));
    c.config.model.vocab_size = c.vocab.size();
    if (cfg.value("vocab_size", c.vocab.size()) != c.vocab.size()) throw DataError("vocabulary size differs from config");
    if (cfg.value("config_hash", std::string()) != c.config_hash())
        throw DataError(dir.string() + ": config hash mismatch; config.json was edited");

    const Model layout(c.config.model, 0);
    {
        const auto path = dir / "params.bin";
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open " + path.string());
        check_magic(in, kParamMagic, path);
        const auto n = get<std::uint32_t>(in);
        if (static_cast<int>(n) != layout.params().size()) throw DataError("checkpoint parameter count differs from config");
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto len = get<std::uint32_t>(in);
            std::string name(len, '\0');
            in.read(name.data(), len);
            Matrix m = get_matrix(in);
            const auto& expect = layout.params().at(static_cast<int>(i));
            if (name != expect.name || !m.same_shape(expect.value))
                throw DataError("checkpoint parameter '" + name + "' does not match the model layout");
            c.params.add(name, std::move(m));
        }
    }
    c.optimizer = AdamW(c.params, {c.config.lr, c.config.adam_beta1, c.config.adam_beta2, c.config.adam_eps,
                                   c.config.weight_decay});
    {
        const auto path = dir / "optimizer.bin";
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open " + path.string());
        check_magic(in, kAdamMagic, path);
        c.optimizer.set_steps(get<std::int64_t>(in));
        const auto n = get<std::uint32_t>(in);
        if (n != c.optimizer.first_moments().size()) throw DataError("optimizer state does not match parameters");
        for (std::uint32_t i = 0; i < n; ++i) {
            c.optimizer.first_moments()[i] = get_matrix(in);
            c.optimizer.second_moments()[i] = get_matrix(in);
        }
    }
    const auto metrics = read_json(dir / "metrics.json");
    c.step = metrics.at("step").get<int>();
    for (const auto& h : metrics.at("validation")) c.history.push_back({h.at("step").get<int>(), h.at("macro_f1").get<double>()});
    return c;
}

std::vector<TokenSequence> tokenize(const Vocabulary& vocab, const std::vector<data::ExampleRecord>& records,
                                    int max_len) {
    std::vector<TokenSequence> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(vocab.encode(r.text, max_len));
    return out;
}

Matrix feature_rows(const FeatureTable* table, const std::vector<data::ExampleRecord>& records,
                    std::span<const std::size_t> rows) {
    if (table == nullptr) return {};
    Matrix m(static_cast<int>(rows.size()), table->dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto v = table->lookup(records[rows[i]].text);
        std::copy(v.begin(), v.end(), m.row(static_cast<int>(i)).begin());
    }
    return m;
}

namespace {

Batch make_batch(const std::vector<TokenSequence>& seqs, const std::vector<data::ExampleRecord>& records,
                 std::span<const std::size_t> rows, const FeatureTable* features) {
    std::vector<TokenSequence> picked;
    picked.reserve(rows.size());
    for (auto r : rows) picked.push_back(seqs[r]);
    Batch b = Batch::collate(picked);
    b.features = feature_rows(features, records, rows);
    return b;
}

EvalResult evaluate_tokens(const Model& model, const std::vector<TokenSequence>& seqs,
                           const std::vector<data::ExampleRecord>& records, const FeatureTable* features) {
    if (records.empty()) throw DataError("cannot evaluate on an empty corpus");
    EvalResult out;
    out.predictions.reserve(records.size());
    std::vector<int> truth;
    truth.reserve(records.size());
    ForwardOptions opts;
    opts.decode = false;
    opts.target = false;
    for (std::size_t start = 0; start < records.size(); start += kEvalBatch) {
        const std::size_t end = std::min(records.size(), start + kEvalBatch);
        std::vector<std::size_t> rows(end - start);
        std::iota(rows.begin(), rows.end(), start);
        Tape t = Tape::inference(model.params());
        auto v = model.forward(t, make_batch(seqs, records, rows, features), opts);
        const Matrix& p = t.value(v.hate_probs);
        for (int i = 0; i < p.rows(); ++i) out.predictions.push_back(p(i, 1) > p(i, 0) ? 1 : 0);
    }
    for (const auto& r : records) truth.push_back(r.hate);
    out.metrics = compute_metrics(out.predictions, truth);
    return out;
}

// Scatter rows of `src` into a zero matrix of `rows` rows at `index`.
Matrix scatter(const Matrix& src, std::span<const std::size_t> index, int rows) {
    Matrix out(rows, src.cols());
    for (std::size_t i = 0; i < index.size(); ++i)
        std::copy(src.row(static_cast<int>(i)).begin(), src.row(static_cast<int>(i)).end(),
                  out.row(static_cast<int>(index[i])).begin());
    return out;
}

Matrix gather(const Matrix& src, std::span<const std::size_t> index) {
    Matrix out(static_cast<int>(index.size()), src.cols());
    for (std::size_t i = 0; i < index.size(); ++i)
        std::copy(src.row(static_cast<int>(index[i])).begin(), src.row(static_cast<int>(index[i])).end(),
                  out.row(static_cast<int>(i)).begin());
    return out;
}

std::vector<SoftLabel> seed_labels(const std::vector<data::ExampleRecord>& train, const TrainConfig& cfg,
                                   const TrainOptions& opts, const TargetTaxonomy& taxonomy) {
    const auto kind = weak::parse_source_kind(cfg.weak_source);
    std::vector<SoftLabel> out;
    out.reserve(train.size());
    if (kind != weak::SourceKind::GoldPassthrough && opts.lexicon == nullptr)
        throw ConfigError("weak source '" + cfg.weak_source + "' needs a lexicon");
    if (kind == weak::SourceKind::ExternalLlm && opts.llm == nullptr)
        throw ConfigError("weak source 'llm' needs a labeler client (replay file or live)");
    int fallbacks = 0;
    for (const auto& r : train) {
        SoftLabel l;
        switch (kind) {
            case weak::SourceKind::Lexicon:
                l = weak::lexicon_label(r.text, taxonomy, *opts.lexicon);
                break;
            case weak::SourceKind::GoldPassthrough:
                weak::check_source_allowed(kind, r.platform);
                l = weak::gold_label(r, taxonomy);
                break;
            case weak::SourceKind::ExternalLlm: {
                auto o = weak::llm_label(r.text, taxonomy, *opts.llm, *opts.lexicon);
                fallbacks += o.provenance != "llm";
                l = std::move(o.label);
                break;
            }
        }
        if (cfg.weak_noise > 0.0) l = weak::corrupt_label(l, r.text, cfg.weak_noise, cfg.seed);
        out.push_back(std::move(l));
    }
    if (fallbacks > 0) log_to(opts, std::to_string(fallbacks) + " external labels fell back or were unparseable");
    return out;
}

}  // namespace

TargetTaxonomy training_taxonomy(const TrainConfig& cfg) {
    auto standard = TargetTaxonomy::standard();
    if (cfg.model.n_classes == standard.size()) return standard;
    std::vector<std::string> names;
    for (int i = 0; i < cfg.model.n_classes; ++i) names.push_back("class" + std::to_string(i));
    return TargetTaxonomy(names);
}

EvalResult evaluate(const Model& model, const Vocabulary& vocab, const std::vector<data::ExampleRecord>& corpus,
                    const FeatureTable* features) {
    return evaluate_tokens(model, tokenize(vocab, corpus, model.config().max_len), corpus, features);
}

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<data::ExampleRecord>& corpus,
                    const FeatureTable* features) {
    return evaluate(ckpt.model(), ckpt.vocab, corpus, features);
}

TrainResult train(const std::vector<data::ExampleRecord>& source, const TrainConfig& config_in,
                  const TrainOptions& opts) {
    if (source.empty()) throw DataError("training corpus is empty");
    TrainConfig cfg = config_in;
    cfg.model.dropout = cfg.dropout;
    cfg.validate();
    if (cfg.model.backend == Backend::Pretrained) {
        if (opts.features == nullptr) throw ConfigError("pretrained backend needs a feature table");
        cfg.model.h_d = opts.features->dim();
    }

    const auto parts = data::split(source, cfg.val_fraction, cfg.seed);
    const auto& train_set = parts.train;
    const auto& val_set = parts.validation;
    std::vector<std::string> texts;
    for (const auto& r : train_set) texts.push_back(r.text);

    TrainResult result;
    Checkpoint& best = result.best;
    best.vocab = Vocabulary::build(texts, cfg.min_count);
    cfg.model.vocab_size = best.vocab.size();
    best.config = cfg;

    Model model(cfg.model, cfg.seed);
    AdamW optimizer(model.params(), {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay});
    const auto taxonomy = training_taxonomy(cfg);
    const auto seeds = seed_labels(train_set, cfg, opts, taxonomy);
    const auto train_tokens = tokenize(best.vocab, train_set, cfg.model.max_len);
    const auto val_tokens = tokenize(best.vocab, val_set, cfg.model.max_len);
    const auto coeffs = cfg.coefficients();

    best.params = model.params();
    best.optimizer = optimizer;
    best.step = 0;

    std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    weak::PseudoLabelState teacher_state;
    teacher_state.refresh_period = cfg.refresh_period;
    std::optional<Model> teacher;
    EarlyStopper stopper(cfg.patience);
    std::optional<losses::LossBreakdown> last_good;

    auto run_eval = [&](int step) {
        const double f1 = evaluate_tokens(model, val_tokens, val_set, opts.features).metrics.macro_f1;
        best.history.push_back({step, f1});
        const bool improved = stopper.update(f1);
        if (improved) {
            best.params = model.params();
            best.optimizer = optimizer;
            best.step = step;
        }
        log_to(opts, "step " + std::to_string(step) + ": validation macro-F1 " + std::to_string(f1) +
                         (improved ? " (best)" : ""));
    };

    if (cfg.max_steps == 0) run_eval(0);

    const int B = std::min<int>(cfg.batch_size, static_cast<int>(train_set.size()));
    for (int step = 1; step <= cfg.max_steps; ++step) {
        std::vector<std::size_t> rows;
        rows.reserve(static_cast<std::size_t>(B));
        while (static_cast<int>(rows.size()) < B) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            rows.push_back(order[cursor++]);
        }
        const Batch batch = make_batch(train_tokens, train_set, rows, opts.features);

        // Pseudo-labels: seed labels until the first refresh, teacher after.
        Matrix pseudo(B, cfg.model.n_classes);
        std::vector<double> conf(static_cast<std::size_t>(B));
        if (teacher) {
            Tape tt = Tape::inference(teacher->params());
            ForwardOptions topts;
            topts.decode = false;
            auto tv = teacher->forward(tt, batch, topts);
            pseudo = tt.value(tv.target_probs);
            for (int i = 0; i < B; ++i) conf[static_cast<std::size_t>(i)] = losses::confidence_weight(pseudo.row(i));
        } else {
            for (int i = 0; i < B; ++i) {
                const auto& s = seeds[rows[static_cast<std::size_t>(i)]];
                std::copy(s.probs.begin(), s.probs.end(), pseudo.row(i).begin());
                conf[static_cast<std::size_t>(i)] = s.confidence;
            }
        }
        const auto selected = losses::select_high_confidence(conf, cfg.eta);

        ForwardOptions fopts;
        fopts.train = true;
        fopts.rng = &rng;
        fopts.noise = Matrix(B, cfg.model.h_causal);
        for (std::size_t k = 0; k < fopts.noise.size(); ++k) fopts.noise[k] = gauss(rng);

        model.params().zero_grad();
        Tape t(&model.params());
        const ForwardVars v = model.forward(t, batch, fopts);

        std::vector<int> labels;
        for (auto r : rows) labels.push_back(train_set[r].hate);
        const auto hate = losses::hate_loss_grad(t.value(v.hate_probs), labels);
        const auto recon = losses::recon_loss_grad(t.value(v.recon_probs), batch.ids, batch.mask, B);
        const auto kl = losses::kl_causal_grad(t.value(v.mu), t.value(v.sigma));

        losses::LossParts lp;
        lp.hate = hate.value;
        lp.recon = recon.value;
        lp.kl_causal = kl.value;
        std::vector<Var> terms = {ad::external_scalar(t, hate.value, {v.hate_probs}, {hate.grad}),
                                  ad::external_scalar(t, recon.value, {v.recon_probs}, {recon.grad}),
                                  ad::external_scalar(t, kl.value, {v.mu, v.sigma}, {kl.dmu, kl.dsigma})};
        std::vector<double> weights = {1.0, 1.0, coeffs.alpha_c};

        if (selected.empty()) {
            ++result.empty_selection_steps;
        } else {
            const Matrix xw = gather(t.value(v.target), selected);
            const Matrix probs = gather(t.value(v.target_probs), selected);
            const Matrix py = gather(pseudo, selected);
            std::vector<int> classes;
            std::vector<double> w;
            for (auto i : selected) {
                classes.push_back(losses::argmax(pseudo.row(static_cast<int>(i))));
                w.push_back(conf[i]);
            }
            const auto cont = losses::contrastive_loss_grad(xw, classes, cfg.beta);
            const auto tgt = losses::target_loss_grad(py, w, probs);
            const auto reg = losses::conf_regularizer_grad(probs);
            lp.contrastive = cont.value;
            lp.target = tgt.value;
            lp.conf = reg.value;
            terms.push_back(ad::external_scalar(t, cont.value, {v.target}, {scatter(cont.grad, selected, B)}));
            terms.push_back(ad::external_scalar(t, tgt.value, {v.target_probs}, {scatter(tgt.grad, selected, B)}));
            terms.push_back(ad::external_scalar(t, reg.value, {v.target_probs}, {scatter(reg.grad, selected, B)}));
            weights.push_back(coeffs.alpha_t * coeffs.delta_cont);
            weights.push_back(coeffs.alpha_t);
            weights.push_back(coeffs.alpha_t * coeffs.delta_conf);
        }

        losses::LossBreakdown breakdown;
        try {
            breakdown = losses::compose_losses(lp, coeffs);
        } catch (const NumericError& e) {
            throw TrainingAborted(e, step, last_good);
        }
        if (!breakdown.audit(coeffs))
            throw std::logic_error("loss breakdown audit failed at step " + std::to_string(step) + ": " +
                                   breakdown.to_string());
        const Var total = ad::weighted_sum(t, terms, weights);
        const double tape_total = t.value(total)(0, 0);
        if (std::abs(tape_total - breakdown.total) > 1e-9 * std::max(1.0, std::abs(breakdown.total)))
            throw std::logic_error("optimized objective differs from the loss breakdown at step " + std::to_string(step));
        t.backward(total);
        optimizer.step(model.params());
        last_good = breakdown;

        StepLog entry{step, breakdown, static_cast<int>(selected.size()), teacher.has_value()};
        if (opts.on_step) opts.on_step(entry);
        result.steps.push_back(entry);
        result.steps_run = step;

        const int before = teacher_state.refreshes;
        teacher_state = weak::refresh_teacher(std::move(teacher_state), model.params(), step);
        if (teacher_state.refreshes != before) {
            teacher.emplace(cfg.model, *teacher_state.teacher_params);
            teacher_state.teacher_params.reset();
        }

        if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
            run_eval(step);
            if (stopper.should_stop()) {
                result.stopped_early = step < cfg.max_steps;
                break;
            }
        }
    }
    if (result.empty_selection_steps > 0)
        log_to(opts, std::to_string(result.empty_selection_steps) +
                         " steps had no high-confidence samples; their contrastive, target and conf terms were 0");
    result.teacher_refreshes = teacher_state.refreshes;
    return result;
}

}  // namespace hatewatch
