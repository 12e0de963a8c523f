// ornn: ordinal regression for text, end to end. Subcommands cover the
// pipeline: gen-synthetic -> preprocess -> train-embeddings -> train ->
// evaluate / predict, plus emoji-map and expand for lexicon work.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ornn/checkpoint.hpp"
#include "ornn/emojimap.hpp"
#include "ornn/eval.hpp"
#include "ornn/synthetic.hpp"

using namespace ornn;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path, cfg);
        for (const auto& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set expects key=value, got " + kv);
            apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path,
                    "key=value config file");
    cmd->add_option("--set", opts.overrides,
                    "override a config key (key=value, repeatable)");
}

void write_resolved_config(const std::string& out_path,
                           const RunConfig& cfg) {
    write_config(out_path + ".config", cfg);
}

DatasetFormat parse_format(const std::string& name) {
    return format_from_name(name);
}

void write_jsonl_doc(std::ostream& out, const RawDocument& doc) {
    nlohmann::ordered_json j;
    j["title"] = doc.title;
    j["body"] = doc.body;
    if (doc.label) j["label"] = *doc.label;
    out << j.dump() << "\n";
}

struct TokenizedData {
    std::vector<TokenSequence> seqs;
    std::size_t skipped_empty = 0;
};

TokenizedData tokenize_docs(const std::vector<RawDocument>& docs,
                            const Vocabulary& vocab,
                            std::size_t max_len) {
    TokenizedData out;
    for (const auto& d : docs) {
        auto seq = tokenize(clean(d), vocab, max_len);
        seq.label = d.label;
        if (seq.tokens.empty()) {
            ++out.skipped_empty;
            continue;
        }
        out.seqs.push_back(std::move(seq));
    }
    return out;
}

Vocabulary vocab_from_docs(const std::vector<RawDocument>& docs,
                           std::uint64_t min_count) {
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) texts.push_back(clean(d));
    return Vocabulary::build(texts, min_count);
}

// --- subcommand bodies --------------------------------------------------

int cmd_gen_synthetic(const std::string& out_labeled,
                      const std::string& out_raw, const SyntheticConfig& sc,
                      const RunConfig& cfg) {
    auto data = gen_synthetic(sc);
    {
        std::ofstream out(out_labeled);
        if (!out) throw DataError("cannot write " + out_labeled);
        for (const auto& d : data.labeled) write_jsonl_doc(out, d);
    }
    if (!out_raw.empty()) {
        std::ofstream out(out_raw);
        if (!out) throw DataError("cannot write " + out_raw);
        for (const auto& d : data.raw) write_jsonl_doc(out, d);
    }
    write_resolved_config(out_labeled, cfg);
    std::cout << "wrote " << data.labeled.size() << " labeled docs to "
              << out_labeled;
    if (!out_raw.empty())
        std::cout << " and " << data.raw.size() << " raw docs to "
                  << out_raw;
    std::cout << "\n";
    return 0;
}

int cmd_preprocess(const std::string& in, const std::string& out_path,
                   const std::string& format, const RunConfig& cfg) {
    auto docs = load_dataset(in, parse_format(format), cfg.k);
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path);
    std::size_t written = 0, skipped = 0;
    for (const auto& d : docs) {
        std::string cleaned = clean(d);
        if (cleaned.empty()) {
            ++skipped;
            continue;
        }
        RawDocument cd;
        cd.body = cleaned;
        cd.label = d.label;
        write_jsonl_doc(out, cd);
        ++written;
    }
    write_resolved_config(out_path, cfg);
    if (docs.empty())
        std::cerr << "warning: " << in << " contained no records\n";
    if (skipped > 0)
        std::cerr << "warning: skipped " << skipped
                  << " records that cleaned to empty text\n";
    std::cout << "wrote " << written << " cleaned docs to " << out_path
              << "\n";
    return 0;
}

int cmd_train_embeddings(const std::string& corpus_path,
                         const std::string& format,
                         const std::string& out_path, RunConfig cfg) {
    auto docs = load_dataset(corpus_path, parse_format(format), cfg.k);
    if (docs.empty()) throw DataError("empty corpus: " + corpus_path);
    Vocabulary vocab = vocab_from_docs(docs, cfg.min_count);
    auto data = tokenize_docs(docs, vocab, cfg.max_len);

    SgnsConfig sc;
    sc.window = cfg.window;
    sc.negatives = cfg.negatives;
    sc.epochs = cfg.emb_epochs;
    sc.batch = cfg.emb_batch;
    sc.lr = cfg.emb_lr;
    sc.dim = cfg.emb_dim;
    sc.threads = cfg.threads;
    sc.seed = cfg.seed;

    SgnsReport report;
    auto emb = train_sgns(data.seqs, vocab, sc, &report);
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
        std::cout << "epoch " << (e + 1) << " mean pair loss "
                  << report.epoch_loss[e] << "\n";

    save_embeddings(out_path, emb);
    save_vocab_counts(out_path + ".vocab", vocab);
    write_resolved_config(out_path, cfg);
    std::cout << "wrote " << emb.size() << " x " << emb.dim()
              << " embeddings to " << out_path << "\n";
    return 0;
}

// Embeddings (and their vocab sidecar) when given, otherwise a fresh
// vocabulary and random embedding init.
struct EmbeddingBundle {
    Vocabulary vocab;
    std::unique_ptr<EmbeddingMatrix> matrix;  // null -> random init
};

EmbeddingBundle load_embedding_bundle(const std::string& emb_path,
                                      const std::vector<RawDocument>& docs,
                                      const RunConfig& cfg) {
    EmbeddingBundle bundle{Vocabulary(), nullptr};
    if (!emb_path.empty()) {
        auto emb = load_embeddings(emb_path);
        std::string sidecar = emb_path + ".vocab";
        if (std::filesystem::exists(sidecar)) {
            bundle.vocab = load_vocab_counts(sidecar);
        } else {
            // counts unknown; keep the embedding order with count 1
            bundle.vocab = Vocabulary::from_ordered(
                emb.tokens(),
                std::vector<std::uint64_t>(emb.size(), 1), 1);
        }
        bundle.matrix = std::make_unique<EmbeddingMatrix>(std::move(emb));
    } else {
        bundle.vocab = vocab_from_docs(docs, cfg.min_count);
    }
    return bundle;
}

int cmd_train(const std::string& data_path, const std::string& format,
              const std::string& emb_path, const std::string& out_ckpt,
              RunConfig cfg) {
    auto docs = load_dataset(data_path, parse_format(format), cfg.k);
    auto bundle = load_embedding_bundle(emb_path, docs, cfg);
    if (bundle.matrix) cfg.emb_dim = static_cast<int>(bundle.matrix->dim());
    auto data = tokenize_docs(docs, bundle.vocab, cfg.max_len);
    if (data.skipped_empty > 0)
        std::cerr << "warning: skipped " << data.skipped_empty
                  << " docs with no in-vocabulary tokens\n";

    std::vector<TokenSequence> labeled;
    for (auto& s : data.seqs)
        if (s.label) labeled.push_back(std::move(s));
    if (labeled.empty()) throw DataError("no labeled documents in " +
                                         data_path);

    // hold out 2/9 of the training data as the validation set
    Rng rng(derive_seed(cfg.seed, 7));
    std::shuffle(labeled.begin(), labeled.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(labeled.size()) * 2.0 / 9.0));
    std::vector<TokenSequence> val(labeled.begin(), labeled.begin() + n_val);
    std::vector<TokenSequence> train(labeled.begin() + n_val,
                                     labeled.end());

    OrdinalModel model(cfg, bundle.vocab, bundle.matrix.get());
    auto report = model.fit(train, val);
    std::cout << "trained " << report.epochs_run << " epochs, best val loss "
              << report.best_val_loss << "\n";

    save_checkpoint(out_ckpt, model);
    write_resolved_config(out_ckpt, cfg);
    std::cout << "checkpoint written to " << out_ckpt << "\n";
    return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& format,
                 const std::string& emb_path,
                 const std::string& models_csv, int folds,
                 const std::string& out_path, RunConfig cfg) {
    auto docs = load_dataset(data_path, parse_format(format), cfg.k);
    auto bundle = load_embedding_bundle(emb_path, docs, cfg);
    if (bundle.matrix) cfg.emb_dim = static_cast<int>(bundle.matrix->dim());
    auto data = tokenize_docs(docs, bundle.vocab, cfg.max_len);
    std::vector<TokenSequence> labeled;
    for (auto& s : data.seqs)
        if (s.label) labeled.push_back(std::move(s));
    std::size_t dropped = docs.size() - labeled.size();
    if (dropped > 0)
        std::cerr << "warning: dropped " << dropped
                  << " unlabeled or empty docs\n";

    SplitPlan plan = SplitPlan::make(labeled.size(), folds, cfg.seed);

    std::vector<std::string> models;
    {
        std::istringstream ss(models_csv);
        std::string m;
        while (std::getline(ss, m, ',')) models.push_back(m);
    }
    if (models.empty()) throw UsageError("--models must name at least one");

    std::vector<std::pair<std::string, EvalReport>> reports;
    for (const auto& name : models) {
        EstimatorFactory factory;
        if (name == "ornn") {
            factory = [&](int fold) -> std::unique_ptr<OrdinalEstimator> {
                RunConfig fc = cfg;
                fc.seed = derive_seed(cfg.seed, 9000 + fold);
                return std::make_unique<OrnnEstimator>(
                    fc, bundle.vocab, bundle.matrix.get());
            };
        } else {
            BaselineKind kind = baseline_from_name(name);
            factory = [kind, &cfg](int) {
                return std::make_unique<BaselineEstimator>(kind, cfg.k);
            };
        }
        std::cout << "evaluating " << name << " over "
                  << plan.folds.size() << " folds...\n";
        reports.emplace_back(
            name, run_cv(labeled, factory, plan, cfg.k, cfg.threads));
    }

    nlohmann::ordered_json out_json;
    out_json["n_docs"] = labeled.size();
    out_json["folds"] = folds;
    out_json["seed"] = cfg.seed;
    for (auto& [name, report] : reports)
        out_json["models"][name] = report.to_json();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write " + out_path);
        out << out_json.dump(2) << "\n";
        write_resolved_config(out_path, cfg);
    }
    std::cout << render_table(reports);
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& in_path,
                const std::string& format, const std::string& out_path,
                std::size_t top_n) {
    OrdinalModel model = load_checkpoint(ckpt_path);
    const RunConfig& cfg = model.config();
    auto docs = load_dataset(in_path, parse_format(format), cfg.k);
    if (docs.empty()) throw DataError("no documents in " + in_path);

    struct Scored {
        std::size_t doc;
        OrdinalPrediction pred;
    };
    std::vector<Scored> scored;
    std::vector<TokenSequence> seqs;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto seq = tokenize(clean(docs[i]), model.vocab(), cfg.max_len);
        if (seq.tokens.empty()) continue;
        kept.push_back(i);
        seqs.push_back(std::move(seq));
    }
    if (kept.size() < docs.size())
        std::cerr << "warning: skipped " << (docs.size() - kept.size())
                  << " docs with no in-vocabulary tokens\n";
    if (seqs.empty()) throw DataError("no scorable documents");

    auto preds = model.predict(seqs);
    for (std::size_t i = 0; i < preds.size(); ++i)
        scored.push_back({kept[i], std::move(preds[i])});
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) {
                         return a.pred.score > b.pred.score;
                     });

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write " + out_path);
        for (const auto& s : scored) {
            nlohmann::ordered_json j;
            j["title"] = docs[s.doc].title;
            j["body"] = docs[s.doc].body;
            j["probs"] = s.pred.probs;
            j["rank"] = s.pred.rank;
            j["conflict"] = s.pred.conflict;
            j["score"] = s.pred.score;
            out << j.dump() << "\n";
        }
        write_resolved_config(out_path, cfg);
    }

    std::size_t show = std::min(top_n, scored.size());
    for (std::size_t i = 0; i < show; ++i) {
        const auto& s = scored[i];
        std::string text = docs[s.doc].title + " " + docs[s.doc].body;
        if (text.size() > 70) text = text.substr(0, 70) + "...";
        std::cout << (i + 1) << ". score=" << std::fixed
                  << std::setprecision(3) << s.pred.score
                  << " rank=" << s.pred.rank
                  << (s.pred.conflict ? " conflict" : "") << " | " << text
                  << "\n";
    }
    return 0;
}

int cmd_emoji_map(const std::string& emb_path, const std::string& vocab_path,
                  const std::string& out_svg, const std::string& out_csv,
                  std::size_t top_m, TsneConfig tc, bool lr_set,
                  const RunConfig& cfg) {
    auto emb = load_embeddings(emb_path);
    std::string vp = vocab_path.empty() ? emb_path + ".vocab" : vocab_path;
    if (!std::filesystem::exists(vp))
        throw DataError(
            "vocabulary counts not found at " + vp +
            " (train-embeddings writes one; pass --vocab to point "
            "elsewhere)");
    Vocabulary vocab = load_vocab_counts(vp);

    std::size_t n = emoji_subset(vocab, top_m).size();
    double max_perp = (static_cast<double>(n) - 1.0) / 3.0;
    if (tc.perplexity >= max_perp) {
        tc.perplexity = std::max(1.0, max_perp - 0.01);
        std::cerr << "warning: clamped perplexity to " << tc.perplexity
                  << " for " << n << " emojis\n";
    }
    if (!lr_set) {
        // the fixed default overshoots on small point sets
        tc.learning_rate = std::min(200.0, std::max(
            5.0, 2.0 * static_cast<double>(n)));
    }

    auto map = build_emoji_map(vocab, emb, top_m, tc);
    if (!out_csv.empty()) {
        emit_map_csv(map, out_csv);
        write_resolved_config(out_csv, cfg);
    }
    if (!out_svg.empty()) emit_map_svg(map, out_svg);
    std::cout << "mapped " << map.size() << " emojis\n";
    return 0;
}

int cmd_expand(const std::string& emb_path, const std::string& seeds_path,
               std::size_t m) {
    auto emb = load_embeddings(emb_path);
    auto seeds = load_seed_lexicon(seeds_path);
    if (seeds.empty()) throw DataError("seed file has no tokens");
    std::vector<std::string> warnings;
    auto result = expand_lexicon(emb, seeds, m, &warnings);
    for (const auto& w : warnings)
        std::cerr << "warning: seed not in vocabulary: " << w << "\n";
    for (const auto& e : result)
        std::cout << e.token << "\t" << std::fixed << std::setprecision(6)
                  << e.similarity << "\t" << (e.is_emoji ? "emoji" : "word")
                  << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ordinal regression for text: training, evaluation, "
                 "triage, and emoji-map tooling"};
    app.require_subcommand(1);

    // gen-synthetic
    auto* gen = app.add_subcommand(
        "gen-synthetic", "generate a synthetic ordinal ad dataset");
    std::string gen_out_labeled, gen_out_raw;
    SyntheticConfig sc;
    CommonOpts gen_common;
    gen->add_option("--out-labeled", gen_out_labeled, "labeled JSONL path")
        ->required();
    gen->add_option("--out-raw", gen_out_raw, "unlabeled raw JSONL path");
    gen->add_option("--n-labeled", sc.n_labeled, "labeled doc count");
    gen->add_option("--n-raw", sc.n_raw, "raw doc count");
    gen->add_option("--gen-seed", sc.seed, "generator seed");
    add_common(gen, gen_common);

    // preprocess
    auto* pre = app.add_subcommand("preprocess",
                                   "clean raw documents into JSONL");
    std::string pre_in, pre_out, pre_format = "jsonl";
    CommonOpts pre_common;
    pre->add_option("--in", pre_in, "input path")->required();
    pre->add_option("--out", pre_out, "output JSONL path")->required();
    pre->add_option("--format", pre_format, "jsonl or csv");
    add_common(pre, pre_common);

    // train-embeddings
    auto* temb = app.add_subcommand("train-embeddings",
                                    "train skip-gram embeddings");
    std::string temb_corpus, temb_format = "jsonl", temb_out;
    CommonOpts temb_common;
    temb->add_option("--corpus", temb_corpus, "corpus path")->required();
    temb->add_option("--format", temb_format, "jsonl or csv");
    temb->add_option("--out", temb_out, "embedding text file")->required();
    add_common(temb, temb_common);

    // train
    auto* tr = app.add_subcommand("train", "train the ordinal model");
    std::string tr_data, tr_format = "jsonl", tr_emb, tr_out;
    CommonOpts tr_common;
    tr->add_option("--data", tr_data, "labeled dataset")->required();
    tr->add_option("--format", tr_format, "jsonl or csv");
    tr->add_option("--embeddings", tr_emb,
                   "pretrained embeddings (omit for random init)");
    tr->add_option("--out-checkpoint", tr_out, "checkpoint path")
        ->required();
    add_common(tr, tr_common);

    // evaluate
    auto* ev = app.add_subcommand(
        "evaluate", "cross-validate models and report metrics");
    std::string ev_data, ev_format = "jsonl", ev_emb, ev_out;
    std::string ev_models = "ornn,it,at,lad,mc";
    int ev_folds = 10;
    CommonOpts ev_common;
    ev->add_option("--data", ev_data, "labeled dataset")->required();
    ev->add_option("--format", ev_format, "jsonl or csv");
    ev->add_option("--embeddings", ev_emb,
                   "pretrained embeddings for ornn");
    ev->add_option("--models", ev_models,
                   "comma list of ornn,it,at,lad,mc");
    ev->add_option("--folds", ev_folds, "cross-validation folds");
    ev->add_option("--out", ev_out, "report JSON path");
    add_common(ev, ev_common);

    // predict
    auto* pr = app.add_subcommand("predict",
                                  "score documents with a checkpoint");
    std::string pr_ckpt, pr_in, pr_format = "jsonl", pr_out;
    std::size_t pr_top = 10;
    pr->add_option("--checkpoint", pr_ckpt, "model checkpoint")->required();
    pr->add_option("--in", pr_in, "documents to score")->required();
    pr->add_option("--format", pr_format, "jsonl or csv");
    pr->add_option("--out", pr_out, "scored JSONL output");
    pr->add_option("--top", pr_top, "print the N highest-score docs");

    // emoji-map
    auto* em = app.add_subcommand("emoji-map",
                                  "t-SNE map of emoji embeddings");
    std::string em_emb, em_vocab, em_svg, em_csv;
    std::size_t em_top = 100;
    TsneConfig em_tsne;
    CommonOpts em_common;
    em->add_option("--embeddings", em_emb, "embedding text file")
        ->required();
    em->add_option("--vocab", em_vocab, "token-count sidecar path");
    em->add_option("--out-svg", em_svg, "SVG output path");
    em->add_option("--out-csv", em_csv, "CSV output path");
    em->add_option("--top-m", em_top, "most frequent emojis to keep");
    em->add_option("--perplexity", em_tsne.perplexity, "t-SNE perplexity");
    em->add_option("--iterations", em_tsne.iterations, "t-SNE iterations");
    auto* em_lr_opt =
        em->add_option("--lr", em_tsne.learning_rate, "t-SNE learning rate");
    em->add_option("--tsne-seed", em_tsne.seed, "t-SNE layout seed");
    add_common(em, em_common);

    // expand
    auto* ex = app.add_subcommand(
        "expand", "embedding-space lexicon expansion around seeds");
    std::string ex_emb, ex_seeds;
    std::size_t ex_m = 10;
    ex->add_option("--embeddings", ex_emb, "embedding text file")
        ->required();
    ex->add_option("--seeds", ex_seeds, "seed lexicon, one token per line")
        ->required();
    ex->add_option("--m", ex_m, "neighbors per seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            RunConfig cfg = gen_common.resolve();
            sc.k = cfg.k;
            return cmd_gen_synthetic(gen_out_labeled, gen_out_raw, sc, cfg);
        }
        if (pre->parsed())
            return cmd_preprocess(pre_in, pre_out, pre_format,
                                  pre_common.resolve());
        if (temb->parsed())
            return cmd_train_embeddings(temb_corpus, temb_format, temb_out,
                                        temb_common.resolve());
        if (tr->parsed())
            return cmd_train(tr_data, tr_format, tr_emb, tr_out,
                             tr_common.resolve());
        if (ev->parsed())
            return cmd_evaluate(ev_data, ev_format, ev_emb, ev_models,
                                ev_folds, ev_out, ev_common.resolve());
        if (pr->parsed())
            return cmd_predict(pr_ckpt, pr_in, pr_format, pr_out, pr_top);
        if (em->parsed()) {
            RunConfig cfg = em_common.resolve();
            if (em->count("--tsne-seed") == 0) em_tsne.seed = cfg.seed;
            return cmd_emoji_map(em_emb, em_vocab, em_svg, em_csv, em_top,
                                 em_tsne, em_lr_opt->count() > 0, cfg);
        }
        if (ex->parsed()) return cmd_expand(ex_emb, ex_seeds, ex_m);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
