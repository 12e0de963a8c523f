#pragma once

#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "ornn/baselines.hpp"
#include "ornn/metrics.hpp"
#include "ornn/model.hpp"

// 10-fold cross-validation with a 70/20/10 train/validation/test split
// per fold. The shuffle happens once per SplitPlan, so every model
// evaluated against the same plan sees identical fold memberships.
// Vectorizers and hyperparameter tuning only ever see a fold's train
// and validation portions.

namespace ornn {

struct SplitPlan {
    struct Fold {
        std::vector<std::size_t> train, val, test;
    };
    std::vector<Fold> folds;
    std::uint64_t seed = 0;

    static SplitPlan make(std::size_t n, int n_folds, std::uint64_t seed) {
        if (n_folds < 2 || n < static_cast<std::size_t>(n_folds))
            throw DataError("dataset too small for " +
                            std::to_string(n_folds) + " folds");
        std::vector<std::size_t> shuffled(n);
        std::iota(shuffled.begin(), shuffled.end(), 0);
        Rng rng(seed);
        std::shuffle(shuffled.begin(), shuffled.end(), rng);

        SplitPlan plan;
        plan.seed = seed;
        for (int f = 0; f < n_folds; ++f) {
            std::size_t lo = n * f / n_folds;
            std::size_t hi = n * (f + 1) / n_folds;
            Fold fold;
            fold.test.assign(shuffled.begin() + lo, shuffled.begin() + hi);
            std::vector<std::size_t> pool;
            pool.insert(pool.end(), shuffled.begin(), shuffled.begin() + lo);
            pool.insert(pool.end(), shuffled.begin() + hi, shuffled.end());
            // 2/9 of the training portion becomes validation
            std::size_t n_val = static_cast<std::size_t>(
                std::llround(static_cast<double>(pool.size()) * 2.0 / 9.0));
            fold.val.assign(pool.begin(), pool.begin() + n_val);
            fold.train.assign(pool.begin() + n_val, pool.end());
            plan.folds.push_back(std::move(fold));
        }
        return plan;
    }
};

class OrdinalEstimator {
public:
    virtual ~OrdinalEstimator() = default;
    virtual void fit(const std::vector<const TokenSequence*>& train,
                     const std::vector<const TokenSequence*>& val) = 0;
    virtual std::vector<OrdinalPrediction> predict(
        const std::vector<const TokenSequence*>& docs) = 0;
    // heads emitting the k-1 threshold probabilities support conflicts
    virtual bool has_probs() const { return false; }
};

using EstimatorFactory =
    std::function<std::unique_ptr<OrdinalEstimator>(int fold)>;

struct MetricSummary {
    std::vector<double> per_fold;
    double mean = 0.0;
    double se = 0.0;  // sample stddev / sqrt(folds)

    static MetricSummary of(std::vector<double> values) {
        MetricSummary s;
        s.per_fold = std::move(values);
        double n = static_cast<double>(s.per_fold.size());
        for (double v : s.per_fold) s.mean += v;
        s.mean /= n;
        if (s.per_fold.size() > 1) {
            double ss = 0.0;
            for (double v : s.per_fold)
                ss += (v - s.mean) * (v - s.mean);
            s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        return s;
    }
};

struct EvalReport {
    // insertion-ordered metric table: mae, mae_macro, acc, wt_acc
    // (+ conflict_rate when the estimator exposes probabilities)
    std::vector<std::pair<std::string, MetricSummary>> metrics;

    const MetricSummary* find(const std::string& name) const {
        for (auto& [n, m] : metrics)
            if (n == name) return &m;
        return nullptr;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        for (auto& [name, m] : metrics) {
            nlohmann::ordered_json entry;
            entry["per_fold"] = m.per_fold;
            entry["mean"] = m.mean;
            entry["se"] = m.se;
            j[name] = entry;
        }
        return j;
    }
};

using FoldObserver = std::function<void(
    int fold, const std::vector<std::size_t>& test_indices,
    const std::vector<OrdinalPrediction>& predictions)>;

namespace detail {

struct FoldMetrics {
    double mae = 0, mae_macro = 0, acc = 0, wt_acc = 0, conflict = 0;
    bool has_conflict = false;
    std::vector<OrdinalPrediction> preds;
};

inline FoldMetrics run_fold(const std::vector<TokenSequence>& docs,
                            const SplitPlan::Fold& fold,
                            const EstimatorFactory& factory, int k,
                            int fold_idx) {
    auto pick = [&](const std::vector<std::size_t>& idx) {
        std::vector<const TokenSequence*> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(&docs[i]);
        return out;
    };
    auto est = factory(fold_idx);
    est->fit(pick(fold.train), pick(fold.val));
    auto preds = est->predict(pick(fold.test));

    std::vector<int> y_true, y_pred;
    std::vector<bool> b_true, b_pred;
    for (std::size_t i = 0; i < fold.test.size(); ++i) {
        int yt = *docs[fold.test[i]].label;
        y_true.push_back(yt);
        y_pred.push_back(preds[i].rank);
        b_true.push_back(polarize(yt, k));
        b_pred.push_back(polarize(preds[i].rank, k));
    }
    FoldMetrics m;
    m.mae = mae(y_true, y_pred);
    m.mae_macro = mae_macro(y_true, y_pred);
    m.acc = accuracy(b_true, b_pred);
    m.wt_acc = weighted_accuracy(b_true, b_pred);
    if (est->has_probs()) {
        m.conflict = conflict_rate(preds);
        m.has_conflict = true;
    }
    m.preds = std::move(preds);
    return m;
}

}  // namespace detail

inline EvalReport run_cv(const std::vector<TokenSequence>& docs,
                         const EstimatorFactory& factory,
                         const SplitPlan& plan, int k = 7, int threads = 1,
                         const FoldObserver& observer = {}) {
    for (const auto& d : docs)
        if (!d.label) throw DataError("run_cv requires labeled documents");

    int n_folds = static_cast<int>(plan.folds.size());
    std::vector<detail::FoldMetrics> results(n_folds);
    if (threads <= 1) {
        for (int f = 0; f < n_folds; ++f)
            results[f] =
                detail::run_fold(docs, plan.folds[f], factory, k, f);
    } else {
        // folds are independent; results land by index so ordering is
        // deterministic regardless of scheduling
        std::vector<std::future<detail::FoldMetrics>> futs;
        for (int f = 0; f < n_folds; ++f)
            futs.push_back(std::async(std::launch::async, [&, f] {
                return detail::run_fold(docs, plan.folds[f], factory, k, f);
            }));
        for (int f = 0; f < n_folds; ++f) results[f] = futs[f].get();
    }

    if (observer)
        for (int f = 0; f < n_folds; ++f)
            observer(f, plan.folds[f].test, results[f].preds);

    auto collect = [&](auto member) {
        std::vector<double> vals;
        for (auto& r : results) vals.push_back(r.*member);
        return MetricSummary::of(std::move(vals));
    };
    EvalReport report;
    report.metrics.emplace_back("mae", collect(&detail::FoldMetrics::mae));
    report.metrics.emplace_back("mae_macro",
                                collect(&detail::FoldMetrics::mae_macro));
    report.metrics.emplace_back("acc", collect(&detail::FoldMetrics::acc));
    report.metrics.emplace_back("wt_acc",
                                collect(&detail::FoldMetrics::wt_acc));
    bool all_conflict = true;
    for (auto& r : results) all_conflict = all_conflict && r.has_conflict;
    if (all_conflict)
        report.metrics.emplace_back(
            "conflict_rate", collect(&detail::FoldMetrics::conflict));
    return report;
}

// --- estimators ---------------------------------------------------------

class OrnnEstimator : public OrdinalEstimator {
public:
    OrnnEstimator(RunConfig cfg, Vocabulary vocab,
                  const EmbeddingMatrix* pretrained)
        : cfg_(std::move(cfg)), vocab_(std::move(vocab)),
          pretrained_(pretrained) {}

    void fit(const std::vector<const TokenSequence*>& train,
             const std::vector<const TokenSequence*>& val) override {
        model_ = std::make_unique<OrdinalModel>(cfg_, vocab_, pretrained_);
        model_->fit(deref(train), deref(val));
    }

    std::vector<OrdinalPrediction> predict(
        const std::vector<const TokenSequence*>& docs) override {
        return model_->predict_ptrs(docs);
    }

    bool has_probs() const override { return cfg_.head == "ordinal"; }
    OrdinalModel* model() { return model_.get(); }

private:
    static std::vector<TokenSequence> deref(
        const std::vector<const TokenSequence*>& v) {
        std::vector<TokenSequence> out;
        out.reserve(v.size());
        for (auto* p : v) out.push_back(*p);
        return out;
    }

    RunConfig cfg_;
    Vocabulary vocab_;
    const EmbeddingMatrix* pretrained_;
    std::unique_ptr<OrdinalModel> model_;
};

enum class BaselineKind { IT, AT, LAD, MC };

inline BaselineKind baseline_from_name(const std::string& name) {
    if (name == "it") return BaselineKind::IT;
    if (name == "at") return BaselineKind::AT;
    if (name == "lad") return BaselineKind::LAD;
    if (name == "mc") return BaselineKind::MC;
    throw UsageError("unknown model: " + name);
}

// TF-IDF is fit on the fold's train split only; the L2 strength is
// picked on the validation split over a log grid.
class BaselineEstimator : public OrdinalEstimator {
public:
    BaselineEstimator(BaselineKind kind, int k,
                      std::vector<double> l2_grid = {1e-4, 1e-3, 1e-2, 1e-1,
                                                     1.0, 10.0, 100.0})
        : kind_(kind), k_(k), l2_grid_(std::move(l2_grid)) {}

    void fit(const std::vector<const TokenSequence*>& train,
             const std::vector<const TokenSequence*>& val) override {
        auto x_train = vectorizer_.fit_transform(train);
        std::vector<int> y_train = labels(train);
        std::vector<SparseVector> x_val;
        std::vector<int> y_val = labels(val);
        for (auto* d : val) x_val.push_back(vectorizer_.transform(*d));

        double best_mae = std::numeric_limits<double>::infinity();
        for (double l2 : l2_grid_) {
            fit_one(x_train, y_train, l2);
            std::vector<int> pred;
            for (auto& v : x_val) pred.push_back(predict_one(v));
            double m = y_val.empty() ? 0.0 : mae(y_val, pred);
            if (m < best_mae) {
                best_mae = m;
                best_l2_ = l2;
            }
            if (y_val.empty()) break;  // nothing to tune against
        }
        fit_one(x_train, y_train, best_l2_);
    }

    std::vector<OrdinalPrediction> predict(
        const std::vector<const TokenSequence*>& docs) override {
        std::vector<OrdinalPrediction> out;
        for (auto* d : docs) {
            OrdinalPrediction p;
            SparseVector v = vectorizer_.transform(*d);
            p.rank = predict_one(v);
            p.score = score_one(v);
            out.push_back(std::move(p));
        }
        return out;
    }

    double chosen_l2() const { return best_l2_; }

private:
    static std::vector<int> labels(
        const std::vector<const TokenSequence*>& docs) {
        std::vector<int> out;
        for (auto* d : docs) out.push_back(*d->label);
        return out;
    }

    void fit_one(const std::vector<SparseVector>& x,
                 const std::vector<int>& y, double l2) {
        switch (kind_) {
            case BaselineKind::IT:
                threshold_ = ThresholdModel::fit(x, y, k_,
                                                 ThresholdVariant::Immediate,
                                                 l2, vectorizer_.dim());
                break;
            case BaselineKind::AT:
                threshold_ = ThresholdModel::fit(
                    x, y, k_, ThresholdVariant::All, l2, vectorizer_.dim());
                break;
            case BaselineKind::LAD:
                lad_ = LadModel::fit(x, y, l2, vectorizer_.dim());
                break;
            case BaselineKind::MC:
                mc_ = McModel::fit(x, y, k_, l2, vectorizer_.dim());
                break;
        }
    }

    int predict_one(const SparseVector& v) const {
        switch (kind_) {
            case BaselineKind::IT:
            case BaselineKind::AT: return threshold_.predict(v);
            case BaselineKind::LAD: return lad_.predict(v, k_);
            default: return mc_.predict(v);
        }
    }

    double score_one(const SparseVector& v) const {
        switch (kind_) {
            case BaselineKind::IT:
            case BaselineKind::AT: return v.dot_dense(threshold_.w);
            case BaselineKind::LAD: return lad_.raw(v);
            default: {
                auto p = mc_.probabilities(v);
                double s = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i)
                    s += p[i] * static_cast<double>(i + 1);
                return s;
            }
        }
    }

    BaselineKind kind_;
    int k_;
    std::vector<double> l2_grid_;
    TfidfVectorizer vectorizer_;
    ThresholdModel threshold_;
    LadModel lad_;
    McModel mc_;
    double best_l2_ = 1e-2;
};

// Table 2 / Table 3 style text rendering.
inline std::string render_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(14) << "Model";
    for (const char* col : {"MAE", "MAE^M", "Acc.", "Wt. Acc."})
        out << std::setw(16) << col;
    out << "\n";
    auto cell = [](const MetricSummary* m) {
        if (!m) return std::string("-");
        std::ostringstream c;
        c << std::fixed << std::setprecision(3) << m->mean << " ("
          << std::setprecision(3) << m->se << ")";
        return c.str();
    };
    for (auto& [name, report] : rows) {
        out << std::left << std::setw(14) << name;
        for (const char* metric : {"mae", "mae_macro", "acc", "wt_acc"})
            out << std::setw(16) << cell(report.find(metric));
        out << "\n";
    }
    return out.str();
}

}  // namespace ornn
