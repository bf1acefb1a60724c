#include "protocalib/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "protocalib/calib.hpp"
#include "protocalib/error.hpp"

namespace protocalib {

namespace {

class IdSet {
public:
    explicit IdSet(std::span<const ClassId> ids) : ids_(ids.begin(), ids.end()) {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }
    bool contains(ClassId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

private:
    std::vector<ClassId> ids_;
};

void require_same_length(std::size_t a, std::size_t b) {
    if (a != b) {
        fail(ErrorKind::InvalidArgument,
             "length mismatch: " + std::to_string(a) + " predictions vs " + std::to_string(b) + " labels");
    }
}

double percent(std::size_t num, std::size_t den) { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }

std::optional<double> percent_or_absent(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return percent(num, den);
}

}  // namespace

AccuracyBreakdown accuracy_decomposition(std::span<const ClassId> preds, std::span<const ClassId> labels,
                                         std::span<const ClassId> base_ids) {
    require_same_length(preds.size(), labels.size());
    if (labels.empty()) fail(ErrorKind::InvalidArgument, "no samples to score");
    const IdSet base(base_ids);
    std::size_t correct = 0, n_base = 0, ok_base = 0, n_new = 0, ok_new = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool hit = preds[i] == labels[i];
        correct += hit;
        if (base.contains(labels[i])) {
            ++n_base;
            ok_base += hit;
        } else {
            ++n_new;
            ok_new += hit;
        }
    }
    return {percent(correct, labels.size()), percent_or_absent(ok_base, n_base), percent_or_absent(ok_new, n_new)};
}

double harmonic_mean(double base_acc, double new_acc) {
    if (base_acc < 0.0 || new_acc < 0.0) fail(ErrorKind::InvalidArgument, "harmonic mean of a negative rate");
    if (base_acc == 0.0 || new_acc == 0.0) return 0.0;
    return 2.0 * base_acc * new_acc / (base_acc + new_acc);
}

double performance_drop(std::span<const double> acc_sequence) {
    if (acc_sequence.empty()) fail(ErrorKind::InvalidArgument, "performance drop of an empty sequence");
    return acc_sequence.front() - acc_sequence.back();
}

BinaryRates fnr_fpr(std::span<const ClassId> preds, std::span<const ClassId> labels,
                    std::span<const ClassId> base_ids) {
    require_same_length(preds.size(), labels.size());
    const IdSet base(base_ids);
    BinaryRates r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool truth_pos = base.contains(labels[i]);
        const bool pred_pos = base.contains(preds[i]);
        if (truth_pos) {
            (pred_pos ? r.tp : r.fn)++;
        } else {
            (pred_pos ? r.fp : r.tn)++;
        }
    }
    r.fnr = percent_or_absent(r.fn, r.tp + r.fn);
    r.fpr = percent_or_absent(r.fp, r.fp + r.tn);
    return r;
}

SimilarityRatios tbr_tnr(std::span<const ClassId> preds, std::span<const ClassId> labels,
                         const PrototypeRegistry& registry, std::span<const ClassId> base_ids,
                         const SimilarityOptions& options) {
    require_same_length(preds.size(), labels.size());
    if (options.m_new_similar < 1) fail(ErrorKind::InvalidArgument, "m_new_similar must be at least 1");
    if (!(options.base_fraction > 0.0 && options.base_fraction <= 1.0)) {
        fail(ErrorKind::InvalidArgument, "base_fraction must be in (0, 1]");
    }
    const IdSet base(base_ids);
    std::vector<ClassId> base_classes, new_classes;
    std::vector<FeatureVector> base_protos, new_protos;
    for (const auto& [label, entry] : registry) {
        if (base.contains(label)) {
            base_classes.push_back(label);
            base_protos.push_back(entry.prototype);
        } else {
            new_classes.push_back(label);
            new_protos.push_back(entry.prototype);
        }
    }
    for (ClassId label : labels) {
        if (!registry.contains(label)) fail(ErrorKind::InvalidArgument, "class " + std::to_string(label) + " has no prototype");
    }

    SimilarityRatios out;
    if (new_classes.empty()) return out;

    // Similar sets as sorted id lists, built lazily for the classes that occur.
    std::map<ClassId, std::vector<ClassId>> similar;
    auto similar_set = [&](ClassId label, bool is_base) -> const std::vector<ClassId>& {
        auto it = similar.find(label);
        if (it != similar.end()) return it->second;
        const auto& pool_ids = is_base ? new_classes : base_classes;
        const auto& pool = is_base ? new_protos : base_protos;
        const std::size_t want =
            is_base ? static_cast<std::size_t>(std::floor(options.base_fraction * static_cast<double>(new_classes.size())))
                    : options.m_new_similar;
        std::vector<ClassId> ids;
        if (want > 0 && !pool.empty()) {
            for (std::size_t idx : most_similar(registry.at(label).prototype, pool, want)) ids.push_back(pool_ids[idx]);
        }
        std::sort(ids.begin(), ids.end());
        return similar.emplace(label, std::move(ids)).first->second;
    };

    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (preds[i] == labels[i]) continue;
        const bool is_base = base.contains(labels[i]);
        const auto& set = similar_set(labels[i], is_base);
        const bool into = std::binary_search(set.begin(), set.end(), preds[i]);
        if (is_base) {
            ++out.misclassified_base;
            out.into_similar_new += into;
        } else {
            ++out.misclassified_new;
            out.into_similar_base += into;
        }
    }
    out.tbr = percent_or_absent(out.into_similar_base, out.misclassified_new);
    out.tnr = percent_or_absent(out.into_similar_new, out.misclassified_base);
    return out;
}

std::string_view to_string(ChangeCategory category) noexcept {
    switch (category) {
        case ChangeCategory::Unchanged: return "UC";
        case ChangeCategory::WrongToRight: return "WR";
        case ChangeCategory::RightToWrong: return "RW";
        case ChangeCategory::WrongToWrong: return "WW";
    }
    return "?";
}

ChangeCategory change_category(ClassId before, ClassId after, ClassId label) noexcept {
    if (before == after) return ChangeCategory::Unchanged;
    if (after == label) return ChangeCategory::WrongToRight;
    if (before == label) return ChangeCategory::RightToWrong;
    return ChangeCategory::WrongToWrong;
}

ChangeAnalysis prediction_change(std::span<const ClassId> preds_before, std::span<const ClassId> preds_after,
                                 std::span<const ClassId> labels, std::span<const ClassId> base_ids) {
    require_same_length(preds_before.size(), labels.size());
    require_same_length(preds_after.size(), labels.size());
    const IdSet base(base_ids);
    ChangeAnalysis out;
    out.total = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& cat = out.categories[static_cast<std::size_t>(change_category(preds_before[i], preds_after[i], labels[i]))];
        ++cat.count;
        (base.contains(labels[i]) ? cat.base_count : cat.new_count)++;
    }
    for (auto& cat : out.categories) {
        cat.base_pct = percent_or_absent(cat.base_count, cat.count);
        cat.new_pct = percent_or_absent(cat.new_count, cat.count);
    }
    return out;
}

ConfidenceInterval confidence_interval(std::span<const double> values) {
    if (values.size() < 2) fail(ErrorKind::InvalidArgument, "confidence interval needs at least 2 values");
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    double mean = sum / n;
    double residual = 0.0;
    for (double v : values) residual += v - mean;
    mean += residual / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return {mean, 1.96 * stderr_};
}

MetricBundle compute_metrics(std::span<const ClassId> preds, std::span<const ClassId> labels,
                             std::span<const ClassId> base_ids, const PrototypeRegistry& similarity_registry,
                             const SimilarityOptions& options) {
    const AccuracyBreakdown acc = accuracy_decomposition(preds, labels, base_ids);
    MetricBundle m;
    m.avg_acc = acc.avg_acc;
    m.base_acc = acc.base_acc;
    m.new_acc = acc.new_acc;
    if (!acc.new_acc) return m;
    if (acc.base_acc) m.hmean = harmonic_mean(*acc.base_acc, *acc.new_acc);
    const BinaryRates rates = fnr_fpr(preds, labels, base_ids);
    m.fnr = rates.fnr;
    m.fpr = rates.fpr;
    const SimilarityRatios sim = tbr_tnr(preds, labels, similarity_registry, base_ids, options);
    m.tbr = sim.tbr;
    m.tnr = sim.tnr;
    return m;
}

}  // namespace protocalib
