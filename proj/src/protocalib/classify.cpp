#include "protocalib/classify.hpp"

#include <algorithm>

#include "protocalib/error.hpp"
#include "protocalib/parallel.hpp"

namespace protocalib {

namespace {

// Prototypes laid out once per batch. Scores use the same expression as
// cosine_similarity so single and batch paths agree bit for bit.
class PrototypeTable {
public:
    explicit PrototypeTable(const PrototypeRegistry& registry) {
        if (registry.empty()) fail(ErrorKind::InvalidArgument, "empty prototype registry");
        for (const auto& [label, entry] : registry) {
            const double n = entry.prototype.norm();
            if (n == 0.0) {
                fail(ErrorKind::Numeric, "undefined cosine for zero vector (prototype of class " +
                                             std::to_string(label) + ")");
            }
            rows_.push_back({label, &entry.prototype, n});
        }
        dim_ = registry.dim();
    }

    template <class Visit>
    void score(const FeatureVector& feature, Visit&& visit) const {
        if (feature.dim() != dim_) fail(ErrorKind::InvalidArgument, "feature dimension does not match prototypes");
        const double nf = feature.norm();
        if (nf == 0.0) fail(ErrorKind::Numeric, "undefined cosine for zero vector (query feature)");
        for (const auto& row : rows_) {
            const double c = std::clamp(dot(feature.values(), row.prototype->values()) / (nf * row.norm), -1.0, 1.0);
            visit(row.label, c);
        }
    }

    ClassId argmax(const FeatureVector& feature) const {
        ClassId best = 0;
        double best_score = 0.0;
        bool first = true;
        // Rows are ascending by id; strict comparison keeps the lowest id on ties.
        score(feature, [&](ClassId label, double s) {
            if (first || s > best_score) {
                best = label;
                best_score = s;
                first = false;
            }
        });
        return best;
    }

private:
    struct Row {
        ClassId label;
        const FeatureVector* prototype;
        double norm;
    };
    std::vector<Row> rows_;
    std::size_t dim_ = 0;
};

template <class Get>
std::vector<ClassId> run_batch(std::size_t n, Get&& get, const PrototypeRegistry& registry, std::size_t threads) {
    if (n == 0) return {};
    const PrototypeTable table(registry);
    std::vector<ClassId> out(n);
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            out[i] = table.argmax(get(i));
        } catch (const Error& e) {
            throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

}  // namespace

LogitVector logits(const FeatureVector& feature, const PrototypeRegistry& registry) {
    const PrototypeTable table(registry);
    LogitVector out;
    out.scores.reserve(registry.size());
    table.score(feature, [&](ClassId label, double s) { out.scores.emplace_back(label, s); });
    return out;
}

ClassId predict(const FeatureVector& feature, const PrototypeRegistry& registry) {
    return PrototypeTable(registry).argmax(feature);
}

std::vector<ClassId> predict_batch(std::span<const FeatureVector> features, const PrototypeRegistry& registry,
                                   std::size_t threads) {
    return run_batch(features.size(), [&](std::size_t i) -> const FeatureVector& { return features[i]; }, registry,
                     threads);
}

std::vector<ClassId> predict_records(std::span<const EmbeddingRecord* const> records,
                                     const PrototypeRegistry& registry, std::size_t threads) {
    return run_batch(records.size(), [&](std::size_t i) -> const FeatureVector& { return records[i]->feature; },
                     registry, threads);
}

}  // namespace protocalib
