#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "protocalib/core.hpp"

namespace protocalib {

/// Percentages in [0, 100]. A group with no samples is absent.
struct AccuracyBreakdown {
    double avg_acc = 0.0;
    std::optional<double> base_acc;
    std::optional<double> new_acc;
};

/// base_acc is over samples whose true label is in base_ids; new_acc over the
/// rest.
AccuracyBreakdown accuracy_decomposition(std::span<const ClassId> preds, std::span<const ClassId> labels,
                                         std::span<const ClassId> base_ids);

/// 2bn / (b + n); 0 when either input is 0.
double harmonic_mean(double base_acc, double new_acc);

/// First accuracy minus last accuracy.
double performance_drop(std::span<const double> acc_sequence);

/// Base-vs-new binarization with base as the positive class.
struct BinaryRates {
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::optional<double> fnr;
    std::optional<double> fpr;
};

BinaryRates fnr_fpr(std::span<const ClassId> preds, std::span<const ClassId> labels,
                    std::span<const ClassId> base_ids);

struct SimilarityOptions {
    /// Size of each new class's most-similar base set.
    std::size_t m_new_similar = 10;
    /// Each base class's most-similar new set has floor(base_fraction * #new) members.
    double base_fraction = 0.20;
};

struct SimilarityRatios {
    std::size_t misclassified_new = 0;
    std::size_t into_similar_base = 0;
    std::size_t misclassified_base = 0;
    std::size_t into_similar_new = 0;
    std::optional<double> tbr;
    std::optional<double> tnr;
};

/// TBR over misclassified new-class samples and TNR over misclassified
/// base-class samples. Similar sets are ranked by prototype cosine in
/// `registry`; every class outside base_ids is treated as new.
SimilarityRatios tbr_tnr(std::span<const ClassId> preds, std::span<const ClassId> labels,
                         const PrototypeRegistry& registry, std::span<const ClassId> base_ids,
                         const SimilarityOptions& options = {});

enum class ChangeCategory { Unchanged = 0, WrongToRight = 1, RightToWrong = 2, WrongToWrong = 3 };

inline constexpr std::array<ChangeCategory, 4> kChangeCategories = {
    ChangeCategory::Unchanged, ChangeCategory::WrongToRight, ChangeCategory::RightToWrong,
    ChangeCategory::WrongToWrong};

std::string_view to_string(ChangeCategory category) noexcept;

ChangeCategory change_category(ClassId before, ClassId after, ClassId label) noexcept;

struct CategoryStats {
    std::size_t count = 0;
    std::size_t base_count = 0;
    std::size_t new_count = 0;
    /// Composition by true label; absent for an empty category.
    std::optional<double> base_pct;
    std::optional<double> new_pct;
};

struct ChangeAnalysis {
    std::size_t total = 0;
    std::array<CategoryStats, 4> categories{};

    const CategoryStats& operator[](ChangeCategory c) const { return categories[static_cast<std::size_t>(c)]; }
};

ChangeAnalysis prediction_change(std::span<const ClassId> preds_before, std::span<const ClassId> preds_after,
                                 std::span<const ClassId> labels, std::span<const ClassId> base_ids);

struct ConfidenceInterval {
    double mean = 0.0;
    double half_width = 0.0;
};

/// Mean and 1.96 * sample standard error.
ConfidenceInterval confidence_interval(std::span<const double> values);

/// Every per-session measure. Fields other than avg_acc are absent when
/// undefined; the base-vs-new diagnostics are absent while no new class
/// has been seen.
struct MetricBundle {
    double avg_acc = 0.0;
    std::optional<double> base_acc;
    std::optional<double> new_acc;
    std::optional<double> hmean;
    std::optional<double> fnr;
    std::optional<double> fpr;
    std::optional<double> tbr;
    std::optional<double> tnr;
};

/// `similarity_registry` ranks the similar-class sets for TBR/TNR and must
/// cover every seen class.
MetricBundle compute_metrics(std::span<const ClassId> preds, std::span<const ClassId> labels,
                             std::span<const ClassId> base_ids, const PrototypeRegistry& similarity_registry,
                             const SimilarityOptions& options = {});

}  // namespace protocalib
