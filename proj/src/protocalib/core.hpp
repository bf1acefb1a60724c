#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace protocalib {

using ClassId = std::uint32_t;
using SessionId = std::uint32_t;

/// A d-dimensional embedding. Every coordinate is finite.
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> values);
    FeatureVector(std::initializer_list<double> values);

    static FeatureVector zeros(std::size_t dim) { return FeatureVector(std::vector<double>(dim, 0.0)); }

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    double norm() const noexcept;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Cosine of the angle between a and b, clamped to [-1, 1]. Throws
/// Error{Numeric} if either vector is zero.
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

enum class Split { Train, Test };

std::string_view to_string(Split split) noexcept;

struct EmbeddingRecord {
    Split split = Split::Train;
    SessionId session = 0;
    ClassId label = 0;
    FeatureVector feature;

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Session structure inferred from the records. label_spaces[i] is C_i,
/// sorted ascending. shots[i] is the train count per class for i >= 1 and
/// is left 0 for the base session, whose classes may be unbalanced.
struct SessionLayout {
    std::size_t dim = 0;
    std::vector<std::vector<ClassId>> label_spaces;
    std::vector<std::size_t> shots;

    std::size_t session_count() const noexcept { return label_spaces.size(); }
    std::size_t ways(SessionId session) const { return label_spaces.at(session).size(); }
    const std::vector<ClassId>& base_classes() const { return label_spaces.at(0); }

    /// Sorted union of C_0..C_session.
    std::vector<ClassId> cumulative_classes(SessionId session) const;

    /// Session owning `label`, if any.
    std::optional<SessionId> session_of(ClassId label) const;

    friend bool operator==(const SessionLayout&, const SessionLayout&) = default;
};

/// Immutable container of validated records.
class Dataset {
public:
    /// Infers the layout from the records and validates it. Throws
    /// Error{Validation} on any layout violation.
    static Dataset from_records(std::vector<EmbeddingRecord> records);

    const SessionLayout& layout() const noexcept { return layout_; }
    std::span<const EmbeddingRecord> records() const noexcept { return records_; }
    std::size_t dim() const noexcept { return layout_.dim; }

    /// Indices of train records of `label`, in file order.
    std::vector<std::size_t> train_indices(ClassId label) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    SessionLayout layout_;
    std::vector<EmbeddingRecord> records_;
};

/// Infers and validates the layout of a record set.
SessionLayout infer_layout(std::span<const EmbeddingRecord> records);

/// Embedding CSV: `split,session,label,f0,...,f{d-1}`.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view text);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string format_dataset(const Dataset& dataset);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

enum class Provenance { Empirical, Calibrated };

struct PrototypeEntry {
    FeatureVector prototype;
    Provenance provenance = Provenance::Empirical;

    friend bool operator==(const PrototypeEntry&, const PrototypeEntry&) = default;
};

/// Class id -> prototype. Iteration is in ascending class id.
class PrototypeRegistry {
public:
    using Map = std::map<ClassId, PrototypeEntry>;

    void insert(ClassId label, PrototypeEntry entry);
    void merge(const PrototypeRegistry& other);

    bool contains(ClassId label) const { return entries_.contains(label); }
    const PrototypeEntry& at(ClassId label) const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t dim() const noexcept { return dim_; }
    std::vector<ClassId> classes() const;

    Map::const_iterator begin() const { return entries_.begin(); }
    Map::const_iterator end() const { return entries_.end(); }

    friend bool operator==(const PrototypeRegistry&, const PrototypeRegistry&) = default;

private:
    Map entries_;
    std::size_t dim_ = 0;
};

/// Element-wise mean of a non-empty set of equal-dimension vectors.
FeatureVector compute_prototype(std::span<const FeatureVector> features);

/// Empirical prototypes for every class of C_session from its train records.
PrototypeRegistry empirical_prototypes(const Dataset& dataset, SessionId session);

}  // namespace protocalib
