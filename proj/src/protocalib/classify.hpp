#pragma once

#include <span>
#include <utility>
#include <vector>

#include "protocalib/core.hpp"

namespace protocalib {

/// Cosine score per class, ascending by class id.
struct LogitVector {
    std::vector<std::pair<ClassId, double>> scores;
};

LogitVector logits(const FeatureVector& feature, const PrototypeRegistry& registry);

/// Argmax of the cosine logits; exact ties go to the lowest class id.
ClassId predict(const FeatureVector& feature, const PrototypeRegistry& registry);

/// predict() over every element, order preserved. On failure the error names
/// the index of the first failing element.
std::vector<ClassId> predict_batch(std::span<const FeatureVector> features, const PrototypeRegistry& registry,
                                   std::size_t threads = 1);

/// Same as predict_batch over the features of `records`.
std::vector<ClassId> predict_records(std::span<const EmbeddingRecord* const> records,
                                     const PrototypeRegistry& registry, std::size_t threads = 1);

}  // namespace protocalib
