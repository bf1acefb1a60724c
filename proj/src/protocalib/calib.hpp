#pragma once

#include <span>
#include <vector>

#include "protocalib/core.hpp"

namespace protocalib {

enum class Strategy { ProtoNet, Teen, SimTeen };

/// How SimTEEN combines its K nearest base prototypes.
enum class SimTeenCombine { Sum, Mean };

struct CalibParams {
    Strategy strategy = Strategy::Teen;
    double alpha = 0.5;
    double tau = 16.0;
    std::size_t simteen_k = 1;
    SimTeenCombine simteen_combine = SimTeenCombine::Sum;

    /// Checks alpha, tau and k. `base_count` bounds k when non-zero.
    void validate(std::size_t base_count = 0) const;
};

std::string_view to_string(Strategy strategy) noexcept;
Strategy parse_strategy(std::string_view text);

/// Softmax weights over the base prototypes, in base-prototype order.
struct WeightVector {
    std::vector<double> weights;
};

/// Cosine similarity scaled by tau.
double scaled_cosine(const FeatureVector& a, const FeatureVector& b, double tau);

WeightVector softmax_weights(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos, double tau);

/// Similarity-weighted convex combination of the base prototypes.
FeatureVector calibration_item(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos,
                               double tau);

/// alpha * new_proto + (1 - alpha) * calibration_item.
FeatureVector calibrate_teen(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos, double alpha,
                             double tau);

/// Indices of the k base prototypes most cosine-similar to new_proto,
/// most similar first; ties go to the lower index.
std::vector<std::size_t> most_similar(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos,
                                      std::size_t k);

/// alpha * new_proto + (1 - alpha) * (sum or mean of the k nearest base
/// prototypes). Base prototypes must be ordered by class id.
FeatureVector calibrate_simteen(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos,
                                double alpha, std::size_t k, SimTeenCombine combine = SimTeenCombine::Sum);

/// Replaces the new-class entries with calibrated prototypes computed against
/// the base entries. Base entries are copied through untouched.
PrototypeRegistry calibrate_registry(const PrototypeRegistry& registry, std::span<const ClassId> base_ids,
                                     std::span<const ClassId> new_ids, const CalibParams& params,
                                     std::size_t threads = 1);

}  // namespace protocalib
