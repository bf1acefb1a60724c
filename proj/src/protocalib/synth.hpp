#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "protocalib/core.hpp"

namespace protocalib {

/// Gaussian benchmark whose new-class means are mixtures of base-class means.
struct SynthSpec {
    std::size_t base_classes = 10;
    std::size_t new_classes = 5;
    std::size_t sessions_after_base = 1;
    std::size_t dim = 16;
    std::size_t base_train_per_class = 200;
    std::size_t shots = 5;
    std::size_t test_per_class = 50;
    /// Parent base classes mixed into each new-class mean.
    std::size_t mixture_support = 2;
    /// RMS norm of the Gaussian offset added to each mixed mean.
    double mixture_noise = 0.5;
    /// Per-coordinate standard deviation of samples around their class mean.
    double within_class_sigma = 1.0;
    /// Per-coordinate standard deviation of the base means around the origin.
    double base_spread = 2.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ClassTruth {
    SessionId session = 0;
    FeatureVector mean;
    /// Parent base classes and their mixture weights; empty for base classes.
    std::vector<ClassId> parents;
    std::vector<double> weights;
};

struct GroundTruth {
    std::map<ClassId, ClassTruth> classes;

    /// Smallest pairwise distance between base-class means.
    double min_base_separation() const;
};

struct SynthResult {
    Dataset dataset;
    GroundTruth truth;
};

/// Base classes take ids 0..B-1 and new classes B..B+C-1, assigned to
/// sessions in order. Records are written per class: train rows, then test
/// rows. Output is a pure function of the spec.
SynthResult gen_synthetic(const SynthSpec& spec);

/// Per-class Euclidean distance from prototype to true mean.
std::map<ClassId, double> prototype_error(const PrototypeRegistry& registry, const GroundTruth& truth);

std::string format_ground_truth(const GroundTruth& truth);
GroundTruth parse_ground_truth(std::string_view text);
void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);

}  // namespace protocalib
