#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "protocalib/calib.hpp"
#include "protocalib/core.hpp"
#include "protocalib/metrics.hpp"

namespace protocalib {

struct RunOptions {
    /// Worker cap; 0 picks one per hardware thread.
    std::size_t threads = 0;
    SimilarityOptions similarity;
};

/// Outcome of one FSCIL session. test_indices point into the dataset records.
struct SessionResult {
    SessionId session = 0;
    std::vector<std::size_t> test_indices;
    std::vector<ClassId> predictions;
    std::vector<ClassId> true_labels;
    PrototypeRegistry registry_snapshot;
    MetricBundle metrics;
};

struct FscilRun {
    CalibParams params;
    std::vector<SessionResult> sessions;

    /// Performance drop over the per-session average accuracies.
    double performance_drop() const;
};

/// Sequential session loop. Session i adds empirical prototypes for C_i,
/// calibrates them against the session-0 empirical prototypes and classifies
/// every test record with a label in C_0..C_i.
FscilRun run_fscil(const Dataset& dataset, const CalibParams& params, const RunOptions& options = {});

/// Classifies the session's test records against a registry snapshot.
std::vector<ClassId> classify_session(const Dataset& dataset, const SessionResult& session, std::size_t threads = 1);

struct EpisodeSpec {
    std::size_t ways = 5;
    std::size_t shots = 5;
    std::size_t queries = 15;
    std::size_t episodes = 600;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One N-way K-shot task. Record indices refer to the dataset.
struct Episode {
    std::vector<ClassId> class_ids;
    std::vector<std::size_t> support;
    std::vector<std::size_t> query;

    friend bool operator==(const Episode&, const Episode&) = default;
};

/// Novel pool: every record (both splits) of classes outside session 0.
Episode sample_episode(const Dataset& dataset, const EpisodeSpec& spec, std::uint64_t episode_index);

struct FslRun {
    CalibParams params;
    EpisodeSpec spec;
    /// Fraction of correct queries per episode, ordered by episode index.
    std::vector<double> accuracies;
    double mean_accuracy = 0.0;
    /// 1.96 standard errors; absent for a single episode.
    std::optional<double> ci95_half_width;
};

FslRun run_fsl(const Dataset& dataset, const EpisodeSpec& spec, const CalibParams& params,
               const RunOptions& options = {});

}  // namespace protocalib
