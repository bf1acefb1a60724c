#include "protocalib/protocol.hpp"

#include <algorithm>
#include <map>

#include "protocalib/classify.hpp"
#include "protocalib/error.hpp"
#include "protocalib/parallel.hpp"
#include "protocalib/rng.hpp"

namespace protocalib {

double FscilRun::performance_drop() const {
    std::vector<double> accs;
    accs.reserve(sessions.size());
    for (const auto& s : sessions) accs.push_back(s.metrics.avg_acc);
    return protocalib::performance_drop(accs);
}

namespace {

std::vector<const EmbeddingRecord*> record_pointers(const Dataset& dataset, std::span<const std::size_t> indices) {
    std::vector<const EmbeddingRecord*> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(&dataset.records()[i]);
    return out;
}

}  // namespace

std::vector<ClassId> classify_session(const Dataset& dataset, const SessionResult& session, std::size_t threads) {
    return predict_records(record_pointers(dataset, session.test_indices), session.registry_snapshot, threads);
}

FscilRun run_fscil(const Dataset& dataset, const CalibParams& params, const RunOptions& options) {
    const SessionLayout& layout = dataset.layout();
    const std::vector<ClassId>& base_ids = layout.base_classes();
    params.validate(base_ids.size());

    const PrototypeRegistry base_registry = empirical_prototypes(dataset, 0);
    PrototypeRegistry running = base_registry;
    PrototypeRegistry empirical_running = base_registry;

    FscilRun run;
    run.params = params;
    for (SessionId s = 0; s < layout.session_count(); ++s) {
        if (s > 0) {
            const PrototypeRegistry fresh = empirical_prototypes(dataset, s);
            empirical_running.merge(fresh);
            if (params.strategy == Strategy::ProtoNet) {
                running.merge(fresh);
            } else {
                // Calibration always references the session-0 prototypes only.
                PrototypeRegistry scratch = base_registry;
                scratch.merge(fresh);
                const auto& new_ids = layout.label_spaces[s];
                const PrototypeRegistry calibrated =
                    calibrate_registry(scratch, base_ids, new_ids, params, options.threads);
                for (ClassId id : new_ids) running.insert(id, calibrated.at(id));
            }
        }

        SessionResult result;
        result.session = s;
        const auto records = dataset.records();
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].split == Split::Test && records[i].session <= s) {
                result.test_indices.push_back(i);
                result.true_labels.push_back(records[i].label);
            }
        }
        if (result.test_indices.empty()) {
            fail(ErrorKind::Validation, "session " + std::to_string(s) + " has no test records");
        }
        result.registry_snapshot = running;
        result.predictions = classify_session(dataset, result, options.threads);
        result.metrics = compute_metrics(result.predictions, result.true_labels, base_ids, empirical_running,
                                         options.similarity);
        run.sessions.push_back(std::move(result));
    }
    return run;
}

void EpisodeSpec::validate() const {
    if (ways < 2) fail(ErrorKind::InvalidArgument, "ways must be at least 2");
    if (shots < 1) fail(ErrorKind::InvalidArgument, "shots must be at least 1");
    if (queries < 1) fail(ErrorKind::InvalidArgument, "queries must be at least 1");
    if (episodes < 1) fail(ErrorKind::InvalidArgument, "episodes must be at least 1");
}

namespace {

class EpisodeSampler {
public:
    EpisodeSampler(const Dataset& dataset, const EpisodeSpec& spec) : spec_(spec) {
        spec.validate();
        const auto& layout = dataset.layout();
        for (SessionId s = 1; s < layout.session_count(); ++s) {
            for (ClassId id : layout.label_spaces[s]) pool_[id];
        }
        const auto records = dataset.records();
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto it = pool_.find(records[i].label);
            if (it != pool_.end()) it->second.push_back(i);
        }
        if (pool_.size() < spec.ways) {
            fail(ErrorKind::Validation, "novel pool has " + std::to_string(pool_.size()) + " classes, episode needs " +
                                            std::to_string(spec.ways));
        }
        const std::size_t need = spec.shots + spec.queries;
        for (const auto& [id, members] : pool_) {
            if (members.size() < need) {
                fail(ErrorKind::Validation, "novel class " + std::to_string(id) + " has " +
                                                std::to_string(members.size()) + " records, episode needs " +
                                                std::to_string(need) + " (short by " +
                                                std::to_string(need - members.size()) + ")");
            }
            class_ids_.push_back(id);
        }
    }

    Episode sample(std::uint64_t episode_index) const {
        Rng rng(stream_seed(spec_.seed, episode_index));
        Episode ep;
        for (std::size_t c : rng.sample_without_replacement(class_ids_.size(), spec_.ways)) {
            ep.class_ids.push_back(class_ids_[c]);
        }
        for (ClassId id : ep.class_ids) {
            const auto& members = pool_.at(id);
            const auto picks = rng.sample_without_replacement(members.size(), spec_.shots + spec_.queries);
            for (std::size_t j = 0; j < picks.size(); ++j) {
                (j < spec_.shots ? ep.support : ep.query).push_back(members[picks[j]]);
            }
        }
        return ep;
    }

private:
    EpisodeSpec spec_;
    std::map<ClassId, std::vector<std::size_t>> pool_;
    std::vector<ClassId> class_ids_;
};

}  // namespace

Episode sample_episode(const Dataset& dataset, const EpisodeSpec& spec, std::uint64_t episode_index) {
    return EpisodeSampler(dataset, spec).sample(episode_index);
}

FslRun run_fsl(const Dataset& dataset, const EpisodeSpec& spec, const CalibParams& params, const RunOptions& options) {
    const EpisodeSampler sampler(dataset, spec);
    const std::vector<ClassId>& base_ids = dataset.layout().base_classes();
    params.validate(base_ids.size());
    const PrototypeRegistry base_registry = empirical_prototypes(dataset, 0);
    const auto records = dataset.records();

    FslRun run;
    run.params = params;
    run.spec = spec;
    run.accuracies.resize(spec.episodes);
    parallel_for(spec.episodes, options.threads, [&](std::size_t e) {
        const Episode ep = sampler.sample(e);
        std::map<ClassId, std::vector<FeatureVector>> support;
        for (std::size_t i : ep.support) support[records[i].label].push_back(records[i].feature);

        PrototypeRegistry scratch = base_registry;
        for (const auto& [id, feats] : support) scratch.insert(id, {compute_prototype(feats), Provenance::Empirical});
        if (params.strategy != Strategy::ProtoNet) {
            scratch = calibrate_registry(scratch, base_ids, ep.class_ids, params, 1);
        }
        PrototypeRegistry episode_registry;
        for (ClassId id : ep.class_ids) episode_registry.insert(id, scratch.at(id));

        const auto preds = predict_records(record_pointers(dataset, ep.query), episode_registry, 1);
        std::size_t correct = 0;
        for (std::size_t q = 0; q < preds.size(); ++q) correct += preds[q] == records[ep.query[q]].label;
        run.accuracies[e] = static_cast<double>(correct) / static_cast<double>(preds.size());
    });

    if (run.accuracies.size() >= 2) {
        const ConfidenceInterval ci = confidence_interval(run.accuracies);
        run.mean_accuracy = ci.mean;
        run.ci95_half_width = ci.half_width;
    } else {
        run.mean_accuracy = run.accuracies.front();
    }
    return run;
}

}  // namespace protocalib
