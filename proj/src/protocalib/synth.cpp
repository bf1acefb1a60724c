#include "protocalib/synth.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "protocalib/error.hpp"
#include "protocalib/rng.hpp"

namespace protocalib {

namespace {

constexpr double kMinSeparationSigmas = 4.0;
constexpr std::size_t kRetryBudget = 10000;

double distance(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(ss);
}

std::vector<double> gaussian_vector(Rng& rng, std::span<const double> mean, double sigma) {
    std::vector<double> v(mean.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mean[i] + sigma * rng.normal();
    return v;
}

}  // namespace

void SynthSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorKind::InvalidArgument, what);
    };
    require(base_classes >= 1 && new_classes >= 1 && sessions_after_base >= 1, "class and session counts must be >= 1");
    require(new_classes % sessions_after_base == 0, "new classes must divide evenly across incremental sessions");
    require(dim >= 1, "dim must be >= 1");
    require(base_train_per_class >= 1 && shots >= 1 && test_per_class >= 1, "sample counts must be >= 1");
    require(mixture_support >= 1 && mixture_support <= base_classes, "mixture support must be in [1, base classes]");
    require(mixture_noise >= 0.0 && std::isfinite(mixture_noise), "mixture noise must be non-negative");
    require(within_class_sigma > 0.0 && std::isfinite(within_class_sigma), "within-class sigma must be positive");
    require(base_spread > 0.0 && std::isfinite(base_spread), "base spread must be positive");
}

double GroundTruth::min_base_separation() const {
    std::vector<const FeatureVector*> bases;
    for (const auto& [id, truth] : classes) {
        if (truth.session == 0) bases.push_back(&truth.mean);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bases.size(); ++i) {
        for (std::size_t j = i + 1; j < bases.size(); ++j) {
            best = std::min(best, distance(bases[i]->values(), bases[j]->values()));
        }
    }
    return best;
}

SynthResult gen_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    GroundTruth truth;
    const std::vector<double> origin(spec.dim, 0.0);
    const double min_sep = kMinSeparationSigmas * spec.within_class_sigma;

    std::vector<std::vector<double>> base_means;
    for (std::size_t b = 0; b < spec.base_classes; ++b) {
        std::size_t tries = 0;
        for (;;) {
            auto candidate = gaussian_vector(rng, origin, spec.base_spread);
            bool separated = true;
            for (const auto& other : base_means) {
                if (distance(candidate, other) < min_sep) {
                    separated = false;
                    break;
                }
            }
            if (separated) {
                base_means.push_back(std::move(candidate));
                break;
            }
            if (++tries >= kRetryBudget) {
                fail(ErrorKind::InvalidArgument,
                     "could not place base means 4 sigma apart; use a larger dim or base spread, or a smaller sigma");
            }
        }
        truth.classes[static_cast<ClassId>(b)] = {0, FeatureVector(base_means.back()), {}, {}};
    }

    const std::size_t per_session = spec.new_classes / spec.sessions_after_base;
    const double offset_sigma = spec.mixture_noise / std::sqrt(static_cast<double>(spec.dim));
    for (std::size_t n = 0; n < spec.new_classes; ++n) {
        ClassTruth t;
        t.session = static_cast<SessionId>(1 + n / per_session);
        std::vector<double> raw(spec.mixture_support);
        double total = 0.0;
        const auto parents = rng.sample_without_replacement(spec.base_classes, spec.mixture_support);
        for (std::size_t j = 0; j < raw.size(); ++j) {
            raw[j] = -std::log(1.0 - rng.uniform());  // Dirichlet(1, ..., 1) via normalized exponentials
            if (raw[j] == 0.0) raw[j] = std::numeric_limits<double>::min();
            total += raw[j];
        }
        std::vector<double> mean(spec.dim, 0.0);
        for (std::size_t j = 0; j < parents.size(); ++j) {
            const double w = raw[j] / total;
            t.parents.push_back(static_cast<ClassId>(parents[j]));
            t.weights.push_back(w);
            for (std::size_t i = 0; i < spec.dim; ++i) mean[i] += w * base_means[parents[j]][i];
        }
        if (spec.mixture_noise > 0.0) mean = gaussian_vector(rng, mean, offset_sigma);
        t.mean = FeatureVector(std::move(mean));
        truth.classes[static_cast<ClassId>(spec.base_classes + n)] = std::move(t);
    }

    std::vector<EmbeddingRecord> records;
    for (const auto& [id, t] : truth.classes) {
        const std::size_t train = t.session == 0 ? spec.base_train_per_class : spec.shots;
        for (std::size_t k = 0; k < train + spec.test_per_class; ++k) {
            records.push_back({k < train ? Split::Train : Split::Test, t.session, id,
                               FeatureVector(gaussian_vector(rng, t.mean.values(), spec.within_class_sigma))});
        }
    }
    return {Dataset::from_records(std::move(records)), std::move(truth)};
}

std::map<ClassId, double> prototype_error(const PrototypeRegistry& registry, const GroundTruth& truth) {
    std::map<ClassId, double> out;
    for (const auto& [id, entry] : registry) {
        const auto it = truth.classes.find(id);
        if (it == truth.classes.end()) fail(ErrorKind::InvalidArgument, "class " + std::to_string(id) + " has no ground truth");
        if (it->second.mean.dim() != entry.prototype.dim()) fail(ErrorKind::InvalidArgument, "dimension mismatch");
        out[id] = distance(entry.prototype.values(), it->second.mean.values());
    }
    return out;
}

std::string format_ground_truth(const GroundTruth& truth) {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [id, t] : truth.classes) {
        classes[std::to_string(id)] = {
            {"session", t.session},
            {"mean", std::vector<double>(t.mean.values().begin(), t.mean.values().end())},
            {"parents", t.parents},
            {"weights", t.weights},
        };
    }
    return nlohmann::json{{"classes", classes}}.dump(2) + "\n";
}

GroundTruth parse_ground_truth(std::string_view text) {
    GroundTruth truth;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& [key, value] : doc.at("classes").items()) {
            ClassTruth t;
            t.session = value.at("session").get<SessionId>();
            t.mean = FeatureVector(value.at("mean").get<std::vector<double>>());
            t.parents = value.at("parents").get<std::vector<ClassId>>();
            t.weights = value.at("weights").get<std::vector<double>>();
            truth.classes[static_cast<ClassId>(std::stoul(key))] = std::move(t);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("ground truth: ") + e.what());
    }
    return truth;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write ground truth '" + path.string() + "'");
    out << format_ground_truth(truth);
    if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace protocalib
