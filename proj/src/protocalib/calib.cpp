#include "protocalib/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protocalib/error.hpp"
#include "protocalib/parallel.hpp"

namespace protocalib {

void CalibParams::validate(std::size_t base_count) const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must be in [0, 1]");
    if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::InvalidArgument, "tau must be positive");
    if (simteen_k < 1) fail(ErrorKind::InvalidArgument, "simteen k must be at least 1");
    if (strategy == Strategy::SimTeen && base_count != 0 && simteen_k > base_count) {
        fail(ErrorKind::InvalidArgument, "simteen k=" + std::to_string(simteen_k) + " exceeds the " +
                                             std::to_string(base_count) + " base classes");
    }
}

std::string_view to_string(Strategy strategy) noexcept {
    switch (strategy) {
        case Strategy::ProtoNet: return "protonet";
        case Strategy::Teen: return "teen";
        case Strategy::SimTeen: return "simteen";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view text) {
    if (text == "protonet") return Strategy::ProtoNet;
    if (text == "teen") return Strategy::Teen;
    if (text == "simteen") return Strategy::SimTeen;
    fail(ErrorKind::InvalidArgument, "unknown strategy '" + std::string(text) + "'");
}

namespace {

void require_bases(std::span<const FeatureVector> base_protos) {
    if (base_protos.empty()) fail(ErrorKind::InvalidArgument, "at least one base prototype is required");
}

FeatureVector fuse(const FeatureVector& new_proto, std::span<const double> item, double alpha) {
    std::vector<double> out(new_proto.dim());
    const double beta = 1.0 - alpha;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * new_proto[i] + beta * item[i];
    return FeatureVector(std::move(out));
}

}  // namespace

double scaled_cosine(const FeatureVector& a, const FeatureVector& b, double tau) { return cosine_similarity(a, b) * tau; }

WeightVector softmax_weights(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos, double tau) {
    require_bases(base_protos);
    std::vector<double> scores(base_protos.size());
    for (std::size_t b = 0; b < base_protos.size(); ++b) scores[b] = scaled_cosine(base_protos[b], new_proto, tau);
    const double peak = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double& s : scores) {
        s = std::exp(s - peak);
        total += s;
    }
    for (double& s : scores) s /= total;
    return {std::move(scores)};
}

FeatureVector calibration_item(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos,
                               double tau) {
    const WeightVector w = softmax_weights(new_proto, base_protos, tau);
    std::vector<double> item(new_proto.dim(), 0.0);
    for (std::size_t b = 0; b < base_protos.size(); ++b) {
        const auto v = base_protos[b].values();
        for (std::size_t i = 0; i < item.size(); ++i) item[i] += w.weights[b] * v[i];
    }
    return FeatureVector(std::move(item));
}

FeatureVector calibrate_teen(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos, double alpha,
                             double tau) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must be in [0, 1]");
    const FeatureVector item = calibration_item(new_proto, base_protos, tau);
    return fuse(new_proto, item.values(), alpha);
}

std::vector<std::size_t> most_similar(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos,
                                      std::size_t k) {
    std::vector<double> sim(base_protos.size());
    for (std::size_t b = 0; b < base_protos.size(); ++b) sim[b] = cosine_similarity(base_protos[b], new_proto);
    std::vector<std::size_t> order(base_protos.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sim[x] > sim[y]; });
    order.resize(std::min(k, order.size()));
    return order;
}

FeatureVector calibrate_simteen(const FeatureVector& new_proto, std::span<const FeatureVector> base_protos,
                                double alpha, std::size_t k, SimTeenCombine combine) {
    require_bases(base_protos);
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must be in [0, 1]");
    if (k < 1 || k > base_protos.size()) {
        fail(ErrorKind::InvalidArgument, "simteen k=" + std::to_string(k) + " must be in [1, " +
                                             std::to_string(base_protos.size()) + "]");
    }
    std::vector<double> item(new_proto.dim(), 0.0);
    for (std::size_t b : most_similar(new_proto, base_protos, k)) {
        const auto v = base_protos[b].values();
        for (std::size_t i = 0; i < item.size(); ++i) item[i] += v[i];
    }
    if (combine == SimTeenCombine::Mean) {
        for (double& x : item) x /= static_cast<double>(k);
    }
    return fuse(new_proto, item, alpha);
}

PrototypeRegistry calibrate_registry(const PrototypeRegistry& registry, std::span<const ClassId> base_ids,
                                     std::span<const ClassId> new_ids, const CalibParams& params,
                                     std::size_t threads) {
    std::vector<ClassId> bases(base_ids.begin(), base_ids.end());
    std::sort(bases.begin(), bases.end());
    for (ClassId id : bases) {
        if (!registry.contains(id)) fail(ErrorKind::InvalidArgument, "unknown base class id " + std::to_string(id));
    }
    for (ClassId id : new_ids) {
        if (!registry.contains(id)) fail(ErrorKind::InvalidArgument, "unknown new class id " + std::to_string(id));
        if (std::binary_search(bases.begin(), bases.end(), id)) {
            fail(ErrorKind::InvalidArgument, "class id " + std::to_string(id) + " is both base and new");
        }
    }
    params.validate(bases.size());
    if (params.strategy == Strategy::ProtoNet) return registry;

    std::vector<FeatureVector> base_protos;
    base_protos.reserve(bases.size());
    for (ClassId id : bases) base_protos.push_back(registry.at(id).prototype);

    std::vector<FeatureVector> calibrated(new_ids.size());
    parallel_for(new_ids.size(), threads, [&](std::size_t i) {
        const FeatureVector& c = registry.at(new_ids[i]).prototype;
        calibrated[i] = params.strategy == Strategy::Teen
                            ? calibrate_teen(c, base_protos, params.alpha, params.tau)
                            : calibrate_simteen(c, base_protos, params.alpha, params.simteen_k,
                                                params.simteen_combine);
    });

    PrototypeRegistry out = registry;
    for (std::size_t i = 0; i < new_ids.size(); ++i) {
        out.insert(new_ids[i], {std::move(calibrated[i]), Provenance::Calibrated});
    }
    return out;
}

}  // namespace protocalib
