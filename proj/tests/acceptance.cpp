#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "protocalib/calib.hpp"
#include "protocalib/classify.hpp"
#include "protocalib/error.hpp"
#include "protocalib/metrics.hpp"
#include "protocalib/protocol.hpp"
#include "protocalib/synth.hpp"
#include "support.hpp"

using namespace protocalib;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        failed_ |= !ok;
    }
    bool failed() const { return failed_; }
    std::string failures() const {
        std::string out;
        for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + f;
        return out;
    }

private:
    bool failed_ = false;
    std::vector<std::string> failures_;
};

Outcome finish(const Checker& c, const std::string& ok_detail) {
    return c.failed() ? Outcome{false, c.failures()} : Outcome{true, ok_detail};
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// 1 ------------------------------------------------------------------------

Outcome reference_pd() {
    struct Row {
        const char* method;
        std::vector<double> acc;
        double pd;
    };
    const std::vector<Row> rows{
        {"iCaRL", {61.31, 46.32, 42.94, 37.63, 30.49, 24.00, 20.89, 18.80, 17.21}, 44.10},
        {"EEIL", {61.31, 46.58, 44.00, 37.29, 33.14, 27.12, 24.10, 21.57, 19.58}, 41.73},
        {"Rebalancing", {61.31, 47.80, 39.31, 31.91, 25.68, 21.35, 18.67, 17.24, 14.17}, 47.14},
        {"TOPIC", {61.31, 50.09, 45.17, 41.16, 37.48, 35.52, 32.19, 29.46, 24.42}, 36.89},
        {"Decoupled-NegCosine", {71.68, 66.64, 62.57, 58.82, 55.91, 52.88, 49.41, 47.50, 45.81}, 25.87},
        {"Decoupled-Cosine", {70.37, 65.45, 61.41, 58.00, 54.81, 51.89, 49.10, 47.27, 45.63}, 24.74},
        {"Decoupled-DeepEMD", {69.77, 64.59, 60.21, 56.63, 53.16, 50.13, 47.79, 45.42, 43.41}, 26.36},
        {"CEC", {72.00, 66.83, 62.97, 59.43, 56.70, 53.73, 51.19, 49.24, 47.63}, 24.37},
        {"FACT", {72.56, 69.63, 66.38, 62.77, 60.6, 57.33, 54.34, 52.16, 50.49}, 22.07},
        {"TEEN", {73.53, 70.55, 66.37, 63.23, 60.53, 57.95, 55.24, 53.44, 52.08}, 21.45},
    };
    Checker c;
    double worst = 0;
    for (const auto& r : rows) {
        const double err = std::abs(performance_drop(r.acc) - r.pd);
        worst = std::max(worst, err);
        c.expect(err <= 0.01, std::string(r.method) + " PD off by " + fmt(err));
    }
    return finish(c, std::to_string(rows.size()) + " methods, max |error| " + fmt(worst, 6));
}

// 2 ------------------------------------------------------------------------

Outcome reference_hmean() {
    struct Row {
        const char* method;
        std::vector<std::pair<double, double>> pairs;  // (HMean, NAcc) for sessions 1..6
    };
    const std::vector<Row> rows{
        {"CEC", {{30.72, 19.60}, {30.05, 19.10}, {29.86, 19.00}, {29.41, 18.65}, {27.15, 16.88}, {27.36, 17.07}}},
        {"FACT", {{30.60, 19.20}, {27.84, 17.10}, {25.89, 15.67}, {23.85, 14.20}, {22.01, 12.92}, {20.65, 12.00}}},
        {"TEEN", {{50.04, 38.00}, {46.67, 34.60}, {44.72, 32.67}, {43.53, 31.55}, {41.75, 29.80}, {39.22, 27.37}}},
    };
    Checker c;
    std::size_t n = 0;
    double worst = 0;
    for (const auto& r : rows) {
        for (std::size_t s = 0; s < r.pairs.size(); ++s) {
            const auto [h, nacc] = r.pairs[s];
            const double bacc = h * nacc / (2 * nacc - h);
            const std::string where = std::string(r.method) + " session " + std::to_string(s + 1);
            c.expect(bacc > 0 && bacc <= 100, where + " implied BAcc " + fmt(bacc) + " out of range");
            const double err = std::abs(harmonic_mean(bacc, nacc) - h);
            worst = std::max(worst, err);
            c.expect(err <= 0.01, where + " HMean off by " + fmt(err));
            ++n;
        }
    }
    const double teen1 = 50.04 * 38.0 / (2 * 38.0 - 50.04);
    c.expect(std::abs(harmonic_mean(73.24, 38.00) - 50.04) <= 0.01, "HMean(73.24, 38.00) != 50.04");
    return finish(c, std::to_string(n) + " pairs, max |error| " + fmt(worst, 6) + ", TEEN session-1 BAcc " +
                         fmt(teen1, 2));
}

// 3 ------------------------------------------------------------------------

std::vector<FeatureVector> random_set(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<FeatureVector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_vector(rng, dim));
    return out;
}

Outcome calibration_exactness() {
    Checker c;
    Rng rng(2024);
    double worst_sum = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t dim = 2 + rng.below(30);
        const auto bases = random_set(rng, 1 + rng.below(60), dim);
        const auto cn = testing::random_vector(rng, dim);
        const double tau = std::exp(std::log(0.1) + rng.uniform() * std::log(1e5));
        const auto w = softmax_weights(cn, bases, tau).weights;
        const double err = std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0);
        worst_sum = std::max(worst_sum, err);
        c.expect(err <= 1e-9, "weights sum off by " + fmt(err, 12));

        if (t % 5 == 0) {
            c.expect(calibrate_teen(cn, bases, 1.0, tau) == cn, "alpha=1 is not the identity");
            c.expect(calibrate_teen(cn, bases, 0.0, tau) == calibration_item(cn, bases, tau),
                     "alpha=0 differs from the calibration item");
        }
    }

    double worst_limit = 0;
    int limit_cases = 0;
    while (limit_cases < 200) {
        const std::size_t dim = 2 + rng.below(16);
        const auto bases = random_set(rng, 2 + rng.below(20), dim);
        const auto cn = testing::random_vector(rng, dim);
        std::vector<double> cos;
        for (const auto& b : bases) cos.push_back(cosine_similarity(cn, b));
        auto sorted = cos;
        std::sort(sorted.rbegin(), sorted.rend());
        // Distinct enough that the runner-up weight vanishes at tau = 1e4.
        if (sorted[0] - sorted[1] < 5e-3) continue;
        ++limit_cases;
        const std::size_t best = std::max_element(cos.begin(), cos.end()) - cos.begin();
        const auto d = calibration_item(cn, bases, 1e4);
        for (std::size_t k = 0; k < dim; ++k) {
            const double err = std::abs(d[k] - bases[best][k]);
            worst_limit = std::max(worst_limit, err);
            c.expect(err <= 1e-6, "tau limit off by " + fmt(err, 9));
        }
    }
    return finish(c, "1000 weight vectors (max |sum-1| " + fmt(worst_sum, 15) + "), 200 tau-limit cases (max error " +
                         fmt(worst_limit, 12) + ")");
}

// 4 ------------------------------------------------------------------------

Outcome classifier_oracle() {
    Checker c;
    Rng rng(77);
    std::size_t instances = 0, ties = 0;
    for (int r = 0; r < 1000; ++r) {
        const std::size_t dim = 2 + rng.below(10);
        const std::size_t classes = 2 + rng.below(15);
        PrototypeRegistry reg;
        std::vector<ClassId> ids;
        while (reg.size() < classes) {
            const ClassId id = static_cast<ClassId>(rng.below(1000));
            if (reg.contains(id)) continue;
            reg.insert(id, {testing::random_vector(rng, dim), Provenance::Empirical});
            ids.push_back(id);
        }
        std::vector<FeatureVector> features;
        for (int q = 0; q < 10; ++q) features.push_back(testing::random_vector(rng, dim));

        // Exact ties: a duplicated prototype under another id, queried head-on.
        const ClassId src = ids[rng.below(ids.size())];
        ClassId dup = 0;
        do dup = static_cast<ClassId>(rng.below(1000));
        while (reg.contains(dup));
        reg.insert(dup, {reg.at(src).prototype, Provenance::Empirical});
        features[0] = reg.at(src).prototype;
        features[1] = reg.at(dup).prototype;
        ties += 2;

        const auto preds = predict_batch(features, reg, 4);
        for (std::size_t q = 0; q < features.size(); ++q) {
            std::optional<ClassId> best;
            double best_score = -INFINITY;
            for (const auto& [id, entry] : reg) {
                const double s = cosine_similarity(features[q], entry.prototype);
                if (s > best_score) best = id, best_score = s;
            }
            c.expect(preds[q] == *best, "mismatch at registry " + std::to_string(r) + " sample " + std::to_string(q));
            if (q < 2) c.expect(preds[q] == std::min(src, dup), "tie not resolved to the lowest id");
            ++instances;
        }
    }
    return finish(c, std::to_string(instances) + " instances agree with the max-scan oracle, including " +
                         std::to_string(ties) + " exact ties");
}

// 5 ------------------------------------------------------------------------

struct OracleRates {
    std::optional<double> fnr, fpr, tbr, tnr, avg, base, nw;
};

std::optional<double> pct(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

// Independent brute force: every quantity by direct enumeration.
OracleRates brute_force(const std::vector<ClassId>& preds, const std::vector<ClassId>& labels,
                        const std::set<ClassId>& base, const std::map<ClassId, FeatureVector>& protos,
                        std::size_t m, double fraction) {
    auto similar = [&](ClassId of, bool want_base, std::size_t k) {
        std::vector<std::pair<double, ClassId>> cand;
        for (const auto& [id, p] : protos)
            if (base.contains(id) == want_base) cand.push_back({-cosine_similarity(protos.at(of), p), id});
        std::sort(cand.begin(), cand.end());
        std::set<ClassId> out;
        for (std::size_t i = 0; i < std::min(k, cand.size()); ++i) out.insert(cand[i].second);
        return out;
    };
    std::size_t n_new_classes = 0;
    for (const auto& [id, p] : protos) n_new_classes += !base.contains(id);
    const auto k_new = static_cast<std::size_t>(std::floor(fraction * n_new_classes));

    std::size_t tp = 0, fn = 0, fp = 0, tn = 0, correct = 0, bc = 0, bt = 0, nc = 0, nt = 0;
    std::size_t mis_new = 0, into_base = 0, mis_base = 0, into_new = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool tb = base.contains(labels[i]), pb = base.contains(preds[i]), ok = preds[i] == labels[i];
        tp += tb && pb, fn += tb && !pb, fp += !tb && pb, tn += !tb && !pb;
        correct += ok;
        (tb ? bt : nt)++;
        (tb ? bc : nc) += ok;
        if (ok) continue;
        if (tb) {
            ++mis_base;
            into_new += similar(labels[i], false, k_new).contains(preds[i]);
        } else {
            ++mis_new;
            into_base += similar(labels[i], true, m).contains(preds[i]);
        }
    }
    return {pct(fn, tp + fn), pct(fp, fp + tn), pct(into_base, mis_new), pct(into_new, mis_base),
            pct(correct, labels.size()), pct(bc, bt), pct(nc, nt)};
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= 1e-9;
}

Outcome metrics_oracles() {
    Checker c;

    // Hand oracle: 3 base + 2 new classes, 12 samples, worked out by hand.
    {
        PrototypeRegistry reg;
        const std::vector<std::pair<ClassId, FeatureVector>> pts{
            {0, {1, 0}}, {1, {0, 1}}, {2, {-1, 0}}, {3, {1, 0.2}}, {4, {-0.2, 1}}};
        for (const auto& [id, p] : pts) reg.insert(id, {p, Provenance::Empirical});
        const std::vector<ClassId> base{0, 1, 2};
        const std::vector<ClassId> labels{0, 0, 0, 1, 1, 2, 2, 3, 3, 3, 4, 4};
        const std::vector<ClassId> preds{0, 3, 4, 1, 4, 0, 4, 3, 0, 1, 1, 3};
        const auto sim = tbr_tnr(preds, labels, reg, base, {1, 0.5});
        const auto rates = fnr_fpr(preds, labels, base);
        const auto acc = accuracy_decomposition(preds, labels, base);
        c.expect(same(sim.tbr, 50.0) && same(sim.tnr, 60.0), "toy TBR/TNR");
        c.expect(same(rates.fnr, 400.0 / 7.0) && same(rates.fpr, 60.0), "toy FNR/FPR");
        c.expect(same(acc.avg_acc, 25.0) && same(acc.base_acc, 200.0 / 7.0) && same(acc.new_acc, 20.0),
                 "toy accuracy");
        const std::vector<ClassId> after = labels;
        const auto ch = prediction_change(preds, after, labels, base);
        c.expect(ch[ChangeCategory::Unchanged].count == 3 && ch[ChangeCategory::WrongToRight].count == 9 &&
                     ch[ChangeCategory::WrongToRight].base_count == 5,
                 "toy change categories");
    }
    // Hand oracle: TP 9, FN 1, FP 3, TN 2.
    {
        std::vector<ClassId> labels, preds;
        for (auto [l, p, n] : {std::tuple{0u, 0u, 9}, {0u, 1u, 1}, {1u, 0u, 3}, {1u, 1u, 2}})
            for (int i = 0; i < n; ++i) labels.push_back(l), preds.push_back(p);
        const std::vector<ClassId> base{0};
        const auto r = fnr_fpr(preds, labels, base);
        c.expect(same(r.fnr, 10.0) && same(r.fpr, 60.0), "TP9/FN1/FP3/TN2 rates");
    }

    // Brute-force oracle over random toy fixtures.
    Rng rng(5);
    std::size_t fixtures = 0;
    for (int t = 0; t < 2000; ++t) {
        const std::size_t nclass = 2 + rng.below(4);
        const std::size_t nbase = 1 + rng.below(nclass - 1);
        const std::size_t nsamples = 1 + rng.below(20);
        const std::size_t m = 1 + rng.below(4);
        const double fraction = 0.1 + 0.9 * rng.uniform();
        PrototypeRegistry reg;
        std::map<ClassId, FeatureVector> protos;
        std::set<ClassId> base_set;
        std::vector<ClassId> base;
        for (ClassId id = 0; id < nclass; ++id) {
            const auto p = testing::random_vector(rng, 3);
            reg.insert(id, {p, Provenance::Empirical});
            protos.emplace(id, p);
            if (id < nbase) base_set.insert(id), base.push_back(id);
        }
        std::vector<ClassId> labels(nsamples), preds(nsamples), after(nsamples);
        for (std::size_t i = 0; i < nsamples; ++i) {
            labels[i] = static_cast<ClassId>(rng.below(nclass));
            preds[i] = static_cast<ClassId>(rng.below(nclass));
            after[i] = static_cast<ClassId>(rng.below(nclass));
        }
        const auto o = brute_force(preds, labels, base_set, protos, m, fraction);
        const auto sim = tbr_tnr(preds, labels, reg, base, {m, fraction});
        const auto rates = fnr_fpr(preds, labels, base);
        const auto acc = accuracy_decomposition(preds, labels, base);
        const std::string where = "fixture " + std::to_string(t);
        c.expect(same(sim.tbr, o.tbr) && same(sim.tnr, o.tnr), where + " TBR/TNR");
        c.expect(same(rates.fnr, o.fnr) && same(rates.fpr, o.fpr), where + " FNR/FPR");
        c.expect(same(acc.avg_acc, o.avg) && same(acc.base_acc, o.base) && same(acc.new_acc, o.nw),
                 where + " accuracy");

        const auto ch = prediction_change(preds, after, labels, base);
        std::array<std::size_t, 4> counts{};
        for (std::size_t i = 0; i < nsamples; ++i) {
            const int k = preds[i] == after[i] ? 0 : after[i] == labels[i] ? 1 : preds[i] == labels[i] ? 2 : 3;
            ++counts[k];
        }
        for (std::size_t k = 0; k < 4; ++k)
            c.expect(ch.categories[k].count == counts[k], where + " change category " + std::to_string(k));
        ++fixtures;
    }

    // Partition property on randomized 100-sample inputs.
    for (int t = 0; t < 100; ++t) {
        std::vector<ClassId> b(100), a(100), l(100);
        for (std::size_t i = 0; i < 100; ++i) {
            l[i] = static_cast<ClassId>(rng.below(5));
            b[i] = static_cast<ClassId>(rng.below(5));
            a[i] = static_cast<ClassId>(rng.below(5));
        }
        const std::vector<ClassId> base{0, 1};
        const auto ch = prediction_change(b, a, l, base);
        std::size_t sum = 0;
        for (const auto& cat : ch.categories) sum += cat.count;
        c.expect(sum == 100, "partition violated");
    }
    return finish(c, "2 hand fixtures, " + std::to_string(fixtures) +
                         " brute-force fixtures, 100 randomized partitions");
}

// 6 and 7 ------------------------------------------------------------------

struct SeedResult {
    double err_proto = 0, err_teen = 0;
    double nacc_proto = 0, nacc_teen = 0;
    bool wr_majority_new = false, rw_majority_base = false;
    bool noise_ok = false;
};

std::vector<SeedResult> synthetic_sweep() {
    static std::vector<SeedResult> cache;
    if (!cache.empty()) return cache;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthSpec spec;
        spec.seed = seed;
        const auto synth = gen_synthetic(spec);
        SeedResult r;
        r.noise_ok = spec.mixture_noise <= 0.2 * synth.truth.min_base_separation();

        CalibParams proto;
        proto.strategy = Strategy::ProtoNet;
        const auto a = run_fscil(synth.dataset, proto);
        const auto b = run_fscil(synth.dataset, CalibParams{});
        const auto& fa = a.sessions.back();
        const auto& fb = b.sessions.back();

        auto mean_new_error = [&](const PrototypeRegistry& reg) {
            double sum = 0;
            std::size_t n = 0;
            for (const auto& [id, e] : prototype_error(reg, synth.truth)) {
                if (synth.truth.classes.at(id).session == 0) continue;
                sum += e, ++n;
            }
            return sum / static_cast<double>(n);
        };
        r.err_proto = mean_new_error(fa.registry_snapshot);
        r.err_teen = mean_new_error(fb.registry_snapshot);
        r.nacc_proto = *fa.metrics.new_acc;
        r.nacc_teen = *fb.metrics.new_acc;

        const auto ch = prediction_change(fa.predictions, fb.predictions, fa.true_labels,
                                          synth.dataset.layout().base_classes());
        const auto& wr = ch[ChangeCategory::WrongToRight];
        const auto& rw = ch[ChangeCategory::RightToWrong];
        r.wr_majority_new = wr.count > 0 && wr.new_count * 2 > wr.count;
        r.rw_majority_base = rw.count > 0 && rw.base_count * 2 > rw.count;
        cache.push_back(r);
    }
    return cache;
}

Outcome synthetic_benefit() {
    const auto results = synthetic_sweep();
    Checker c;
    double ep = 0, et = 0, np = 0, nt = 0;
    int wins = 0;
    bool noise_ok = true;
    for (const auto& r : results) {
        ep += r.err_proto, et += r.err_teen, np += r.nacc_proto, nt += r.nacc_teen;
        wins += r.nacc_teen > r.nacc_proto;
        noise_ok &= r.noise_ok;
    }
    const double n = static_cast<double>(results.size());
    c.expect(noise_ok, "mixture noise exceeds 0.2 x minimum base separation");
    c.expect(et < ep, "TEEN prototype error " + fmt(et / n) + " not below empirical " + fmt(ep / n));
    c.expect(nt > np, "mean NAcc teen " + fmt(nt / n, 2) + " not above protonet " + fmt(np / n, 2));
    c.expect(wins >= 80, "teen wins NAcc in only " + std::to_string(wins) + " seeds");
    return finish(c, "new-class prototype error " + fmt(ep / n) + " -> " + fmt(et / n) + ", final NAcc " +
                         fmt(np / n, 2) + " -> " + fmt(nt / n, 2) + ", teen ahead in " + std::to_string(wins) +
                         "/100 seeds");
}

Outcome diagnostic_direction() {
    const auto results = synthetic_sweep();
    Checker c;
    int wr = 0, rw = 0;
    for (const auto& r : results) wr += r.wr_majority_new, rw += r.rw_majority_base;
    c.expect(wr >= 80, "W->R majority-new in only " + std::to_string(wr) + " seeds");
    c.expect(rw >= 80, "R->W majority-base in only " + std::to_string(rw) + " seeds");
    return finish(c, "W->R majority-new in " + std::to_string(wr) + "/100 seeds, R->W majority-base in " +
                         std::to_string(rw) + "/100 seeds");
}

// 8 ------------------------------------------------------------------------

std::vector<EmbeddingRecord> random_layout_records(Rng& rng) {
    const std::size_t dim = 2 + rng.below(4);
    const std::size_t base = 2 + rng.below(5);
    const std::size_t sessions = 1 + rng.below(4);
    const std::size_t ways = 1 + rng.below(3);
    const std::size_t shots = 1 + rng.below(3);
    // Class ids are shuffled so sessions do not own contiguous ranges.
    const std::size_t total = base + sessions * ways;
    auto ids = rng.sample_without_replacement(total * 3, total);
    std::vector<EmbeddingRecord> rs;
    std::size_t next = 0;
    auto add = [&](SessionId s, std::size_t train) {
        const auto label = static_cast<ClassId>(ids[next++]);
        const auto mean = testing::random_vector(rng, dim, 3.0);
        for (std::size_t i = 0; i < train + 1 + rng.below(3); ++i) {
            std::vector<double> v(mean.values().begin(), mean.values().end());
            for (auto& x : v) x += rng.normal();
            rs.push_back({i < train ? Split::Train : Split::Test, s, label, FeatureVector(std::move(v))});
        }
    };
    for (std::size_t b = 0; b < base; ++b) add(0, 1 + rng.below(4));
    for (std::size_t s = 1; s <= sessions; ++s)
        for (std::size_t w = 0; w < ways; ++w) add(static_cast<SessionId>(s), shots);
    // Interleave records so nothing relies on file order.
    const auto order = rng.sample_without_replacement(rs.size(), rs.size());
    std::vector<EmbeddingRecord> shuffled;
    for (std::size_t i : order) shuffled.push_back(rs[i]);
    return shuffled;
}

bool rejects_with(const std::vector<EmbeddingRecord>& rs, const std::string& prefix) {
    try {
        Dataset::from_records(rs);
    } catch (const Error& e) {
        return e.kind() == ErrorKind::Validation && std::string(e.what()).rfind(prefix, 0) == 0;
    }
    return false;
}

Outcome protocol_invariants() {
    Checker c;
    Rng rng(31337);
    std::size_t corruptions = 0;
    for (int t = 0; t < 500; ++t) {
        const auto rs = random_layout_records(rng);
        const auto ds = Dataset::from_records(rs);
        const auto& l = ds.layout();
        const std::string where = "layout " + std::to_string(t);

        std::set<ClassId> all;
        std::size_t sizes = 0;
        for (const auto& space : l.label_spaces) all.insert(space.begin(), space.end()), sizes += space.size();
        c.expect(all.size() == sizes, where + " label spaces overlap");

        CalibParams params;
        params.strategy = t % 3 == 0 ? Strategy::ProtoNet : t % 3 == 1 ? Strategy::Teen : Strategy::SimTeen;
        const auto run = run_fscil(ds, params, RunOptions{1 + rng.below(4), {}});
        std::size_t prev = 0;
        for (const auto& s : run.sessions) {
            std::set<ClassId> test_labels(s.true_labels.begin(), s.true_labels.end());
            const auto cum = l.cumulative_classes(s.session);
            c.expect(std::vector<ClassId>(test_labels.begin(), test_labels.end()) == cum,
                     where + " cumulative test space");
            c.expect(s.registry_snapshot.classes() == cum, where + " registry coverage");
            c.expect(s.registry_snapshot.size() == prev + l.ways(s.session), where + " registry growth");
            prev = s.registry_snapshot.size();
            c.expect(classify_session(ds, s, 1) == s.predictions, where + " snapshot isolation");
            for (ClassId id : l.base_classes())
                c.expect(s.registry_snapshot.at(id).provenance == Provenance::Empirical, where + " base provenance");
        }
        if (l.session_count() > 1) {
            // Overlap: one record of an incremental class relabelled into another session.
            const ClassId victim = l.label_spaces[1].front();
            auto overlap = rs;
            for (auto& r : overlap) {
                if (r.label == victim && r.split == Split::Test) {
                    r.session = 0;
                    break;
                }
            }
            c.expect(rejects_with(overlap, "label space overlap"), where + " overlap accepted");

            // Missing shots: every train record of an incremental class dropped.
            auto missing = rs;
            std::erase_if(missing, [&](const EmbeddingRecord& r) { return r.label == victim && r.split == Split::Train; });
            c.expect(rejects_with(missing, "missing shots"), where + " missing shots accepted");
            corruptions += 2;

            if (l.ways(1) > 1 && l.shots[1] > 1) {
                auto short_one = rs;
                auto it = std::find_if(short_one.begin(), short_one.end(),
                                       [&](const EmbeddingRecord& r) { return r.label == victim && r.split == Split::Train; });
                short_one.erase(it);
                c.expect(rejects_with(short_one, "shot count mismatch"), where + " shot mismatch accepted");
                ++corruptions;
            }
        }
    }
    return finish(c, "500 layouts, " + std::to_string(corruptions) + " corruptions rejected");
}

// 9 ------------------------------------------------------------------------

int sh(const std::string& cmd) {
    const int status = std::system((cmd + " 2>/dev/null").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    Checker c;
    testing::TempDir dir;
    const std::string cli = "'" + std::string(PROTOCALIB_CLI) + "'";
    const auto p = [&](const std::string& name) { return (dir / name).string(); };

    c.expect(sh(cli + " gen-synthetic --seed 9 --new-classes 8 --sessions 4 -o " + p("d.csv") + " --truth " +
                p("t.json")) == 0,
             "gen-synthetic failed");
    c.expect(sh(cli + " gen-synthetic --seed 9 --new-classes 8 --sessions 4 -o " + p("d2.csv") + " --truth " +
                p("t2.json")) == 0,
             "gen-synthetic failed");
    c.expect(testing::slurp(p("d.csv")) == testing::slurp(p("d2.csv")), "synthetic CSV differs between runs");
    c.expect(testing::slurp(p("t.json")) == testing::slurp(p("t2.json")), "ground truth differs between runs");

    std::size_t files = 0;
    const std::vector<std::pair<std::string, std::string>> runs{
        {"run-fscil", "--strategy teen --format csv --predictions {out}.pred"},
        {"run-fscil", "--strategy simteen --simteen-k 2 --format json"},
        {"run-fsl", "--episodes 200 --seed 3 --format csv"},
        {"run-fsl", "--episodes 200 --seed 3 --shots 1 --format json"},
    };
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::vector<std::string> outputs;
        for (const char* label : {"t1a", "t1b", "t8"}) {
            const std::string threads = label[1] == '1' ? "1" : "8";
            const std::string out = p("run" + std::to_string(i) + "_" + label);
            std::string extra = runs[i].second;
            if (const auto pos = extra.find("{out}"); pos != std::string::npos) extra.replace(pos, 5, out);
            c.expect(sh("PROTO_CALIB_THREADS=" + threads + " " + cli + " " + runs[i].first + " -e " + p("d.csv") +
                        " -o " + out + " " + extra) == 0,
                     runs[i].first + " failed");
            outputs.push_back(out);
        }
        for (std::size_t k = 1; k < outputs.size(); ++k) {
            c.expect(!testing::slurp(outputs[0]).empty() && testing::slurp(outputs[0]) == testing::slurp(outputs[k]),
                     "report differs: " + runs[i].first + " " + runs[i].second);
            if (i == 0)
                c.expect(testing::slurp(outputs[0] + ".pred") == testing::slurp(outputs[k] + ".pred"),
                         "prediction file differs");
        }
        files += outputs.size();
    }
    return finish(c, std::to_string(files) + " report files byte-identical across repeat runs and thread caps 1 and 8");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "performance drop reproduces reference accuracy rows", 1, reference_pd},
        {2, "harmonic mean consistent with reference HMean/NAcc pairs", 1, reference_hmean},
        {3, "calibration exactness", 5, calibration_exactness},
        {4, "classifier matches exhaustive max-scan", 5, classifier_oracle},
        {5, "metrics match hand and brute-force oracles", 5, metrics_oracles},
        {6, "calibration benefit on synthetic data", 60, synthetic_benefit},
        {7, "prediction-change direction on synthetic data", 60, diagnostic_direction},
        {8, "protocol invariants and corruption rejection", 10, protocol_invariants},
        {9, "byte-identical reports across runs and thread caps", 120, determinism},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs > cr.budget_s) {
            o.pass = false;
            o.detail += "; took " + fmt(secs, 2) + " s, budget " + fmt(cr.budget_s, 0) + " s";
        }
        failed += !o.pass;
        std::printf("[%s] criterion %d: %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
