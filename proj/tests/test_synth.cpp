#include <doctest.h>

#include <cmath>

#include "protocalib/calib.hpp"
#include "protocalib/error.hpp"
#include "protocalib/synth.hpp"
#include "support.hpp"

using namespace protocalib;

TEST_CASE("default synthetic layout") {
    SynthSpec spec;
    const auto r = gen_synthetic(spec);
    const auto& l = r.dataset.layout();
    CHECK(l.session_count() == 2);
    CHECK(l.base_classes().size() == 10);
    CHECK(l.ways(1) == 5);
    CHECK(l.shots[1] == 5);
    CHECK(r.dataset.dim() == 16);
    CHECK(r.truth.classes.size() == 15);
    CHECK(r.truth.min_base_separation() >= 4.0 * spec.within_class_sigma);
    CHECK(r.dataset.records().size() == 10 * 250 + 5 * 55);
}

TEST_CASE("sessions split new classes evenly") {
    SynthSpec spec;
    spec.new_classes = 6;
    spec.sessions_after_base = 3;
    const auto r = gen_synthetic(spec);
    CHECK(r.dataset.layout().session_count() == 4);
    CHECK(r.dataset.layout().label_spaces[3] == std::vector<ClassId>{14, 15});
    spec.new_classes = 5;
    CHECK_THROWS_AS(gen_synthetic(spec), Error);
}

TEST_CASE("generation is a pure function of the spec") {
    SynthSpec spec;
    spec.seed = 77;
    const auto a = gen_synthetic(spec);
    const auto b = gen_synthetic(spec);
    CHECK(format_dataset(a.dataset) == format_dataset(b.dataset));
    CHECK(format_ground_truth(a.truth) == format_ground_truth(b.truth));
    spec.seed = 78;
    CHECK(format_dataset(gen_synthetic(spec).dataset) != format_dataset(a.dataset));
}

TEST_CASE("degenerate and noiseless mixtures") {
    SynthSpec spec;
    spec.mixture_noise = 0.0;
    spec.mixture_support = 1;
    auto r = gen_synthetic(spec);
    for (const auto& [id, t] : r.truth.classes) {
        if (t.session == 0) continue;
        REQUIRE(t.parents.size() == 1);
        CHECK(t.weights[0] == 1.0);
        CHECK(t.mean == r.truth.classes.at(t.parents[0]).mean);
    }

    spec.mixture_support = 3;
    r = gen_synthetic(spec);
    for (const auto& [id, t] : r.truth.classes) {
        if (t.session == 0) continue;
        double wsum = 0;
        for (double w : t.weights) {
            CHECK(w > 0);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0));
        for (std::size_t d = 0; d < spec.dim; ++d) {
            double lo = INFINITY, hi = -INFINITY, mix = 0;
            for (std::size_t j = 0; j < t.parents.size(); ++j) {
                const double v = r.truth.classes.at(t.parents[j]).mean[d];
                lo = std::min(lo, v), hi = std::max(hi, v);
                mix += t.weights[j] * v;
            }
            CHECK(t.mean[d] >= lo - 1e-12);
            CHECK(t.mean[d] <= hi + 1e-12);
            CHECK(t.mean[d] == doctest::Approx(mix).epsilon(1e-12));
        }
    }
}

TEST_CASE("spec validation") {
    SynthSpec spec;
    spec.mixture_support = 11;
    CHECK_THROWS_AS(gen_synthetic(spec), Error);
    spec = {};
    spec.within_class_sigma = 0;
    CHECK_THROWS_AS(gen_synthetic(spec), Error);
    spec = {};
    spec.base_classes = 40;
    spec.dim = 2;
    spec.base_spread = 0.5;
    CHECK_THROWS_WITH(gen_synthetic(spec), doctest::Contains("4 sigma"));
}

TEST_CASE("prototype error") {
    GroundTruth truth;
    truth.classes[0] = {0, {1, 2, 3}, {}, {}};
    truth.classes[1] = {1, {0, 0, 0}, {0}, {1.0}};
    PrototypeRegistry reg;
    reg.insert(0, {{1, 2, 3}, Provenance::Empirical});
    reg.insert(1, {{3, 0, 0}, Provenance::Empirical});
    const auto err = prototype_error(reg, truth);
    CHECK(err.at(0) == 0.0);
    CHECK(err.at(1) == 3.0);
    reg.insert(2, {{1, 1, 1}, Provenance::Empirical});
    CHECK_THROWS_AS(prototype_error(reg, truth), Error);
}

TEST_CASE("empirical prototype error matches the chi expectation") {
    SynthSpec spec;
    spec.base_train_per_class = 5;
    spec.test_per_class = 1;
    double total = 0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        spec.seed = seed;
        const auto r = gen_synthetic(spec);
        const auto err = prototype_error(empirical_prototypes(r.dataset, 1), r.truth);
        for (const auto& [id, e] : err) total += e, ++n;
    }
    const double d = 16, k = 5;
    const double expected = std::sqrt(2.0 / k) * std::exp(std::lgamma((d + 1) / 2) - std::lgamma(d / 2));
    CHECK(std::abs(total / n - expected) <= 0.2 * expected);
}

TEST_CASE("ground truth json round trip") {
    const auto r = gen_synthetic(SynthSpec{});
    const auto text = format_ground_truth(r.truth);
    const auto back = parse_ground_truth(text);
    REQUIRE(back.classes.size() == r.truth.classes.size());
    for (const auto& [id, t] : r.truth.classes) {
        const auto& b = back.classes.at(id);
        CHECK(b.session == t.session);
        CHECK(b.mean == t.mean);
        CHECK(b.parents == t.parents);
        CHECK(b.weights == t.weights);
    }
    CHECK_THROWS_AS(parse_ground_truth("{not json"), Error);
}
