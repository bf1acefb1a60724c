#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "protocalib/core.hpp"
#include "protocalib/rng.hpp"

namespace testing {

using namespace protocalib;

inline FeatureVector random_vector(Rng& rng, std::size_t dim, double scale = 1.0) {
    std::vector<double> v(dim);
    for (auto& x : v) x = scale * rng.normal();
    return FeatureVector(std::move(v));
}

inline EmbeddingRecord rec(Split split, SessionId session, ClassId label, FeatureVector f) {
    return EmbeddingRecord{split, session, label, std::move(f)};
}

/// Small dataset: `base` classes in session 0 with `base_train` train rows,
/// then `sessions` sessions of `ways` classes with `shots` train rows each.
/// Every class gets `test` test rows.
inline Dataset make_dataset(Rng& rng, std::size_t dim, std::size_t base, std::size_t base_train, std::size_t sessions,
                            std::size_t ways, std::size_t shots, std::size_t test) {
    std::vector<EmbeddingRecord> records;
    ClassId next = 0;
    auto add_class = [&](SessionId s, std::size_t train) {
        const ClassId label = next++;
        const FeatureVector mean = random_vector(rng, dim, 3.0);
        auto sample = [&] {
            std::vector<double> v(mean.values().begin(), mean.values().end());
            for (auto& x : v) x += rng.normal();
            return FeatureVector(std::move(v));
        };
        for (std::size_t i = 0; i < train; ++i) records.push_back(rec(Split::Train, s, label, sample()));
        for (std::size_t i = 0; i < test; ++i) records.push_back(rec(Split::Test, s, label, sample()));
    };
    for (std::size_t b = 0; b < base; ++b) add_class(0, base_train);
    for (std::size_t s = 1; s <= sessions; ++s)
        for (std::size_t w = 0; w < ways; ++w) add_class(static_cast<SessionId>(s), shots);
    return Dataset::from_records(std::move(records));
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("protocalib_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace testing
