#include "protocalib/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "protocalib/error.hpp"

namespace protocalib {

namespace {

void check_finite(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::InvalidArgument, "non-finite feature value at coordinate " + std::to_string(i));
        }
    }
}

std::string class_name(ClassId label) { return "class " + std::to_string(label); }
std::string session_name(SessionId s) { return "session " + std::to_string(s); }

}  // namespace

FeatureVector::FeatureVector(std::vector<double> values) : values_(std::move(values)) { check_finite(values_); }

FeatureVector::FeatureVector(std::initializer_list<double> values) : values_(values) { check_finite(values_); }

double FeatureVector::norm() const noexcept { return std::sqrt(dot(values_, values_)); }

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
    if (a.dim() != b.dim()) fail(ErrorKind::InvalidArgument, "dimension mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) fail(ErrorKind::Numeric, "undefined cosine for zero vector");
    return std::clamp(dot(a.values(), b.values()) / (na * nb), -1.0, 1.0);
}

std::string_view to_string(Split split) noexcept { return split == Split::Train ? "train" : "test"; }

// ---------------------------------------------------------------------------
// Layout

std::vector<ClassId> SessionLayout::cumulative_classes(SessionId session) const {
    std::vector<ClassId> out;
    for (SessionId s = 0; s <= session && s < label_spaces.size(); ++s) {
        out.insert(out.end(), label_spaces[s].begin(), label_spaces[s].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<SessionId> SessionLayout::session_of(ClassId label) const {
    for (SessionId s = 0; s < label_spaces.size(); ++s) {
        if (std::binary_search(label_spaces[s].begin(), label_spaces[s].end(), label)) return s;
    }
    return std::nullopt;
}

SessionLayout infer_layout(std::span<const EmbeddingRecord> records) {
    if (records.empty()) fail(ErrorKind::Validation, "dataset has no records");

    SessionLayout layout;
    layout.dim = records.front().feature.dim();
    if (layout.dim == 0) fail(ErrorKind::Validation, "feature dimension must be at least 1");

    std::map<ClassId, SessionId> owner;
    std::map<ClassId, std::size_t> train_count;
    SessionId max_session = 0;
    for (const auto& r : records) {
        if (r.feature.dim() != layout.dim) {
            fail(ErrorKind::Validation, "dimension mismatch: " + class_name(r.label) + " has a record of dimension " +
                                            std::to_string(r.feature.dim()) + ", expected " +
                                            std::to_string(layout.dim));
        }
        auto [it, inserted] = owner.emplace(r.label, r.session);
        if (!inserted && it->second != r.session) {
            fail(ErrorKind::Validation, "label space overlap: " + class_name(r.label) + " appears in " +
                                            session_name(it->second) + " and " + session_name(r.session));
        }
        if (r.split == Split::Train) ++train_count[r.label];
        max_session = std::max(max_session, r.session);
    }

    layout.label_spaces.resize(std::size_t{max_session} + 1);
    for (const auto& [label, session] : owner) layout.label_spaces[session].push_back(label);

    layout.shots.assign(layout.label_spaces.size(), 0);
    for (SessionId s = 0; s < layout.label_spaces.size(); ++s) {
        const auto& space = layout.label_spaces[s];
        if (space.empty()) fail(ErrorKind::Validation, session_name(s) + " has no classes");
        for (ClassId label : space) {
            if (train_count[label] == 0) {
                fail(ErrorKind::Validation, "missing shots: " + class_name(label) + " in " + session_name(s) +
                                                " has no train records");
            }
        }
        if (s == 0) continue;
        const std::size_t shots = train_count[space.front()];
        for (ClassId label : space) {
            if (train_count[label] != shots) {
                fail(ErrorKind::Validation, "shot count mismatch in " + session_name(s) + ": " + class_name(label) +
                                                " has " + std::to_string(train_count[label]) +
                                                " train records, expected " + std::to_string(shots));
            }
        }
        layout.shots[s] = shots;
    }
    return layout;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::from_records(std::vector<EmbeddingRecord> records) {
    Dataset ds;
    ds.layout_ = infer_layout(records);
    ds.records_ = std::move(records);
    return ds;
}

std::vector<std::size_t> Dataset::train_indices(ClassId label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].split == Split::Train && records_[i].label == label) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + what);
}

std::uint32_t parse_id(std::string_view field, std::size_t line_no, const char* column) {
    std::uint32_t value = 0;
    if (!field.empty() && field.front() == '-') parse_error(line_no, std::string("negative ") + column);
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        parse_error(line_no, std::string("invalid ") + column + " '" + std::string(field) + "'");
    }
    return value;
}

double parse_feature(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        parse_error(line_no, "invalid feature value '" + std::string(field) + "'");
    }
    if (!std::isfinite(value)) parse_error(line_no, "non-finite feature value '" + std::string(field) + "'");
    return value;
}

}  // namespace

Dataset parse_dataset(std::string_view text) {
    std::vector<EmbeddingRecord> records;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    bool header_seen = false;

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        const auto fields = split_fields(line);
        if (!header_seen) {
            if (fields.size() < 4 || fields[0] != "split" || fields[1] != "session" || fields[2] != "label") {
                parse_error(line_no, "expected header 'split,session,label,f0,...'");
            }
            dim = fields.size() - 3;
            for (std::size_t i = 0; i < dim; ++i) {
                if (fields[3 + i] != "f" + std::to_string(i)) {
                    parse_error(line_no, "expected column 'f" + std::to_string(i) + "'");
                }
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != dim + 3) {
            parse_error(line_no, "expected " + std::to_string(dim + 3) + " columns, found " +
                                     std::to_string(fields.size()));
        }
        EmbeddingRecord rec;
        if (fields[0] == "train") {
            rec.split = Split::Train;
        } else if (fields[0] == "test") {
            rec.split = Split::Test;
        } else {
            parse_error(line_no, "split must be 'train' or 'test'");
        }
        rec.session = parse_id(fields[1], line_no, "session");
        rec.label = parse_id(fields[2], line_no, "label");
        std::vector<double> values(dim);
        for (std::size_t i = 0; i < dim; ++i) values[i] = parse_feature(fields[3 + i], line_no);
        rec.feature = FeatureVector(std::move(values));
        records.push_back(std::move(rec));
    }
    if (!header_seen) fail(ErrorKind::Parse, "line 1: empty file, expected header");
    return Dataset::from_records(std::move(records));
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open embeddings file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_dataset(buffer.str());
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string format_dataset(const Dataset& dataset) {
    std::string out = "split,session,label";
    for (std::size_t i = 0; i < dataset.dim(); ++i) out += ",f" + std::to_string(i);
    out += '\n';
    for (const auto& r : dataset.records()) {
        out += to_string(r.split);
        out += ',' + std::to_string(r.session) + ',' + std::to_string(r.label);
        for (double v : r.feature.values()) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write embeddings file '" + path.string() + "'");
    out << format_dataset(dataset);
    if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Prototypes

void PrototypeRegistry::insert(ClassId label, PrototypeEntry entry) {
    if (entries_.empty()) {
        dim_ = entry.prototype.dim();
    } else if (entry.prototype.dim() != dim_) {
        fail(ErrorKind::InvalidArgument, "prototype dimension mismatch for " + class_name(label));
    }
    entries_.insert_or_assign(label, std::move(entry));
}

void PrototypeRegistry::merge(const PrototypeRegistry& other) {
    for (const auto& [label, entry] : other) insert(label, entry);
}

const PrototypeEntry& PrototypeRegistry::at(ClassId label) const {
    const auto it = entries_.find(label);
    if (it == entries_.end()) fail(ErrorKind::InvalidArgument, "unknown class id " + std::to_string(label));
    return it->second;
}

std::vector<ClassId> PrototypeRegistry::classes() const {
    std::vector<ClassId> out;
    out.reserve(entries_.size());
    for (const auto& kv : entries_) out.push_back(kv.first);
    return out;
}

FeatureVector compute_prototype(std::span<const FeatureVector> features) {
    if (features.empty()) fail(ErrorKind::InvalidArgument, "no samples for class");
    const std::size_t dim = features.front().dim();
    std::vector<double> sum(dim, 0.0);
    for (const auto& f : features) {
        if (f.dim() != dim) fail(ErrorKind::InvalidArgument, "dimension mismatch in prototype inputs");
        const auto v = f.values();
        for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
    }
    const double n = static_cast<double>(features.size());
    for (double& s : sum) s /= n;
    return FeatureVector(std::move(sum));
}

PrototypeRegistry empirical_prototypes(const Dataset& dataset, SessionId session) {
    const auto& layout = dataset.layout();
    if (session >= layout.session_count()) {
        fail(ErrorKind::InvalidArgument, session_name(session) + " out of range (T=" +
                                             std::to_string(layout.session_count()) + ")");
    }
    std::map<ClassId, std::vector<FeatureVector>> grouped;
    for (ClassId label : layout.label_spaces[session]) grouped[label];
    for (const auto& r : dataset.records()) {
        if (r.split != Split::Train) continue;
        auto it = grouped.find(r.label);
        if (it != grouped.end()) it->second.push_back(r.feature);
    }
    PrototypeRegistry registry;
    for (const auto& [label, features] : grouped) {
        if (features.empty()) fail(ErrorKind::Validation, "no samples for " + class_name(label));
        registry.insert(label, {compute_prototype(features), Provenance::Empirical});
    }
    return registry;
}

}  // namespace protocalib
