#include "protocalib/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "protocalib/error.hpp"

namespace protocalib {

using nlohmann::json;

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json params_json(const CalibParams& p) {
    json j{{"strategy", to_string(p.strategy)}, {"alpha", p.alpha}, {"tau", p.tau}};
    if (p.strategy == Strategy::SimTeen) {
        j["simteen_k"] = p.simteen_k;
        j["simteen_combine"] = p.simteen_combine == SimTeenCombine::Sum ? "sum" : "mean";
    }
    return j;
}

json metrics_json(const MetricBundle& m) {
    return {{"avg_acc", m.avg_acc}, {"base_acc", value(m.base_acc)}, {"new_acc", value(m.new_acc)},
            {"hmean", value(m.hmean)}, {"fnr", value(m.fnr)},          {"fpr", value(m.fpr)},
            {"tbr", value(m.tbr)},     {"tnr", value(m.tnr)}};
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "json") return ReportFormat::Json;
    fail(ErrorKind::InvalidArgument, "unknown report format '" + std::string(text) + "'");
}

std::string format_fscil_report(const FscilRun& run, ReportFormat format) {
    if (run.sessions.empty()) fail(ErrorKind::InvalidArgument, "empty FSCIL run");
    const double pd = run.performance_drop();
    if (format == ReportFormat::Json) {
        json sessions = json::array();
        for (const auto& s : run.sessions) {
            json row = metrics_json(s.metrics);
            row["session"] = s.session;
            row["test_samples"] = s.true_labels.size();
            sessions.push_back(std::move(row));
        }
        json doc{{"kind", "fscil"}, {"params", params_json(run.params)}, {"sessions", sessions}, {"pd", pd}};
        return doc.dump(2) + "\n";
    }
    std::string out = "session,avg_acc,base_acc,new_acc,hmean,fnr,fpr,tbr,tnr,pd\n";
    for (const auto& s : run.sessions) {
        const auto& m = s.metrics;
        out += std::to_string(s.session) + ',' + format_double(m.avg_acc) + ',' + cell(m.base_acc) + ',' +
               cell(m.new_acc) + ',' + cell(m.hmean) + ',' + cell(m.fnr) + ',' + cell(m.fpr) + ',' + cell(m.tbr) +
               ',' + cell(m.tnr) + ",\n";
    }
    out += "summary,,,,,,,,," + format_double(pd) + "\n";
    return out;
}

std::string format_fsl_report(const FslRun& run, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json doc{{"kind", "fsl"},
                 {"params", params_json(run.params)},
                 {"ways", run.spec.ways},
                 {"shots", run.spec.shots},
                 {"queries", run.spec.queries},
                 {"seed", run.spec.seed},
                 {"episodes", run.accuracies},
                 {"mean", run.mean_accuracy},
                 {"ci95_half_width", value(run.ci95_half_width)}};
        return doc.dump(2) + "\n";
    }
    std::string out = "episode,accuracy\n";
    for (std::size_t e = 0; e < run.accuracies.size(); ++e) {
        out += std::to_string(e) + ',' + format_double(run.accuracies[e]) + '\n';
    }
    out += "mean," + format_double(run.mean_accuracy) + '\n';
    out += "ci95," + cell(run.ci95_half_width) + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Prediction files

std::vector<PredictionRow> prediction_rows(const SessionResult& session) {
    std::vector<PredictionRow> rows(session.predictions.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {i, session.true_labels[i], session.predictions[i]};
    return rows;
}

std::string format_predictions(std::span<const PredictionRow> rows) {
    std::string out = "index,true_label,pred_label\n";
    for (const auto& r : rows) {
        out += std::to_string(r.index) + ',' + std::to_string(r.true_label) + ',' + std::to_string(r.pred_label) + '\n';
    }
    return out;
}

std::vector<PredictionRow> parse_predictions(std::string_view text) {
    std::vector<PredictionRow> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != "index,true_label,pred_label") {
                fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected header 'index,true_label,pred_label'");
            }
            header_seen = true;
            continue;
        }
        std::uint64_t fields[3] = {0, 0, 0};
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int f = 0; f < 3; ++f) {
            const auto [next, ec] = std::from_chars(p, end, fields[f]);
            const bool last = f == 2;
            if (ec != std::errc{} || (last ? next != end : (next == end || *next != ','))) {
                fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected three non-negative integers");
            }
            p = next + 1;
        }
        if (fields[1] > UINT32_MAX || fields[2] > UINT32_MAX) {
            fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": class id out of range");
        }
        rows.push_back({fields[0], static_cast<ClassId>(fields[1]), static_cast<ClassId>(fields[2])});
    }
    if (!header_seen) fail(ErrorKind::Parse, "line 1: empty prediction file");
    return rows;
}

std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open prediction file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_predictions(buffer.str());
}

// ---------------------------------------------------------------------------
// Analysis

namespace {

RunDiagnostics diagnose(std::span<const ClassId> preds, std::span<const ClassId> labels,
                        std::span<const ClassId> base_ids, const PrototypeRegistry& registry,
                        const SimilarityOptions& options) {
    return {accuracy_decomposition(preds, labels, base_ids), fnr_fpr(preds, labels, base_ids),
            tbr_tnr(preds, labels, registry, base_ids, options)};
}

}  // namespace

AnalysisReport analyze(const Dataset& dataset, std::span<const PredictionRow> before,
                       std::span<const PredictionRow> after, const SimilarityOptions& options) {
    const std::size_t n = std::min(before.size(), after.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (before[i].index != after[i].index || before[i].true_label != after[i].true_label) {
            fail(ErrorKind::Validation, "misaligned prediction files at index " + std::to_string(i));
        }
    }
    if (before.size() != after.size()) {
        fail(ErrorKind::Validation, "misaligned prediction files at index " + std::to_string(n) + " (row counts " +
                                        std::to_string(before.size()) + " and " + std::to_string(after.size()) + ")");
    }
    if (before.empty()) fail(ErrorKind::Validation, "prediction files are empty");

    const auto& layout = dataset.layout();
    std::vector<ClassId> labels, pb, pa;
    SessionId session = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const auto owner = layout.session_of(before[i].true_label);
        if (!owner) fail(ErrorKind::Validation, "row " + std::to_string(i) + ": class " +
                                                    std::to_string(before[i].true_label) + " is not in the dataset");
        session = std::max(session, *owner);
        labels.push_back(before[i].true_label);
        pb.push_back(before[i].pred_label);
        pa.push_back(after[i].pred_label);
    }

    PrototypeRegistry registry;
    for (SessionId s = 0; s <= session; ++s) registry.merge(empirical_prototypes(dataset, s));
    const auto& base_ids = layout.base_classes();

    AnalysisReport report;
    report.session = session;
    report.samples = labels.size();
    report.change = prediction_change(pb, pa, labels, base_ids);
    report.before = diagnose(pb, labels, base_ids, registry, options);
    report.after = diagnose(pa, labels, base_ids, registry, options);
    return report;
}

std::string format_analysis_report(const AnalysisReport& report, ReportFormat format, bool collapse_ww) {
    struct Row {
        std::string name;
        CategoryStats stats;
    };
    std::vector<Row> rows;
    for (ChangeCategory c : kChangeCategories) {
        if (collapse_ww && c == ChangeCategory::WrongToWrong) continue;
        rows.push_back({std::string(to_string(c)), report.change[c]});
    }
    if (collapse_ww) {
        CategoryStats changed;
        for (ChangeCategory c : {ChangeCategory::WrongToRight, ChangeCategory::RightToWrong, ChangeCategory::WrongToWrong}) {
            changed.count += report.change[c].count;
            changed.base_count += report.change[c].base_count;
            changed.new_count += report.change[c].new_count;
        }
        if (changed.count > 0) {
            changed.base_pct = 100.0 * static_cast<double>(changed.base_count) / static_cast<double>(changed.count);
            changed.new_pct = 100.0 * static_cast<double>(changed.new_count) / static_cast<double>(changed.count);
        }
        rows.push_back({"changed", changed});
    }

    auto run_fields = [](const RunDiagnostics& d) {
        return std::vector<std::pair<std::string, std::optional<double>>>{
            {"avg_acc", d.accuracy.avg_acc}, {"base_acc", d.accuracy.base_acc}, {"new_acc", d.accuracy.new_acc},
            {"fnr", d.rates.fnr},            {"fpr", d.rates.fpr},              {"tbr", d.similarity.tbr},
            {"tnr", d.similarity.tnr}};
    };

    if (format == ReportFormat::Json) {
        json change = json::object();
        for (const auto& r : rows) {
            change[r.name] = {{"count", r.stats.count},
                              {"base_count", r.stats.base_count},
                              {"new_count", r.stats.new_count},
                              {"base_pct", value(r.stats.base_pct)},
                              {"new_pct", value(r.stats.new_pct)}};
        }
        json doc{{"kind", "analysis"}, {"session", report.session}, {"samples", report.samples}, {"change", change}};
        for (const auto& [side, diag] : {std::pair{"before", &report.before}, std::pair{"after", &report.after}}) {
            json j = json::object();
            for (const auto& [k, v] : run_fields(*diag)) j[k] = value(v);
            doc[side] = std::move(j);
        }
        return doc.dump(2) + "\n";
    }

    std::string out = "metric,value\n";
    out += "session," + std::to_string(report.session) + '\n';
    out += "samples," + std::to_string(report.samples) + '\n';
    for (const auto& r : rows) {
        out += r.name + ".count," + std::to_string(r.stats.count) + '\n';
        out += r.name + ".base_count," + std::to_string(r.stats.base_count) + '\n';
        out += r.name + ".new_count," + std::to_string(r.stats.new_count) + '\n';
        out += r.name + ".base_pct," + cell(r.stats.base_pct) + '\n';
        out += r.name + ".new_pct," + cell(r.stats.new_pct) + '\n';
    }
    for (const auto& [side, diag] : {std::pair{"before", &report.before}, std::pair{"after", &report.after}}) {
        for (const auto& [k, v] : run_fields(*diag)) out += std::string(side) + '.' + k + ',' + cell(v) + '\n';
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out << contents;
    out.flush();
    if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace protocalib
