#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protocalib/metrics.hpp"
#include "protocalib/protocol.hpp"

namespace protocalib {

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(std::string_view text);

/// One row per session plus a summary row carrying the performance drop.
std::string format_fscil_report(const FscilRun& run, ReportFormat format);

/// Per-episode accuracies plus mean and 95% half-width.
std::string format_fsl_report(const FslRun& run, ReportFormat format);

/// Prediction file row: `index,true_label,pred_label`.
struct PredictionRow {
    std::size_t index = 0;
    ClassId true_label = 0;
    ClassId pred_label = 0;

    friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};

std::vector<PredictionRow> prediction_rows(const SessionResult& session);
std::string format_predictions(std::span<const PredictionRow> rows);
std::vector<PredictionRow> parse_predictions(std::string_view text);
std::vector<PredictionRow> load_predictions(const std::filesystem::path& path);

/// Diagnostics comparing two prediction runs over the same test samples.
struct RunDiagnostics {
    AccuracyBreakdown accuracy;
    BinaryRates rates;
    SimilarityRatios similarity;
};

struct AnalysisReport {
    SessionId session = 0;
    std::size_t samples = 0;
    ChangeAnalysis change;
    RunDiagnostics before;
    RunDiagnostics after;
};

/// Files must agree row by row on index and true label. The session is the
/// latest one owning any true label; similar-class sets come from the
/// empirical prototypes of every class seen up to it.
AnalysisReport analyze(const Dataset& dataset, std::span<const PredictionRow> before,
                       std::span<const PredictionRow> after, const SimilarityOptions& options = {});

/// With collapse_ww the WW row is replaced by a `changed` row totalling
/// WR, RW and WW.
std::string format_analysis_report(const AnalysisReport& report, ReportFormat format, bool collapse_ww = false);

void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace protocalib
