#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <string>
#include <vector>

#include "cli_args.hpp"
#include "protocalib/protocalib.h"

using namespace protocalib::cli;

namespace {

void log(const char* level, const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::fprintf(stderr, "%s [%s] %s\n", stamp, level, msg.c_str());
}

struct Failure {
    pcal_status status;
};

void check(pcal_status status, const char* what) {
    if (status == PCAL_OK) return;
    log("error", std::string(what) + ": " + pcal_last_error());
    throw Failure{status};
}

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* ptr = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(ptr); }
};

using DatasetHandle = Handle<pcal_dataset, pcal_dataset_free>;

void load(const RunConfig& cfg, DatasetHandle& ds) {
    check(pcal_dataset_load(cfg.embeddings_path.c_str(), &ds.ptr), "loading embeddings");
    pcal_dataset_info info{};
    check(pcal_dataset_get_info(ds.ptr, &info), "dataset info");
    log("info", "loaded " + std::to_string(info.records) + " records, " + std::to_string(info.classes) +
                    " classes, " + std::to_string(info.sessions) + " sessions, dim " + std::to_string(info.dim));
}

void run_fscil(const RunConfig& cfg) {
    DatasetHandle ds;
    load(cfg, ds);
    Handle<pcal_fscil_result, pcal_fscil_free> result;
    check(pcal_run_fscil(ds.ptr, &cfg.calib, &cfg.run, &result.ptr), "run-fscil");
    const size_t sessions = pcal_fscil_session_count(result.ptr);
    for (size_t s = 0; s < sessions; ++s) {
        pcal_metric_bundle m{};
        check(pcal_fscil_session_metrics(result.ptr, s, &m), "session metrics");
        log("info", "session " + std::to_string(s) + ": acc " + fmt(m.avg_acc) + " base " + fmt(m.base_acc) +
                        " new " + fmt(m.new_acc) + " hmean " + fmt(m.hmean));
    }
    double pd = 0;
    check(pcal_fscil_performance_drop(result.ptr, &pd), "performance drop");
    log("info", "performance drop " + fmt(pd));
    check(pcal_fscil_write_report(result.ptr, cfg.report_format, cfg.output_path.c_str()), "writing report");
    if (!cfg.predictions_path.empty())
        check(pcal_fscil_write_predictions(result.ptr, sessions - 1, cfg.predictions_path.c_str()),
              "writing predictions");
}

void run_fsl(const RunConfig& cfg) {
    DatasetHandle ds;
    load(cfg, ds);
    Handle<pcal_fsl_result, pcal_fsl_free> result;
    check(pcal_run_fsl(ds.ptr, &cfg.episode, &cfg.calib, &cfg.run, &result.ptr), "run-fsl");
    double mean = 0, half = 0;
    size_t episodes = 0;
    check(pcal_fsl_summary(result.ptr, &mean, &half, &episodes), "fsl summary");
    log("info", std::to_string(episodes) + " episodes: accuracy " + fmt(100 * mean) + " +- " + fmt(100 * half));
    check(pcal_fsl_write_report(result.ptr, cfg.report_format, cfg.output_path.c_str()), "writing report");
}

void gen_synthetic(const RunConfig& cfg) {
    Handle<pcal_synthetic, pcal_synthetic_free> synth;
    check(pcal_generate_synthetic(&cfg.synth, &synth.ptr), "gen-synthetic");
    double sep = 0;
    check(pcal_synthetic_min_base_separation(synth.ptr, &sep), "separation");
    log("info", "minimum base separation " + fmt(sep));
    check(pcal_synthetic_write(synth.ptr, cfg.output_path.c_str(), cfg.truth_path.empty() ? nullptr : cfg.truth_path.c_str()),
          "writing synthetic data");
}

void analyze(const RunConfig& cfg) {
    DatasetHandle ds;
    load(cfg, ds);
    Handle<pcal_analysis, pcal_analysis_free> analysis;
    check(pcal_analyze_files(ds.ptr, cfg.before_path.c_str(), cfg.after_path.c_str(), &cfg.run, &analysis.ptr),
          "analyze");
    const char* names[] = {"UC", "WR", "RW", "WW"};
    for (int c = PCAL_CHANGE_UC; c <= PCAL_CHANGE_WW; ++c) {
        pcal_category_stats st{};
        check(pcal_analysis_change(analysis.ptr, static_cast<pcal_change_category>(c), &st), "change stats");
        log("info", std::string(names[c]) + ": " + std::to_string(st.count) + " samples, base " + fmt(st.base_pct) +
                        "% new " + fmt(st.new_pct) + "%");
    }
    check(pcal_analysis_write_report(analysis.ptr, cfg.report_format, cfg.collapse_ww ? 1 : 0, cfg.output_path.c_str()),
          "writing report");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    auto parsed = parse_args(args);
    if (!parsed.config) {
        std::fputs(parsed.message.c_str(), parsed.exit_code == 0 ? stdout : stderr);
        if (parsed.exit_code != 0) std::fputc('\n', stderr);
        return parsed.exit_code;
    }
    RunConfig cfg = *parsed.config;

    const auto cap = parse_thread_cap(std::getenv("PROTO_CALIB_THREADS"));
    if (!cap) {
        std::fprintf(stderr, "PROTO_CALIB_THREADS must be a non-negative integer\n");
        return 2;
    }
    cfg.run.threads = *cap;

    try {
        switch (cfg.command) {
            case Command::RunFscil: run_fscil(cfg); break;
            case Command::RunFsl: run_fsl(cfg); break;
            case Command::GenSynthetic: gen_synthetic(cfg); break;
            case Command::Analyze: analyze(cfg); break;
        }
    } catch (const Failure&) {
        return 1;
    }
    log("info", "wrote " + cfg.output_path);
    return 0;
}
