#pragma once

#include <optional>
#include <span>
#include <string>

#include "protocalib/protocalib.h"

namespace protocalib::cli {

enum class Command { RunFscil, RunFsl, GenSynthetic, Analyze };

struct RunConfig {
    Command command = Command::RunFscil;
    std::string embeddings_path;
    std::string output_path;
    pcal_report_format report_format = PCAL_FORMAT_CSV;

    pcal_calib_params calib{};
    pcal_run_options run{};
    pcal_episode_spec episode{};
    pcal_synth_spec synth{};

    // run-fscil: optional prediction file for the final session.
    std::string predictions_path;
    // gen-synthetic: optional ground-truth JSON.
    std::string truth_path;
    // analyze
    std::string before_path;
    std::string after_path;
    bool collapse_ww = false;
};

struct ParseResult {
    std::optional<RunConfig> config;
    int exit_code = 0;
    // Help text on success without a config, error text otherwise.
    std::string message;
};

/// args excludes the program name. Config-file values (`--config PATH`,
/// flat key=value lines named like the flags) are applied first so that
/// explicit flags override them.
ParseResult parse_args(std::span<const std::string> args);

/// Parses PROTO_CALIB_THREADS; empty or absent means auto (0).
std::optional<std::uint32_t> parse_thread_cap(const char* value);

}  // namespace protocalib::cli
