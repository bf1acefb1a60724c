#include "cli_args.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace protocalib::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file: " + path);
    std::vector<std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty() || key == "config")
            throw UsageError(path + ":" + std::to_string(lineno) + ": invalid key '" + key + "'");
        out.push_back("--" + key + "=" + value);
    }
    return out;
}

std::optional<std::string> find_config(std::span<const std::string> args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config requires a path");
            return args[i + 1];
        }
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return std::nullopt;
}

void add_calib(CLI::App* sub, RunConfig& cfg, std::string& strategy, bool& simteen_mean) {
    sub->add_option("--strategy", strategy, "Prototype strategy")
        ->check(CLI::IsMember({"protonet", "teen", "simteen"}))
        ->capture_default_str();
    sub->add_option("--alpha", cfg.calib.alpha, "Weight of the empirical prototype")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sub->add_option("--tau", cfg.calib.tau, "Similarity temperature")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--simteen-k", cfg.calib.simteen_k, "Neighbours used by simteen")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_flag("--simteen-mean", simteen_mean, "Average simteen neighbours instead of summing");
}

void add_similarity(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--m-new-similar", cfg.run.m_new_similar, "Similar base classes per new class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--base-fraction", cfg.run.base_fraction, "Fraction of new classes similar to a base class")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
}

void add_format(CLI::App* sub, std::string& format) {
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

}  // namespace

std::optional<std::uint32_t> parse_thread_cap(const char* value) {
    if (value == nullptr || *value == '\0') return 0u;
    std::uint32_t out = 0;
    const std::string_view s(value);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return out;
}

ParseResult parse_args(std::span<const std::string> args) {
    RunConfig cfg;
    pcal_calib_params_default(&cfg.calib);
    pcal_run_options_default(&cfg.run);
    pcal_episode_spec_default(&cfg.episode);
    pcal_synth_spec_default(&cfg.synth);

    std::string strategy = "teen";
    std::string format = "csv";
    bool simteen_mean = false;
    std::string config_path;

    CLI::App app{"Training-free prototype calibration and few-shot evaluation", "protocalib"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    auto* fscil = app.add_subcommand("run-fscil", "Run the incremental-session protocol");
    auto* fsl = app.add_subcommand("run-fsl", "Run N-way K-shot episodes");
    auto* synth = app.add_subcommand("gen-synthetic", "Generate a synthetic embedding benchmark");
    auto* analyze = app.add_subcommand("analyze", "Compare two prediction files");

    for (auto* sub : {fscil, fsl, synth, analyze}) {
        sub->add_option("--config", config_path, "key=value file; explicit flags take precedence");
        sub->add_option("--output,-o", cfg.output_path, "Output file")->required();
    }
    for (auto* sub : {fscil, fsl, analyze})
        sub->add_option("--embeddings,-e", cfg.embeddings_path, "Embedding CSV")->required();

    add_calib(fscil, cfg, strategy, simteen_mean);
    add_similarity(fscil, cfg);
    add_format(fscil, format);
    fscil->add_option("--predictions", cfg.predictions_path, "Write final-session predictions here");

    add_calib(fsl, cfg, strategy, simteen_mean);
    add_format(fsl, format);
    fsl->add_option("--ways", cfg.episode.ways)->check(CLI::PositiveNumber)->capture_default_str();
    fsl->add_option("--shots", cfg.episode.shots)->check(CLI::PositiveNumber)->capture_default_str();
    fsl->add_option("--queries", cfg.episode.queries)->check(CLI::PositiveNumber)->capture_default_str();
    fsl->add_option("--episodes", cfg.episode.episodes)->check(CLI::PositiveNumber)->capture_default_str();
    fsl->add_option("--seed", cfg.episode.seed)->capture_default_str();

    auto& s = cfg.synth;
    synth->add_option("--truth", cfg.truth_path, "Ground-truth JSON output");
    synth->add_option("--base-classes", s.base_classes)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--new-classes", s.new_classes)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--sessions", s.sessions_after_base, "Incremental sessions")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--dim", s.dim)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--base-train", s.base_train_per_class, "Train samples per base class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--shots", s.shots)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--test", s.test_per_class, "Test samples per class")->capture_default_str();
    synth->add_option("--mixture-support", s.mixture_support, "Base parents per new class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--mixture-noise", s.mixture_noise, "RMS norm of the offset added to mixed means")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth->add_option("--sigma", s.within_class_sigma, "Within-class standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--base-spread", s.base_spread, "Standard deviation of base means")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--seed", s.seed)->capture_default_str();

    analyze->add_option("--before", cfg.before_path, "Prediction file of the first run")
        ->required();
    analyze->add_option("--after", cfg.after_path, "Prediction file of the second run")
        ->required();
    analyze->add_flag("--collapse-ww", cfg.collapse_ww, "Report a single changed row instead of WW");
    add_similarity(analyze, cfg);
    add_format(analyze, format);

    ParseResult result;
    try {
        std::vector<std::string> merged(args.begin(), args.end());
        if (!args.empty()) {
            if (const auto path = find_config(args.subspan(1))) {
                const auto extra = read_config(*path);
                merged.insert(merged.begin() + 1, extra.begin(), extra.end());
            }
        }
        // CLI11 consumes a reversed vector.
        std::vector<std::string> reversed(merged.rbegin(), merged.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        result.message = app.help();
        return result;
    } catch (const CLI::CallForAllHelp&) {
        result.message = app.help("", CLI::AppFormatMode::All);
        return result;
    } catch (const CLI::ParseError& e) {
        result.exit_code = 2;
        result.message = e.what();
        return result;
    } catch (const UsageError& e) {
        result.exit_code = 2;
        result.message = e.what();
        return result;
    }

    if (fscil->parsed()) cfg.command = Command::RunFscil;
    else if (fsl->parsed()) cfg.command = Command::RunFsl;
    else if (synth->parsed()) cfg.command = Command::GenSynthetic;
    else cfg.command = Command::Analyze;

    cfg.calib.strategy = strategy == "protonet" ? PCAL_STRATEGY_PROTONET
                         : strategy == "simteen" ? PCAL_STRATEGY_SIMTEEN
                                                 : PCAL_STRATEGY_TEEN;
    cfg.calib.simteen_mean = simteen_mean ? 1 : 0;
    cfg.report_format = format == "json" ? PCAL_FORMAT_JSON : PCAL_FORMAT_CSV;
    result.config = cfg;
    return result;
}

}  // namespace protocalib::cli
