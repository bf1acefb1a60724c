#include "protocalib/protocalib.h"

#include <cmath>
#include <limits>
#include <new>
#include <string>

#include "protocalib/calib.hpp"
#include "protocalib/classify.hpp"
#include "protocalib/core.hpp"
#include "protocalib/error.hpp"
#include "protocalib/metrics.hpp"
#include "protocalib/protocol.hpp"
#include "protocalib/report.hpp"
#include "protocalib/synth.hpp"

using namespace protocalib;

struct pcal_dataset {
    Dataset dataset;
};

struct pcal_fscil_result {
    FscilRun run;
    // Kept to resolve prediction rows back to records.
    Dataset dataset;
};

struct pcal_fsl_result {
    FslRun run;
};

struct pcal_synthetic {
    SynthResult result;
};

struct pcal_analysis {
    AnalysisReport report;
};

namespace {

thread_local std::string g_last_error;

pcal_status status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return PCAL_ERR_INVALID_ARGUMENT;
        case ErrorKind::Parse: return PCAL_ERR_PARSE;
        case ErrorKind::Validation: return PCAL_ERR_VALIDATION;
        case ErrorKind::Numeric: return PCAL_ERR_NUMERIC;
        case ErrorKind::Io: return PCAL_ERR_IO;
    }
    return PCAL_ERR_INTERNAL;
}

template <class Fn>
pcal_status guarded(Fn&& fn) {
    try {
        fn();
        return PCAL_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return PCAL_ERR_INTERNAL;
}

template <class T>
const T& deref(const T* p, const char* what) {
    if (p == nullptr) fail(ErrorKind::InvalidArgument, std::string(what) + " is NULL");
    return *p;
}

template <class T>
T& out_ref(T* p, const char* what) {
    if (p == nullptr) fail(ErrorKind::InvalidArgument, std::string(what) + " is NULL");
    return *p;
}

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

double or_nan(const std::optional<double>& v) { return v ? *v : kAbsent; }

CalibParams to_params(const pcal_calib_params* p) {
    pcal_calib_params defaults;
    pcal_calib_params_default(&defaults);
    const pcal_calib_params& in = p ? *p : defaults;
    CalibParams out;
    switch (in.strategy) {
        case PCAL_STRATEGY_PROTONET: out.strategy = Strategy::ProtoNet; break;
        case PCAL_STRATEGY_TEEN: out.strategy = Strategy::Teen; break;
        case PCAL_STRATEGY_SIMTEEN: out.strategy = Strategy::SimTeen; break;
        default: fail(ErrorKind::InvalidArgument, "unknown strategy");
    }
    out.alpha = in.alpha;
    out.tau = in.tau;
    out.simteen_k = in.simteen_k;
    out.simteen_combine = in.simteen_mean ? SimTeenCombine::Mean : SimTeenCombine::Sum;
    out.validate();
    return out;
}

RunOptions to_options(const pcal_run_options* o) {
    pcal_run_options defaults;
    pcal_run_options_default(&defaults);
    const pcal_run_options& in = o ? *o : defaults;
    RunOptions out;
    out.threads = in.threads;
    out.similarity.m_new_similar = in.m_new_similar;
    out.similarity.base_fraction = in.base_fraction;
    return out;
}

ReportFormat to_format(pcal_report_format f) {
    switch (f) {
        case PCAL_FORMAT_CSV: return ReportFormat::Csv;
        case PCAL_FORMAT_JSON: return ReportFormat::Json;
    }
    fail(ErrorKind::InvalidArgument, "unknown report format");
}

void fill_bundle(const MetricBundle& m, pcal_metric_bundle* out) {
    *out = {m.avg_acc, or_nan(m.base_acc), or_nan(m.new_acc), or_nan(m.hmean),
            or_nan(m.fnr), or_nan(m.fpr),      or_nan(m.tbr),     or_nan(m.tnr)};
}

const SessionResult& session_at(const pcal_fscil_result* r, size_t session) {
    const auto& run = deref(r, "result").run;
    if (session >= run.sessions.size()) fail(ErrorKind::InvalidArgument, "session index out of range");
    return run.sessions[session];
}

std::vector<FeatureVector> rows_to_vectors(const double* data, size_t count, size_t dim) {
    if (data == nullptr && count > 0) fail(ErrorKind::InvalidArgument, "input buffer is NULL");
    std::vector<FeatureVector> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) out.emplace_back(std::vector<double>(data + i * dim, data + (i + 1) * dim));
    return out;
}

void copy_out(std::span<const double> src, double* dst) {
    if (dst == nullptr) fail(ErrorKind::InvalidArgument, "output buffer is NULL");
    std::copy(src.begin(), src.end(), dst);
}

}  // namespace

extern "C" {

const char* pcal_last_error(void) { return g_last_error.c_str(); }

const char* pcal_status_name(pcal_status status) {
    switch (status) {
        case PCAL_OK: return "ok";
        case PCAL_ERR_INVALID_ARGUMENT: return "invalid argument";
        case PCAL_ERR_PARSE: return "parse error";
        case PCAL_ERR_VALIDATION: return "validation error";
        case PCAL_ERR_NUMERIC: return "numeric error";
        case PCAL_ERR_IO: return "i/o error";
        case PCAL_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void pcal_calib_params_default(pcal_calib_params* params) {
    if (params) *params = {PCAL_STRATEGY_TEEN, 0.5, 16.0, 1, 0};
}

void pcal_run_options_default(pcal_run_options* options) {
    if (options) *options = {0, 10, 0.20};
}

void pcal_episode_spec_default(pcal_episode_spec* spec) {
    if (spec) *spec = {5, 5, 15, 600, 0};
}

void pcal_synth_spec_default(pcal_synth_spec* spec) {
    if (!spec) return;
    const SynthSpec d;
    *spec = {static_cast<uint32_t>(d.base_classes),
             static_cast<uint32_t>(d.new_classes),
             static_cast<uint32_t>(d.sessions_after_base),
             static_cast<uint32_t>(d.dim),
             static_cast<uint32_t>(d.base_train_per_class),
             static_cast<uint32_t>(d.shots),
             static_cast<uint32_t>(d.test_per_class),
             static_cast<uint32_t>(d.mixture_support),
             d.mixture_noise,
             d.within_class_sigma,
             d.base_spread,
             d.seed};
}

// Datasets -------------------------------------------------------------------

pcal_status pcal_dataset_load(const char* path, pcal_dataset** out) {
    return guarded([&] {
        auto& slot = out_ref(out, "out");
        slot = nullptr;
        slot = new pcal_dataset{load_dataset(deref(path, "path") ? path : "")};
    });
}

pcal_status pcal_dataset_save(const pcal_dataset* dataset, const char* path) {
    return guarded([&] { write_dataset(deref(dataset, "dataset").dataset, deref(path, "path") ? path : ""); });
}

pcal_status pcal_dataset_get_info(const pcal_dataset* dataset, pcal_dataset_info* info) {
    return guarded([&] {
        const auto& ds = deref(dataset, "dataset").dataset;
        std::size_t classes = 0;
        for (const auto& space : ds.layout().label_spaces) classes += space.size();
        out_ref(info, "info") = {static_cast<uint32_t>(ds.layout().session_count()), static_cast<uint32_t>(ds.dim()),
                                 static_cast<uint64_t>(ds.records().size()), static_cast<uint32_t>(classes)};
    });
}

pcal_status pcal_dataset_session_classes(const pcal_dataset* dataset, uint32_t session, uint32_t* ids,
                                         size_t capacity, size_t* count) {
    return guarded([&] {
        const auto& layout = deref(dataset, "dataset").dataset.layout();
        if (session >= layout.session_count()) fail(ErrorKind::InvalidArgument, "session index out of range");
        const auto& space = layout.label_spaces[session];
        out_ref(count, "count") = space.size();
        if (ids) std::copy_n(space.begin(), std::min(capacity, space.size()), ids);
    });
}

void pcal_dataset_free(pcal_dataset* dataset) { delete dataset; }

// FSCIL ----------------------------------------------------------------------

pcal_status pcal_run_fscil(const pcal_dataset* dataset, const pcal_calib_params* params,
                           const pcal_run_options* options, pcal_fscil_result** out) {
    return guarded([&] {
        auto& slot = out_ref(out, "out");
        slot = nullptr;
        const auto& ds = deref(dataset, "dataset").dataset;
        slot = new pcal_fscil_result{run_fscil(ds, to_params(params), to_options(options)), ds};
    });
}

size_t pcal_fscil_session_count(const pcal_fscil_result* result) { return result ? result->run.sessions.size() : 0; }

pcal_status pcal_fscil_session_metrics(const pcal_fscil_result* result, size_t session, pcal_metric_bundle* metrics) {
    return guarded([&] {
        const auto& s = session_at(result, session);
        fill_bundle(s.metrics, &out_ref(metrics, "metrics"));
    });
}

pcal_status pcal_fscil_performance_drop(const pcal_fscil_result* result, double* pd) {
    return guarded([&] { out_ref(pd, "pd") = deref(result, "result").run.performance_drop(); });
}

pcal_status pcal_fscil_predictions(const pcal_fscil_result* result, size_t session, uint32_t* predictions,
                                   uint32_t* true_labels, size_t capacity, size_t* count) {
    return guarded([&] {
        const auto& s = session_at(result, session);
        out_ref(count, "count") = s.predictions.size();
        const size_t n = std::min(capacity, s.predictions.size());
        if (predictions) std::copy_n(s.predictions.begin(), n, predictions);
        if (true_labels) std::copy_n(s.true_labels.begin(), n, true_labels);
    });
}

pcal_status pcal_fscil_write_report(const pcal_fscil_result* result, pcal_report_format format, const char* path) {
    return guarded([&] {
        write_text_file(deref(path, "path") ? path : "",
                        format_fscil_report(deref(result, "result").run, to_format(format)));
    });
}

pcal_status pcal_fscil_write_predictions(const pcal_fscil_result* result, size_t session, const char* path) {
    return guarded([&] {
        const auto rows = prediction_rows(session_at(result, session));
        write_text_file(deref(path, "path") ? path : "", format_predictions(rows));
    });
}

void pcal_fscil_free(pcal_fscil_result* result) { delete result; }

// FSL ------------------------------------------------------------------------

pcal_status pcal_run_fsl(const pcal_dataset* dataset, const pcal_episode_spec* spec, const pcal_calib_params* params,
                         const pcal_run_options* options, pcal_fsl_result** out) {
    return guarded([&] {
        auto& slot = out_ref(out, "out");
        slot = nullptr;
        pcal_episode_spec in;
        pcal_episode_spec_default(&in);
        if (spec) in = *spec;
        const EpisodeSpec es{in.ways, in.shots, in.queries, in.episodes, in.seed};
        slot = new pcal_fsl_result{
            run_fsl(deref(dataset, "dataset").dataset, es, to_params(params), to_options(options))};
    });
}

pcal_status pcal_fsl_summary(const pcal_fsl_result* result, double* mean, double* half_width, size_t* episodes) {
    return guarded([&] {
        const auto& run = deref(result, "result").run;
        if (mean) *mean = run.mean_accuracy;
        if (half_width) *half_width = or_nan(run.ci95_half_width);
        if (episodes) *episodes = run.accuracies.size();
    });
}

pcal_status pcal_fsl_accuracies(const pcal_fsl_result* result, double* out, size_t capacity, size_t* count) {
    return guarded([&] {
        const auto& accs = deref(result, "result").run.accuracies;
        out_ref(count, "count") = accs.size();
        if (out) std::copy_n(accs.begin(), std::min(capacity, accs.size()), out);
    });
}

pcal_status pcal_fsl_write_report(const pcal_fsl_result* result, pcal_report_format format, const char* path) {
    return guarded([&] {
        write_text_file(deref(path, "path") ? path : "",
                        format_fsl_report(deref(result, "result").run, to_format(format)));
    });
}

void pcal_fsl_free(pcal_fsl_result* result) { delete result; }

// Synthetic ------------------------------------------------------------------

pcal_status pcal_generate_synthetic(const pcal_synth_spec* spec, pcal_synthetic** out) {
    return guarded([&] {
        auto& slot = out_ref(out, "out");
        slot = nullptr;
        const auto& in = deref(spec, "spec");
        SynthSpec s;
        s.base_classes = in.base_classes;
        s.new_classes = in.new_classes;
        s.sessions_after_base = in.sessions_after_base;
        s.dim = in.dim;
        s.base_train_per_class = in.base_train_per_class;
        s.shots = in.shots;
        s.test_per_class = in.test_per_class;
        s.mixture_support = in.mixture_support;
        s.mixture_noise = in.mixture_noise;
        s.within_class_sigma = in.within_class_sigma;
        s.base_spread = in.base_spread;
        s.seed = in.seed;
        slot = new pcal_synthetic{gen_synthetic(s)};
    });
}

pcal_status pcal_synthetic_dataset(const pcal_synthetic* synthetic, pcal_dataset** out) {
    return guarded([&] {
        auto& slot = out_ref(out, "out");
        slot = nullptr;
        slot = new pcal_dataset{deref(synthetic, "synthetic").result.dataset};
    });
}

pcal_status pcal_synthetic_write(const pcal_synthetic* synthetic, const char* embeddings_path, const char* truth_path) {
    return guarded([&] {
        const auto& r = deref(synthetic, "synthetic").result;
        write_dataset(r.dataset, deref(embeddings_path, "embeddings_path") ? embeddings_path : "");
        if (truth_path) write_ground_truth(r.truth, truth_path);
    });
}

pcal_status pcal_synthetic_min_base_separation(const pcal_synthetic* synthetic, double* separation) {
    return guarded([&] {
        out_ref(separation, "separation") = deref(synthetic, "synthetic").result.truth.min_base_separation();
    });
}

pcal_status pcal_synthetic_new_prototype_error(const pcal_synthetic* synthetic, const pcal_fscil_result* result,
                                               size_t session, double* mean_error) {
    return guarded([&] {
        const auto& truth = deref(synthetic, "synthetic").result.truth;
        const auto& s = session_at(result, session);
        const auto errors = prototype_error(s.registry_snapshot, truth);
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& [id, err] : errors) {
            if (truth.classes.at(id).session == 0) continue;
            sum += err;
            ++n;
        }
        if (n == 0) fail(ErrorKind::InvalidArgument, "session has no new classes");
        out_ref(mean_error, "mean_error") = sum / static_cast<double>(n);
    });
}

void pcal_synthetic_free(pcal_synthetic* synthetic) { delete synthetic; }

// Analysis -------------------------------------------------------------------

pcal_status pcal_analyze_files(const pcal_dataset* dataset, const char* before_path, const char* after_path,
                               const pcal_run_options* options, pcal_analysis** out) {
    return guarded([&] {
        auto& slot = out_ref(out, "out");
        slot = nullptr;
        const auto before = load_predictions(deref(before_path, "before_path") ? before_path : "");
        const auto after = load_predictions(deref(after_path, "after_path") ? after_path : "");
        slot = new pcal_analysis{
            analyze(deref(dataset, "dataset").dataset, before, after, to_options(options).similarity)};
    });
}

pcal_status pcal_analysis_change(const pcal_analysis* analysis, pcal_change_category category,
                                 pcal_category_stats* stats) {
    return guarded([&] {
        const auto& r = deref(analysis, "analysis").report;
        if (category < PCAL_CHANGE_UC || category > PCAL_CHANGE_WW) fail(ErrorKind::InvalidArgument, "unknown category");
        const auto& c = r.change[static_cast<ChangeCategory>(category)];
        out_ref(stats, "stats") = {c.count, c.base_count, c.new_count, or_nan(c.base_pct), or_nan(c.new_pct)};
    });
}

pcal_status pcal_analysis_run_metrics(const pcal_analysis* analysis, int before_or_after, pcal_metric_bundle* metrics) {
    return guarded([&] {
        const auto& r = deref(analysis, "analysis").report;
        const RunDiagnostics& d = before_or_after == 0 ? r.before : r.after;
        MetricBundle m;
        m.avg_acc = d.accuracy.avg_acc;
        m.base_acc = d.accuracy.base_acc;
        m.new_acc = d.accuracy.new_acc;
        if (m.base_acc && m.new_acc) m.hmean = harmonic_mean(*m.base_acc, *m.new_acc);
        m.fnr = d.rates.fnr;
        m.fpr = d.rates.fpr;
        m.tbr = d.similarity.tbr;
        m.tnr = d.similarity.tnr;
        fill_bundle(m, &out_ref(metrics, "metrics"));
    });
}

pcal_status pcal_analysis_write_report(const pcal_analysis* analysis, pcal_report_format format, int collapse_ww,
                                       const char* path) {
    return guarded([&] {
        write_text_file(deref(path, "path") ? path : "",
                        format_analysis_report(deref(analysis, "analysis").report, to_format(format), collapse_ww != 0));
    });
}

void pcal_analysis_free(pcal_analysis* analysis) { delete analysis; }

// Primitives -----------------------------------------------------------------

pcal_status pcal_compute_prototype(const double* features, size_t count, size_t dim, double* out) {
    return guarded([&] { copy_out(compute_prototype(rows_to_vectors(features, count, dim)).values(), out); });
}

pcal_status pcal_softmax_weights(const double* new_proto, const double* base_protos, size_t base_count, size_t dim,
                                 double tau, double* weights) {
    return guarded([&] {
        const auto c = rows_to_vectors(new_proto, 1, dim);
        const auto bases = rows_to_vectors(base_protos, base_count, dim);
        copy_out(softmax_weights(c.front(), bases, tau).weights, weights);
    });
}

pcal_status pcal_calibrate_teen(const double* new_proto, const double* base_protos, size_t base_count, size_t dim,
                                double alpha, double tau, double* out) {
    return guarded([&] {
        const auto c = rows_to_vectors(new_proto, 1, dim);
        const auto bases = rows_to_vectors(base_protos, base_count, dim);
        copy_out(calibrate_teen(c.front(), bases, alpha, tau).values(), out);
    });
}

pcal_status pcal_predict_batch(const double* features, size_t count, const double* prototypes,
                               const uint32_t* class_ids, size_t class_count, size_t dim, uint32_t threads,
                               uint32_t* out) {
    return guarded([&] {
        if (class_ids == nullptr && class_count > 0) fail(ErrorKind::InvalidArgument, "class_ids is NULL");
        if (out == nullptr && count > 0) fail(ErrorKind::InvalidArgument, "output buffer is NULL");
        auto protos = rows_to_vectors(prototypes, class_count, dim);
        PrototypeRegistry registry;
        for (size_t i = 0; i < class_count; ++i) {
            if (registry.contains(class_ids[i])) fail(ErrorKind::InvalidArgument, "duplicate class id");
            registry.insert(class_ids[i], {std::move(protos[i]), Provenance::Empirical});
        }
        const auto preds = predict_batch(rows_to_vectors(features, count, dim), registry, threads);
        std::copy(preds.begin(), preds.end(), out);
    });
}

pcal_status pcal_harmonic_mean(double base_acc, double new_acc, double* out) {
    return guarded([&] { out_ref(out, "out") = harmonic_mean(base_acc, new_acc); });
}

pcal_status pcal_performance_drop(const double* accs, size_t count, double* out) {
    return guarded([&] {
        if (accs == nullptr && count > 0) fail(ErrorKind::InvalidArgument, "accs is NULL");
        out_ref(out, "out") = performance_drop(std::span<const double>(accs, count));
    });
}

}  // extern "C"
