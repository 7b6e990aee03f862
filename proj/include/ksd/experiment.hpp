#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksd/diagnostics.hpp"
#include "ksd/estimators.hpp"
#include "ksd/io.hpp"
#include "ksd/parallel.hpp"
#include "ksd/score_models.hpp"
#include "ksd/testing.hpp"

namespace ksd {

enum class ExperimentKind { Runtime, LaplaceVsNormal, StudentTVsNormal, Rbm, Custom };

inline ExperimentKind parse_experiment(const std::string &name) {
    if (name == "runtime") { return ExperimentKind::Runtime; }
    if (name == "laplace") { return ExperimentKind::LaplaceVsNormal; }
    if (name == "student-t") { return ExperimentKind::StudentTVsNormal; }
    if (name == "rbm") { return ExperimentKind::Rbm; }
    if (name == "custom") { return ExperimentKind::Custom; }
    throw ConfigError("unknown experiment '" + name + "'");
}

inline EstimatorKind parse_estimator(const std::string &name) {
    if (name == "v") { return EstimatorKind::V; }
    if (name == "u") { return EstimatorKind::U; }
    if (name == "nystrom") { return EstimatorKind::Nystrom; }
    throw ConfigError("unknown estimator '" + name + "'");
}

inline TestEstimator test_estimator(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::V: return TestEstimator::FullV;
        case EstimatorKind::U: return TestEstimator::FullU;
        case EstimatorKind::Nystrom: return TestEstimator::Nystrom;
    }
    return TestEstimator::FullV;
}

/// Parses "rbf:GAMMA", "imq:C,THETA" or "median-rbf" (returned as nullopt).
inline std::optional<KernelParams> parse_kernel(const std::string &text) {
    auto number = [&](const std::string &s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (...) {
            throw ConfigError("kernel '" + text + "': bad number '" + s + "'");
        }
        if (used != s.size()) { throw ConfigError("kernel '" + text + "': bad number '" + s + "'"); }
        return v;
    };
    if (text == "median-rbf") { return std::nullopt; }
    KernelParams params;
    if (text.rfind("rbf:", 0) == 0) {
        params = Rbf{number(text.substr(4))};
    } else if (text.rfind("imq:", 0) == 0) {
        const std::string rest = text.substr(4);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) { throw ConfigError("kernel '" + text + "': expected imq:C,THETA"); }
        params = Imq{number(rest.substr(0, comma)), number(rest.substr(comma + 1))};
    } else {
        throw ConfigError("unknown kernel '" + text + "'");
    }
    validate(params);
    return params;
}

struct ExperimentSpec {
    ExperimentKind experiment = ExperimentKind::LaplaceVsNormal;
    Eigen::Index n = 1000;
    Eigen::Index d = 1;
    double m_factor = 4.0;
    /// nullopt selects the median-heuristic RBF, resolved per trial.
    std::optional<KernelParams> kernel = Imq{1.0, -0.5};
    double alpha = 0.05;
    std::size_t num_bootstrap = 500;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::vector<EstimatorKind> estimators{EstimatorKind::Nystrom};
    // RBM experiment
    double sigma = 0.0;
    Eigen::Index rbm_hidden = 40;
    std::size_t gibbs_burn_in = 2000;
    std::size_t gibbs_thinning = 50;
    // Custom experiment
    std::filesystem::path dataset;
    DatasetFormat format = DatasetFormat::Csv;
    std::optional<std::filesystem::path> rbm_target;
};

inline void validate(const ExperimentSpec &spec) {
    if (spec.trials < 1) { throw ConfigError("experiment: trials must be at least 1"); }
    if (spec.experiment != ExperimentKind::Custom && (spec.n < 1 || spec.d < 1)) { throw ConfigError("experiment: n and d must be positive"); }
    if (!(spec.m_factor > 0.0)) { throw ConfigError("experiment: m_factor must be positive"); }
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) { throw ConfigError("experiment: alpha must lie in (0, 1)"); }
    if (spec.num_bootstrap < 1) { throw ConfigError("experiment: bootstrap count must be positive"); }
    if (spec.estimators.empty()) { throw ConfigError("experiment: no estimators selected"); }
    if (!(spec.sigma >= 0.0)) { throw ConfigError("experiment: sigma must be non-negative"); }
    if (spec.rbm_hidden < 1) { throw ConfigError("experiment: RBM hidden dimension must be positive"); }
    if (spec.gibbs_thinning < 1) { throw ConfigError("experiment: Gibbs thinning must be positive"); }
    if (spec.kernel) { validate(*spec.kernel); }
}

/// One CSV row. Optional fields are written as empty cells.
struct ResultRow {
    std::size_t trial;
    EstimatorKind estimator;
    Eigen::Index n;
    Eigen::Index d;
    std::optional<Eigen::Index> m;
    double statistic;
    std::optional<double> threshold;
    std::optional<double> p_value;
    std::optional<bool> reject;
    double wall_ms;
};

struct EstimatorSummary {
    EstimatorKind estimator;
    std::size_t trials = 0;
    std::optional<double> power;
    double mean_statistic = 0.0;
    double mean_wall_ms = 0.0;
    double q95_wall_ms = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<EstimatorSummary> summaries;
};

inline constexpr const char *kCsvHeader = "trial,estimator,n,d,m,statistic,threshold,p_value,reject,wall_ms";

namespace detail {

struct TrialData {
    SampleSet samples;
    ScoreModel target;
};

inline TrialData trial_data(const ExperimentSpec &spec, std::uint64_t trial_seed, const SampleSet *fixed, const ScoreModel *fixed_target) {
    const std::uint64_t data_seed = derive_seed(trial_seed, 0);
    switch (spec.experiment) {
        case ExperimentKind::Runtime:
            return {draw_samples(GaussianSampler{spec.d}, spec.n, data_seed), StandardGaussian{spec.d}};
        case ExperimentKind::LaplaceVsNormal:
            return {draw_samples(ProductLaplace{spec.d, 1.0 / std::sqrt(2.0)}, spec.n, data_seed), StandardGaussian{spec.d}};
        case ExperimentKind::StudentTVsNormal:
            return {draw_samples(StudentT{spec.d, 5.0}, spec.n, data_seed), StandardGaussian{spec.d}};
        case ExperimentKind::Rbm: {
            const GaussBernoulliRbm target = random_rbm(spec.d, spec.rbm_hidden, derive_seed(trial_seed, 2));
            const GaussBernoulliRbm sampler = perturb_rbm(target, spec.sigma, derive_seed(trial_seed, 3));
            return {draw_samples(RbmGibbs{sampler, spec.gibbs_burn_in, spec.gibbs_thinning}, spec.n, data_seed), target};
        }
        case ExperimentKind::Custom: return {*fixed, *fixed_target};
    }
    throw ConfigError("experiment: unknown kind");
}

inline double quantile95(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()) - 1e-9));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline std::string cell(const std::optional<double> &v) {
    if (!v) { return ""; }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

}  // namespace detail

/// Runs `spec.trials` independent repetitions. Trial t uses derive_seed(spec.seed, t) and
/// shares no RNG state with other trials; rows come back ordered by trial then estimator.
inline ExperimentResult run_experiment(const ExperimentSpec &spec) {
    validate(spec);
    std::optional<SampleSet> fixed;
    std::optional<ScoreModel> fixed_target;
    if (spec.experiment == ExperimentKind::Custom) {
        fixed = ingest_dataset(spec.dataset, spec.format);
        fixed_target = spec.rbm_target ? ScoreModel{load_rbm(*spec.rbm_target)} : ScoreModel{StandardGaussian{fixed->cols()}};
        if (dimension(*fixed_target) != fixed->cols()) {
            throw ConfigError("experiment: dataset has d = " + std::to_string(fixed->cols()) + " but the target model has d = " +
                              std::to_string(dimension(*fixed_target)));
        }
    }

    const std::size_t per_trial = spec.estimators.size();
    std::vector<ResultRow> rows(spec.trials * per_trial);
    parallel_for(spec.trials, [&](std::size_t t) {
        const std::uint64_t trial_seed = derive_seed(spec.seed, t);
        const auto data = detail::trial_data(spec, trial_seed, fixed ? &*fixed : nullptr, fixed_target ? &*fixed_target : nullptr);
        const SampleSet &x = data.samples;
        const KernelParams kernel = spec.kernel ? *spec.kernel : KernelParams{Rbf{median_heuristic_gamma(x, 1'000'000, derive_seed(trial_seed, 4))}};
        const SteinKernel sk{kernel, data.target};
        const Eigen::Index n = x.rows();

        for (std::size_t e = 0; e < per_trial; ++e) {
            const EstimatorKind kind = spec.estimators[e];
            ResultRow row{t, kind, n, x.cols(), std::nullopt, 0.0, std::nullopt, std::nullopt, std::nullopt, 0.0};
            if (kind == EstimatorKind::Nystrom) { row.m = nystrom_size(n, spec.m_factor); }
            const std::uint64_t test_seed = derive_seed(trial_seed, 1);
            if (spec.experiment == ExperimentKind::Runtime) {
                const auto start = std::chrono::steady_clock::now();
                KsdEstimate est{};
                const SteinGram gram(sk, x);
                switch (kind) {
                    case EstimatorKind::V: est = v_statistic(gram); break;
                    case EstimatorKind::U: est = u_statistic(gram); break;
                    case EstimatorKind::Nystrom: est = nystrom_statistic(gram, make_nystrom_plan(n, *row.m, plan_seed(test_seed))); break;
                }
                row.statistic = est.squared_value;
                row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            } else {
                TestConfig config;
                config.alpha = spec.alpha;
                config.num_bootstrap = spec.num_bootstrap;
                config.estimator = test_estimator(kind);
                config.m = row.m;
                config.seed = test_seed;
                const TestReport report = run_test(sk, x, config);
                row.statistic = report.statistic;
                row.threshold = report.threshold;
                row.p_value = report.p_value;
                row.reject = report.reject;
                row.wall_ms = report.wall_time.count();
            }
            rows[t * per_trial + e] = row;
        }
    });

    ExperimentResult result{std::move(rows), {}};
    for (const EstimatorKind kind : spec.estimators) {
        EstimatorSummary s{kind};
        std::vector<double> walls;
        std::size_t rejections = 0;
        for (const auto &row : result.rows) {
            if (row.estimator != kind) { continue; }
            ++s.trials;
            s.mean_statistic += row.statistic;
            walls.push_back(row.wall_ms);
            if (row.reject.value_or(false)) { ++rejections; }
        }
        const auto count = static_cast<double>(s.trials);
        s.mean_statistic /= count;
        s.mean_wall_ms = std::accumulate(walls.begin(), walls.end(), 0.0) / count;
        s.q95_wall_ms = detail::quantile95(walls);
        if (spec.experiment != ExperimentKind::Runtime) { s.power = static_cast<double>(rejections) / count; }
        result.summaries.push_back(s);
    }
    return result;
}

/// CSV with kCsvHeader columns: one row per (trial, estimator), then one summary row
/// per estimator with statistic = mean statistic, reject = power and wall_ms = mean wall time.
inline void write_csv(std::ostream &out, const ExperimentResult &result) {
    using detail::cell;
    out << kCsvHeader << '\n';
    for (const auto &r : result.rows) {
        out << r.trial << ',' << to_string(r.estimator) << ',' << r.n << ',' << r.d << ','
            << (r.m ? std::to_string(*r.m) : std::string()) << ',' << cell(r.statistic) << ',' << cell(r.threshold) << ','
            << cell(r.p_value) << ',' << (r.reject ? (*r.reject ? "1" : "0") : "") << ',' << cell(r.wall_ms) << '\n';
    }
    for (const auto &s : result.summaries) {
        const ResultRow *first = nullptr;
        for (const auto &r : result.rows) {
            if (r.estimator == s.estimator) {
                first = &r;
                break;
            }
        }
        out << "summary," << to_string(s.estimator) << ',' << first->n << ',' << first->d << ','
            << (first->m ? std::to_string(*first->m) : std::string()) << ',' << cell(s.mean_statistic) << ",,," << cell(s.power) << ','
            << cell(s.mean_wall_ms) << '\n';
    }
}

inline nlohmann::json summary_json(const ExperimentSpec &spec, const ExperimentResult &result) {
    nlohmann::json j;
    j["trials"] = spec.trials;
    j["seed"] = spec.seed;
    j["alpha"] = spec.alpha;
    j["bootstrap"] = spec.num_bootstrap;
    j["m_factor"] = spec.m_factor;
    j["kernel"] = spec.kernel ? describe(*spec.kernel) : "median-rbf";
    j["estimators"] = nlohmann::json::array();
    for (const auto &s : result.summaries) {
        nlohmann::json e;
        e["estimator"] = to_string(s.estimator);
        e["trials"] = s.trials;
        e["power"] = s.power ? nlohmann::json(*s.power) : nlohmann::json(nullptr);
        e["mean_statistic"] = s.mean_statistic;
        e["mean_wall_ms"] = s.mean_wall_ms;
        e["q95_wall_ms"] = s.q95_wall_ms;
        j["estimators"].push_back(e);
    }
    return j;
}

}  // namespace ksd
