// ksd: kernel Stein discrepancy goodness-of-fit tests and experiment harness.
//
// Exit codes: 0 = H0 not rejected (or experiment completed), 1 = H0 rejected,
// 2 = usage/config error, 3 = data error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ksd/ksd.hpp"

namespace {

constexpr int kExitNotRejected = 0;
constexpr int kExitRejected = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

// "gaussian", "rbm:<path>", or a bare path to an RBM JSON file.
ksd::ScoreModel parse_target(const std::string &target, Eigen::Index d) {
    if (target == "gaussian") { return ksd::StandardGaussian{d}; }
    const std::string path = target.rfind("rbm:", 0) == 0 ? target.substr(4) : target;
    return ksd::load_rbm(path);
}

std::optional<std::filesystem::path> rbm_path(const std::string &target) {
    if (target == "gaussian") { return std::nullopt; }
    return target.rfind("rbm:", 0) == 0 ? target.substr(4) : target;
}

std::vector<ksd::EstimatorKind> parse_estimators(const std::string &list) {
    std::vector<ksd::EstimatorKind> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) { out.push_back(ksd::parse_estimator(item)); }
    return out;
}

struct TestArgs {
    std::string dataset;
    std::string format = "csv";
    std::string target = "gaussian";
    std::string kernel = "imq:1,-0.5";
    std::string estimator = "nystrom";
    double m_factor = 4.0;
    double alpha = 0.05;
    std::size_t bootstrap = 500;
    std::uint64_t seed = 0;
    bool json = false;
};

int run_test_command(const TestArgs &args) {
    const ksd::SampleSet x = ksd::ingest_dataset(args.dataset, ksd::parse_format(args.format));
    const ksd::ScoreModel target = parse_target(args.target, x.cols());
    if (ksd::dimension(target) != x.cols()) {
        throw ksd::ConfigError("dataset has d = " + std::to_string(x.cols()) + " but the target has d = " +
                               std::to_string(ksd::dimension(target)));
    }
    const auto kernel = ksd::parse_kernel(args.kernel);
    const ksd::SteinKernel sk{kernel ? *kernel : ksd::KernelParams{ksd::Rbf{ksd::median_heuristic_gamma(x, 1'000'000, args.seed)}}, target};

    ksd::TestConfig config;
    config.alpha = args.alpha;
    config.num_bootstrap = args.bootstrap;
    config.estimator = ksd::test_estimator(ksd::parse_estimator(args.estimator));
    config.m_factor = args.m_factor;
    config.seed = args.seed;
    const ksd::TestReport report = ksd::run_test(sk, x, config);

    if (args.json) {
        nlohmann::json j;
        j["estimator"] = args.estimator;
        j["kernel"] = ksd::describe(sk.kernel);
        j["n"] = report.n;
        j["d"] = x.cols();
        j["m"] = report.m ? nlohmann::json(*report.m) : nlohmann::json(nullptr);
        j["statistic"] = report.statistic;
        j["threshold"] = report.threshold;
        j["p_value"] = report.p_value;
        j["reject"] = report.reject;
        j["alpha"] = args.alpha;
        j["bootstrap"] = args.bootstrap;
        j["wall_ms"] = report.wall_time.count();
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "estimator  " << args.estimator << '\n'
                  << "kernel     " << ksd::describe(sk.kernel) << '\n'
                  << "n, d       " << report.n << ", " << x.cols() << '\n';
        if (report.m) { std::cout << "m          " << *report.m << '\n'; }
        std::cout << "statistic  " << report.statistic << '\n'
                  << "threshold  " << report.threshold << '\n'
                  << "p-value    " << report.p_value << '\n'
                  << "decision   " << (report.reject ? "reject H0" : "do not reject H0") << '\n'
                  << "wall time  " << report.wall_time.count() << " ms\n";
    }
    return report.reject ? kExitRejected : kExitNotRejected;
}

struct ExperimentArgs {
    std::string experiment = "laplace";
    std::string kernel = "imq:1,-0.5";
    std::string estimators = "nystrom";
    std::string dataset;
    std::string format = "csv";
    std::string target = "gaussian";
    std::string out;
};

int run_experiment_command(const ExperimentArgs &args, ksd::ExperimentSpec spec) {
    spec.experiment = ksd::parse_experiment(args.experiment);
    spec.kernel = ksd::parse_kernel(args.kernel);
    spec.estimators = parse_estimators(args.estimators);
    if (spec.experiment == ksd::ExperimentKind::Custom) {
        if (args.dataset.empty()) { throw ksd::ConfigError("custom experiment needs --dataset"); }
        spec.dataset = args.dataset;
        spec.format = ksd::parse_format(args.format);
        spec.rbm_target = rbm_path(args.target);
    }
    const ksd::ExperimentResult result = ksd::run_experiment(spec);
    if (args.out.empty()) {
        ksd::write_csv(std::cout, result);
    } else {
        std::ofstream csv(args.out);
        if (!csv) { throw ksd::DataError("cannot write " + args.out); }
        ksd::write_csv(csv, result);
        std::ofstream json(args.out + ".json");
        if (!json) { throw ksd::DataError("cannot write " + args.out + ".json"); }
        json << ksd::summary_json(spec, result).dump(2) << '\n';
    }
    for (const auto &s : result.summaries) {
        std::cerr << ksd::to_string(s.estimator) << ": ";
        if (s.power) { std::cerr << "power " << *s.power << ", "; }
        std::cerr << "mean wall " << s.mean_wall_ms << " ms, q95 wall " << s.q95_wall_ms << " ms\n";
    }
    return kExitNotRejected;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Kernel Stein discrepancy goodness-of-fit tests (quadratic and Nystrom)"};
    app.require_subcommand(1);

    TestArgs test_args;
    auto *test = app.add_subcommand("test", "Run one goodness-of-fit test on a dataset");
    test->add_option("--dataset", test_args.dataset, "Sample file")->required();
    test->add_option("--format", test_args.format, "csv or raw-f64-le")->capture_default_str();
    test->add_option("--target", test_args.target, "gaussian, or an RBM JSON file (optionally prefixed rbm:)")->capture_default_str();
    test->add_option("--kernel", test_args.kernel, "rbf:GAMMA, imq:C,THETA or median-rbf")->capture_default_str();
    test->add_option("--estimator", test_args.estimator, "v, u or nystrom")->capture_default_str();
    test->add_option("--m-factor", test_args.m_factor, "Nystrom landmarks m = ceil(factor * sqrt(n))")->capture_default_str();
    test->add_option("--alpha", test_args.alpha, "Test level")->capture_default_str();
    test->add_option("--bootstrap", test_args.bootstrap, "Number of wild bootstrap draws D")->capture_default_str();
    test->add_option("--seed", test_args.seed, "Master seed")->capture_default_str();
    test->add_flag("--json", test_args.json, "Print the report as JSON");

    ExperimentArgs exp_args;
    ksd::ExperimentSpec spec;
    auto *exp = app.add_subcommand("experiment", "Repeat tests over simulated data and write a CSV table");
    exp->add_option("--experiment", exp_args.experiment, "runtime, laplace, student-t, rbm or custom")->capture_default_str();
    exp->add_option("--n", spec.n, "Sample size")->capture_default_str();
    exp->add_option("--d", spec.d, "Dimension (visible units for rbm)")->capture_default_str();
    exp->add_option("--m-factor", spec.m_factor, "Nystrom landmarks m = ceil(factor * sqrt(n))")->capture_default_str();
    exp->add_option("--kernel", exp_args.kernel, "rbf:GAMMA, imq:C,THETA or median-rbf")->capture_default_str();
    exp->add_option("--estimators", exp_args.estimators, "Comma-separated list of v, u, nystrom")->capture_default_str();
    exp->add_option("--alpha", spec.alpha, "Test level")->capture_default_str();
    exp->add_option("--bootstrap", spec.num_bootstrap, "Number of wild bootstrap draws D")->capture_default_str();
    exp->add_option("--trials", spec.trials, "Independent repetitions")->capture_default_str();
    exp->add_option("--seed", spec.seed, "Master seed")->capture_default_str();
    exp->add_option("--sigma", spec.sigma, "RBM weight perturbation standard deviation")->capture_default_str();
    exp->add_option("--hidden", spec.rbm_hidden, "RBM hidden units")->capture_default_str();
    exp->add_option("--burn-in", spec.gibbs_burn_in, "Gibbs burn-in sweeps")->capture_default_str();
    exp->add_option("--thinning", spec.gibbs_thinning, "Gibbs thinning")->capture_default_str();
    exp->add_option("--dataset", exp_args.dataset, "Sample file (custom experiment)");
    exp->add_option("--format", exp_args.format, "csv or raw-f64-le")->capture_default_str();
    exp->add_option("--target", exp_args.target, "gaussian, or an RBM JSON file (custom experiment)")->capture_default_str();
    exp->add_option("--out", exp_args.out, "CSV output path; a JSON summary is written to <out>.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (test->parsed()) { return run_test_command(test_args); }
        return run_experiment_command(exp_args, spec);
    } catch (const ksd::DataError &e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ksd::ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
