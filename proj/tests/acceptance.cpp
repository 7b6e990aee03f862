// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ksd/ksd.hpp"
#include "oracles.hpp"

using namespace ksd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char *name, bool ok, double secs, double budget, const std::string &detail) {
    const bool in_time = secs <= budget;
    if (!(ok && in_time)) { ++failures; }
    std::printf("[%s] %2d %-28s %s (%.2f s, budget %.0f s)\n", ok && in_time ? "PASS" : "FAIL", id, name, detail.c_str(), secs, budget);
    std::fflush(stdout);
}

std::string fmt(const char *f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void stein_diagonal() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(-10.0, 10.0);
    double worst = 0.0;
    for (const double gamma : {0.1, 0.5, 2.0}) {
        const SteinKernel sk{Rbf{gamma}, StandardGaussian{1}};
        for (int i = 0; i < 1000; ++i) {
            const double x = unif(rng);
            const double got = stein_value(sk, std::span<const double>(&x, 1), std::span<const double>(&x, 1));
            worst = std::max(worst, oracle::relative_error(got, x * x + 2.0 * gamma));
        }
    }
    report(1, "analytic stein diagonal", worst <= 1e-12, seconds_since(t0), 1, fmt("max rel err %.2e <= 1e-12", worst));
}

void nystrom_recovery() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (const auto &kern : {KernelParams{Rbf{0.5}}, KernelParams{Imq{1.0, -0.5}}}) {
        const SteinKernel sk{kern, StandardGaussian{2}};
        const SampleSet x = oracle::gaussian_samples(100, 2, 3);
        const SteinGram gram(sk, x);
        const double v = v_statistic(gram).squared_value;
        const double nys = nystrom_statistic(gram, NystromPlan{iota_ids(100), 1e-10, 0}).squared_value;
        worst = std::max(worst, std::abs(nys - v) / v);
    }
    report(2, "exact nystrom recovery", worst <= 1e-8, seconds_since(t0), 5, fmt("max |nys-v|/v %.2e <= 1e-8", worst));
}

void brute_force() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const auto n = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(5, 40)(rng));
        const auto d = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(1, 4)(rng));
        KernelParams kern = Rbf{std::uniform_real_distribution<double>(0.1, 2.0)(rng)};
        if (c % 2) { kern = Imq{std::uniform_real_distribution<double>(0.5, 2.0)(rng), -std::uniform_real_distribution<double>(0.1, 0.9)(rng)}; }
        ScoreModel model = StandardGaussian{d};
        if (c % 3 == 0) { model = random_rbm(d, 2, rng()); }
        const SteinKernel sk{kern, model};
        const SampleSet x = oracle::gaussian_samples(n, d, rng(), 1.5);
        const NystromPlan plan = make_nystrom_plan(n, nystrom_size(n), rng());
        worst = std::max({worst, oracle::relative_error(v_statistic(sk, x).squared_value, oracle::v_loop(sk, x)),
                          oracle::relative_error(u_statistic(sk, x).squared_value, oracle::u_loop(sk, x)),
                          oracle::relative_error(nystrom_statistic(sk, x, plan).squared_value, oracle::nystrom_loop(sk, x, plan.indices, 1e-10))});
    }
    report(3, "brute-force equivalence", worst <= 1e-10, seconds_since(t0), 10, fmt("max rel err %.2e <= 1e-10", worst));
}

void sqrt_rate() {
    const auto t0 = Clock::now();
    const SteinKernel sk{Rbf{0.5}, StandardGaussian{1}};
    const std::vector<double> ns{100, 400, 1600, 6400};
    std::vector<double> mean_v, mean_nys;
    for (const double nd : ns) {
        const auto n = static_cast<Eigen::Index>(nd);
        double sv = 0.0;
        double snys = 0.0;
        for (std::uint64_t s = 0; s < 200; ++s) {
            const SampleSet x = draw_samples(GaussianSampler{1}, n, derive_seed(s, 0));
            const SteinGram gram(sk, x);
            sv += v_statistic(gram).value;
            snys += nystrom_statistic(gram, make_nystrom_plan(n, nystrom_size(n), derive_seed(s, 1))).value;
        }
        mean_v.push_back(sv / 200.0);
        mean_nys.push_back(snys / 200.0);
    }
    const double slope_v = fit_rate(ns, mean_v);
    const double slope_nys = fit_rate(ns, mean_nys);
    auto in_band = [](double s) { return s >= -0.65 && s <= -0.35; };
    report(4, "sqrt-n rate under H0", in_band(slope_v) && in_band(slope_nys), seconds_since(t0), 600,
           fmt("slope V %.3f, Nystrom %.3f in [-0.65,-0.35]", slope_v, slope_nys));
}

void level_control() {
    const auto t0 = Clock::now();
    const SteinKernel sk{Imq{1.0, -0.5}, StandardGaussian{2}};
    int rej_full = 0;
    int rej_nys = 0;
    for (std::uint64_t t = 0; t < 200; ++t) {
        const SampleSet x = draw_samples(GaussianSampler{2}, 500, derive_seed(t, 0));
        TestConfig c;
        c.num_bootstrap = 500;
        c.seed = derive_seed(t, 1);
        c.estimator = TestEstimator::FullV;
        rej_full += run_test(sk, x, c).reject ? 1 : 0;
        c.estimator = TestEstimator::Nystrom;
        rej_nys += run_test(sk, x, c).reject ? 1 : 0;
    }
    const double rf = rej_full / 200.0;
    const double rn = rej_nys / 200.0;
    auto in_band = [](double r) { return r >= 0.02 && r <= 0.09; };
    report(5, "level control", in_band(rf) && in_band(rn), seconds_since(t0), 900,
           fmt("type-I FullV %.3f, Nystrom %.3f in [0.02,0.09]", rf, rn));
}

void laplace_power() {
    const auto t0 = Clock::now();
    std::vector<double> power;
    for (const Eigen::Index d : {1, 3, 5}) {
        const SteinKernel sk{Imq{1.0, -0.5}, StandardGaussian{d}};
        int rej = 0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            const SampleSet x = draw_samples(ProductLaplace{d, 1.0 / std::sqrt(2.0)}, 1000, derive_seed(t, 0));
            TestConfig c;
            c.estimator = TestEstimator::Nystrom;
            c.seed = derive_seed(t, 1);
            rej += run_test(sk, x, c).reject ? 1 : 0;
        }
        power.push_back(rej / 100.0);
    }
    report(6, "laplace power", power[0] >= 0.9 && power[2] >= 0.8, seconds_since(t0), 1800,
           fmt("power d=1 %.2f (>=0.9), d=3 %.2f, d=5 %.2f (>=0.8)", power[0], power[1], power[2]));
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double ks = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) { ++i; }
        while (j < b.size() && b[j] <= v) { ++j; }
        ks = std::max(ks, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return ks;
}

// Checked for both shipped kernels; the criterion does not single one out.
void bootstrap_fidelity() {
    const auto t0 = Clock::now();
    const SampleSet x = draw_samples(GaussianSampler{2}, 500, 17);
    std::vector<double> dist;
    for (const auto &kern : {KernelParams{Rbf{median_heuristic_gamma(x)}}, KernelParams{Imq{1.0, -0.5}}}) {
        const SteinGram gram({kern, StandardGaussian{2}}, x);
        TestConfig c;
        c.num_bootstrap = 2000;
        c.seed = 23;
        const NystromFactor factor(gram, make_nystrom_plan(500, nystrom_size(500), plan_seed(c.seed)));
        dist.push_back(ks_distance(bootstrap_full(gram.full(), c), bootstrap_nystrom(factor, c)));
    }
    report(7, "bootstrap fidelity", dist[0] <= 0.1 && dist[1] <= 0.1, seconds_since(t0), 300,
           fmt("KS distance rbf-median %.4f, imq %.4f <= 0.1", dist[0], dist[1]));
}

void runtime_ratio() {
    const auto t0 = Clock::now();
    const SteinKernel sk{Imq{1.0, -0.5}, StandardGaussian{10}};
    const Eigen::Index n = 10'000;
    const SampleSet x = draw_samples(GaussianSampler{10}, n, 5);
    auto time_ms = [](const std::function<void()> &f) {
        const auto s = Clock::now();
        f();
        return std::chrono::duration<double, std::milli>(Clock::now() - s).count();
    };
    std::vector<double> tv, tn;
    double sink = 0.0;
    for (int r = 0; r < 10; ++r) {
        tv.push_back(time_ms([&] { sink += v_statistic(sk, x).squared_value; }));
        tn.push_back(time_ms([&] { sink += nystrom_statistic(sk, x, make_nystrom_plan(n, nystrom_size(n), r)).squared_value; }));
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[4] + v[5]);
    };
    const double mv = median(tv);
    const double mn = median(tn);
    report(8, "runtime ratio", std::isfinite(sink) && mn <= 0.1 * mv, seconds_since(t0), 1800,
           fmt("median Nystrom %.1f ms / V %.1f ms = %.4f <= 0.1", mn, mv, mn / mv));
}

void effective_dimension_bound() {
    const auto t0 = Clock::now();
    std::vector<double> lambdas;
    for (int e = -10; e <= 4; ++e) { lambdas.push_back(std::pow(10.0, e)); }
    double worst = -1e300;
    int datasets = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        for (const auto &kern : {KernelParams{Rbf{0.5}}, KernelParams{Imq{1.0, -0.5}}}) {
            for (const Eigen::Index d : {1, 3}) {
                const SteinKernel sk{kern, StandardGaussian{d}};
                const SampleSet x = s % 2 ? draw_samples(ProductLaplace{d, 1.0}, 150, s) : draw_samples(GaussianSampler{d}, 150, s);
                const auto curve = effective_dimension(sk, x, lambdas);
                for (std::size_t i = 0; i < lambdas.size(); ++i) {
                    worst = std::max(worst, curve.n_eff[i] - curve.trace_total / lambdas[i]);
                }
                ++datasets;
            }
        }
    }
    report(9, "effective dimension bound", worst <= 1e-9, seconds_since(t0), 60,
           fmt("max n_eff - trace/lambda %.2e <= 1e-9 over %d datasets", worst, datasets));
}

void rbm_score() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const auto visible = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(1, 5)(rng));
        const auto hidden = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(1, 3)(rng));
        const GaussBernoulliRbm rbm = random_rbm(visible, hidden, rng());
        const Vector x = oracle::gaussian_samples(1, visible, rng()).row(0).transpose();
        const Vector fd = oracle::fd_gradient([&](const Vector &v) { return oracle::rbm_log_density(rbm, v); }, x, 1e-5);
        const Vector got = score(ScoreModel{rbm}, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        worst = std::max(worst, (got - fd).norm() / std::max(fd.norm(), 1e-12));
    }
    report(10, "rbm score oracle", worst <= 1e-5, seconds_since(t0), 30, fmt("max rel err %.2e <= 1e-5", worst));
}

}  // namespace

int main() {
    stein_diagonal();
    nystrom_recovery();
    brute_force();
    sqrt_rate();
    level_control();
    laplace_power();
    bootstrap_fidelity();
    runtime_ratio();
    effective_dimension_bound();
    rbm_score();
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
