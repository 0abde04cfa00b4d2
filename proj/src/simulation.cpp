#include "medgmm/simulation.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <vector>

#include "medgmm/baseline.hpp"
#include "medgmm/inference.hpp"
#include "medgmm/linalg.hpp"
#include "medgmm/parallel.hpp"
#include "medgmm/rng.hpp"
#include "medgmm/second_step.hpp"

namespace medgmm {

Eigen::MatrixXd toeplitz_sigma(double delta, int a, Eigen::Index k) {
    const double scale = 1.0 + delta * static_cast<double>(a);
    if (!(scale > 0.0)) {
        throw EstimationError("mediator covariance scale 1 + delta*A must be positive");
    }
    Eigen::MatrixXd sigma(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            sigma(i, j) = std::pow(2.0, -static_cast<double>(std::abs(i - j))) * scale;
        }
    }
    return sigma;
}

namespace {

constexpr Eigen::Index kMediators = 3;

struct MediatorModel {
    double intercept;
    double a_coef;
    double x_coef;
};
constexpr MediatorModel kMediatorModels[kMediators] = {
    {1.2, 1.5, 1.1},
    {0.5, 1.2, 1.8},
    {1.3, 1.0, 0.5},
};

}  // namespace

SimDraw generate_with_confounder(const SimConfig& config, std::uint64_t replicate) {
    const Eigen::Index n = config.n;
    const Eigen::LLT<Eigen::MatrixXd> chol0(toeplitz_sigma(config.delta, 0, kMediators));
    const Eigen::LLT<Eigen::MatrixXd> chol1(toeplitz_sigma(config.delta, 1, kMediators));
    if (chol0.info() != Eigen::Success || chol1.info() != Eigen::Success) {
        throw EstimationError("mediator covariance is not positive definite");
    }
    const Eigen::MatrixXd l0 = chol0.matrixL();
    const Eigen::MatrixXd l1 = chol1.matrixL();

    RngStream rng_x(config.seed, replicate, RngStream::kCovariate);
    RngStream rng_u(config.seed, replicate, RngStream::kConfounder);
    RngStream rng_a(config.seed, replicate, RngStream::kExposure);
    RngStream rng_m(config.seed, replicate, RngStream::kMediator);
    RngStream rng_y(config.seed, replicate, RngStream::kOutcome);

    SimDraw draw;
    Dataset& ds = draw.data;
    ds.n = n;
    ds.k = kMediators;
    ds.p = 1;
    ds.exposure_binary = true;
    ds.y.resize(n);
    ds.a.resize(n);
    ds.m.resize(n, kMediators);
    ds.x.resize(n, 1);
    draw.u.resize(n);
    ds.outcome_name = "Y";
    ds.exposure_name = "A";
    ds.mediator_names = {"M1", "M2", "M3"};
    ds.covariate_names = {"X1"};

    Eigen::VectorXd z(kMediators);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = rng_x.next_normal();
        const double u = 1.0 + 0.5 * x + rng_u.next_normal();
        const double a = rng_a.next_bernoulli(expit(0.8 + 1.2 * x));

        for (Eigen::Index j = 0; j < kMediators; ++j) z(j) = rng_m.next_normal();
        const Eigen::MatrixXd& l = a == 1.0 ? l1 : l0;
        const Eigen::VectorXd noise = l * z;
        for (Eigen::Index j = 0; j < kMediators; ++j) {
            const MediatorModel& mm = kMediatorModels[j];
            ds.m(i, j) =
                mm.intercept + mm.a_coef * a + mm.x_coef * x + config.eta * u + noise(j);
        }

        ds.y(i) = 1.3 + 2.5 * a + 1.2 * ds.m(i, 0) + 0.8 * ds.m(i, 1) + ds.m(i, 2) +
                  1.5 * x + config.eta * u + rng_y.next_normal();
        ds.a(i) = a;
        ds.x(i, 0) = x;
        draw.u(i) = u;
    }
    return draw;
}

Dataset generate_dataset(const SimConfig& config, std::uint64_t replicate) {
    return generate_with_confounder(config, replicate).data;
}

namespace {

struct ReplicateEstimates {
    std::optional<std::array<double, 4>> gmm;  // nde, se_nde, nie, se_nie
    std::optional<std::array<double, 4>> regression;
};

MetricRow aggregate(const std::string& estimator, const std::string& effect, double truth,
                    const std::vector<double>& est, const std::vector<double>& se) {
    MetricRow row;
    row.estimator = estimator;
    row.effect = effect;
    row.used = static_cast<int>(est.size());
    if (est.empty()) return row;

    const double n = static_cast<double>(est.size());
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= n;
    row.abs_bias = std::abs(mean - truth);

    double ss = 0.0;
    for (double e : est) ss += (e - mean) * (e - mean);
    row.mc_sd = est.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

    double mean_var = 0.0;
    for (double s : se) mean_var += s * s;
    row.mean_se = std::sqrt(mean_var / n);

    int covered = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (std::abs(est[i] - truth) <= kZ95 * se[i]) ++covered;
    }
    row.cov95 = static_cast<double>(covered) / n;
    return row;
}

}  // namespace

McResult run_monte_carlo(const SimConfig& config) {
    if (config.n < 1 || config.reps < 1) {
        throw EstimationError("simulation requires n >= 1 and reps >= 1");
    }

    std::vector<ReplicateEstimates> results(config.reps);
    const Tolerances tol;

    parallel_for_indexed(config.reps, config.threads, [&](Eigen::Index r) {
        const Dataset ds = generate_dataset(config, static_cast<std::uint64_t>(r));
        ReplicateEstimates& out = results[r];

        try {
            const FirstStepFit first = fit_first_step(ds, tol);
            const ThetaFit theta = solve_theta(assemble_moment_system(ds, first), tol);
            const StackedFit stacked = stacked_sandwich(ds, first, theta, tol);
            const EffectReport rep = delta_effects(first, theta, stacked, ds.mediator_names);
            out.gmm = {rep.nde, rep.se_nde, rep.nie, rep.se_nie};
        } catch (const std::runtime_error&) {
            out.gmm = std::nullopt;
        }

        try {
            const RegressionFit fit = fit_outcome_regression(ds, tol);
            const EffectReport rep = regression_effects(fit);
            out.regression = {rep.nde, rep.se_nde, rep.nie, rep.se_nie};
        } catch (const std::runtime_error&) {
            out.regression = std::nullopt;
        }
    });

    McResult mc;
    mc.config = config;
    std::vector<double> gmm_nde, gmm_nde_se, gmm_nie, gmm_nie_se;
    std::vector<double> reg_nde, reg_nde_se, reg_nie, reg_nie_se;
    for (const auto& res : results) {
        if (res.gmm) {
            gmm_nde.push_back((*res.gmm)[0]);
            gmm_nde_se.push_back((*res.gmm)[1]);
            gmm_nie.push_back((*res.gmm)[2]);
            gmm_nie_se.push_back((*res.gmm)[3]);
        } else {
            ++mc.failed_gmm;
        }
        if (res.regression) {
            reg_nde.push_back((*res.regression)[0]);
            reg_nde_se.push_back((*res.regression)[1]);
            reg_nie.push_back((*res.regression)[2]);
            reg_nie_se.push_back((*res.regression)[3]);
        } else {
            ++mc.failed_regression;
        }
    }

    mc.rows.push_back(aggregate("gmm", "nde", SimConfig::nde_true, gmm_nde, gmm_nde_se));
    mc.rows.push_back(aggregate("gmm", "nie", SimConfig::nie_true, gmm_nie, gmm_nie_se));
    mc.rows.push_back(aggregate("regression", "nde", SimConfig::nde_true, reg_nde, reg_nde_se));
    mc.rows.push_back(aggregate("regression", "nie", SimConfig::nie_true, reg_nie, reg_nie_se));

    const int worst = std::max(mc.failed_gmm, mc.failed_regression);
    mc.unreliable = worst * 20 > config.reps;  // more than 5% failed
    return mc;
}

std::string format_metric(double value) {
    if (!std::isfinite(value)) return "nan";
    const bool negative = value < 0.0;
    const double scaled = std::abs(value) * 1000.0;
    auto units = static_cast<long long>(std::floor(scaled));
    const double frac = scaled - static_cast<double>(units);

    // Round-half-even at the third decimal; the half case is detected within
    // a small window to absorb binary representation error.
    if (std::abs(frac - 0.5) <= 1e-9) {
        if (units % 2 != 0) ++units;
    } else if (frac > 0.5) {
        ++units;
    }

    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%lld.%03lld", negative && units != 0 ? "-" : "",
                  units / 1000, units % 1000);
    return buf;
}

std::string format_table(const std::vector<MetricRow>& rows) {
    if (rows.empty()) {
        throw EstimationError("format_table requires at least one metric row");
    }

    auto find = [&](const std::string& estimator, const std::string& effect) -> const MetricRow* {
        for (const auto& row : rows) {
            if (row.estimator == estimator && row.effect == effect) return &row;
        }
        return nullptr;
    };
    const MetricRow* cols[4] = {find("gmm", "nde"), find("gmm", "nie"),
                                find("regression", "nde"), find("regression", "nie")};

    auto pick = [&](const MetricRow* row, int metric) -> std::string {
        if (row == nullptr) return "-";
        switch (metric) {
            case 0: return format_metric(row->abs_bias);
            case 1: return format_metric(row->mc_sd);
            case 2: return format_metric(row->mean_se);
            default: return format_metric(row->cov95);
        }
    };

    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s %10s\n", "", "NDE", "NIE",
                  "NDE_reg", "NIE_reg");
    out << line;

    const char* labels[4] = {"|Bias|", "sqrt(Var)", "sqrt(EVar)", "Cov95"};
    for (int metric = 0; metric < 4; ++metric) {
        std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s %10s\n", labels[metric],
                      pick(cols[0], metric).c_str(), pick(cols[1], metric).c_str(),
                      pick(cols[2], metric).c_str(), pick(cols[3], metric).c_str());
        out << line;
    }
    return out.str();
}

}  // namespace medgmm
