#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "medgmm/dataset.hpp"

namespace medgmm {

// Data generating process for the Monte Carlo study. One standard-normal
// covariate, a hidden confounder U, a binary exposure, three mediators with
// exposure-scaled Toeplitz covariance, and a linear outcome:
//   X ~ N(0,1)                U | X ~ N(1 + 0.5 X, 1)
//   A | X ~ Bernoulli(expit(0.8 + 1.2 X))
//   M | A,X,U ~ N((1.2 + 1.5A + 1.1X + eta U,
//                  0.5 + 1.2A + 1.8X + eta U,
//                  1.3 + 1.0A + 0.5X + eta U), Sigma(delta, A))
//   Y | A,M,X,U ~ N(1.3 + 2.5A + 1.2 M1 + 0.8 M2 + M3 + 1.5 X + eta U, 1)
// The implied true effects are NDE = 2.5 and
// NIE = 1.5*1.2 + 1.2*0.8 + 1.0*1.0 = 3.76.
struct SimConfig {
    Eigen::Index n = 800;
    double eta = 0.0;    // unmeasured-confounding strength
    double delta = 2.0;  // heteroscedasticity magnitude
    int reps = 1000;
    std::uint64_t seed = 1;
    int threads = 1;

    static constexpr double nde_true = 2.5;
    static constexpr double nie_true = 3.76;
};

struct MetricRow {
    std::string estimator;  // "gmm" or "regression"
    std::string effect;     // "nde" or "nie"
    double abs_bias = 0.0;
    double mc_sd = 0.0;    // Monte Carlo SD of the point estimates
    double mean_se = 0.0;  // sqrt of the mean of the variance estimates
    double cov95 = 0.0;    // fraction of 95% intervals covering the truth
    int used = 0;          // replicates contributing to the aggregates
};

struct McResult {
    SimConfig config;
    std::vector<MetricRow> rows;  // gmm x {nde, nie}, regression x {nde, nie}
    int failed_gmm = 0;
    int failed_regression = 0;
    bool unreliable = false;  // more than 5% of replicates failed
};

// Sigma[i][j] = 2^{-|i-j|} (1 + delta a); requires 1 + delta a > 0.
Eigen::MatrixXd toeplitz_sigma(double delta, int a, Eigen::Index k);

// One replicate's dataset; the confounder is generated and then discarded.
// Deterministic given (config.seed, replicate).
Dataset generate_dataset(const SimConfig& config, std::uint64_t replicate);

// Same draw with the hidden confounder kept, for validation.
struct SimDraw {
    Dataset data;
    Eigen::VectorXd u;
};
SimDraw generate_with_confounder(const SimConfig& config, std::uint64_t replicate);

// Runs the replicate grid: per replicate both estimators are fit with
// sandwich standard errors, failures are excluded and counted, and the four
// metric rows are aggregated. Deterministic for a given config regardless of
// thread count.
McResult run_monte_carlo(const SimConfig& config);

// Aligned text grid, three decimals, values below 0.0005 printed as 0.000.
std::string format_table(const std::vector<MetricRow>& rows);

// Three-decimal formatting with round-half-even at the third decimal.
std::string format_metric(double value);

}  // namespace medgmm
