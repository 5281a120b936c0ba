#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "featvec/dataset.hpp"
#include "featvec/embedding.hpp"

namespace featvec {

struct GaussianMixture {
    std::vector<double> weights;            // sum 1
    std::vector<Eigen::VectorXd> means;     // k vectors of dim d
    std::vector<Eigen::MatrixXd> covariances;  // k SPD matrices

    std::size_t n_components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : means[0].size(); }

    double log_likelihood(const Eigen::MatrixXd& X) const;

    // Posterior P(z | x) per row, n x k.
    Eigen::MatrixXd responsibilities(const Eigen::MatrixXd& X) const;

    nlohmann::json to_json() const;
    static GaussianMixture from_json(const nlohmann::json& j);
    static GaussianMixture load(const std::string& path);
    void save(const std::string& path) const;
};

// EM from k-means++-style seeded initialization; covariances are
// ridge-regularized by eps*I with eps = 1e-6 * mean feature variance.
// Log-likelihood is asserted non-decreasing every iteration.
GaussianMixture fit_gmm(const Eigen::MatrixXd& X, int k, int max_iter,
                        double tol, uint64_t seed);

struct KnockoffSet {
    Eigen::MatrixXd x_tilde;  // n x d, row-aligned with the source data
    std::vector<Eigen::VectorXd> s_vectors;  // per-component diagonal s
};

// Per row: draw the latent component from its posterior, then sample the
// Gaussian conditional knockoff
//   x~ | x ~ N(x - D Szinv (x - mu_z), 2D - D Szinv D),  D = diag(s_z)
// with the equicorrelated construction s_z = min(1, 2 lambda_min(corr))
// scaled to covariance units and shrunk by 0.999. s_scale = 0 is the
// diagnostic mode returning x~ = x exactly. Per-row seeds; parallel-safe.
KnockoffSet sample_knockoffs(const GaussianMixture& gmm,
                             const Eigen::MatrixXd& X, uint64_t seed,
                             int threads = 0, double s_scale = 1.0);

// Reference implementation kept for testing.
KnockoffSet sample_knockoffs_serial(const GaussianMixture& gmm,
                                    const Eigen::MatrixXd& X, uint64_t seed,
                                    double s_scale = 1.0);

struct AnglePermutationResult {
    double p_value = 1.0;
    double observed_stat = 0.0;
    std::vector<double> null_samples;
};

// Observed statistic: mean angular distance over pairs (i, i+d) of the
// 2d-feature embedding. Null: the same statistic under a random perfect
// pairing of the 2d features. p = (1 + #{null <= observed}) / (n_perm + 1).
AnglePermutationResult angle_permutation_test(const FeatureEmbedding& E,
                                              int n_perm, uint64_t seed);

// Feature matrix of a dataset as an Eigen matrix (n x d copy).
Eigen::MatrixXd feature_matrix(const Dataset& ds);

}  // namespace featvec
