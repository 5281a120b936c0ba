#include "featvec/synthetic.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace featvec {

namespace {

constexpr std::size_t kPairsDim = 20;

FeatureSchema synthetic_schema(std::size_t d) {
    FeatureSchema s;
    for (std::size_t i = 0; i < d; ++i)
        s.features.push_back({"x" + std::to_string(i), ColumnKind::Numeric});
    s.target = {"y", Task::Classification};
    return s;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Best-member clause values of the three pairs (0,1), (2,3), (4,5).
// Each clause takes the max over member choices, so swapping columns
// within any pair cannot change the score.
double pair_best(std::span<const double> row, std::size_t pair,
                 double threshold, bool greater) {
    const double a = row[2 * pair];
    const double b = row[2 * pair + 1];
    const double va = greater ? (a > threshold ? 1.0 : 0.0)
                              : (a < threshold ? 1.0 : 0.0);
    const double vb = greater ? (b > threshold ? 1.0 : 0.0)
                              : (b < threshold ? 1.0 : 0.0);
    return std::max(va, vb);
}

double clause_score(std::span<const double> row) {
    // Marginal clauses, one per pair.
    double score = 0.0;
    score += 1.7 * pair_best(row, 0, 0.6, true);
    score += 1.7 * pair_best(row, 1, 0.6, true);
    score += 1.7 * pair_best(row, 2, 0.6, true);
    // Interaction clauses over two pairs; the product of per-pair maxima is
    // the max of the product over the four member choices.
    score += 1.3 * pair_best(row, 0, 1.0, true) * pair_best(row, 1, -0.2, false);
    score += 1.3 * pair_best(row, 1, 1.0, true) * pair_best(row, 2, -0.2, false);
    score += 1.3 * pair_best(row, 2, 1.0, true) * pair_best(row, 0, -0.2, false);
    return score;
}

}  // namespace

double exchangeable_pairs_probability(std::span<const double> row) {
    if (row.size() != kPairsDim)
        throw ArgumentError("row must have 20 features");
    return sigmoid(1.6 * (clause_score(row) - 1.55));
}

Dataset gen_exchangeable_pairs(std::size_t n, uint64_t seed) {
    if (n < 1000) throw ArgumentError("n must be >= 1000");
    Dataset ds;
    ds.schema = synthetic_schema(kPairsDim);
    ds.codecs.resize(kPairsDim);
    ds.n_rows = n;
    ds.n_classes = 2;
    ds.target_codec.levels = {"0", "1"};
    ds.values.resize(n * kPairsDim);
    ds.target.resize(n);

    auto rng = make_engine(derive_seed(seed, 0x9a125));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < kPairsDim; ++c)
            ds.values[r * kPairsDim + c] = gauss(rng);
        const double p = exchangeable_pairs_probability(ds.row(r));
        ds.target[r] = unit(rng) < p ? 1.0 : 0.0;
    }
    return ds;
}

namespace {

constexpr std::size_t kGmmDim = 20;
constexpr std::size_t kGmmInformative = 3;

// The mixture itself is fixed; only the draw uses the caller's seed.
// Means and covariances differ across components only in the first three
// coordinates, and the covariance is block-diagonal between the first
// three features and the rest, so features 3..19 are independent of both
// the component label and the label-relevant block.
GaussianMixture make_truth_mixture() {
    GaussianMixture gmm;
    gmm.weights = {0.35, 0.35, 0.30};

    const double mean_block[3][3] = {
        {2.0, 0.0, -1.6}, {-1.8, 1.7, 0.8}, {0.3, -1.9, 2.2}};

    auto tail_rng = make_engine(0xfea7c0de);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto tail = static_cast<Eigen::Index>(kGmmDim - kGmmInformative);
    Eigen::MatrixXd G(tail, tail);
    for (Eigen::Index i = 0; i < tail; ++i)
        for (Eigen::Index j = 0; j < tail; ++j) G(i, j) = gauss(tail_rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::VectorXd evals(tail);
    for (Eigen::Index i = 0; i < tail; ++i)
        evals(i) = 0.6 + (1.6 - 0.6) * static_cast<double>(i) /
                             static_cast<double>(tail - 1);
    const Eigen::MatrixXd tail_cov = Q * evals.asDiagonal() * Q.transpose();

    for (std::size_t z = 0; z < 3; ++z) {
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(kGmmDim);
        for (std::size_t j = 0; j < kGmmInformative; ++j)
            mu(static_cast<Eigen::Index>(j)) = mean_block[z][j];

        Eigen::MatrixXd head(3, 3);
        for (Eigen::Index i = 0; i < 3; ++i)
            for (Eigen::Index j = 0; j < 3; ++j) head(i, j) = gauss(tail_rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> hqr(head);
        Eigen::MatrixXd Hq = hqr.householderQ();
        Eigen::Vector3d hevals(0.7 + 0.15 * static_cast<double>(z), 1.0,
                               1.4 - 0.1 * static_cast<double>(z));
        Eigen::MatrixXd head_cov = Hq * hevals.asDiagonal() * Hq.transpose();

        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kGmmDim, kGmmDim);
        cov.topLeftCorner(3, 3) = head_cov;
        cov.bottomRightCorner(tail, tail) = tail_cov;
        gmm.means.push_back(mu);
        gmm.covariances.push_back(0.5 * (cov + cov.transpose()));
    }
    return gmm;
}

}  // namespace

std::pair<Dataset, GaussianMixture> gen_gmm_nonnull(std::size_t n,
                                                    uint64_t seed) {
    if (n < 1000) throw ArgumentError("n must be >= 1000");
    GaussianMixture gmm = make_truth_mixture();

    std::vector<Eigen::MatrixXd> chol;
    for (const auto& cov : gmm.covariances) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw NumericError("truth covariance not positive definite");
        chol.push_back(llt.matrixL());
    }

    Dataset ds;
    ds.schema = synthetic_schema(kGmmDim);
    ds.codecs.resize(kGmmDim);
    ds.n_rows = n;
    ds.n_classes = 2;
    ds.target_codec.levels = {"0", "1"};
    ds.values.resize(n * kGmmDim);
    ds.target.resize(n);

    const double beta[3] = {1.2, -1.0, 0.8};
    auto rng = make_engine(derive_seed(seed, 0x96d3));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd g(kGmmDim);
    for (std::size_t r = 0; r < n; ++r) {
        const double u = unit(rng);
        std::size_t z = gmm.weights.size() - 1;
        double acc = 0.0;
        for (std::size_t c = 0; c < gmm.weights.size(); ++c) {
            acc += gmm.weights[c];
            if (u < acc) {
                z = c;
                break;
            }
        }
        for (std::size_t j = 0; j < kGmmDim; ++j)
            g(static_cast<Eigen::Index>(j)) = gauss(rng);
        Eigen::VectorXd x = gmm.means[z] + chol[z] * g;
        for (std::size_t j = 0; j < kGmmDim; ++j)
            ds.values[r * kGmmDim + j] = x(static_cast<Eigen::Index>(j));
        const double score = beta[0] * x(0) + beta[1] * x(1) + beta[2] * x(2);
        const double noise = 0.5 * gauss(rng);
        ds.target[r] = score + noise > 0.0 ? 1.0 : 0.0;
    }
    return {std::move(ds), std::move(gmm)};
}

}  // namespace featvec
