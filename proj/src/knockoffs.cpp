#include "featvec/knockoffs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace featvec {

namespace {

constexpr double kCovShrink = 0.999;

double mean_feature_variance(const Eigen::MatrixXd& X) {
    const auto n = static_cast<double>(X.rows());
    Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::RowVectorXd var =
        (X.rowwise() - mean).array().square().colwise().sum() / n;
    return var.mean();
}

// Row-wise log density of every component plus the weight term:
// out(i, z) = log w_z + log N(x_i; mu_z, Sigma_z).
Eigen::MatrixXd weighted_log_densities(const GaussianMixture& gmm,
                                       const Eigen::MatrixXd& X) {
    const auto n = X.rows();
    const auto d = X.cols();
    const auto k = static_cast<Eigen::Index>(gmm.n_components());
    Eigen::MatrixXd out(n, k);
    for (Eigen::Index z = 0; z < k; ++z) {
        Eigen::LLT<Eigen::MatrixXd> llt(gmm.covariances[static_cast<std::size_t>(z)]);
        if (llt.info() != Eigen::Success)
            throw NumericError("component covariance is not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(L(i, i));
        log_det *= 2.0;

        Eigen::MatrixXd centered =
            X.rowwise() - gmm.means[static_cast<std::size_t>(z)].transpose();
        Eigen::MatrixXd y =
            llt.matrixL().solve(centered.transpose());  // d x n
        Eigen::VectorXd quad = y.colwise().squaredNorm();
        const double log_norm =
            -0.5 * (static_cast<double>(d) * std::log(2.0 * M_PI) + log_det);
        out.col(z) =
            (-0.5 * quad).array() + log_norm +
            std::log(std::max(gmm.weights[static_cast<std::size_t>(z)],
                              1e-300));
    }
    return out;
}

// Returns total log-likelihood; fills resp with posterior responsibilities
// when non-null.
double log_likelihood_impl(const GaussianMixture& gmm,
                           const Eigen::MatrixXd& X,
                           Eigen::MatrixXd* resp) {
    Eigen::MatrixXd wld = weighted_log_densities(gmm, X);
    double total = 0.0;
    if (resp) resp->resize(X.rows(), wld.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double m = wld.row(i).maxCoeff();
        const double lse =
            m + std::log((wld.row(i).array() - m).exp().sum());
        total += lse;
        if (resp) resp->row(i) = (wld.row(i).array() - lse).exp();
    }
    return total;
}

}  // namespace

double GaussianMixture::log_likelihood(const Eigen::MatrixXd& X) const {
    return log_likelihood_impl(*this, X, nullptr);
}

Eigen::MatrixXd GaussianMixture::responsibilities(
    const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd resp;
    log_likelihood_impl(*this, X, &resp);
    return resp;
}

GaussianMixture fit_gmm(const Eigen::MatrixXd& X, int k, int max_iter,
                        double tol, uint64_t seed) {
    const auto n = X.rows();
    const auto d = X.cols();
    if (k < 1) throw ArgumentError("k must be >= 1");
    if (max_iter < 1) throw ArgumentError("max_iter must be >= 1");
    if (n <= d)
        throw DataError("GMM fit is ill-posed: need n > d, got n=" +
                        std::to_string(n) + ", d=" + std::to_string(d));

    const double ridge = 1e-6 * mean_feature_variance(X);
    auto rng = make_engine(derive_seed(seed, 0x6e6e));

    // k-means++-style center seeding.
    std::vector<Eigen::Index> centers;
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.push_back(first(rng));
    Eigen::VectorXd dist2 =
        (X.rowwise() - X.row(centers[0])).rowwise().squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(centers.size()) < k) {
        const double total = dist2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = unit(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += dist2(i);
                if (acc >= u) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        centers.push_back(pick);
        dist2 = dist2.cwiseMin(
            (X.rowwise() - X.row(pick)).rowwise().squaredNorm());
    }

    GaussianMixture gmm;
    gmm.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
    Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mean;
    Eigen::MatrixXd global_cov =
        centered.transpose() * centered / static_cast<double>(n) +
        ridge * Eigen::MatrixXd::Identity(d, d);
    for (int z = 0; z < k; ++z) {
        gmm.means.push_back(X.row(centers[static_cast<std::size_t>(z)]));
        gmm.covariances.push_back(global_cov);
    }

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::MatrixXd resp;
        const double ll = log_likelihood_impl(gmm, X, &resp);
        if (!std::isfinite(ll))
            throw NumericError("non-finite likelihood in EM");
        if (iter > 0) {
            if (ll + 1e-7 * (1.0 + std::fabs(ll)) < prev_ll)
                throw NumericError("EM log-likelihood decreased");
            if (ll - prev_ll < tol) break;
        }
        prev_ll = ll;

        Eigen::VectorXd nk = resp.colwise().sum();
        for (int z = 0; z < k; ++z) {
            const double weight = std::max(nk(z), 1e-10);
            gmm.weights[static_cast<std::size_t>(z)] =
                weight / static_cast<double>(n);
            Eigen::VectorXd mu =
                (resp.col(z).transpose() * X).transpose() / weight;
            Eigen::MatrixXd diff = X.rowwise() - mu.transpose();
            Eigen::MatrixXd cov =
                diff.transpose() * (resp.col(z).asDiagonal() * diff) / weight +
                ridge * Eigen::MatrixXd::Identity(d, d);
            gmm.means[static_cast<std::size_t>(z)] = mu;
            gmm.covariances[static_cast<std::size_t>(z)] =
                0.5 * (cov + cov.transpose());
        }
        const double wsum = std::accumulate(gmm.weights.begin(),
                                            gmm.weights.end(), 0.0);
        for (double& w : gmm.weights) w /= wsum;
    }
    return gmm;
}

namespace {

struct ComponentSampler {
    Eigen::LLT<Eigen::MatrixXd> cov_llt;    // Sigma_z
    Eigen::LLT<Eigen::MatrixXd> cond_llt;   // 2D - D Sigma^-1 D
    Eigen::VectorXd s;
    Eigen::VectorXd mean;
};

std::vector<ComponentSampler> prepare_samplers(const GaussianMixture& gmm,
                                               double s_scale) {
    const auto d = static_cast<Eigen::Index>(gmm.dim());
    std::vector<ComponentSampler> out(gmm.n_components());
    for (std::size_t z = 0; z < gmm.n_components(); ++z) {
        const Eigen::MatrixXd& cov = gmm.covariances[z];
        ComponentSampler& cs = out[z];
        cs.mean = gmm.means[z];
        cs.cov_llt.compute(cov);
        if (cs.cov_llt.info() != Eigen::Success)
            throw NumericError("covariance of component " +
                               std::to_string(z) +
                               " is not positive definite");

        Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
        Eigen::MatrixXd corr =
            sd.cwiseInverse().asDiagonal() * cov *
            sd.cwiseInverse().asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
        const double lambda_min = es.eigenvalues().minCoeff();
        const double s_unit = std::min(1.0, 2.0 * lambda_min);
        // Equicorrelated construction scaled back to covariance units.
        cs.s = kCovShrink * s_scale * s_unit * cov.diagonal();

        Eigen::MatrixXd sinv_d = cs.cov_llt.solve(
            Eigen::MatrixXd(cs.s.asDiagonal()));  // Sigma^-1 D
        Eigen::MatrixXd cond =
            2.0 * Eigen::MatrixXd(cs.s.asDiagonal()) -
            cs.s.asDiagonal() * sinv_d;
        cond = 0.5 * (cond + cond.transpose());
        cs.cond_llt.compute(cond);
        if (cs.cond_llt.info() != Eigen::Success)
            throw NumericError(
                "conditional knockoff covariance of component " +
                std::to_string(z) + " is not positive definite");
        (void)d;
    }
    return out;
}

void sample_row(const GaussianMixture& gmm,
                const std::vector<ComponentSampler>& samplers,
                const Eigen::MatrixXd& X, const Eigen::MatrixXd& posterior,
                Eigen::MatrixXd& x_tilde, Eigen::Index i, uint64_t seed) {
    auto rng = make_engine(derive_seed(seed, static_cast<uint64_t>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    std::size_t z = gmm.n_components() - 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < gmm.n_components(); ++c) {
        acc += posterior(i, static_cast<Eigen::Index>(c));
        if (u < acc) {
            z = c;
            break;
        }
    }
    const ComponentSampler& cs = samplers[z];
    Eigen::VectorXd x = X.row(i);
    Eigen::VectorXd onto = cs.cov_llt.solve(x - cs.mean);
    Eigen::VectorXd mean = x - cs.s.cwiseProduct(onto);

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd g(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) g(j) = gauss(rng);
    x_tilde.row(i) =
        (mean + Eigen::MatrixXd(cs.cond_llt.matrixL()) * g).transpose();
}

KnockoffSet sample_impl(const GaussianMixture& gmm, const Eigen::MatrixXd& X,
                        uint64_t seed, int threads, double s_scale,
                        bool parallel) {
    if (gmm.dim() != static_cast<std::size_t>(X.cols()))
        throw ArgumentError("mixture dimension does not match the data");
    if (gmm.n_components() == 0) throw ArgumentError("empty mixture");
    if (s_scale < 0.0) throw ArgumentError("s_scale must be >= 0");

    KnockoffSet ks;
    if (s_scale == 0.0) {
        // Diagnostic: s = 0 collapses the conditional law onto x itself.
        ks.x_tilde = X;
        ks.s_vectors.assign(gmm.n_components(),
                            Eigen::VectorXd::Zero(X.cols()));
        return ks;
    }

    std::vector<ComponentSampler> samplers = prepare_samplers(gmm, s_scale);
    Eigen::MatrixXd posterior;
    log_likelihood_impl(gmm, X, &posterior);

    ks.x_tilde.resize(X.rows(), X.cols());
    for (const auto& cs : samplers) ks.s_vectors.push_back(cs.s);

    if (parallel) {
        const int T = resolve_threads(threads);
#pragma omp parallel for num_threads(T) schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(X.rows());
             ++i) {
            sample_row(gmm, samplers, X, posterior, ks.x_tilde,
                       static_cast<Eigen::Index>(i), seed);
        }
    } else {
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            sample_row(gmm, samplers, X, posterior, ks.x_tilde, i, seed);
    }
    return ks;
}

}  // namespace

KnockoffSet sample_knockoffs(const GaussianMixture& gmm,
                             const Eigen::MatrixXd& X, uint64_t seed,
                             int threads, double s_scale) {
    return sample_impl(gmm, X, seed, threads, s_scale, true);
}

KnockoffSet sample_knockoffs_serial(const GaussianMixture& gmm,
                                    const Eigen::MatrixXd& X, uint64_t seed,
                                    double s_scale) {
    return sample_impl(gmm, X, seed, 1, s_scale, false);
}

AnglePermutationResult angle_permutation_test(const FeatureEmbedding& E,
                                              int n_perm, uint64_t seed) {
    if (E.d < 2 || E.d % 2 != 0)
        throw ArgumentError(
            "embedding must hold original and knockoff features");
    if (n_perm < 100) throw ArgumentError("n_perm must be >= 100");
    const std::size_t d = E.d / 2;

    AnglePermutationResult res;
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        sum += angular_distance(E.vectors[i], E.vectors[i + d]);
    res.observed_stat = sum / static_cast<double>(d);

    auto rng = make_engine(derive_seed(seed, 0xa27e));
    std::vector<std::size_t> idx(E.d);
    std::iota(idx.begin(), idx.end(), 0);
    res.null_samples.reserve(static_cast<std::size_t>(n_perm));
    std::size_t count_leq = 0;
    for (int p = 0; p < n_perm; ++p) {
        std::shuffle(idx.begin(), idx.end(), rng);
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            s += angular_distance(E.vectors[idx[2 * j]],
                                  E.vectors[idx[2 * j + 1]]);
        s /= static_cast<double>(d);
        res.null_samples.push_back(s);
        if (s <= res.observed_stat) ++count_leq;
    }
    res.p_value = (1.0 + static_cast<double>(count_leq)) /
                  (static_cast<double>(n_perm) + 1.0);
    return res;
}

Eigen::MatrixXd feature_matrix(const Dataset& ds) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(ds.n_rows),
                      static_cast<Eigen::Index>(ds.dim()));
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        for (std::size_t c = 0; c < ds.dim(); ++c)
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                ds.at(r, c);
    return X;
}

nlohmann::json GaussianMixture::to_json() const {
    nlohmann::json j;
    j["weights"] = weights;
    j["means"] = nlohmann::json::array();
    j["covariances"] = nlohmann::json::array();
    for (std::size_t z = 0; z < n_components(); ++z) {
        j["means"].push_back(std::vector<double>(
            means[z].data(), means[z].data() + means[z].size()));
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < covariances[z].rows(); ++r) {
            std::vector<double> row(
                static_cast<std::size_t>(covariances[z].cols()));
            for (Eigen::Index c = 0; c < covariances[z].cols(); ++c)
                row[static_cast<std::size_t>(c)] = covariances[z](r, c);
            rows.push_back(std::move(row));
        }
        j["covariances"].push_back(std::move(rows));
    }
    return j;
}

GaussianMixture GaussianMixture::from_json(const nlohmann::json& j) {
    GaussianMixture gmm;
    gmm.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& m : j.at("means")) {
        auto v = m.get<std::vector<double>>();
        gmm.means.push_back(
            Eigen::Map<Eigen::VectorXd>(v.data(),
                                        static_cast<Eigen::Index>(v.size())));
    }
    for (const auto& c : j.at("covariances")) {
        auto rows = c.get<std::vector<std::vector<double>>>();
        const auto d = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd cov(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index cc = 0; cc < d; ++cc)
                cov(r, cc) = rows[static_cast<std::size_t>(r)]
                                 [static_cast<std::size_t>(cc)];
        gmm.covariances.push_back(cov);
    }
    if (gmm.weights.size() != gmm.means.size() ||
        gmm.weights.size() != gmm.covariances.size())
        throw DataError("inconsistent mixture document");
    return gmm;
}

GaussianMixture GaussianMixture::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mixture file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad mixture JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

void GaussianMixture::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write mixture file: " + path);
    out << to_json().dump() << "\n";
}

}  // namespace featvec
