#include "featvec/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace featvec {

namespace {

void check_indices(std::span<const Sentence> sentences, std::size_t d) {
    for (const Sentence& s : sentences)
        for (int32_t f : s)
            if (f < 0 || static_cast<std::size_t>(f) >= d)
                throw ArgumentError("sentence feature index " +
                                    std::to_string(f) + " out of range for d=" +
                                    std::to_string(d));
}

void accumulate_sentence(const Sentence& s, std::size_t d, int w,
                         std::vector<uint64_t>& counts) {
    const std::size_t L = s.size();
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t jmax = std::min(L, i + static_cast<std::size_t>(w) + 1);
        for (std::size_t j = i + 1; j < jmax; ++j) {
            const auto a = static_cast<std::size_t>(s[i]);
            const auto b = static_cast<std::size_t>(s[j]);
            counts[a * d + b]++;
            counts[b * d + a]++;
        }
    }
}

CooccurrenceMatrix from_counts(const std::vector<uint64_t>& counts,
                               std::size_t d, int w) {
    CooccurrenceMatrix M;
    M.d = d;
    M.window = w;
    M.m.resize(d * d);
    for (std::size_t i = 0; i < counts.size(); ++i)
        M.m[i] = static_cast<double>(counts[i]);
    return M;
}

}  // namespace

double CooccurrenceMatrix::total() const {
    return std::accumulate(m.begin(), m.end(), 0.0);
}

CooccurrenceMatrix build_cooccurrence(std::span<const Sentence> sentences,
                                      std::size_t d, int window,
                                      int threads) {
    if (window < 1) throw ArgumentError("window must be >= 1");
    if (d < 1) throw ArgumentError("d must be >= 1");
    check_indices(sentences, d);
    const int T = resolve_threads(threads);

    std::vector<std::vector<uint64_t>> shards;
#pragma omp parallel num_threads(T)
    {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
        const int nt = omp_get_num_threads();
#else
        const int tid = 0;
        const int nt = 1;
#endif
#pragma omp single
        shards.assign(static_cast<std::size_t>(nt),
                      std::vector<uint64_t>(d * d, 0));
        auto& local = shards[static_cast<std::size_t>(tid)];
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(sentences.size());
             ++i) {
            accumulate_sentence(sentences[static_cast<std::size_t>(i)], d,
                                window, local);
        }
    }
    std::vector<uint64_t> counts(d * d, 0);
    for (const auto& shard : shards)
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += shard[i];
    return from_counts(counts, d, window);
}

CooccurrenceMatrix build_cooccurrence_serial(
    std::span<const Sentence> sentences, std::size_t d, int window) {
    if (window < 1) throw ArgumentError("window must be >= 1");
    if (d < 1) throw ArgumentError("d must be >= 1");
    check_indices(sentences, d);
    std::vector<uint64_t> counts(d * d, 0);
    for (const Sentence& s : sentences)
        accumulate_sentence(s, d, window, counts);
    return from_counts(counts, d, window);
}

FeatureEmbedding embed(const CooccurrenceMatrix& M) {
    const std::size_t d = M.d;
    if (d == 0) throw ArgumentError("empty co-occurrence matrix");
    const bool all_zero =
        std::all_of(M.m.begin(), M.m.end(), [](double v) { return v == 0.0; });
    if (all_zero)
        throw NumericError("degenerate co-occurrence matrix: all zeros");

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        A(M.m.data(), static_cast<Eigen::Index>(d),
          static_cast<Eigen::Index>(d));
    Eigen::MatrixXd dense = A;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU);
    Eigen::MatrixXd U = svd.matrixU();
    Eigen::VectorXd sigma = svd.singularValues();

    // Sign convention: the largest-|entry| coordinate of each left singular
    // vector points positive (first index wins ties).
    const int rank2 = std::min<int>(2, static_cast<int>(sigma.size()));
    for (int k = 0; k < rank2; ++k) {
        Eigen::Index arg = 0;
        U.col(k).cwiseAbs().maxCoeff(&arg);
        if (U(arg, k) < 0.0) U.col(k) = -U.col(k);
    }

    FeatureEmbedding E;
    E.d = d;
    E.vectors.resize(d, {0.0, 0.0});
    E.singular_values = {rank2 > 0 ? sigma(0) : 0.0,
                         rank2 > 1 ? sigma(1) : 0.0};
    for (std::size_t i = 0; i < d; ++i) {
        E.vectors[i][0] = E.singular_values[0] *
                          U(static_cast<Eigen::Index>(i), 0);
        E.vectors[i][1] =
            rank2 > 1 ? E.singular_values[1] * U(static_cast<Eigen::Index>(i), 1)
                      : 0.0;
    }
    // sum_k sigma_k^2 equals the squared Frobenius norm of the counts.
    const double total_var = dense.squaredNorm();
    E.explained_variance = (E.singular_values[0] * E.singular_values[0] +
                            E.singular_values[1] * E.singular_values[1]) /
                           total_var;
    return E;
}

std::vector<double> importance(const FeatureEmbedding& E) {
    std::vector<double> out(E.d);
    for (std::size_t i = 0; i < E.d; ++i)
        out[i] = std::hypot(E.vectors[i][0], E.vectors[i][1]);
    return out;
}

double angular_distance(const std::array<double, 2>& a,
                        const std::array<double, 2>& b) {
    if ((a[0] == 0.0 && a[1] == 0.0) || (b[0] == 0.0 && b[1] == 0.0))
        throw NumericError("undefined angle for a zero vector");
    double diff = std::fabs(std::atan2(a[1], a[0]) - std::atan2(b[1], b[0]));
    if (diff > M_PI) diff = 2.0 * M_PI - diff;
    return diff;
}

void write_embedding_tsv(const FeatureEmbedding& E,
                         std::span<const std::string> names,
                         const std::string& path) {
    if (names.size() != E.d)
        throw ArgumentError("name count does not match embedding size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "feature_name\tvx\tvy\timportance\tangle_degrees\n";
    char buf[256];
    for (std::size_t i = 0; i < E.d; ++i) {
        const double vx = E.vectors[i][0];
        const double vy = E.vectors[i][1];
        const double norm = std::hypot(vx, vy);
        double angle = 0.0;
        if (norm > 0.0) {
            angle = std::atan2(vy, vx) * 180.0 / M_PI;
            if (angle < 0.0) angle += 360.0;
        }
        std::snprintf(buf, sizeof(buf), "%.10g\t%.10g\t%.10g\t%.6f\n", vx, vy,
                      norm, angle);
        out << names[i] << '\t' << buf;
    }
}

}  // namespace featvec
