#include <doctest.h>

#include <cmath>
#include <random>

#include "featvec/embedding.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace featvec;

namespace {

std::vector<Sentence> random_sentences(std::size_t count, std::size_t d,
                                       std::size_t max_len, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::uniform_int_distribution<int32_t> feat(0,
                                                static_cast<int32_t>(d - 1));
    std::vector<Sentence> out(count);
    for (auto& s : out) {
        s.resize(len(rng));
        for (auto& f : s) f = feat(rng);
    }
    return out;
}

CooccurrenceMatrix matrix_from(std::vector<double> m, std::size_t d, int w) {
    CooccurrenceMatrix M;
    M.d = d;
    M.window = w;
    M.m = std::move(m);
    return M;
}

}  // namespace

TEST_CASE("empty sentence set gives the zero matrix") {
    CooccurrenceMatrix M = build_cooccurrence({}, 3, 3);
    CHECK(M.total() == 0.0);
    CHECK(M.m.size() == 9);
}

TEST_CASE("one sentence [0,1] gives the single symmetric pair") {
    std::vector<Sentence> sentences = {{0, 1}};
    CooccurrenceMatrix M = build_cooccurrence(sentences, 2, 3);
    CHECK(M.at(0, 1) == 1.0);
    CHECK(M.at(1, 0) == 1.0);
    CHECK(M.at(0, 0) == 0.0);
    CHECK(M.at(1, 1) == 0.0);
}

TEST_CASE("repeated features accumulate on the diagonal") {
    std::vector<Sentence> sentences = {{2, 2}};
    CooccurrenceMatrix M = build_cooccurrence(sentences, 3, 2);
    CHECK(M.at(2, 2) == 2.0);  // one pair, both increments on the diagonal
}

TEST_CASE("window limits the counted pairs") {
    std::vector<Sentence> sentences = {{0, 1, 2, 3}};
    CooccurrenceMatrix M = build_cooccurrence(sentences, 4, 1);
    CHECK(M.at(0, 1) == 1.0);
    CHECK(M.at(1, 2) == 1.0);
    CHECK(M.at(2, 3) == 1.0);
    CHECK(M.at(0, 2) == 0.0);
    CHECK(M.at(0, 3) == 0.0);
}

TEST_CASE("matches the brute-force pair counter on 1000 random sentences") {
    auto sentences = random_sentences(1000, 7, 12, 314);
    for (int w : {1, 3, 5}) {
        CooccurrenceMatrix M = build_cooccurrence(sentences, 7, w);
        std::vector<double> oracle =
            oracles::brute_force_cooccurrence(sentences, 7, w);
        CHECK(M.m == oracle);

        // Count conservation: strict upper triangle + half the diagonal.
        double sum = 0.0;
        for (std::size_t i = 0; i < 7; ++i) {
            sum += 0.5 * M.at(i, i);
            for (std::size_t j = i + 1; j < 7; ++j) sum += M.at(i, j);
        }
        CHECK(sum == oracles::brute_force_pair_count(sentences, w));
    }
}

TEST_CASE("parallel accumulation equals the serial reference exactly") {
    auto sentences = random_sentences(2000, 9, 10, 99);
    CooccurrenceMatrix serial = build_cooccurrence_serial(sentences, 9, 3);
    for (int threads : {1, 4, 8}) {
        CooccurrenceMatrix par = build_cooccurrence(sentences, 9, 3, threads);
        CHECK(par.m == serial.m);
    }
}

TEST_CASE("symmetry holds exactly") {
    auto sentences = random_sentences(500, 6, 9, 7);
    CooccurrenceMatrix M = build_cooccurrence(sentences, 6, 3);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(M.at(i, j) == M.at(j, i));
}

TEST_CASE("out-of-range index is rejected") {
    std::vector<Sentence> sentences = {{0, 5}};
    CHECK_THROWS_AS(build_cooccurrence(sentences, 3, 2), ArgumentError);
}

TEST_CASE("rank-1 matrix embeds collinear with explained variance 1") {
    // M = c * u u^T with non-negative u.
    const std::vector<double> u = {1.0, 2.0, 0.5, 3.0};
    std::vector<double> m(16);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) m[i * 4 + j] = 2.0 * u[i] * u[j];
    FeatureEmbedding E = embed(matrix_from(m, 4, 3));
    CHECK(E.explained_variance == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 4; ++i) {
        // Second component vanishes: all vectors on one ray.
        CHECK(std::fabs(E.vectors[i][1]) < 1e-9 * std::fabs(E.vectors[i][0]));
    }
    // Sign convention keeps them positive along the first axis.
    CHECK(E.vectors[0][0] > 0.0);
}

TEST_CASE("rank-2 reconstruction error matches the dense eigensolver") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    const std::size_t d = 12;
    Eigen::MatrixXd A(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            const double v = unif(rng);
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    std::vector<double> m(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            m[i * d + j] = A(static_cast<Eigen::Index>(i),
                             static_cast<Eigen::Index>(j));
    FeatureEmbedding E = embed(matrix_from(m, d, 3));

    // Rebuild the rank-2 approximation from the embedding itself: for a
    // symmetric matrix the right factor is U2 up to the signs absorbed in
    // both sides, so ||M - V V^T D||_F with V = U2*S2 reduces to the
    // residual of the top-2 spectral truncation.
    const double sigma1 = E.singular_values[0];
    const double sigma2 = E.singular_values[1];
    Eigen::MatrixXd V(d, 2);
    for (std::size_t i = 0; i < d; ++i) {
        V(static_cast<Eigen::Index>(i), 0) = E.vectors[i][0] / sigma1;
        V(static_cast<Eigen::Index>(i), 1) = E.vectors[i][1] / sigma2;
    }
    // Recover the signed spectral values so the reconstruction uses the
    // eigen-decomposition identity M u = lambda u.
    Eigen::VectorXd u1 = V.col(0), u2 = V.col(1);
    const double l1 = u1.dot(A * u1);
    const double l2 = u2.dot(A * u2);
    Eigen::MatrixXd approx = l1 * u1 * u1.transpose() +
                             l2 * u2 * u2.transpose();
    const double residual = (A - approx).norm();
    const double oracle = oracles::rank2_residual_eig(A);
    CHECK(residual ==
          doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("all-zero matrix is a degenerate-matrix error") {
    CHECK_THROWS_AS(embed(matrix_from(std::vector<double>(9, 0.0), 3, 3)),
                    NumericError);
}

TEST_CASE("scaling the matrix scales vectors and keeps angles") {
    auto sentences = random_sentences(300, 5, 8, 55);
    CooccurrenceMatrix M = build_cooccurrence(sentences, 5, 3);
    FeatureEmbedding E1 = embed(M);
    CooccurrenceMatrix M2 = M;
    for (double& v : M2.m) v *= 3.5;
    FeatureEmbedding E2 = embed(M2);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(E2.vectors[i][0] ==
              doctest::Approx(3.5 * E1.vectors[i][0]).epsilon(1e-9));
        CHECK(E2.vectors[i][1] ==
              doctest::Approx(3.5 * E1.vectors[i][1]).epsilon(1e-9));
    }
    CHECK(E2.explained_variance ==
          doctest::Approx(E1.explained_variance).epsilon(1e-12));
}

TEST_CASE("permuting feature indices permutes embedding rows") {
    auto sentences = random_sentences(400, 6, 8, 77);
    CooccurrenceMatrix M = build_cooccurrence(sentences, 6, 3);
    const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    std::vector<Sentence> permuted = sentences;
    for (auto& s : permuted)
        for (auto& f : s)
            f = static_cast<int32_t>(perm[static_cast<std::size_t>(f)]);
    FeatureEmbedding E = embed(M);
    FeatureEmbedding Ep = embed(build_cooccurrence(permuted, 6, 3));
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(Ep.vectors[perm[i]][0] ==
              doctest::Approx(E.vectors[i][0]).epsilon(1e-9));
        CHECK(Ep.vectors[perm[i]][1] ==
              doctest::Approx(E.vectors[i][1]).epsilon(1e-9));
    }
}

TEST_CASE("importance is the Euclidean norm") {
    FeatureEmbedding E;
    E.d = 2;
    E.vectors = {{3.0, 4.0}, {0.0, 0.0}};
    E.singular_values = {5.0, 1.0};
    auto scores = importance(E);
    CHECK(scores[0] == doctest::Approx(5.0));
    CHECK(scores[1] == 0.0);
}

TEST_CASE("importance matches direct arithmetic on a random embedding") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 2.0);
    FeatureEmbedding E;
    E.d = 20;
    for (std::size_t i = 0; i < E.d; ++i)
        E.vectors.push_back({gauss(rng), gauss(rng)});
    auto scores = importance(E);
    for (std::size_t i = 0; i < E.d; ++i) {
        CHECK(scores[i] ==
              doctest::Approx(std::sqrt(E.vectors[i][0] * E.vectors[i][0] +
                                        E.vectors[i][1] * E.vectors[i][1]))
                  .epsilon(1e-12));
    }
}

TEST_CASE("angular distance identities") {
    CHECK(angular_distance({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(angular_distance({1.0, 2.0}, {-1.0, -2.0}) ==
          doctest::Approx(M_PI));
    CHECK_THROWS_AS(angular_distance({0.0, 0.0}, {1.0, 0.0}), NumericError);

    std::mt19937_64 rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, 2> a = {gauss(rng), gauss(rng)};
        std::array<double, 2> b = {gauss(rng), gauss(rng)};
        if ((a[0] == 0.0 && a[1] == 0.0) || (b[0] == 0.0 && b[1] == 0.0))
            continue;
        const double got = angular_distance(a, b);
        CHECK(got >= 0.0);
        CHECK(got <= M_PI);
        CHECK(got ==
              doctest::Approx(oracles::angle_via_arccos(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("embedding TSV bytes are deterministic") {
    auto sentences = random_sentences(200, 4, 6, 13);
    FeatureEmbedding E = embed(build_cooccurrence(sentences, 4, 3));
    const std::vector<std::string> names = {"a", "b", "c", "d"};
    test_util::TempFile f1("emb1.tsv"), f2("emb2.tsv");
    write_embedding_tsv(E, names, f1.path);
    write_embedding_tsv(E, names, f2.path);
    CHECK(test_util::read_file(f1.path) == test_util::read_file(f2.path));
    CHECK(test_util::read_file(f1.path).find("feature_name\tvx\tvy") == 0);
}
