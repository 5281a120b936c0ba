#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "featvec/forest.hpp"

namespace featvec {

// Symmetric d x d count matrix of windowed feature co-occurrence.
struct CooccurrenceMatrix {
    std::size_t d = 0;
    int window = 0;
    std::vector<double> m;  // row-major d x d

    double at(std::size_t i, std::size_t j) const { return m[i * d + j]; }
    double total() const;
};

// Counts ordered position pairs (i, j), i < j, j - i <= w within each
// sentence: adds 1 to m[f_i][f_j] and 1 to m[f_j][f_i] (so same-feature
// repeats add 2 on the diagonal). Sharded per-sentence with integer-count
// merges; exact for any worker count.
CooccurrenceMatrix build_cooccurrence(std::span<const Sentence> sentences,
                                      std::size_t d, int window,
                                      int threads = 0);

// Single-pass reference implementation kept for testing.
CooccurrenceMatrix build_cooccurrence_serial(
    std::span<const Sentence> sentences, std::size_t d, int window);

// Per-feature 2-D vectors from the truncated SVD of the raw count matrix.
// Norm is the feature importance, direction its semantics.
struct FeatureEmbedding {
    std::size_t d = 0;
    std::vector<std::array<double, 2>> vectors;
    std::array<double, 2> singular_values{0.0, 0.0};
    double explained_variance = 0.0;  // (s1^2 + s2^2) / sum_k sk^2

    const std::array<double, 2>& operator[](std::size_t i) const {
        return vectors[i];
    }
};

// SVD of the raw counts, no centering or normalization. Sign convention:
// each left singular vector is flipped so its largest-|entry| coordinate
// is positive. Throws NumericError on an all-zero matrix.
FeatureEmbedding embed(const CooccurrenceMatrix& M);

// score(i) = ||v_i||_2
std::vector<double> importance(const FeatureEmbedding& E);

// Angle between two non-zero vectors, folded into [0, pi].
double angular_distance(const std::array<double, 2>& a,
                        const std::array<double, 2>& b);

// TSV: feature_name, vx, vy, importance, angle_degrees. Deterministic bytes.
void write_embedding_tsv(const FeatureEmbedding& E,
                         std::span<const std::string> names,
                         const std::string& path);

}  // namespace featvec
