#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "featvec/dataset.hpp"
#include "featvec/forest.hpp"

namespace featvec {

// Global importance scores, higher is more important.
struct ImportanceScores {
    std::string method;
    std::vector<double> scores;

    // Indices sorted most important first (lowest index on ties).
    std::vector<int> ranking() const;
};

// Sample-weighted impurity decrease per split feature, averaged over trees
// and normalized to sum 1. A forest with zero splits yields all-zero
// scores and a warning.
ImportanceScores gini_importance(const Forest& forest,
                                 std::vector<std::string>* warnings = nullptr);

// Mean drop of the test metric (accuracy / negative MSE) over seeded
// permutations of one column at a time. Per-feature RNG streams make the
// result independent of scheduling.
ImportanceScores permutation_importance(const Forest& forest,
                                        const Dataset& test, int repeats,
                                        uint64_t seed, int threads = 0);

// Reference implementation kept for testing.
ImportanceScores permutation_importance_serial(const Forest& forest,
                                               const Dataset& test,
                                               int repeats, uint64_t seed);

// TSV (feature_name <TAB> score) covering all schema features exactly once;
// scores are realigned to schema order.
ImportanceScores load_external_scores(const std::string& path,
                                      const FeatureSchema& schema);

void write_scores_tsv(const ImportanceScores& scores,
                      std::span<const std::string> names,
                      const std::string& path);

}  // namespace featvec
