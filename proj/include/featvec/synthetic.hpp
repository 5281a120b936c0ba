#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "featvec/dataset.hpp"
#include "featvec/knockoffs.hpp"

namespace featvec {

// 20 i.i.d. standard normal features; the label depends on features 0..5
// through three exchangeable pairs (0,1), (2,3), (4,5): every clause of the
// scoring function takes the best member of each pair, so swapping columns
// within a pair leaves the label probability unchanged exactly.
// y = 1 with probability sigmoid of the clause score.
Dataset gen_exchangeable_pairs(std::size_t n, uint64_t seed);

// Label probability of one row of the pairs generator; exposed so the
// column-swap symmetry is testable at the function level.
double exchangeable_pairs_probability(std::span<const double> row);

// 20-dim fixed 3-component Gaussian mixture; y thresholds a fixed linear
// score of features 0..2 plus noise, so exactly those are non-null. The
// remaining coordinates are block-independent of the first three, keeping
// them uninformative even jointly. Returns the true mixture for oracle use.
std::pair<Dataset, GaussianMixture> gen_gmm_nonnull(std::size_t n,
                                                    uint64_t seed);

}  // namespace featvec
