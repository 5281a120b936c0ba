#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "featvec/dataset.hpp"
#include "featvec/forest.hpp"

namespace featvec {

enum class CurveKind { RemoveTop, AddTop };  // SDS / SSS

// Retraining curve over k = 0..d. The no-feature endpoint (SDS k = d,
// SSS k = 0) is the majority-class baseline (classification) or the
// train-mean predictor (regression).
struct PerformanceCurve {
    CurveKind kind = CurveKind::RemoveTop;
    std::string method;
    std::vector<double> metric;  // length d + 1, indexed by k
};

// Retrains a fixed-size forest with fixed params and seed for every
// feature subset; the per-k retrainings are independent and parallel.
struct CurveTrainer {
    TrainParams params;
    std::size_t n_trees = 30;
    uint64_t seed = 0;
};

// ranking: permutation of 0..d-1, most important first.
PerformanceCurve sds_curve(const Dataset& train, const Dataset& test,
                           std::span<const int> ranking,
                           const CurveTrainer& trainer, int threads = 0);
PerformanceCurve sss_curve(const Dataset& train, const Dataset& test,
                           std::span<const int> ranking,
                           const CurveTrainer& trainer, int threads = 0);

// Reference implementations kept for testing.
PerformanceCurve sds_curve_serial(const Dataset& train, const Dataset& test,
                                  std::span<const int> ranking,
                                  const CurveTrainer& trainer);
PerformanceCurve sss_curve_serial(const Dataset& train, const Dataset& test,
                                  std::span<const int> ranking,
                                  const CurveTrainer& trainer);

// Spearman rank correlation with average ranks for ties. Throws
// NumericError when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

// CSV: k,metric
void write_curve_csv(const PerformanceCurve& curve, const std::string& path);

}  // namespace featvec
