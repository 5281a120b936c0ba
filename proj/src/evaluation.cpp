#include "featvec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace featvec {

namespace {

void check_ranking(std::span<const int> ranking, std::size_t d) {
    if (ranking.size() != d)
        throw ArgumentError("ranking length does not match d");
    std::vector<bool> seen(d, false);
    for (int idx : ranking) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= d ||
            seen[static_cast<std::size_t>(idx)])
            throw ArgumentError("ranking is not a permutation of 0..d-1");
        seen[static_cast<std::size_t>(idx)] = true;
    }
}

// Metric of the featureless model: majority-class accuracy for
// classification, negative MSE of the train-mean predictor for regression.
double no_feature_metric(const Dataset& train, const Dataset& test) {
    if (train.task() == Task::Classification) {
        const auto majority = static_cast<double>(train.majority_class());
        std::size_t hits = 0;
        for (double y : test.target)
            if (y == majority) ++hits;
        return static_cast<double>(hits) /
               static_cast<double>(test.n_rows);
    }
    const double mean =
        std::accumulate(train.target.begin(), train.target.end(), 0.0) /
        static_cast<double>(train.n_rows);
    double sum = 0.0;
    for (double y : test.target) sum += (y - mean) * (y - mean);
    return -sum / static_cast<double>(test.n_rows);
}

double subset_metric(const Dataset& train, const Dataset& test,
                     std::span<const int> kept, const CurveTrainer& trainer) {
    if (kept.empty()) return no_feature_metric(train, test);
    Dataset sub_train = train.select_features(kept);
    Dataset sub_test = test.select_features(kept);
    Forest forest = train_forest(sub_train, trainer.params, trainer.n_trees,
                                 trainer.seed, 1);
    return evaluate_metric(forest, sub_test, 1);
}

std::vector<int> kept_features(std::span<const int> ranking, std::size_t k,
                               CurveKind kind) {
    // RemoveTop keeps ranking[k..d); AddTop keeps ranking[0..k), both in
    // ascending feature order so column order is stable.
    std::vector<int> kept;
    if (kind == CurveKind::RemoveTop)
        kept.assign(ranking.begin() + static_cast<std::ptrdiff_t>(k),
                    ranking.end());
    else
        kept.assign(ranking.begin(),
                    ranking.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(kept.begin(), kept.end());
    return kept;
}

PerformanceCurve run_curve(const Dataset& train, const Dataset& test,
                           std::span<const int> ranking,
                           const CurveTrainer& trainer, CurveKind kind,
                           int threads) {
    check_ranking(ranking, train.dim());
    const std::size_t d = train.dim();
    PerformanceCurve curve;
    curve.kind = kind;
    curve.metric.assign(d + 1, 0.0);
    const int T = resolve_threads(threads);
#pragma omp parallel for num_threads(T) schedule(dynamic)
    for (std::int64_t k = 0; k <= static_cast<std::int64_t>(d); ++k) {
        std::vector<int> kept =
            kept_features(ranking, static_cast<std::size_t>(k), kind);
        curve.metric[static_cast<std::size_t>(k)] =
            subset_metric(train, test, kept, trainer);
    }
    return curve;
}

PerformanceCurve run_curve_serial(const Dataset& train, const Dataset& test,
                                  std::span<const int> ranking,
                                  const CurveTrainer& trainer,
                                  CurveKind kind) {
    check_ranking(ranking, train.dim());
    const std::size_t d = train.dim();
    PerformanceCurve curve;
    curve.kind = kind;
    curve.metric.assign(d + 1, 0.0);
    for (std::size_t k = 0; k <= d; ++k) {
        std::vector<int> kept = kept_features(ranking, k, kind);
        curve.metric[k] = subset_metric(train, test, kept, trainer);
    }
    return curve;
}

}  // namespace

PerformanceCurve sds_curve(const Dataset& train, const Dataset& test,
                           std::span<const int> ranking,
                           const CurveTrainer& trainer, int threads) {
    return run_curve(train, test, ranking, trainer, CurveKind::RemoveTop,
                     threads);
}

PerformanceCurve sss_curve(const Dataset& train, const Dataset& test,
                           std::span<const int> ranking,
                           const CurveTrainer& trainer, int threads) {
    return run_curve(train, test, ranking, trainer, CurveKind::AddTop,
                     threads);
}

PerformanceCurve sds_curve_serial(const Dataset& train, const Dataset& test,
                                  std::span<const int> ranking,
                                  const CurveTrainer& trainer) {
    return run_curve_serial(train, test, ranking, trainer,
                            CurveKind::RemoveTop);
}

PerformanceCurve sss_curve_serial(const Dataset& train, const Dataset& test,
                                  std::span<const int> ranking,
                                  const CurveTrainer& trainer) {
    return run_curve_serial(train, test, ranking, trainer,
                            CurveKind::AddTop);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) +
                                  static_cast<double>(j)) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ArgumentError("length mismatch");
    if (a.size() < 2) throw ArgumentError("need at least 2 values");
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(),
                           [&](double x) { return x == v[0]; });
    };
    if (constant(a) || constant(b))
        throw NumericError("correlation undefined for a constant vector");

    std::vector<double> ra = average_ranks(a);
    std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

void write_curve_csv(const PerformanceCurve& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "k,metric\n";
    char buf[64];
    for (std::size_t k = 0; k < curve.metric.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", k, curve.metric[k]);
        out << buf;
    }
}

}  // namespace featvec
