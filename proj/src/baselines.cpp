#include "featvec/baselines.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace featvec {

std::vector<int> ImportanceScores::ranking() const {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] >
               scores[static_cast<std::size_t>(b)];
    });
    return idx;
}

ImportanceScores gini_importance(const Forest& forest,
                                 std::vector<std::string>* warnings) {
    if (forest.trees.empty()) throw ArgumentError("empty forest");
    ImportanceScores out;
    out.method = "gini";
    out.scores.assign(forest.n_features, 0.0);

    for (const Tree& t : forest.trees) {
        if (t.n_nodes() == 0) continue;
        const auto n_root = static_cast<double>(t.n_samples[0]);
        for (std::size_t i = 0; i < t.n_nodes(); ++i) {
            if (t.is_leaf(i)) continue;
            out.scores[static_cast<std::size_t>(t.feature[i])] +=
                (static_cast<double>(t.n_samples[i]) / n_root) *
                t.impurity_decrease[i];
        }
    }
    for (double& s : out.scores)
        s /= static_cast<double>(forest.trees.size());

    const double total = std::accumulate(out.scores.begin(),
                                         out.scores.end(), 0.0);
    if (total > 0.0) {
        for (double& s : out.scores) s /= total;
    } else if (warnings) {
        warnings->push_back("forest has no splits; gini scores are all zero");
    }
    return out;
}

namespace {

double permuted_metric(const Forest& forest, const Dataset& test,
                       std::size_t feature, std::mt19937_64& rng) {
    std::vector<std::size_t> perm(test.n_rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    Dataset shuffled = test;
    const std::size_t d = test.dim();
    for (std::size_t r = 0; r < test.n_rows; ++r)
        shuffled.values[r * d + feature] = test.at(perm[r], feature);
    return evaluate_metric(forest, shuffled, 1);
}

double feature_drop(const Forest& forest, const Dataset& test, int repeats,
                    uint64_t seed, std::size_t feature, double baseline) {
    auto rng = make_engine(derive_seed(seed, feature));
    double drop = 0.0;
    for (int rep = 0; rep < repeats; ++rep)
        drop += baseline - permuted_metric(forest, test, feature, rng);
    return drop / static_cast<double>(repeats);
}

}  // namespace

ImportanceScores permutation_importance(const Forest& forest,
                                        const Dataset& test, int repeats,
                                        uint64_t seed, int threads) {
    if (test.n_rows == 0) throw ArgumentError("empty test set");
    if (repeats < 1) throw ArgumentError("repeats must be >= 1");
    const int T = resolve_threads(threads);
    const double baseline = evaluate_metric(forest, test, 1);

    ImportanceScores out;
    out.method = "permutation";
    out.scores.assign(forest.n_features, 0.0);
#pragma omp parallel for num_threads(T) schedule(dynamic)
    for (std::int64_t f = 0; f < static_cast<std::int64_t>(forest.n_features);
         ++f) {
        out.scores[static_cast<std::size_t>(f)] =
            feature_drop(forest, test, repeats, seed,
                         static_cast<std::size_t>(f), baseline);
    }
    return out;
}

ImportanceScores permutation_importance_serial(const Forest& forest,
                                               const Dataset& test,
                                               int repeats, uint64_t seed) {
    if (test.n_rows == 0) throw ArgumentError("empty test set");
    if (repeats < 1) throw ArgumentError("repeats must be >= 1");
    const double baseline = evaluate_metric(forest, test, 1);
    ImportanceScores out;
    out.method = "permutation";
    out.scores.assign(forest.n_features, 0.0);
    for (std::size_t f = 0; f < forest.n_features; ++f)
        out.scores[f] = feature_drop(forest, test, repeats, seed, f, baseline);
    return out;
}

ImportanceScores load_external_scores(const std::string& path,
                                      const FeatureSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open score file: " + path);

    ImportanceScores out;
    out.method = "external";
    out.scores.assign(schema.dim(), 0.0);
    std::vector<bool> seen(schema.dim(), false);

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("line " + std::to_string(lineno) +
                            ": expected <name>\\t<score>");
        const std::string name = line.substr(0, tab);
        if (lineno == 1 && name == "feature_name") continue;  // header
        const int idx = schema.index_of(name);
        if (idx < 0)
            throw DataError("unknown feature in score file: " + name);
        if (seen[static_cast<std::size_t>(idx)])
            throw DataError("duplicate feature in score file: " + name);
        seen[static_cast<std::size_t>(idx)] = true;
        try {
            out.scores[static_cast<std::size_t>(idx)] =
                std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw DataError("bad score on line " + std::to_string(lineno));
        }
    }
    for (std::size_t i = 0; i < schema.dim(); ++i)
        if (!seen[i])
            throw DataError("score file is missing feature: " +
                            schema.features[i].name);
    return out;
}

void write_scores_tsv(const ImportanceScores& scores,
                      std::span<const std::string> names,
                      const std::string& path) {
    if (names.size() != scores.scores.size())
        throw ArgumentError("name count does not match score count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "feature_name\tscore\n";
    char buf[64];
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g\n", scores.scores[i]);
        out << names[i] << '\t' << buf;
    }
}

}  // namespace featvec
