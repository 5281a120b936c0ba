#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "featvec/dataset.hpp"

namespace featvec {

// Ordered split-feature indices of one root-to-leaf decision path,
// repeats preserved.
using Sentence = std::vector<int32_t>;

struct TrainParams {
    int max_depth = 10;
    int min_samples_leaf = 1;
    int subset_size = 0;  // 0 resolves to ceil(sqrt(d)) at train time
    bool bootstrap = false;
    Task task = Task::Classification;

    int resolved_subset_size(std::size_t d) const;
    void validate(std::size_t d) const;
};

// One tree as flat node arrays in preorder. feature[i] == -1 marks a leaf;
// rows with value <= threshold go left. leaf_value holds the class
// distribution (classification) or {mean} (regression).
struct Tree {
    std::vector<int32_t> feature;
    std::vector<double> threshold;
    std::vector<int32_t> left;
    std::vector<int32_t> right;
    std::vector<int64_t> n_samples;
    std::vector<double> impurity_decrease;
    std::vector<std::vector<double>> leaf_value;

    std::size_t n_nodes() const { return feature.size(); }
    std::size_t n_leaves() const;
    bool is_leaf(std::size_t i) const { return feature[i] < 0; }
};

struct Forest {
    std::vector<Tree> trees;
    TrainParams params;
    uint64_t seed = 0;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;  // classification only

    std::size_t n_trees() const { return trees.size(); }

    nlohmann::json to_json() const;
    static Forest from_json(const nlohmann::json& j);
    static Forest load(const std::string& path);
    void save(const std::string& path) const;
};

// Draws m distinct feature indices out of d, sorted ascending.
std::vector<int> draw_feature_subset(std::mt19937_64& rng, std::size_t d,
                                     int m);

// Greedy CART with a fresh random feature subset per node. Gini impurity
// for classification, variance for regression; threshold candidates are
// midpoints between consecutive distinct sorted values; ties broken toward
// the lowest feature index, then the smallest threshold.
Tree train_tree(const Dataset& ds, const TrainParams& params, uint64_t seed);

// One sentence per leaf, in preorder leaf order. A split-free tree yields
// zero sentences.
std::vector<Sentence> extract_sentences(const Tree& tree);

struct GrowResult {
    Forest forest;
    std::vector<Sentence> sentences;
};

// Trains trees with per-tree seeds derive_seed(seed, index) until the total
// sentence count reaches R; keeps every sentence of every trained tree.
// Bit-identical result for any worker count. Throws DataError after 50
// consecutive sentence-free trees.
GrowResult grow_until_rules(const Dataset& ds, std::size_t R,
                            const TrainParams& params, uint64_t seed,
                            int threads = 0);

// One-tree-at-a-time reference implementation kept for testing.
GrowResult grow_until_rules_serial(const Dataset& ds, std::size_t R,
                                   const TrainParams& params, uint64_t seed);

// Fixed-size ensemble (per-tree seeds as above); used by cross-validation
// and the retraining curves.
Forest train_forest(const Dataset& ds, const TrainParams& params,
                    std::size_t n_trees, uint64_t seed, int threads = 0);

// Majority vote over per-tree argmax (classification, lowest class on
// ties) or mean of leaf means (regression).
double predict_row(const Forest& forest, std::span<const double> row);
std::vector<double> predict(const Forest& forest, const Dataset& ds,
                            int threads = 0);

double accuracy(const Forest& forest, const Dataset& ds, int threads = 0);
double mean_squared_error(const Forest& forest, const Dataset& ds,
                          int threads = 0);

// Accuracy for classification, negative MSE for regression; higher is
// better in both tasks.
double evaluate_metric(const Forest& forest, const Dataset& ds,
                       int threads = 0);

// Depth maximizing the mean validation metric over seeded folds
// (stratified for classification); ties break toward the smaller depth.
int cross_validate_depth(const Dataset& ds, const TrainParams& base_params,
                         std::span<const int> depths, int folds,
                         std::size_t n_trees, uint64_t seed, int threads = 0);

}  // namespace featvec
