#include "featvec/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace featvec {

namespace {

Dataset take_rows(const Dataset& ds, std::span<const std::size_t> rows) {
    Dataset out;
    out.schema = ds.schema;
    out.codecs = ds.codecs;
    out.target_codec = ds.target_codec;
    out.n_classes = ds.n_classes;
    const std::size_t d = ds.dim();
    out.values.reserve(rows.size() * d);
    out.target.reserve(rows.size());
    for (std::size_t r : rows) {
        out.values.insert(out.values.end(), ds.values.begin() + r * d,
                          ds.values.begin() + (r + 1) * d);
        out.target.push_back(ds.target[r]);
    }
    out.n_rows = rows.size();
    return out;
}

// Greedy exact CART on a row-index workspace. Candidate features are a
// fresh seeded draw per node; the tree's RNG stream is consumed in
// preorder, so the result depends only on (dataset, params, seed).
class TreeBuilder {
  public:
    TreeBuilder(const Dataset& ds, const TrainParams& params, uint64_t seed)
        : ds_(ds),
          params_(params),
          rng_(make_engine(seed)),
          subset_(params.resolved_subset_size(ds.dim())),
          classification_(params.task == Task::Classification),
          n_classes_(classification_ ? ds.n_classes : 0) {}

    Tree build() {
        rows_.resize(ds_.n_rows);
        if (params_.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0,
                                                            ds_.n_rows - 1);
            for (auto& r : rows_) r = pick(rng_);
        } else {
            std::iota(rows_.begin(), rows_.end(), 0);
        }
        grow(0, rows_.size(), 1);
        return std::move(tree_);
    }

  private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
        std::size_t n_left = 0;
    };

    double node_impurity(std::size_t lo, std::size_t hi) const {
        const std::size_t n = hi - lo;
        if (classification_) {
            std::vector<std::size_t> counts(n_classes_, 0);
            for (std::size_t i = lo; i < hi; ++i)
                counts[static_cast<std::size_t>(ds_.target[rows_[i]])]++;
            double sumsq = 0.0;
            for (std::size_t c : counts)
                sumsq += static_cast<double>(c) * static_cast<double>(c);
            return 1.0 - sumsq / (static_cast<double>(n) *
                                  static_cast<double>(n));
        }
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            double y = ds_.target[rows_[i]];
            sum += y;
            sumsq += y * y;
        }
        double var = (sumsq - sum * sum / static_cast<double>(n)) /
                     static_cast<double>(n);
        return std::max(var, 0.0);
    }

    bool pure(std::size_t lo, std::size_t hi) const {
        for (std::size_t i = lo + 1; i < hi; ++i)
            if (ds_.target[rows_[i]] != ds_.target[rows_[lo]]) return false;
        return true;
    }

    Split best_split(std::size_t lo, std::size_t hi,
                     std::span<const int> candidates) {
        const std::size_t n = hi - lo;
        const double parent = node_impurity(lo, hi);
        const auto msl = static_cast<std::size_t>(params_.min_samples_leaf);
        Split best;
        for (int f : candidates) {
            scratch_.clear();
            for (std::size_t i = lo; i < hi; ++i)
                scratch_.push_back(
                    {ds_.at(rows_[i], static_cast<std::size_t>(f)),
                     ds_.target[rows_[i]]});
            std::sort(scratch_.begin(), scratch_.end(),
                      [](const auto& a, const auto& b) {
                          return a.first < b.first;
                      });
            if (classification_) {
                left_counts_.assign(n_classes_, 0);
                right_counts_.assign(n_classes_, 0);
                for (const auto& p : scratch_)
                    right_counts_[static_cast<std::size_t>(p.second)]++;
                double sumsq_l = 0.0, sumsq_r = 0.0;
                for (std::size_t c : right_counts_)
                    sumsq_r += static_cast<double>(c) *
                               static_cast<double>(c);
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    const auto cls =
                        static_cast<std::size_t>(scratch_[i].second);
                    sumsq_l += 2.0 * static_cast<double>(left_counts_[cls]) +
                               1.0;
                    sumsq_r -= 2.0 * static_cast<double>(right_counts_[cls]) -
                               1.0;
                    left_counts_[cls]++;
                    right_counts_[cls]--;
                    if (scratch_[i].first == scratch_[i + 1].first) continue;
                    const std::size_t nl = i + 1, nr = n - nl;
                    if (nl < msl || nr < msl) continue;
                    const double gini_l =
                        1.0 - sumsq_l / (static_cast<double>(nl) *
                                         static_cast<double>(nl));
                    const double gini_r =
                        1.0 - sumsq_r / (static_cast<double>(nr) *
                                         static_cast<double>(nr));
                    const double gain =
                        parent -
                        (static_cast<double>(nl) * gini_l +
                         static_cast<double>(nr) * gini_r) /
                            static_cast<double>(n);
                    if (gain > best.gain) {
                        best = {f,
                                0.5 * (scratch_[i].first +
                                       scratch_[i + 1].first),
                                gain, nl};
                    }
                }
            } else {
                double total = 0.0, total_sq = 0.0;
                for (const auto& p : scratch_) {
                    total += p.second;
                    total_sq += p.second * p.second;
                }
                double sum_l = 0.0, sumsq_l = 0.0;
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    sum_l += scratch_[i].second;
                    sumsq_l += scratch_[i].second * scratch_[i].second;
                    if (scratch_[i].first == scratch_[i + 1].first) continue;
                    const std::size_t nl = i + 1, nr = n - nl;
                    if (nl < msl || nr < msl) continue;
                    const double dl = static_cast<double>(nl);
                    const double dr = static_cast<double>(nr);
                    const double var_l =
                        std::max((sumsq_l - sum_l * sum_l / dl) / dl, 0.0);
                    const double sum_r = total - sum_l;
                    const double var_r = std::max(
                        ((total_sq - sumsq_l) - sum_r * sum_r / dr) / dr,
                        0.0);
                    const double gain =
                        parent - (dl * var_l + dr * var_r) /
                                     static_cast<double>(n);
                    if (gain > best.gain) {
                        best = {f,
                                0.5 * (scratch_[i].first +
                                       scratch_[i + 1].first),
                                gain, nl};
                    }
                }
            }
        }
        return best;
    }

    int add_leaf(std::size_t lo, std::size_t hi) {
        const int idx = alloc_node();
        tree_.feature[idx] = -1;
        tree_.n_samples[idx] = static_cast<int64_t>(hi - lo);
        if (classification_) {
            std::vector<double> dist(n_classes_, 0.0);
            for (std::size_t i = lo; i < hi; ++i)
                dist[static_cast<std::size_t>(ds_.target[rows_[i]])] += 1.0;
            for (double& v : dist) v /= static_cast<double>(hi - lo);
            tree_.leaf_value[idx] = std::move(dist);
        } else {
            double sum = 0.0;
            for (std::size_t i = lo; i < hi; ++i) sum += ds_.target[rows_[i]];
            tree_.leaf_value[idx] = {sum / static_cast<double>(hi - lo)};
        }
        return idx;
    }

    int alloc_node() {
        tree_.feature.push_back(-1);
        tree_.threshold.push_back(0.0);
        tree_.left.push_back(-1);
        tree_.right.push_back(-1);
        tree_.n_samples.push_back(0);
        tree_.impurity_decrease.push_back(0.0);
        tree_.leaf_value.emplace_back();
        return static_cast<int>(tree_.feature.size() - 1);
    }

    int grow(std::size_t lo, std::size_t hi, int depth) {
        const std::size_t n = hi - lo;
        if (depth > params_.max_depth ||
            n < 2 * static_cast<std::size_t>(params_.min_samples_leaf) ||
            n < 2 || pure(lo, hi)) {
            return add_leaf(lo, hi);
        }
        std::vector<int> candidates =
            draw_feature_subset(rng_, ds_.dim(), subset_);
        Split split = best_split(lo, hi, candidates);
        if (split.feature < 0 || split.gain <= 0.0) return add_leaf(lo, hi);

        const int idx = alloc_node();
        tree_.feature[idx] = split.feature;
        tree_.threshold[idx] = split.threshold;
        tree_.n_samples[idx] = static_cast<int64_t>(n);
        tree_.impurity_decrease[idx] = split.gain;

        auto mid = std::stable_partition(
            rows_.begin() + static_cast<std::ptrdiff_t>(lo),
            rows_.begin() + static_cast<std::ptrdiff_t>(hi),
            [&](std::size_t r) {
                return ds_.at(r, static_cast<std::size_t>(split.feature)) <=
                       split.threshold;
            });
        const auto cut =
            static_cast<std::size_t>(mid - rows_.begin());
        tree_.left[idx] = grow(lo, cut, depth + 1);
        tree_.right[idx] = grow(cut, hi, depth + 1);
        return idx;
    }

    const Dataset& ds_;
    const TrainParams& params_;
    std::mt19937_64 rng_;
    int subset_;
    bool classification_;
    std::size_t n_classes_;
    Tree tree_;
    std::vector<std::size_t> rows_;
    std::vector<std::pair<double, double>> scratch_;  // (value, target)
    std::vector<std::size_t> left_counts_, right_counts_;
};

void walk_sentences(const Tree& t, int node, Sentence& path,
                    std::vector<Sentence>& out) {
    if (t.is_leaf(static_cast<std::size_t>(node))) {
        if (!path.empty()) out.push_back(path);
        return;
    }
    path.push_back(t.feature[static_cast<std::size_t>(node)]);
    walk_sentences(t, t.left[static_cast<std::size_t>(node)], path, out);
    walk_sentences(t, t.right[static_cast<std::size_t>(node)], path, out);
    path.pop_back();
}

double tree_predict(const Tree& t, std::span<const double> row) {
    std::size_t node = 0;
    while (!t.is_leaf(node)) {
        node = static_cast<std::size_t>(
            row[static_cast<std::size_t>(t.feature[node])] <=
                    t.threshold[node]
                ? t.left[node]
                : t.right[node]);
    }
    const auto& v = t.leaf_value[node];
    if (v.size() == 1) return v[0];
    return static_cast<double>(
        std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

int TrainParams::resolved_subset_size(std::size_t d) const {
    if (subset_size > 0) return subset_size;
    return static_cast<int>(
        std::ceil(std::sqrt(static_cast<double>(d))));
}

void TrainParams::validate(std::size_t d) const {
    if (max_depth < 1) throw ArgumentError("max_depth must be >= 1");
    if (min_samples_leaf < 1)
        throw ArgumentError("min_samples_leaf must be >= 1");
    const int m = resolved_subset_size(d);
    if (m < 1 || static_cast<std::size_t>(m) > d)
        throw ArgumentError("subset_size must be in [1, d]");
}

std::size_t Tree::n_leaves() const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_nodes(); ++i)
        if (is_leaf(i)) ++k;
    return k;
}

std::vector<int> draw_feature_subset(std::mt19937_64& rng, std::size_t d,
                                     int m) {
    std::vector<int> pool(d);
    std::iota(pool.begin(), pool.end(), 0);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(m), d);
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, d - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return pool;
}

Tree train_tree(const Dataset& ds, const TrainParams& params, uint64_t seed) {
    if (ds.n_rows == 0) throw ArgumentError("empty dataset");
    params.validate(ds.dim());
    return TreeBuilder(ds, params, seed).build();
}

std::vector<Sentence> extract_sentences(const Tree& tree) {
    std::vector<Sentence> out;
    if (tree.n_nodes() <= 1) return out;
    Sentence path;
    walk_sentences(tree, 0, path, out);
    return out;
}

namespace {

// Shared by the parallel and serial growers: scan freshly trained trees in
// index order, appending sentences until the budget is met.
struct GrowAccumulator {
    GrowResult result;
    std::size_t total = 0;
    int zero_run = 0;

    // Returns true when the sentence budget R is reached.
    bool absorb(Tree&& tree, std::size_t R) {
        std::vector<Sentence> s = extract_sentences(tree);
        if (s.empty()) {
            if (++zero_run >= 50)
                throw DataError(
                    "unsplittable data: 50 consecutive trees produced no "
                    "sentences");
        } else {
            zero_run = 0;
        }
        total += s.size();
        result.forest.trees.push_back(std::move(tree));
        result.sentences.insert(result.sentences.end(),
                                std::make_move_iterator(s.begin()),
                                std::make_move_iterator(s.end()));
        return total >= R;
    }
};

}  // namespace

GrowResult grow_until_rules(const Dataset& ds, std::size_t R,
                            const TrainParams& params, uint64_t seed,
                            int threads) {
    if (R < 1) throw ArgumentError("rule budget R must be >= 1");
    params.validate(ds.dim());
    const int T = resolve_threads(threads);

    GrowAccumulator acc;
    acc.result.forest.params = params;
    acc.result.forest.seed = seed;
    acc.result.forest.n_features = ds.dim();
    acc.result.forest.n_classes = ds.n_classes;

    std::size_t next_index = 0;
    bool done = false;
    while (!done) {
        // Batch size depends only on progress so far, never on the worker
        // count; overshoot is truncated to match the serial stopping point.
        std::size_t batch;
        if (next_index == 0) {
            batch = 8;
        } else {
            const double avg = static_cast<double>(acc.total) /
                               static_cast<double>(next_index);
            const double remaining = static_cast<double>(R - acc.total);
            batch = static_cast<std::size_t>(
                std::clamp(std::ceil(remaining / std::max(avg, 1.0)), 8.0,
                           1024.0));
        }
        std::vector<Tree> trained(batch);
#pragma omp parallel for num_threads(T) schedule(dynamic)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(batch); ++i) {
            trained[static_cast<std::size_t>(i)] = train_tree(
                ds, params,
                derive_seed(seed, next_index + static_cast<std::size_t>(i)));
        }
        for (auto& tree : trained) {
            ++next_index;
            if (acc.absorb(std::move(tree), R)) {
                done = true;
                break;
            }
        }
    }
    return std::move(acc.result);
}

GrowResult grow_until_rules_serial(const Dataset& ds, std::size_t R,
                                   const TrainParams& params, uint64_t seed) {
    if (R < 1) throw ArgumentError("rule budget R must be >= 1");
    params.validate(ds.dim());

    GrowAccumulator acc;
    acc.result.forest.params = params;
    acc.result.forest.seed = seed;
    acc.result.forest.n_features = ds.dim();
    acc.result.forest.n_classes = ds.n_classes;

    for (std::size_t index = 0;; ++index) {
        Tree tree = train_tree(ds, params, derive_seed(seed, index));
        if (acc.absorb(std::move(tree), R)) break;
    }
    return std::move(acc.result);
}

Forest train_forest(const Dataset& ds, const TrainParams& params,
                    std::size_t n_trees, uint64_t seed, int threads) {
    if (n_trees == 0) throw ArgumentError("n_trees must be >= 1");
    params.validate(ds.dim());
    const int T = resolve_threads(threads);
    Forest f;
    f.params = params;
    f.seed = seed;
    f.n_features = ds.dim();
    f.n_classes = ds.n_classes;
    f.trees.resize(n_trees);
#pragma omp parallel for num_threads(T) schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n_trees); ++i) {
        f.trees[static_cast<std::size_t>(i)] = train_tree(
            ds, params, derive_seed(seed, static_cast<std::size_t>(i)));
    }
    return f;
}

double predict_row(const Forest& forest, std::span<const double> row) {
    if (forest.trees.empty()) throw ArgumentError("empty forest");
    if (row.size() != forest.n_features)
        throw ArgumentError("row width " + std::to_string(row.size()) +
                            " does not match d=" +
                            std::to_string(forest.n_features));
    if (forest.params.task == Task::Classification) {
        std::vector<int> votes(forest.n_classes, 0);
        for (const Tree& t : forest.trees)
            votes[static_cast<std::size_t>(tree_predict(t, row))]++;
        return static_cast<double>(
            std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    double sum = 0.0;
    for (const Tree& t : forest.trees) sum += tree_predict(t, row);
    return sum / static_cast<double>(forest.trees.size());
}

std::vector<double> predict(const Forest& forest, const Dataset& ds,
                            int threads) {
    if (ds.dim() != forest.n_features)
        throw ArgumentError("dataset width does not match the forest");
    const int T = resolve_threads(threads);
    std::vector<double> out(ds.n_rows);
#pragma omp parallel for num_threads(T) schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(ds.n_rows); ++r) {
        out[static_cast<std::size_t>(r)] =
            predict_row(forest, ds.row(static_cast<std::size_t>(r)));
    }
    return out;
}

double accuracy(const Forest& forest, const Dataset& ds, int threads) {
    std::vector<double> pred = predict(forest, ds, threads);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        if (pred[r] == ds.target[r]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ds.n_rows);
}

double mean_squared_error(const Forest& forest, const Dataset& ds,
                          int threads) {
    std::vector<double> pred = predict(forest, ds, threads);
    double sum = 0.0;
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        const double e = pred[r] - ds.target[r];
        sum += e * e;
    }
    return sum / static_cast<double>(ds.n_rows);
}

double evaluate_metric(const Forest& forest, const Dataset& ds,
                       int threads) {
    return forest.params.task == Task::Classification
               ? accuracy(forest, ds, threads)
               : -mean_squared_error(forest, ds, threads);
}

int cross_validate_depth(const Dataset& ds, const TrainParams& base_params,
                         std::span<const int> depths, int folds,
                         std::size_t n_trees, uint64_t seed, int threads) {
    if (depths.empty()) throw ArgumentError("empty depth list");
    if (folds < 2) throw ArgumentError("folds must be >= 2");

    // Seeded fold assignment, stratified for classification.
    std::vector<int> fold_of(ds.n_rows, 0);
    if (ds.task() == Task::Classification) {
        std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
        for (std::size_t r = 0; r < ds.n_rows; ++r)
            by_class[static_cast<std::size_t>(ds.target[r])].push_back(r);
        for (std::size_t c = 0; c < ds.n_classes; ++c) {
            if (by_class[c].size() < static_cast<std::size_t>(folds))
                throw ArgumentError("class " + std::to_string(c) +
                                    " has fewer members than folds");
            auto rng = make_engine(derive_seed(seed, 0xf01d + c));
            std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
            for (std::size_t i = 0; i < by_class[c].size(); ++i)
                fold_of[by_class[c][i]] = static_cast<int>(i) % folds;
        }
    } else {
        std::vector<std::size_t> perm(ds.n_rows);
        std::iota(perm.begin(), perm.end(), 0);
        auto rng = make_engine(derive_seed(seed, 0xf01d));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < perm.size(); ++i)
            fold_of[perm[i]] = static_cast<int>(i) % folds;
    }

    std::vector<int> sorted_depths(depths.begin(), depths.end());
    std::sort(sorted_depths.begin(), sorted_depths.end());

    int best_depth = sorted_depths.front();
    double best_metric = -std::numeric_limits<double>::infinity();
    for (int depth : sorted_depths) {
        TrainParams p = base_params;
        p.max_depth = depth;
        double mean_metric = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> train_rows, val_rows;
            for (std::size_t r = 0; r < ds.n_rows; ++r)
                (fold_of[r] == f ? val_rows : train_rows).push_back(r);
            Dataset train = take_rows(ds, train_rows);
            Dataset val = take_rows(ds, val_rows);
            Forest forest = train_forest(
                train, p, n_trees,
                derive_seed(seed, 0xc0de + static_cast<std::size_t>(f)),
                threads);
            mean_metric += evaluate_metric(forest, val, threads);
        }
        mean_metric /= static_cast<double>(folds);
        if (mean_metric > best_metric) {
            best_metric = mean_metric;
            best_depth = depth;
        }
    }
    return best_depth;
}

nlohmann::json Forest::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["task"] = params.task == Task::Classification ? "classification"
                                                    : "regression";
    j["params"] = {{"max_depth", params.max_depth},
                   {"min_samples_leaf", params.min_samples_leaf},
                   {"subset_size", params.subset_size},
                   {"bootstrap", params.bootstrap}};
    j["seed"] = seed;
    j["n_features"] = n_features;
    j["n_classes"] = n_classes;
    j["trees"] = nlohmann::json::array();
    for (const Tree& t : trees) {
        nlohmann::json jt;
        jt["feature"] = t.feature;
        jt["threshold"] = t.threshold;
        jt["left"] = t.left;
        jt["right"] = t.right;
        jt["n_samples"] = t.n_samples;
        jt["impurity_decrease"] = t.impurity_decrease;
        jt["leaf_value"] = t.leaf_value;
        j["trees"].push_back(std::move(jt));
    }
    return j;
}

Forest Forest::from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != 1)
        throw DataError("unsupported forest document version");
    Forest f;
    f.params.task = j.at("task").get<std::string>() == "classification"
                        ? Task::Classification
                        : Task::Regression;
    const auto& p = j.at("params");
    f.params.max_depth = p.at("max_depth").get<int>();
    f.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    f.params.subset_size = p.at("subset_size").get<int>();
    f.params.bootstrap = p.at("bootstrap").get<bool>();
    f.seed = j.at("seed").get<uint64_t>();
    f.n_features = j.at("n_features").get<std::size_t>();
    f.n_classes = j.at("n_classes").get<std::size_t>();
    for (const auto& jt : j.at("trees")) {
        Tree t;
        t.feature = jt.at("feature").get<std::vector<int32_t>>();
        t.threshold = jt.at("threshold").get<std::vector<double>>();
        t.left = jt.at("left").get<std::vector<int32_t>>();
        t.right = jt.at("right").get<std::vector<int32_t>>();
        t.n_samples = jt.at("n_samples").get<std::vector<int64_t>>();
        t.impurity_decrease =
            jt.at("impurity_decrease").get<std::vector<double>>();
        t.leaf_value =
            jt.at("leaf_value").get<std::vector<std::vector<double>>>();
        f.trees.push_back(std::move(t));
    }
    return f;
}

Forest Forest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open forest file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad forest JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

void Forest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write forest file: " + path);
    out << to_json().dump() << "\n";
}

}  // namespace featvec
