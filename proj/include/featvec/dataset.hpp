#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "featvec/common.hpp"

namespace featvec {

enum class ColumnKind { Numeric, Categorical };
enum class Task { Classification, Regression };

struct FeatureColumn {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
};

struct TargetSpec {
    std::string name;
    Task task = Task::Classification;
};

// Fixed feature order; the single source of truth for names and indices.
struct FeatureSchema {
    std::vector<FeatureColumn> features;
    TargetSpec target;

    std::size_t dim() const { return features.size(); }
    int index_of(const std::string& name) const;
    std::vector<std::string> feature_names() const;
    void validate() const;  // unique names, at least one feature

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);
    static FeatureSchema load(const std::string& path);
    void save(const std::string& path) const;
};

// String levels of one categorical column, in first-appearance order;
// code i decodes to levels[i].
struct CategoricalCodec {
    std::vector<std::string> levels;

    bool empty() const { return levels.empty(); }
    int encode(const std::string& s) const;  // -1 when unknown
    int encode_or_add(const std::string& s);
    const std::string& decode(std::size_t code) const;
};

// Column-typed tabular matrix; immutable after construction and safe to
// share read-only across workers.
struct Dataset {
    FeatureSchema schema;
    std::vector<double> values;  // row-major n x d
    std::vector<double> target;  // class codes or reals, length n
    std::size_t n_rows = 0;
    std::vector<CategoricalCodec> codecs;  // per feature; empty for numeric
    CategoricalCodec target_codec;         // classification label names
    std::size_t n_classes = 0;             // classification only

    std::size_t dim() const { return schema.dim(); }
    double at(std::size_t row, std::size_t col) const {
        return values[row * dim() + col];
    }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * dim(), dim()};
    }
    Task task() const { return schema.target.task; }

    // Majority class of the target (lowest code on ties).
    std::size_t majority_class() const;

    // Copy of this dataset restricted to the given feature columns.
    Dataset select_features(std::span<const int> feature_indices) const;
};

struct LoadOptions {
    bool impute = false;  // median (numeric) / mode (categorical)
};

// CSV with header row, comma-delimited, UTF-8, RFC 4180 quoting.
// Columns are reordered to schema order; header columns absent from the
// schema are ignored with a warning.
Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 const LoadOptions& opts = {},
                 std::vector<std::string>* warnings = nullptr);

// Inference fallback: a column is categorical iff any cell fails numeric
// parse. The target task is classification when the target column is
// categorical or takes few distinct integer values.
FeatureSchema infer_schema(const std::string& path,
                           const std::string& target_name = "");

// Disjoint, seed-determined partition; class-stratified for classification
// when every class has at least 2 members. Returns (train, test).
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double test_fraction,
                                             uint64_t seed);

}  // namespace featvec
