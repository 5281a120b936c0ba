#include "featvec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace featvec {

namespace {

bool is_missing(const std::string& cell) {
    if (cell.empty()) return true;
    std::string low;
    low.reserve(cell.size());
    for (char c : cell) low.push_back(static_cast<char>(std::tolower(c)));
    return low == "na" || low == "nan" || low == "null" || low == "?";
}

bool parse_double(const std::string& cell, double* out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE) return false;
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') return false;
    *out = v;
    return true;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// One CSV record, RFC 4180 quoting. Reads additional physical lines when a
// quoted field spans a newline. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    while (true) {
        if (i >= line.size()) {
            if (in_quotes) {
                field.push_back('\n');
                if (!std::getline(in, line)) break;
                i = 0;
                continue;
            }
            break;
        }
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
        ++i;
    }
    fields.push_back(field);
    return true;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

RawTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    RawTable t;
    if (!read_record(in, t.header)) throw DataError("empty file: " + path);
    for (auto& h : t.header) h = trim(h);
    std::vector<std::string> rec;
    while (read_record(in, rec)) {
        if (rec.size() == 1 && trim(rec[0]).empty()) continue;  // blank line
        if (rec.size() != t.header.size()) {
            throw DataError("row " + std::to_string(t.rows.size() + 2) +
                            " has " + std::to_string(rec.size()) +
                            " fields, header has " +
                            std::to_string(t.header.size()));
        }
        for (auto& c : rec) c = trim(c);
        t.rows.push_back(rec);
    }
    return t;
}

ColumnKind kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::Numeric;
    if (s == "categorical") return ColumnKind::Categorical;
    throw DataError("unknown column kind: " + s);
}

Task task_from_string(const std::string& s) {
    if (s == "classification") return Task::Classification;
    if (s == "regression") return Task::Regression;
    throw DataError("unknown task: " + s);
}

}  // namespace

int FeatureSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> FeatureSchema::feature_names() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.name);
    return out;
}

void FeatureSchema::validate() const {
    if (features.empty()) throw DataError("schema has no features");
    std::set<std::string> seen;
    for (const auto& f : features) {
        if (!seen.insert(f.name).second)
            throw DataError("duplicate feature name: " + f.name);
    }
    if (seen.count(target.name))
        throw DataError("target name collides with a feature: " + target.name);
}

nlohmann::json FeatureSchema::to_json() const {
    nlohmann::json j;
    j["features"] = nlohmann::json::array();
    for (const auto& f : features) {
        j["features"].push_back(
            {{"name", f.name},
             {"kind", f.kind == ColumnKind::Numeric ? "numeric"
                                                    : "categorical"}});
    }
    j["target"] = {{"name", target.name},
                   {"task", target.task == Task::Classification
                                ? "classification"
                                : "regression"}};
    return j;
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
    FeatureSchema s;
    for (const auto& f : j.at("features")) {
        s.features.push_back({f.at("name").get<std::string>(),
                              kind_from_string(f.at("kind").get<std::string>())});
    }
    s.target.name = j.at("target").at("name").get<std::string>();
    s.target.task = task_from_string(j.at("target").at("task").get<std::string>());
    s.validate();
    return s;
}

FeatureSchema FeatureSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad schema JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

void FeatureSchema::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema file: " + path);
    out << to_json().dump(2) << "\n";
}

int CategoricalCodec::encode(const std::string& s) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == s) return static_cast<int>(i);
    return -1;
}

int CategoricalCodec::encode_or_add(const std::string& s) {
    int c = encode(s);
    if (c >= 0) return c;
    levels.push_back(s);
    return static_cast<int>(levels.size() - 1);
}

const std::string& CategoricalCodec::decode(std::size_t code) const {
    if (code >= levels.size())
        throw ArgumentError("categorical code out of range");
    return levels[code];
}

std::size_t Dataset::majority_class() const {
    if (task() != Task::Classification)
        throw ArgumentError("majority_class on a regression dataset");
    std::vector<std::size_t> counts(n_classes, 0);
    for (double y : target) counts[static_cast<std::size_t>(y)]++;
    return static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
}

Dataset Dataset::select_features(std::span<const int> feature_indices) const {
    Dataset out;
    out.schema.target = schema.target;
    for (int idx : feature_indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= dim())
            throw ArgumentError("feature index out of range: " +
                                std::to_string(idx));
        out.schema.features.push_back(schema.features[idx]);
        out.codecs.push_back(codecs[idx]);
    }
    out.n_rows = n_rows;
    out.target = target;
    out.target_codec = target_codec;
    out.n_classes = n_classes;
    out.values.resize(n_rows * feature_indices.size());
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < feature_indices.size(); ++c)
            out.values[r * feature_indices.size() + c] =
                at(r, static_cast<std::size_t>(feature_indices[c]));
    return out;
}

Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 const LoadOptions& opts,
                 std::vector<std::string>* warnings) {
    schema.validate();
    RawTable t = read_table(path);

    // Map schema columns (and target) onto header positions.
    std::vector<int> col_of(schema.dim(), -1);
    int target_col = -1;
    for (std::size_t h = 0; h < t.header.size(); ++h) {
        int idx = schema.index_of(t.header[h]);
        if (idx >= 0) {
            col_of[idx] = static_cast<int>(h);
        } else if (t.header[h] == schema.target.name) {
            target_col = static_cast<int>(h);
        } else if (warnings) {
            warnings->push_back("column ignored: " + t.header[h]);
        }
    }
    for (std::size_t i = 0; i < schema.dim(); ++i) {
        if (col_of[i] < 0)
            throw DataError("schema column missing from CSV header: " +
                            schema.features[i].name);
    }
    if (target_col < 0)
        throw DataError("target column missing from CSV header: " +
                        schema.target.name);
    if (t.rows.size() < 2) throw DataError("dataset needs at least 2 rows");

    const std::size_t n = t.rows.size();
    const std::size_t d = schema.dim();
    Dataset ds;
    ds.schema = schema;
    ds.n_rows = n;
    ds.codecs.resize(d);
    ds.values.assign(n * d, 0.0);
    ds.target.assign(n, 0.0);

    std::vector<std::vector<std::size_t>> missing_of(d);
    std::vector<bool> row_has_value(n, false);

    for (std::size_t c = 0; c < d; ++c) {
        const auto pos = static_cast<std::size_t>(col_of[c]);
        const bool categorical =
            schema.features[c].kind == ColumnKind::Categorical;
        for (std::size_t r = 0; r < n; ++r) {
            const std::string& cell = t.rows[r][pos];
            if (is_missing(cell)) {
                if (!opts.impute)
                    throw DataError("missing value at row " +
                                    std::to_string(r + 2) + ", column " +
                                    schema.features[c].name);
                missing_of[c].push_back(r);
                continue;
            }
            if (categorical) {
                ds.values[r * d + c] = ds.codecs[c].encode_or_add(cell);
            } else {
                double v;
                if (!parse_double(cell, &v))
                    throw DataError("unparseable numeric cell \"" + cell +
                                    "\" at row " + std::to_string(r + 2) +
                                    ", column " + schema.features[c].name);
                ds.values[r * d + c] = v;
            }
        }
        // Impute after the pass: median for numeric, mode for categorical
        // (first-appearance order breaks ties).
        if (!missing_of[c].empty()) {
            double fill = 0.0;
            if (categorical) {
                std::vector<std::size_t> counts(ds.codecs[c].levels.size(), 0);
                for (std::size_t r = 0; r < n; ++r) {
                    if (std::find(missing_of[c].begin(), missing_of[c].end(),
                                  r) == missing_of[c].end())
                        counts[static_cast<std::size_t>(
                            ds.values[r * d + c])]++;
                }
                if (counts.empty())
                    throw DataError("column entirely missing: " +
                                    schema.features[c].name);
                fill = static_cast<double>(
                    std::max_element(counts.begin(), counts.end()) -
                    counts.begin());
            } else {
                std::vector<double> present;
                present.reserve(n);
                for (std::size_t r = 0; r < n; ++r) {
                    if (std::find(missing_of[c].begin(), missing_of[c].end(),
                                  r) == missing_of[c].end())
                        present.push_back(ds.values[r * d + c]);
                }
                if (present.empty())
                    throw DataError("column entirely missing: " +
                                    schema.features[c].name);
                std::sort(present.begin(), present.end());
                std::size_t mid = present.size() / 2;
                fill = present.size() % 2 ? present[mid]
                                          : 0.5 * (present[mid - 1] +
                                                   present[mid]);
            }
            for (std::size_t r : missing_of[c]) ds.values[r * d + c] = fill;
        }
    }

    // Target column.
    const auto tpos = static_cast<std::size_t>(target_col);
    if (schema.target.task == Task::Classification) {
        // Numeric class labels map by sorted value so codes stay contiguous
        // and ordered; string labels map by first appearance.
        bool all_numeric = true;
        std::vector<double> numeric(n);
        for (std::size_t r = 0; r < n; ++r) {
            const std::string& cell = t.rows[r][tpos];
            if (is_missing(cell))
                throw DataError("missing target at row " +
                                std::to_string(r + 2));
            if (!parse_double(cell, &numeric[r])) {
                all_numeric = false;
                break;
            }
        }
        if (all_numeric) {
            std::vector<double> uniq(numeric);
            std::sort(uniq.begin(), uniq.end());
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            for (double u : uniq) {
                std::ostringstream os;
                os << u;
                ds.target_codec.levels.push_back(os.str());
            }
            for (std::size_t r = 0; r < n; ++r) {
                ds.target[r] = static_cast<double>(
                    std::lower_bound(uniq.begin(), uniq.end(), numeric[r]) -
                    uniq.begin());
            }
        } else {
            for (std::size_t r = 0; r < n; ++r) {
                const std::string& cell = t.rows[r][tpos];
                if (is_missing(cell))
                    throw DataError("missing target at row " +
                                    std::to_string(r + 2));
                ds.target[r] = ds.target_codec.encode_or_add(cell);
            }
        }
        ds.n_classes = ds.target_codec.levels.size();
        if (ds.n_classes < 2)
            throw DataError("classification target has a single class");
    } else {
        for (std::size_t r = 0; r < n; ++r) {
            const std::string& cell = t.rows[r][tpos];
            double v;
            if (is_missing(cell) || !parse_double(cell, &v))
                throw DataError("bad regression target at row " +
                                std::to_string(r + 2));
            ds.target[r] = v;
        }
    }
    return ds;
}

FeatureSchema infer_schema(const std::string& path,
                           const std::string& target_name) {
    RawTable t = read_table(path);
    if (t.header.empty()) throw DataError("no columns in " + path);
    std::string tname = target_name.empty() ? t.header.back() : target_name;
    int tcol = -1;
    for (std::size_t h = 0; h < t.header.size(); ++h)
        if (t.header[h] == tname) tcol = static_cast<int>(h);
    if (tcol < 0) throw DataError("target column not found: " + tname);

    FeatureSchema s;
    s.target.name = tname;
    for (std::size_t h = 0; h < t.header.size(); ++h) {
        bool numeric = true;
        bool all_integral = true;
        std::set<double> distinct;
        for (const auto& row : t.rows) {
            const std::string& cell = row[h];
            if (is_missing(cell)) continue;
            double v;
            if (!parse_double(cell, &v)) {
                numeric = false;
                break;
            }
            if (v != std::floor(v)) all_integral = false;
            if (distinct.size() <= 64) distinct.insert(v);
        }
        if (static_cast<int>(h) == tcol) {
            s.target.task = (!numeric || (all_integral && distinct.size() <= 20))
                                ? Task::Classification
                                : Task::Regression;
        } else {
            s.features.push_back(
                {t.header[h],
                 numeric ? ColumnKind::Numeric : ColumnKind::Categorical});
        }
    }
    s.validate();
    return s;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double test_fraction,
                                             uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("test_fraction must be in (0,1)");
    const std::size_t n = ds.n_rows;
    const auto n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * test_fraction));
    if (n_test < 1 || n - n_test < 1)
        throw ArgumentError("degenerate split sizes for n=" +
                            std::to_string(n));

    auto rng = make_engine(derive_seed(seed, 0x5e17));
    std::vector<std::size_t> test_idx;

    bool stratify = false;
    if (ds.task() == Task::Classification) {
        std::vector<std::size_t> counts(ds.n_classes, 0);
        for (double y : ds.target) counts[static_cast<std::size_t>(y)]++;
        stratify = std::all_of(counts.begin(), counts.end(),
                               [](std::size_t c) { return c >= 2; });
    }

    if (stratify) {
        // Largest-remainder allocation keeps the total at exactly n_test.
        std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
        for (std::size_t r = 0; r < n; ++r)
            by_class[static_cast<std::size_t>(ds.target[r])].push_back(r);
        std::vector<std::size_t> take(ds.n_classes);
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < ds.n_classes; ++c) {
            double exact = static_cast<double>(by_class[c].size()) *
                           static_cast<double>(n_test) /
                           static_cast<double>(n);
            take[c] = static_cast<std::size_t>(std::floor(exact));
            assigned += take[c];
            remainders.push_back({exact - static_cast<double>(take[c]), c});
        }
        std::sort(remainders.begin(), remainders.end(), [](auto a, auto b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t i = 0; assigned < n_test && i < remainders.size();
             ++i) {
            std::size_t c = remainders[i].second;
            if (take[c] < by_class[c].size()) {
                ++take[c];
                ++assigned;
            }
        }
        for (std::size_t c = 0; c < ds.n_classes; ++c) {
            std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
            for (std::size_t i = 0; i < take[c]; ++i)
                test_idx.push_back(by_class[c][i]);
        }
    } else {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        test_idx.assign(perm.begin(), perm.begin() + n_test);
    }

    std::vector<bool> in_test(n, false);
    for (std::size_t r : test_idx) in_test[r] = true;

    auto subset = [&](bool want_test) {
        Dataset out;
        out.schema = ds.schema;
        out.codecs = ds.codecs;
        out.target_codec = ds.target_codec;
        out.n_classes = ds.n_classes;
        const std::size_t d = ds.dim();
        for (std::size_t r = 0; r < n; ++r) {
            if (in_test[r] != want_test) continue;
            out.values.insert(out.values.end(), ds.values.begin() + r * d,
                              ds.values.begin() + (r + 1) * d);
            out.target.push_back(ds.target[r]);
        }
        out.n_rows = out.target.size();
        return out;
    };
    return {subset(false), subset(true)};
}

}  // namespace featvec
