#pragma once

#include <span>
#include <string>
#include <vector>

#include "featvec/embedding.hpp"
#include "featvec/evaluation.hpp"

namespace featvec {

struct ScatterOptions {
    // Second half of the features drawn as squares (knockoff companions).
    bool knockoff_pairs = false;
    int label_top = 10;  // all labels when d <= 25
};

// Scatter of the feature vectors with origin axes; marker hue encodes the
// angle in degrees, labels mark the most important features. Output bytes
// depend only on the inputs.
void render_feature_vectors(const FeatureEmbedding& E,
                            std::span<const std::string> names,
                            const std::string& path,
                            const ScatterOptions& opts = {});

// Line chart, one polyline per curve plus a legend. Deterministic bytes.
void render_curves(std::span<const PerformanceCurve> curves,
                   const std::string& path);

}  // namespace featvec
