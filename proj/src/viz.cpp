#include "featvec/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace featvec {

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

double angle_degrees(const std::array<double, 2>& v) {
    double a = std::atan2(v[1], v[0]) * 180.0 / M_PI;
    if (a < 0.0) a += 360.0;
    return a;
}

const char* kCurvePalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void render_feature_vectors(const FeatureEmbedding& E,
                            std::span<const std::string> names,
                            const std::string& path,
                            const ScatterOptions& opts) {
    if (E.d == 0) throw ArgumentError("empty embedding");
    if (names.size() != E.d)
        throw ArgumentError("name count does not match embedding size");
    bool any_nonzero = false;
    for (const auto& v : E.vectors)
        if (v[0] != 0.0 || v[1] != 0.0) any_nonzero = true;
    if (!any_nonzero) throw ArgumentError("all embedding vectors are zero");

    const double size = 720.0;
    const double half = size / 2.0;
    double extent = 0.0;
    for (const auto& v : E.vectors)
        extent = std::max({extent, std::fabs(v[0]), std::fabs(v[1])});
    extent *= 1.1;  // symmetric about the origin, padded 10%

    auto sx = [&](double x) { return half + x / extent * (half - 30.0); };
    auto sy = [&](double y) { return half - y / extent * (half - 30.0); };

    std::vector<double> norms = importance(E);
    std::vector<std::size_t> order(E.d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                     std::size_t b) {
        return norms[a] > norms[b];
    });
    const std::size_t n_labels =
        E.d <= 25 ? E.d
                  : std::min<std::size_t>(
                        static_cast<std::size_t>(opts.label_top), E.d);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(size)
        << "\" height=\"" << fmt(size) << "\" viewBox=\"0 0 " << fmt(size)
        << " " << fmt(size) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << fmt(30.0) << "\" y1=\"" << fmt(half)
        << "\" x2=\"" << fmt(size - 30.0) << "\" y2=\"" << fmt(half)
        << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n"
        << "<line x1=\"" << fmt(half) << "\" y1=\"" << fmt(30.0)
        << "\" x2=\"" << fmt(half) << "\" y2=\"" << fmt(size - 30.0)
        << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";

    const std::size_t originals =
        opts.knockoff_pairs ? E.d / 2 : E.d;
    for (std::size_t i = 0; i < E.d; ++i) {
        const double hue = angle_degrees(E.vectors[i]);
        const std::string color =
            "hsl(" + fmt(hue) + ", 70%, 45%)";
        const double cx = sx(E.vectors[i][0]);
        const double cy = sy(E.vectors[i][1]);
        if (opts.knockoff_pairs && i >= originals) {
            out << "<rect class=\"fv-marker\" x=\"" << fmt(cx - 6.0)
                << "\" y=\"" << fmt(cy - 6.0)
                << "\" width=\"12.00\" height=\"12.00\" fill=\"" << color
                << "\" fill-opacity=\"0.85\"/>\n";
        } else {
            out << "<circle class=\"fv-marker\" cx=\"" << fmt(cx)
                << "\" cy=\"" << fmt(cy) << "\" r=\"7.00\" fill=\"" << color
                << "\" fill-opacity=\"0.85\"/>\n";
        }
    }
    for (std::size_t k = 0; k < n_labels; ++k) {
        const std::size_t i = order[k];
        out << "<text x=\"" << fmt(sx(E.vectors[i][0]) + 9.0) << "\" y=\""
            << fmt(sy(E.vectors[i][1]) - 9.0)
            << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << xml_escape(names[i]) << "</text>\n";
    }
    out << "</svg>\n";
}

void render_curves(std::span<const PerformanceCurve> curves,
                   const std::string& path) {
    if (curves.empty()) throw ArgumentError("no curves to render");
    const std::size_t points = curves[0].metric.size();
    for (const auto& c : curves)
        if (c.metric.size() != points)
            throw ArgumentError("curves have mismatched lengths");

    double lo = curves[0].metric[0], hi = lo;
    for (const auto& c : curves)
        for (double v : c.metric) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi == lo) {
        hi += 0.5;
        lo -= 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double width = 760.0, height = 520.0;
    const double ml = 70.0, mr = 160.0, mt = 30.0, mb = 50.0;
    auto sx = [&](double k) {
        return ml + k / static_cast<double>(points - 1) * (width - ml - mr);
    };
    auto sy = [&](double v) {
        return height - mb - (v - lo) / (hi - lo) * (height - mt - mb);
    };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
        << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width)
        << " " << fmt(height) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(height - mb)
        << "\" x2=\"" << fmt(width - mr) << "\" y2=\"" << fmt(height - mb)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
        << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\""
        << fmt(ml) << "\" y2=\"" << fmt(height - mb)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << fmt(ml - 8.0) << "\" y=\"" << fmt(height - mb)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" << fmt(lo + pad) << "</text>\n"
        << "<text x=\"" << fmt(ml - 8.0) << "\" y=\"" << fmt(mt + 4.0)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" << fmt(hi - pad) << "</text>\n"
        << "<text x=\"" << fmt((ml + width - mr) / 2.0) << "\" y=\""
        << fmt(height - 14.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">k</text>\n";

    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* color = kCurvePalette[c % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < points; ++k) {
            if (k) out << ' ';
            out << fmt(sx(static_cast<double>(k))) << ','
                << fmt(sy(curves[c].metric[k]));
        }
        out << "\"/>\n";
        const double ly = mt + 18.0 * static_cast<double>(c);
        out << "<rect x=\"" << fmt(width - mr + 12.0) << "\" y=\""
            << fmt(ly) << "\" width=\"14.00\" height=\"4.00\" fill=\""
            << color << "\"/>\n"
            << "<text class=\"legend\" x=\"" << fmt(width - mr + 32.0)
            << "\" y=\"" << fmt(ly + 6.0)
            << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << xml_escape(curves[c].method) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace featvec
