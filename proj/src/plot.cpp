// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hatewatch/errors.hpp"

namespace hatewatch::plot {

namespace {

constexpr int kExaggerationIters = 250;
constexpr double kExaggeration = 12.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

Matrix conditional_affinities(const Matrix& sq_dist, double perplexity) {
    const int n = sq_dist.rows();
    const double target = std::log(perplexity);
    Matrix p(n, n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, sq_dist(i, j));
        double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d = sq_dist(i, j) - dmin;
                const double e = std::exp(-beta * d);
                p(i, j) = e;
                sum += e;
                weighted += d * e;
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            for (int j = 0; j < n; ++j) p(i, j) /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-10) break;
            if (diff > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = std::isinf(lo) ? beta / 2.0 : 0.5 * (beta + lo);
            }
        }
        p(i, i) = 0.0;
    }
    return p;
}

Matrix tsne(const Matrix& x, const ProjectionOptions& options) {
    const int n = x.rows();
    if (n < kMinProjectionPoints)
        throw DataError("projection needs at least " + std::to_string(kMinProjectionPoints) + " points, got " +
                        std::to_string(n));
    if (!(options.perplexity > 0.0) || options.iterations < 1 || !(options.learning_rate > 0.0))
        throw ConfigError("projection perplexity, iterations and learning rate must be positive");
    const double perplexity = std::min(options.perplexity, (n - 1) / 3.0);

    Matrix d(n, n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < x.cols(); ++k) s += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
            d(i, j) = s;
        }
    const Matrix cond = conditional_affinities(d, perplexity);
    Matrix p(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p(i, j) = std::max((cond(i, j) + cond(j, i)) / (2.0 * n), 1e-12);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1e-4);
    Matrix y(n, 2), update(n, 2), gains(n, 2, 1.0), grad(n, 2), q(n, n);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = gauss(rng);
    std::vector<double> row_sum(static_cast<std::size_t>(n));

    for (int iter = 0; iter < options.iterations; ++iter) {
        const double exaggeration = iter < kExaggerationIters ? kExaggeration : 1.0;
        const double momentum = iter < kExaggerationIters ? 0.5 : 0.8;
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    q(i, j) = 0.0;
                    continue;
                }
                const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
                q(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
                s += q(i, j);
            }
            row_sum[static_cast<std::size_t>(i)] = s;
        }
        const double z = std::accumulate(row_sum.begin(), row_sum.end(), 0.0);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double gx = 0.0, gy = 0.0;
            for (int j = 0; j < n; ++j) {
                const double m = (exaggeration * p(i, j) - q(i, j) / z) * q(i, j);
                gx += m * (y(i, 0) - y(j, 0));
                gy += m * (y(i, 1) - y(j, 1));
            }
            grad(i, 0) = 4.0 * gx;
            grad(i, 1) = 4.0 * gy;
        }
        double mean[2] = {0.0, 0.0};
        for (std::size_t k = 0; k < y.size(); ++k) {
            gains[k] = (grad[k] > 0.0) != (update[k] > 0.0) ? gains[k] + 0.2 : std::max(0.01, gains[k] * 0.8);
            update[k] = momentum * update[k] - options.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
            mean[k % 2] += y[k] / n;
        }
        for (std::size_t k = 0; k < y.size(); ++k) y[k] -= mean[k % 2];
    }
    return y;
}

std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title) {
    constexpr double size = 640.0, margin = 40.0, top = 60.0;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!points.empty()) {
        x0 = x1 = points.front().x;
        y0 = y1 = points.front().y;
        for (const auto& p : points) {
            x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
        }
    }
    const double sx = (size - 2 * margin) / std::max(x1 - x0, 1e-12);
    const double sy = (size - top - margin) / std::max(y1 - y0, 1e-12);

    std::map<std::string, std::string> colour;
    for (const auto& p : points)
        if (!colour.count(p.group)) colour[p.group] = kPalette[colour.size() % std::size(kPalette)];

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << escape(title)
        << "</text>\n";
    double lx = margin;
    for (const auto& [group, c] : colour) {
        out << "<circle cx=\"" << num(lx + 5) << "\" cy=\"42\" r=\"5\" fill=\"" << c << "\"/>"
            << "<text x=\"" << num(lx + 14) << "\" y=\"46\" font-family=\"sans-serif\" font-size=\"12\">" << escape(group)
            << "</text>\n";
        lx += 24 + 7.0 * static_cast<double>(group.size());
    }
    out << "<text x=\"" << num(size - 230) << "\" y=\"46\" font-family=\"sans-serif\" font-size=\"12\">"
        << "filled: hate, hollow: non-hate</text>\n";
    for (const auto& p : points) {
        const double cx = margin + (p.x - x0) * sx;
        const double cy = size - margin - (p.y - y0) * sy;
        const auto& c = colour[p.group];
        out << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"2.5\" "
            << (p.filled ? "fill=\"" + c + "\"" : "fill=\"none\" stroke=\"" + c + "\"") << " fill-opacity=\"0.7\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string grid_svg(const EvalReport& report, const std::string& title) {
    constexpr double cell_w = 110.0, cell_h = 32.0, left = 120.0, top = 70.0;
    const double width = left + cell_w * static_cast<double>(report.targets.size()) + 20.0;
    const double height = top + cell_h * static_cast<double>(report.sources.size()) + 40.0;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"10\" y=\"22\" font-size=\"15\">" << escape(title) << "</text>\n"
        << "<text x=\"10\" y=\"" << num(top - 10) << "\" font-size=\"12\" font-style=\"italic\">source \\ target</text>\n";
    for (std::size_t t = 0; t < report.targets.size(); ++t)
        out << "<text x=\"" << num(left + cell_w * static_cast<double>(t) + cell_w / 2) << "\" y=\"" << num(top - 10)
            << "\" font-size=\"13\" text-anchor=\"middle\" font-weight=\"bold\">" << escape(report.targets[t]) << "</text>\n";
    for (std::size_t s = 0; s < report.sources.size(); ++s) {
        const double y = top + cell_h * static_cast<double>(s);
        out << "<text x=\"10\" y=\"" << num(y + cell_h / 2 + 4) << "\" font-size=\"13\" font-weight=\"bold\">"
            << escape(report.sources[s]) << "</text>\n";
        for (std::size_t t = 0; t < report.targets.size(); ++t) {
            const auto& c = report.cell(report.sources[s], report.targets[t]);
            const double x = left + cell_w * static_cast<double>(t);
            const double shade = c.macro_f1 ? *c.macro_f1 : 0.0;
            out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << cell_w << "\" height=\"" << cell_h
                << "\" stroke=\"#888\" fill=\"" << (c.macro_f1 ? "#1f77b4" : "#eeeeee") << "\" fill-opacity=\""
                << num(c.macro_f1 ? 0.15 + 0.6 * shade : 1.0) << "\"/>\n"
                << "<text x=\"" << num(x + cell_w / 2) << "\" y=\"" << num(y + cell_h / 2 + 4)
                << "\" font-size=\"13\" text-anchor=\"middle\">"
                << (c.macro_f1 ? num(*c.macro_f1 * 100.0) : std::string("failed")) << "</text>\n";
        }
    }
    out << "<text x=\"10\" y=\"" << num(height - 14) << "\" font-size=\"11\">macro-F1 x 100; config "
        << escape(report.config_hash) << "</text>\n</svg>\n";
    return out.str();
}

}  // namespace hatewatch::plot
