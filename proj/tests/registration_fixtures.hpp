#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "garment/deformation_graph.hpp"
#include "garment/primitives.hpp"
#include "garment/registration.hpp"

namespace garment::testing {

// Sleeve-sized tube (radius 5 cm, 50 cm long along +x) and the same tube at
// twice the ring/segment resolution, both bent so the axis follows a sine
// bump y = a sin(2 pi x / wavelength). The bend is isometric: the axis is
// arc-length parameterized and each cross-section stays normal to it.
// Ground truth is the bend applied to each template vertex.
struct WarpCase {
    Mesh tmpl;
    Mesh scan;
    BoundarySets boundaries;
    std::vector<Vec3> ground_truth;
};

class SineBend {
public:
    SineBend(double amplitude, double wavelength, double length)
        : a_(amplitude), k_(2.0 * std::numbers::pi / wavelength) {
        const int steps = 20000;
        const double extent = 2.0 * length;
        double s = 0.0;
        xs_.push_back(0.0);
        arc_.push_back(0.0);
        for (int i = 1; i <= steps; ++i) {
            const double x0 = extent * (i - 1) / steps;
            const double x1 = extent * i / steps;
            s += 0.5 * (x1 - x0) * (speed(x0) + speed(x1));
            xs_.push_back(x1);
            arc_.push_back(s);
        }
    }

    Vec3 operator()(const Vec3& p) const {
        const double x = axial_to_x(p.x());
        const double phi = std::atan(a_ * k_ * std::cos(k_ * x));
        const Vec3 axis(x, a_ * std::sin(k_ * x), 0.0);
        return axis + Vec3(-std::sin(phi) * p.y(), std::cos(phi) * p.y(), p.z());
    }

private:
    double speed(double x) const {
        const double d = a_ * k_ * std::cos(k_ * x);
        return std::sqrt(1.0 + d * d);
    }

    double axial_to_x(double s) const {
        const auto it = std::lower_bound(arc_.begin(), arc_.end(), s);
        if (it == arc_.begin()) return s;
        const std::size_t i = static_cast<std::size_t>(it - arc_.begin());
        const double t = (s - arc_[i - 1]) / (arc_[i] - arc_[i - 1]);
        return xs_[i - 1] + t * (xs_[i] - xs_[i - 1]);
    }

    double a_, k_;
    std::vector<double> xs_, arc_;
};

inline std::vector<int> end_rings(int rings, int segments) {
    std::vector<int> idx;
    for (int s = 0; s < segments; ++s) idx.push_back(s);
    for (int s = 0; s < segments; ++s) idx.push_back((rings - 1) * segments + s);
    return idx;
}

inline WarpCase make_warp_case(double amplitude, double wavelength, int rings = 41, int segments = 24) {
    WarpCase c;
    c.tmpl = make_tube(rings, segments, 0.05, 0.0, 0.5);
    Mesh fine = make_tube(2 * rings - 1, 2 * segments, 0.05, 0.0, 0.5);
    const SineBend bend(amplitude, wavelength, 0.5);
    for (Vec3& p : fine.vertices) p = bend(p);
    c.scan = fine;
    for (const Vec3& p : c.tmpl.vertices) c.ground_truth.push_back(bend(p));
    c.boundaries.template_indices = end_rings(rings, segments);
    // Scan boundary marks sampled at the template's ring resolution.
    for (int idx : end_rings(2 * rings - 1, 2 * segments)) {
        if (idx % 2 == 0) c.boundaries.scan_points.push_back(fine.vertices[idx]);
    }
    return c;
}

inline double rms_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
    return std::sqrt(sum / static_cast<double>(a.size()));
}

inline bool non_increasing(const std::vector<double>& seq) {
    for (std::size_t i = 1; i < seq.size(); ++i) {
        if (seq[i] > seq[i - 1]) return false;
    }
    return true;
}

// Oracle: literal double loop over both boundary sets.
inline std::vector<std::pair<int, int>> brute_force_match(const std::vector<Vec3>& bt, const std::vector<Vec3>& bs) {
    std::vector<std::pair<int, int>> out;
    for (int t = 0; t < static_cast<int>(bt.size()); ++t) {
        int best_s = -1;
        double best_d2 = -1.0;
        for (int s = 0; s < static_cast<int>(bs.size()); ++s) {
            int argmin = 0;
            for (int t2 = 1; t2 < static_cast<int>(bt.size()); ++t2) {
                if ((bs[s] - bt[t2]).squaredNorm() < (bs[s] - bt[argmin]).squaredNorm()) argmin = t2;
            }
            if (argmin != t) continue;
            const double d2 = (bt[t] - bs[s]).squaredNorm();
            if (d2 > best_d2) {
                best_d2 = d2;
                best_s = s;
            }
        }
        if (best_s >= 0) out.emplace_back(t, best_s);
    }
    return out;
}

inline DeformationGraph random_state(const Mesh& tmpl, std::mt19937_64& rng) {
    DeformationGraph g = build_grid_graph(tmpl, 0.1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < g.node_count(); ++k) {
        for (int i = 0; i < 9; ++i) g.affine[k].data()[i] += 0.2 * n(rng);
        g.translation[k] = 0.02 * Vec3(n(rng), n(rng), n(rng));
    }
    return g;
}

}  // namespace garment::testing
