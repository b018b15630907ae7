// Moving-boundary geometry: panel decomposition of sampled interface curves,
// normals (from panels or from a level-set field), and normal-velocity
// estimation between consecutive curves.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "pddo.hpp"

namespace mbsindy {

enum class CurveTopology {
    open_chain,       // no wrap segment
    periodic_graph,   // single-valued in y, wraps across period_y
    closed_loop,      // last point connects back to the first
};

struct BoundaryCurve {
    double time = 0.0;
    std::vector<Vec2> points;
    CurveTopology topology = CurveTopology::open_chain;
    double period_y = 0.0;  // used by periodic_graph
};

// Straight segment between consecutive curve points. The tangent runs along
// the traversal direction; the normal is the tangent turned clockwise, which
// points into the phase ahead of the front when the curve is traversed with
// that phase on its clockwise side (ascending y for a front advancing in +x,
// counterclockwise for an expanding loop).
struct Panel {
    int id = 0;
    Vec2 midpoint;
    Vec2 tangent;   // unit
    Vec2 normal;    // unit, tangent rotated -90 degrees
    double length = 0.0;
    double angle = 0.0;        // tangent direction
    double frame_angle = 0.0;  // normal direction; local frames point axis 1 here
};

namespace detail {

inline Panel make_panel(int id, const Vec2& a, const Vec2& b) {
    const Vec2 seg = b - a;
    const double len = seg.norm();
    if (len < 1e-14)
        throw DegeneratePanelError("panel " + std::to_string(id) + " has coincident endpoints");
    Panel p;
    p.id = id;
    p.midpoint = (a + b) * 0.5;
    p.tangent = seg / len;
    p.normal = p.tangent.perp_cw();
    p.length = len;
    p.angle = std::atan2(seg.y, seg.x);
    p.frame_angle = std::atan2(p.normal.y, p.normal.x);
    return p;
}

}  // namespace detail

inline std::vector<Panel> panels_from_curve(const BoundaryCurve& curve) {
    const std::size_t n = curve.points.size();
    if (n < 2) throw InvalidParameterError("panels_from_curve: need at least two points");
    std::vector<Panel> panels;
    panels.reserve(n);
    for (std::size_t i = 0; i + 1 < n; ++i)
        panels.push_back(detail::make_panel(static_cast<int>(i), curve.points[i], curve.points[i + 1]));
    if (curve.topology == CurveTopology::closed_loop) {
        panels.push_back(detail::make_panel(static_cast<int>(n - 1), curve.points[n - 1], curve.points[0]));
    } else if (curve.topology == CurveTopology::periodic_graph) {
        if (curve.period_y <= 0.0)
            throw InvalidParameterError("periodic_graph curve needs a positive period");
        const Vec2 wrapped{curve.points[0].x, curve.points[0].y + curve.period_y};
        panels.push_back(detail::make_panel(static_cast<int>(n - 1), curve.points[n - 1], wrapped));
    }
    return panels;
}

// Flip every normal (and frame angle) if the mean normal disagrees with the
// hint directions; `hints` gives, per panel, any vector pointing toward the
// phase the normals should enter.
inline void orient_normals(std::vector<Panel>& panels, const std::vector<Vec2>& hints) {
    if (hints.size() != panels.size())
        throw ShapeError("orient_normals: one hint per panel is required");
    double agreement = 0.0;
    for (std::size_t i = 0; i < panels.size(); ++i) agreement += panels[i].normal.dot(hints[i]);
    if (agreement >= 0.0) return;
    for (Panel& p : panels) {
        p.normal = p.normal * -1.0;
        p.tangent = p.tangent * -1.0;  // keep the frame right-handed
        p.angle = std::atan2(p.tangent.y, p.tangent.x);
        p.frame_angle = std::atan2(p.normal.y, p.normal.x);
    }
}

// Unit normals grad(phi)/|grad(phi)| of a level-set field sampled on a
// cloud, evaluated at arbitrary positions.
inline std::vector<Vec2> normals_from_levelset(const PointCloud& cloud,
                                               std::span<const double> phi,
                                               std::span<const Vec2> at, double horizon,
                                               const NeighborIndex* index = nullptr) {
    std::vector<Vec2> normals;
    normals.reserve(at.size());
    for (const Vec2& pos : at) {
        const DerivativeSet d = derivatives_at(cloud, phi, pos, horizon, 0.0, std::nullopt, index);
        const Vec2 grad{d.d1, d.d2};
        const double g = grad.norm();
        if (g < 1e-8)
            throw FlatLevelSetError("level-set gradient vanished near (" + std::to_string(pos.x) +
                                    ", " + std::to_string(pos.y) + ")");
        normals.push_back(grad / g);
    }
    return normals;
}

enum class VelocityMethod {
    nearest_point,      // |displacement to nearest point| / dt
    normal_projection,  // |displacement . normal| / dt
};

struct NormalVelocitySample {
    int panel_id = 0;
    double time = 0.0;
    double speed = 0.0;
    Vec2 foot;  // nearest point on the later curve
};

namespace detail {

inline Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squared_norm();
    if (len2 == 0.0) return a;
    double t = (p - a).dot(ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return a + ab * t;
}

// Segment soup of a curve, with ghost replicas across the period for
// periodic graphs so nearest-point queries see the wrap.
inline std::vector<std::pair<Vec2, Vec2>> curve_segments(const BoundaryCurve& curve) {
    std::vector<std::pair<Vec2, Vec2>> segs;
    const auto& pts = curve.points;
    const std::size_t n = pts.size();
    if (n < 2) throw MissingSnapshotError("normal_velocity: later curve has fewer than two points");
    auto add_chain = [&segs](const std::vector<Vec2>& chain, double shift_y, bool wrap, double period) {
        for (std::size_t i = 0; i + 1 < chain.size(); ++i)
            segs.emplace_back(Vec2{chain[i].x, chain[i].y + shift_y},
                              Vec2{chain[i + 1].x, chain[i + 1].y + shift_y});
        if (wrap)
            segs.emplace_back(Vec2{chain.back().x, chain.back().y + shift_y},
                              Vec2{chain.front().x, chain.front().y + shift_y + period});
    };
    switch (curve.topology) {
        case CurveTopology::open_chain:
            add_chain(pts, 0.0, false, 0.0);
            break;
        case CurveTopology::closed_loop:
            for (std::size_t i = 0; i < n; ++i) segs.emplace_back(pts[i], pts[(i + 1) % n]);
            break;
        case CurveTopology::periodic_graph:
            if (curve.period_y <= 0.0)
                throw InvalidParameterError("periodic_graph curve needs a positive period");
            for (double shift : {-curve.period_y, 0.0, curve.period_y})
                add_chain(pts, shift, true, curve.period_y);
            break;
    }
    return segs;
}

}  // namespace detail

// Speed of each panel midpoint toward the curve at the next instant.
inline std::vector<NormalVelocitySample> normal_velocity(const std::vector<Panel>& panels,
                                                         const BoundaryCurve& later, double dt,
                                                         VelocityMethod method) {
    if (dt <= 0.0) throw InvalidParameterError("normal_velocity: dt must be positive");
    const auto segs = detail::curve_segments(later);
    std::vector<NormalVelocitySample> out;
    out.reserve(panels.size());
    for (const Panel& p : panels) {
        Vec2 best = segs.front().first;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (const auto& [a, b] : segs) {
            const Vec2 q = detail::closest_point_on_segment(p.midpoint, a, b);
            const double d2 = (q - p.midpoint).squared_norm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = q;
            }
        }
        const Vec2 s = best - p.midpoint;
        NormalVelocitySample sample;
        sample.panel_id = p.id;
        sample.time = later.time;
        sample.foot = best;
        sample.speed = (method == VelocityMethod::nearest_point) ? s.norm() / dt
                                                                 : std::abs(s.dot(p.normal)) / dt;
        out.push_back(sample);
    }
    return out;
}

}  // namespace mbsindy
