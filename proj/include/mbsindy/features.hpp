// Feature systems for sparse regression.
//
// Two candidate libraries are assembled from snapshot/curve data:
//  - interface dynamics: normal speed of each boundary panel against field
//    derivatives taken in the panel's corotational frame (normal, tangent),
//    using one-sided families on the panel's interior side;
//  - bulk dynamics: time derivative of the field against Cartesian
//    derivatives at interior samples, keeping a safety margin away from the
//    moving boundary so families never straddle the front.
#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "geometry.hpp"
#include "pddo.hpp"

namespace mbsindy {

struct FieldSnapshot {
    double time = 0.0;
    std::vector<Vec2> points;
    std::vector<double> values;
};

struct FeatureSystem {
    Eigen::MatrixXd F;
    Eigen::VectorXd V;
    std::vector<std::string> names;
    Eigen::VectorXd scales;  // per-column max-abs once normalized; empty before
    bool normalized = false;

    struct Row {
        int sample_id = 0;   // panel id or cloud point id
        int time_index = 0;  // snapshot / curve-pair index
    };
    std::vector<Row> rows;
    std::vector<std::string> warnings;  // skipped-row diagnostics
};

inline std::vector<std::string> stefan_feature_names() {
    return {"1",      "u",      "u_xn",       "u_xt",   "u_xn*u_xn", "u_xn*u_xt",
            "u_xt*u_xt", "u_xnxn", "u_xtxt", "u_xnxt", "u_xnxn+u_xtxt"};
}

inline std::vector<std::string> fisher_feature_names() {
    return {"1", "u", "u*u", "lap(u)", "u_x", "u_y", "u_xx", "u_xy", "u_yy", "u_y*u_xx"};
}

struct StefanConfig {
    double grid_spacing = 0.1;      // nominal spacing h of the field samples
    double horizon_factor = 3.015;  // horizon = factor * grid_spacing
    double interface_value = 0.0;   // known field value on the front
    VelocityMethod method = VelocityMethod::normal_projection;
    double period_y = 0.0;  // > 0 replicates ghosts across the period
};

struct FisherConfig {
    double grid_spacing = 0.1;
    double horizon_factor = 3.015;
    double margin_factor = 1.5;  // exclusion margin = factor * horizon
    double period_y = 0.0;
    int space_stride = 1;
    int time_stride = 1;
};

namespace detail {

// Append periodic ghost copies (shifted by the period in y) of every point
// within `pad` of either period edge. Ghosts act only as family neighbors;
// `sources` (when given) records which original point each ghost mirrors.
inline void add_periodic_ghosts(PointCloud& cloud, std::vector<double>& values, double period,
                                double pad, std::vector<int>* sources = nullptr) {
    const std::size_t n = cloud.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 p = cloud.points[i];
        for (double shift : {-period, period}) {
            const double gy = p.y + shift;
            if (gy >= -pad && gy <= period + pad) {
                cloud.points.push_back({p.x, gy});
                cloud.volumes.push_back(cloud.volumes[i]);
                values.push_back(values[i]);
                if (sources) sources->push_back(static_cast<int>(i));
            }
        }
    }
}

inline void stefan_row(const DerivativeSet& d, double* out) {
    out[0] = 1.0;
    out[1] = d.value;
    out[2] = d.d1;
    out[3] = d.d2;
    out[4] = d.d1 * d.d1;
    out[5] = d.d1 * d.d2;
    out[6] = d.d2 * d.d2;
    out[7] = d.d11;
    out[8] = d.d22;
    out[9] = d.d12;
    out[10] = d.d11 + d.d22;
}

inline void fisher_row(const DerivativeSet& d, double* out) {
    out[0] = 1.0;
    out[1] = d.value;
    out[2] = d.value * d.value;
    out[3] = d.d11 + d.d22;
    out[4] = d.d1;
    out[5] = d.d2;
    out[6] = d.d11;
    out[7] = d.d12;
    out[8] = d.d22;
    out[9] = d.d2 * d.d11;
}

// Distance from a point to a segment soup, with an early-reject on the
// segment's y extent against the best distance so far.
inline double distance_to_segments(const Vec2& p, const std::vector<std::pair<Vec2, Vec2>>& segs,
                                   Vec2* foot = nullptr, std::size_t* seg_index = nullptr) {
    double best2 = std::numeric_limits<double>::infinity();
    Vec2 best = p;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& [a, b] = segs[i];
        const double ylo = std::min(a.y, b.y), yhi = std::max(a.y, b.y);
        const double gap = (p.y < ylo) ? ylo - p.y : (p.y > yhi ? p.y - yhi : 0.0);
        if (gap * gap > best2) continue;
        const Vec2 q = closest_point_on_segment(p, a, b);
        const double d2 = (q - p).squared_norm();
        if (d2 < best2) {
            best2 = d2;
            best = q;
            best_i = i;
        }
    }
    if (foot) *foot = best;
    if (seg_index) *seg_index = best_i;
    return std::sqrt(best2);
}

}  // namespace detail

// Decide once whether curve normals (tangent turned clockwise) already point
// toward where the front is heading, using the mean displacement from the
// first curve to the second. Returns the panels of `curve`, flipped if not.
inline std::vector<Panel> oriented_panels(const BoundaryCurve& curve, const BoundaryCurve& next,
                                          bool* flipped = nullptr) {
    std::vector<Panel> panels = panels_from_curve(curve);
    const auto motion = normal_velocity(panels, next, 1.0, VelocityMethod::nearest_point);
    std::vector<Vec2> hints(panels.size());
    for (std::size_t i = 0; i < panels.size(); ++i) hints[i] = motion[i].foot - panels[i].midpoint;
    const std::vector<Panel> before = panels;
    orient_normals(panels, hints);
    if (flipped)
        *flipped = !panels.empty() && panels[0].normal.dot(before[0].normal) < 0.0;
    return panels;
}

// Interface feature system: one row per (curve pair, panel).
inline FeatureSystem build_stefan_system(const std::vector<FieldSnapshot>& snapshots,
                                         const std::vector<BoundaryCurve>& curves,
                                         const StefanConfig& cfg) {
    if (curves.size() < 3)
        throw MissingSnapshotError(
            "build_stefan_system: need at least three curves for centered front speeds");
    if (snapshots.size() < curves.size() - 1)
        throw MissingSnapshotError("build_stefan_system: a snapshot per curve pair is required");

    const double horizon = cfg.horizon_factor * cfg.grid_spacing;
    FeatureSystem sys;
    sys.names = stefan_feature_names();

    std::vector<Eigen::RowVectorXd> frows;
    std::vector<double> speeds;

    bool flip_decided = false;
    bool flip = false;

    // Centered rows: speeds are measured symmetrically around curve k, so
    // they line up in time with the field snapshot the features come from.
    for (std::size_t k = 1; k + 1 < curves.size(); ++k) {
        const double dt_b = curves[k].time - curves[k - 1].time;
        const double dt_f = curves[k + 1].time - curves[k].time;
        if (dt_b <= 0.0 || dt_f <= 0.0)
            throw InvalidParameterError("build_stefan_system: curve times must increase");

        std::vector<Panel> panels;
        if (!flip_decided) {
            bool flipped = false;
            panels = oriented_panels(curves[k], curves[k + 1], &flipped);
            flip = flipped;
            flip_decided = true;
        } else {
            panels = panels_from_curve(curves[k]);
            if (flip) {
                std::vector<Vec2> hints(panels.size());
                for (std::size_t i = 0; i < panels.size(); ++i) hints[i] = panels[i].normal * -1.0;
                orient_normals(panels, hints);
            }
        }

        const auto forward = normal_velocity(panels, curves[k + 1], dt_f, cfg.method);
        const auto backward = normal_velocity(panels, curves[k - 1], dt_b, cfg.method);

        // Field cloud: snapshot samples plus the panel midpoints themselves,
        // which carry the known interface value.
        const FieldSnapshot& snap = snapshots[k];
        PointCloud cloud;
        cloud.points = snap.points;
        cloud.volumes.assign(snap.points.size(), cfg.grid_spacing * cfg.grid_spacing);
        std::vector<double> values = snap.values;
        for (const Panel& p : panels) {
            cloud.points.push_back(p.midpoint);
            cloud.volumes.push_back(p.length * cfg.grid_spacing);
            values.push_back(cfg.interface_value);
        }
        if (cfg.period_y > 0.0)
            detail::add_periodic_ghosts(cloud, values, cfg.period_y, 1.05 * horizon);
        const NeighborIndex index(cloud, horizon);

        for (std::size_t i = 0; i < panels.size(); ++i) {
            const Panel& p = panels[i];
            const HalfPlane interior_side{p.midpoint, p.normal * -1.0};
            try {
                const Family fam = build_family_at(cloud, p.midpoint, horizon, interior_side,
                                                   p.frame_angle, &index);
                const PDFunctions pd = solve_pd_functions(assemble_moment_matrix(fam));
                std::vector<double> local(fam.size());
                for (std::size_t j = 0; j < fam.size(); ++j)
                    local[j] = values[static_cast<std::size_t>(fam.members[j])];
                const DerivativeSet d = evaluate_derivatives(local, fam, pd);

                Eigen::RowVectorXd row(11);
                detail::stefan_row(d, row.data());
                frows.push_back(row);
                speeds.push_back((forward[i].speed * dt_f + backward[i].speed * dt_b) /
                                 (dt_f + dt_b));
                sys.rows.push_back({p.id, static_cast<int>(k)});
            } catch (const DegenerateFamilyError& e) {
                sys.warnings.push_back("pair " + std::to_string(k) + " panel " +
                                       std::to_string(p.id) + ": " + e.what());
            } catch (const IllConditionedFamilyError& e) {
                sys.warnings.push_back("pair " + std::to_string(k) + " panel " +
                                       std::to_string(p.id) + ": " + e.what());
            }
        }
    }

    if (frows.empty())
        throw EmptySystemError("build_stefan_system: every candidate row was skipped");
    sys.F.resize(static_cast<Eigen::Index>(frows.size()), 11);
    sys.V.resize(static_cast<Eigen::Index>(frows.size()));
    for (std::size_t r = 0; r < frows.size(); ++r) {
        sys.F.row(static_cast<Eigen::Index>(r)) = frows[r];
        sys.V[static_cast<Eigen::Index>(r)] = speeds[r];
    }
    return sys;
}

// Bulk feature system: one row per retained interior sample and interior
// time index (central time differencing).
inline FeatureSystem build_fisher_system(const std::vector<FieldSnapshot>& snapshots,
                                         const std::vector<BoundaryCurve>& curves,
                                         const FisherConfig& cfg) {
    if (snapshots.size() < 3)
        throw MissingSnapshotError("build_fisher_system: need at least three snapshots");
    if (curves.size() != snapshots.size())
        throw MissingSnapshotError("build_fisher_system: need one curve per snapshot");
    if (cfg.space_stride < 1 || cfg.time_stride < 1)
        throw InvalidParameterError("build_fisher_system: strides must be positive");

    const double horizon = cfg.horizon_factor * cfg.grid_spacing;
    const double margin = cfg.margin_factor * horizon;

    FeatureSystem sys;
    sys.names = fisher_feature_names();

    // Shared-geometry fast path: when every snapshot samples the same sites,
    // families and their moment solves are reused across time.
    bool shared_grid = true;
    for (std::size_t k = 1; k < snapshots.size() && shared_grid; ++k) {
        if (snapshots[k].points.size() != snapshots[0].points.size()) shared_grid = false;
        for (std::size_t i = 0; shared_grid && i < snapshots[k].points.size(); ++i) {
            const Vec2 a = snapshots[k].points[i], b = snapshots[0].points[i];
            if (a.x != b.x || a.y != b.y) shared_grid = false;
        }
    }

    struct CachedFamily {
        bool ready = false;
        bool bad = false;
        Family fam;
        PDFunctions pd;
    };
    std::vector<CachedFamily> cache;

    // Orientation of curve normals toward the invaded phase, decided once.
    bool flip = false;
    oriented_panels(curves[0], curves[1], &flip);

    std::vector<Eigen::RowVectorXd> frows;
    std::vector<double> dudt;

    PointCloud cloud0;
    std::vector<int> ghost_sources;  // ghost slot -> source point id

    auto build_cloud = [&](const FieldSnapshot& snap, PointCloud& cloud,
                           std::vector<double>& values, std::vector<int>* sources) {
        cloud.points = snap.points;
        cloud.volumes.assign(snap.points.size(), cfg.grid_spacing * cfg.grid_spacing);
        values = snap.values;
        if (cfg.period_y > 0.0)
            detail::add_periodic_ghosts(cloud, values, cfg.period_y, 1.05 * horizon, sources);
    };

    std::optional<NeighborIndex> index0;
    if (shared_grid) {
        std::vector<double> dummy;
        build_cloud(snapshots[0], cloud0, dummy, &ghost_sources);
        index0.emplace(cloud0, horizon);
        cache.resize(snapshots[0].points.size());
    }

    for (std::size_t k = 1; k + 1 < snapshots.size(); k += static_cast<std::size_t>(cfg.time_stride)) {
        const double dt2 = snapshots[k + 1].time - snapshots[k - 1].time;
        if (dt2 <= 0.0) throw InvalidParameterError("build_fisher_system: snapshot times must increase");

        // Families clipped by the non-periodic domain walls are one-sided and
        // their derivative estimates degrade, so stay a horizon away in x.
        double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
        for (const Vec2& q : snapshots[k].points) {
            x_lo = std::min(x_lo, q.x);
            x_hi = std::max(x_hi, q.x);
        }

        // Segment soups of the three curves involved in the central stencil.
        std::vector<std::vector<std::pair<Vec2, Vec2>>> soups;
        for (std::size_t kk : {k - 1, k, k + 1}) soups.push_back(detail::curve_segments(curves[kk]));
        const auto& segs_k = soups[1];

        PointCloud cloud;
        std::vector<double> values;
        const NeighborIndex* index = nullptr;
        if (shared_grid) {
            values = snapshots[k].values;
            values.resize(cloud0.size());
            for (std::size_t g = 0; g < ghost_sources.size(); ++g)
                values[snapshots[0].points.size() + g] =
                    snapshots[k].values[static_cast<std::size_t>(ghost_sources[g])];
            index = &*index0;
        } else {
            build_cloud(snapshots[k], cloud, values, nullptr);
        }
        const PointCloud& active_cloud = shared_grid ? cloud0 : cloud;
        std::optional<NeighborIndex> scratch_index;
        if (!shared_grid) {
            scratch_index.emplace(active_cloud, horizon);
            index = &*scratch_index;
        }

        for (std::size_t i = 0; i < snapshots[k].points.size();
             i += static_cast<std::size_t>(cfg.space_stride)) {
            const Vec2 p = snapshots[k].points[i];
            if (p.x < x_lo + horizon || p.x > x_hi - horizon) continue;

            // Inside the evolving phase, and at least `margin` away from the
            // front at every time the stencil touches.
            std::size_t near_seg = 0;
            Vec2 foot;
            const double dist_k = detail::distance_to_segments(p, segs_k, &foot, &near_seg);
            if (dist_k < margin) continue;
            const Vec2 a = segs_k[near_seg].first, b = segs_k[near_seg].second;
            Vec2 n = (b - a).perp_cw();
            if (flip) n = n * -1.0;
            if ((p - foot).dot(n) >= 0.0) continue;  // on or beyond the front
            if (detail::distance_to_segments(p, soups[0]) < margin) continue;
            if (detail::distance_to_segments(p, soups[2]) < margin) continue;

            try {
                DerivativeSet d;
                if (shared_grid) {
                    CachedFamily& slot = cache[i];
                    if (slot.bad) continue;
                    if (!slot.ready) {
                        slot.fam = build_family(cloud0, static_cast<int>(i), horizon, std::nullopt,
                                                true, 0.0, index);
                        slot.pd = solve_pd_functions(assemble_moment_matrix(slot.fam));
                        slot.ready = true;
                    }
                    std::vector<double> local(slot.fam.size());
                    for (std::size_t j = 0; j < slot.fam.size(); ++j)
                        local[j] = values[static_cast<std::size_t>(slot.fam.members[j])];
                    d = evaluate_derivatives(local, slot.fam, slot.pd);
                } else {
                    d = derivatives_at(active_cloud, values, p, horizon, 0.0, std::nullopt, index);
                }

                Eigen::RowVectorXd row(10);
                detail::fisher_row(d, row.data());
                frows.push_back(row);
                dudt.push_back((snapshots[k + 1].values[i] - snapshots[k - 1].values[i]) / dt2);
                sys.rows.push_back({static_cast<int>(i), static_cast<int>(k)});
            } catch (const DegenerateFamilyError& e) {
                if (shared_grid) cache[i].bad = true;
                sys.warnings.push_back("time " + std::to_string(k) + " sample " + std::to_string(i) +
                                       ": " + e.what());
            } catch (const IllConditionedFamilyError& e) {
                if (shared_grid) cache[i].bad = true;
                sys.warnings.push_back("time " + std::to_string(k) + " sample " + std::to_string(i) +
                                       ": " + e.what());
            }
        }
    }

    if (frows.empty())
        throw EmptySystemError("build_fisher_system: every candidate row was skipped");
    sys.F.resize(static_cast<Eigen::Index>(frows.size()), 10);
    sys.V.resize(static_cast<Eigen::Index>(frows.size()));
    for (std::size_t r = 0; r < frows.size(); ++r) {
        sys.F.row(static_cast<Eigen::Index>(r)) = frows[r];
        sys.V[static_cast<Eigen::Index>(r)] = dudt[r];
    }
    return sys;
}

// Rescale every column to unit max-abs; records the scales so coefficients
// can be mapped back to physical units.
inline FeatureSystem normalize(const FeatureSystem& sys) {
    FeatureSystem out = sys;
    out.scales.resize(sys.F.cols());
    for (Eigen::Index j = 0; j < sys.F.cols(); ++j) {
        const double s = sys.F.col(j).cwiseAbs().maxCoeff();
        if (s == 0.0)
            throw ZeroColumnError("normalize: column '" +
                                  (static_cast<std::size_t>(j) < sys.names.size()
                                       ? sys.names[static_cast<std::size_t>(j)]
                                       : std::to_string(j)) +
                                  "' is identically zero");
        out.scales[j] = s;
        out.F.col(j) = sys.F.col(j) / s;
    }
    out.normalized = true;
    return out;
}

// Coefficients of the scaled system -> coefficients of the raw features.
inline Eigen::VectorXd unscale_coefficients(const Eigen::VectorXd& scaled,
                                            const Eigen::VectorXd& scales) {
    if (scaled.size() != scales.size())
        throw ShapeError("unscale_coefficients: size mismatch");
    return scaled.cwiseQuotient(scales);
}

}  // namespace mbsindy
