// Replaying recovered models against a dataset.
//
// Boundary replay re-runs the coupled forward solve with the recovered front
// coefficient (and its interval endpoints), producing an uncertainty band
// around the predicted front. Field replay integrates the recovered bulk
// model forward with the dataset's recorded boundary motion prescribed,
// using the very same update kernel as the forward solver, and reports the
// pointwise deviation from the stored snapshot at the requested time.
#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "simulate.hpp"

namespace mbsindy {

struct BoundaryBand {
    BoundaryCurve lower;   // smallest front coefficient
    BoundaryCurve median;
    BoundaryCurve upper;   // largest front coefficient
    double time = 0.0;
    double area = 0.0;     // area enclosed between lower and upper
    bool receding = false; // some coefficient drives the front backward
};

namespace detail {

inline double band_area(const BoundaryCurve& lower, const BoundaryCurve& upper, double dy) {
    if (lower.topology == CurveTopology::periodic_graph) {
        if (lower.points.size() != upper.points.size())
            throw ShapeError("band_area: curve sample counts differ");
        double area = 0.0;
        for (std::size_t j = 0; j < lower.points.size(); ++j)
            area += (upper.points[j].x - lower.points[j].x) * dy;
        return area;
    }
    auto shoelace = [](const BoundaryCurve& c) {
        double twice = 0.0;
        const auto& pts = c.points;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const Vec2& a = pts[i];
            const Vec2& b = pts[(i + 1) % pts.size()];
            twice += a.x * b.y - b.x * a.y;
        }
        return std::abs(twice) * 0.5;
    };
    return shoelace(upper) - shoelace(lower);
}

}  // namespace detail

// Forward-solve the front three times, once per front coefficient value
// (typically the interval endpoints and the median), up to t_target.
inline BoundaryBand replay_boundary(const Dataset& ds, double kappa_lo, double kappa_med,
                                    double kappa_hi, double t_target) {
    if (ds.curves.empty()) throw MissingSnapshotError("replay_boundary: dataset has no curves");
    const double t_max = ds.curves.back().time;
    if (t_target <= 0.0 || t_target > t_max + 1e-9)
        throw InvalidParameterError("replay_boundary: t_target outside the dataset time span");

    std::array<double, 3> kappas{kappa_lo, kappa_med, kappa_hi};
    std::sort(kappas.begin(), kappas.end());

    BoundaryBand band;
    band.time = t_target;
    band.receding = kappas[0] < 0.0;

    std::array<BoundaryCurve, 3> out;
    for (std::size_t i = 0; i < 3; ++i) {
        SimParams p = ds.params;
        p.kappa = kappas[i];
        p.t_end = t_target;
        const long n_steps = std::lround(t_target / p.dt);
        p.snapshot_stride = static_cast<int>(std::max<long>(1, n_steps));
        const Dataset run = simulate(p);
        out[i] = run.curves.back();
    }
    band.lower = out[0];
    band.median = out[1];
    band.upper = out[2];
    band.area = detail::band_area(band.lower, band.upper, ds.params.dy);
    return band;
}

struct FieldReplay {
    FieldSnapshot replayed;         // grid and replayed values at compare time
    std::vector<double> abs_error;  // |replayed - stored| per grid point
    double max_abs_error = 0.0;
    std::size_t compared_snapshot = 0;
};

// Integrate a recovered bulk model with the recorded front motion.
inline FieldReplay replay_field(const Dataset& ds, const Eigen::VectorXd& coefficients,
                                double t_target) {
    const detail::BulkModel model = detail::bulk_model_from(coefficients);
    const double Dx = model.clap + model.cxx;
    const double Dy = model.clap + model.cyy;
    if (!(Dx > 0.0) || !(Dy > 0.0))
        throw IllPosedModelError("replay_field: recovered diffusion is not positive (Dx = " +
                                 std::to_string(Dx) + ", Dy = " + std::to_string(Dy) + ")");
    if (ds.snapshots.size() < 2 || ds.curves.size() != ds.snapshots.size())
        throw MissingSnapshotError("replay_field: dataset needs paired snapshots and curves");

    const SimParams& p = ds.params;
    const bool planar = p.geometry == FrontGeometry::planar;
    const int nx = planar ? static_cast<int>(std::lround(p.length_x / p.dx)) + 1
                          : 2 * static_cast<int>(std::lround(p.half_width / p.dx)) + 1;
    const int ny = planar ? static_cast<int>(std::lround(p.length_y / p.dy)) : nx;
    const std::size_t n_nodes = static_cast<std::size_t>(nx) * ny;
    if (ds.snapshots[0].values.size() != n_nodes)
        throw ShapeError("replay_field: snapshot size does not match the stored grid parameters");

    // Front graphs per stored time.
    std::vector<double> times(ds.curves.size());
    std::vector<std::vector<double>> graph(ds.curves.size());
    for (std::size_t k = 0; k < ds.curves.size(); ++k) {
        times[k] = ds.curves[k].time;
        if (k > 0 && times[k] <= times[k - 1])
            throw InvalidParameterError("replay_field: curve times must increase");
        const auto& pts = ds.curves[k].points;
        graph[k].resize(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            graph[k][i] = planar ? pts[i].x : pts[i].norm();
    }
    if (t_target < times.front() - 1e-9 || t_target > times.back() + 1e-9)
        throw InvalidParameterError("replay_field: t_target outside the dataset time span");

    // Compare against the stored snapshot nearest to t_target; it must
    // coincide with it.
    std::size_t cmp = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double d = std::abs(times[k] - t_target);
        if (d < best) {
            best = d;
            cmp = k;
        }
    }
    if (best > 1e-6 * std::max(1.0, std::abs(t_target)))
        throw InvalidParameterError("replay_field: no stored snapshot at the requested time");

    // Time step: the dataset's own step unless stability demands less.
    const double h = std::min(p.dx, p.dy);
    const double bound = 0.9 * h * h / (4.0 * std::max(Dx, Dy));
    double dt = p.dt;
    const double duration = t_target - times.front();
    long n_steps;
    if (dt <= bound) {
        n_steps = std::lround(duration / dt);
        if (std::abs(static_cast<double>(n_steps) * dt - duration) > 1e-9) {
            n_steps = static_cast<long>(std::ceil(duration / dt - 1e-12));
            dt = duration / static_cast<double>(n_steps);
        }
    } else {
        dt = 0.999 * bound;
        n_steps = static_cast<long>(std::ceil(duration / dt - 1e-12));
        dt = duration / static_cast<double>(n_steps);
    }
    if (n_steps < 1) throw InvalidParameterError("replay_field: nothing to integrate");

    // Node geometry for the level set.
    const double orig = planar ? 0.0 : -p.half_width;
    std::vector<double> node_r, node_tfrac;
    std::vector<int> node_tidx;
    const int ntheta = planar ? 0 : static_cast<int>(graph[0].size());
    if (!planar) {
        node_r.resize(n_nodes);
        node_tidx.resize(n_nodes);
        node_tfrac.resize(n_nodes);
        const double two_pi = 2.0 * 3.14159265358979323846;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double x = orig + i * p.dx, y = orig + j * p.dy;
                const std::size_t id = static_cast<std::size_t>(j) * nx + i;
                node_r[id] = std::hypot(x, y);
                double th = std::atan2(y, x);
                if (th < 0.0) th += two_pi;
                const double bin = th * ntheta / two_pi;
                int kk = static_cast<int>(bin);
                if (kk >= ntheta) kk = ntheta - 1;
                node_tidx[id] = kk;
                node_tfrac[id] = bin - kk;
            }
    } else {
        if (graph[0].size() != static_cast<std::size_t>(ny))
            throw ShapeError("replay_field: planar curve must sample every grid row");
    }

    std::vector<double> front(graph[0].size());
    std::vector<double> phi(n_nodes);
    auto fill_front = [&](double t) {
        std::size_t k = 0;
        while (k + 2 < times.size() && times[k + 1] <= t) ++k;
        const double span = times[k + 1] - times[k];
        double w = span > 0.0 ? (t - times[k]) / span : 0.0;
        w = std::clamp(w, 0.0, 1.0);
        for (std::size_t i = 0; i < front.size(); ++i)
            front[i] = graph[k][i] + w * (graph[k + 1][i] - graph[k][i]);
    };
    auto fill_phi = [&] {
        if (planar) {
            for (int j = 0; j < ny; ++j) {
                const double sj = front[static_cast<std::size_t>(j)];
                for (int i = 0; i < nx; ++i)
                    phi[static_cast<std::size_t>(j) * nx + i] = i * p.dx - sj;
            }
        } else {
            for (std::size_t id = 0; id < n_nodes; ++id) {
                const int k = node_tidx[id];
                const int k1 = (k + 1) % ntheta;
                const double rho = front[static_cast<std::size_t>(k)] +
                                   node_tfrac[id] * (front[static_cast<std::size_t>(k1)] -
                                                     front[static_cast<std::size_t>(k)]);
                phi[id] = node_r[id] - rho;
            }
        }
    };

    std::vector<double> u = ds.snapshots[0].values;
    std::vector<double> scratch;
    for (long step = 0; step < n_steps; ++step) {
        const double t_now = times.front() + static_cast<double>(step) * dt;
        fill_front(t_now);
        fill_phi();
        detail::bulk_field_step(u, phi, nx, ny, p.dx, p.dy, dt, planar, p.u_f, model, scratch);
        fill_front(t_now + dt);
        fill_phi();
        for (std::size_t id = 0; id < n_nodes; ++id)
            if (phi[id] >= 0.0) u[id] = p.u_f;
    }

    FieldReplay out;
    out.compared_snapshot = cmp;
    out.replayed.time = t_target;
    out.replayed.points = ds.snapshots[cmp].points;
    out.replayed.values = std::move(u);
    out.abs_error.resize(n_nodes);
    for (std::size_t id = 0; id < n_nodes; ++id) {
        out.abs_error[id] = std::abs(out.replayed.values[id] - ds.snapshots[cmp].values[id]);
        out.max_abs_error = std::max(out.max_abs_error, out.abs_error[id]);
    }
    return out;
}

}  // namespace mbsindy
