// Finite-difference solver for a reaction-diffusion field coupled to a
// moving Dirichlet front (one-phase Stefan condition), on a uniform grid.
//
// Two front shapes are supported: a near-planar front stored as a
// single-valued graph x = s(y, t) on a y-periodic strip, and a star-shaped
// front stored as a polar graph r = rho(theta, t). Field and front advance
// with explicit Euler, except the Dirichlet flux across the front, whose
// 1/alpha factor (alpha = crossing fraction of the cut cell) is stiff as the
// front approaches a node; that single term is treated implicitly, which
// keeps the update stable and bounded for any alpha without moving off the
// recorded grid.
//
// The interior update is one shared kernel parameterized by the coefficients
// of every candidate bulk term. The forward solver calls it with the true
// coefficients; model replay calls it with recovered ones, so a perfectly
// recovered model reproduces the stored trajectory to round-off.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "features.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace mbsindy {

enum class FrontGeometry { planar, star };

struct SimParams {
    FrontGeometry geometry = FrontGeometry::planar;
    double kappa = 0.5;  // front-condition transport coefficient
    double dx = 0.1;
    double dy = 0.1;
    double dt = 0.002;
    double t_end = 5.0;
    int snapshot_stride = 25;  // steps between stored snapshots
    double u_f = 0.0;          // field value held on the front
    double u_ell = 1.0;        // planar left-edge Dirichlet value

    // Planar strip [0, length_x] x [0, length_y), periodic in y.
    double length_x = 9.9;
    double length_y = 10.0;
    double front_x0 = 2.0;         // mean initial front position
    double perturb_amplitude = 0.3;
    int perturb_mode = 1;          // sinusoidal modes across the strip
    bool uniform_init = false;     // start from a uniform interior value
    double uniform_value = 1.0;

    // Star-shaped domain [-half_width, half_width]^2.
    double half_width = 10.0;
    double star_radius = 3.5;
    double star_amplitude = 0.2;  // radius += amp (sin 3t + sin 12t + sin 16t)
    double u_init = 1.0;          // interior density the star starts from
    double init_taper = 0.25;     // ramp width down to u_f at the front
    int n_theta = 512;
};

struct Dataset {
    SimParams params;
    std::vector<FieldSnapshot> snapshots;
    std::vector<BoundaryCurve> curves;
    Eigen::VectorXd truth_stefan;  // 11 interface-library coefficients
    Eigen::VectorXd truth_fisher;  // 10 bulk-library coefficients
    double noise_eta = 0.0;
    std::uint64_t noise_seed = 0;
    std::string solver = "cut-cell ghost front v1";
};

namespace detail {

// Coefficients of every bulk candidate term, in library order.
struct BulkModel {
    double c1 = 0.0, cu = 0.0, cuu = 0.0, clap = 0.0;
    double cx = 0.0, cy = 0.0, cxx = 0.0, cxy = 0.0, cyy = 0.0, cyuxx = 0.0;
};

inline BulkModel bulk_model_from(const Eigen::VectorXd& c) {
    if (c.size() != 10) throw ShapeError("bulk model needs 10 coefficients");
    return {c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8], c[9]};
}

// One explicit step of the bulk model over all interior nodes (phi < 0),
// with the front Dirichlet flux folded in implicitly. phi holds the signed
// front offset at the same instant as u.
inline void bulk_field_step(std::vector<double>& u, const std::vector<double>& phi, int nx,
                            int ny, double dx, double dy, double dt, bool periodic_y, double u_f,
                            const BulkModel& c, std::vector<double>& scratch) {
    const double Dx = c.clap + c.cxx;
    const double Dy = c.clap + c.cyy;
    const double inv_dx2 = 1.0 / (dx * dx);
    const double inv_dy2 = 1.0 / (dy * dy);
    const bool needs_first = c.cx != 0.0 || c.cy != 0.0 || c.cxy != 0.0 || c.cyuxx != 0.0;
    constexpr double alpha_min = 1e-6;

    scratch = u;
    const int j_lo = periodic_y ? 0 : 1;
    const int j_hi = periodic_y ? ny : ny - 1;
    for (int j = j_lo; j < j_hi; ++j) {
        const int jn = periodic_y ? (j + 1) % ny : j + 1;
        const int jp = periodic_y ? (j + ny - 1) % ny : j - 1;
        for (int i = 1; i < nx - 1; ++i) {
            const std::size_t id = static_cast<std::size_t>(j) * nx + i;
            const double p0 = phi[id];
            if (p0 >= 0.0) continue;  // exterior or on the front
            const double u0 = u[id];

            const std::size_t ide = id + 1, idw = id - 1;
            const std::size_t idn = static_cast<std::size_t>(jn) * nx + i;
            const std::size_t ids = static_cast<std::size_t>(jp) * nx + i;

            double explicit_rhs = c.c1 + c.cu * u0 + c.cuu * (u0 * u0);
            double denom = 1.0;
            double ghost_num = 0.0;
            // Ghost-extrapolated neighbor values for first/cross derivatives.
            double ue = u[ide], uw = u[idw], un = u[idn], us = u[ids];

            auto side = [&](std::size_t nid, double D, double inv_h2, double& u_nb) {
                const double p1 = phi[nid];
                if (p1 < 0.0) {
                    explicit_rhs += D * (u[nid] - u0) * inv_h2;
                } else {
                    double alpha = p0 / (p0 - p1);
                    if (alpha < alpha_min) alpha = alpha_min;
                    denom += dt * D * inv_h2 / alpha;
                    ghost_num += dt * D * inv_h2 / alpha * u_f;
                    if (needs_first) u_nb = u0 + (u_f - u0) / alpha;
                }
            };
            side(ide, Dx, inv_dx2, ue);
            side(idw, Dx, inv_dx2, uw);
            side(idn, Dy, inv_dy2, un);
            side(ids, Dy, inv_dy2, us);

            if (needs_first) {
                const double ux = (ue - uw) / (2.0 * dx);
                const double uy = (un - us) / (2.0 * dy);
                explicit_rhs += c.cx * ux + c.cy * uy;
                if (c.cxy != 0.0) {
                    // Cross derivative from plain neighbors; near-front bias
                    // is acceptable for this diagnostic term.
                    const double une = u[static_cast<std::size_t>(jn) * nx + i + 1];
                    const double unw = u[static_cast<std::size_t>(jn) * nx + i - 1];
                    const double use_ = u[static_cast<std::size_t>(jp) * nx + i + 1];
                    const double usw = u[static_cast<std::size_t>(jp) * nx + i - 1];
                    explicit_rhs += c.cxy * (une - unw - use_ + usw) / (4.0 * dx * dy);
                }
                if (c.cyuxx != 0.0) {
                    const double uxx = (ue - 2.0 * u0 + uw) * inv_dx2;
                    explicit_rhs += c.cyuxx * uy * uxx;
                }
            }

            scratch[id] = (u0 + dt * explicit_rhs + ghost_num) / denom;
        }
    }
    u.swap(scratch);
}

// Quadratic one-sided derivative at the front: value u_f on the front and
// two interior samples at distances a < b behind it.
inline double front_gradient(double u_f, double ua, double a, double ub, double b) {
    return (a * a * (ub - u_f) - b * b * (ua - u_f)) / (a * b * (b - a));
}

inline double bilinear(const std::vector<double>& u, int nx, int ny, double x0, double y0,
                       double dx, double dy, const Vec2& p) {
    double gx = (p.x - x0) / dx;
    double gy = (p.y - y0) / dy;
    gx = std::clamp(gx, 0.0, static_cast<double>(nx - 1) - 1e-12);
    gy = std::clamp(gy, 0.0, static_cast<double>(ny - 1) - 1e-12);
    const int i0 = static_cast<int>(gx);
    const int j0 = static_cast<int>(gy);
    const double fx = gx - i0, fy = gy - j0;
    const std::size_t a = static_cast<std::size_t>(j0) * nx + i0;
    const std::size_t b = a + 1;
    const std::size_t cidx = a + static_cast<std::size_t>(nx);
    const std::size_t d = cidx + 1;
    return (1 - fx) * (1 - fy) * u[a] + fx * (1 - fy) * u[b] + (1 - fx) * fy * u[cidx] +
           fx * fy * u[d];
}

}  // namespace detail

inline void check_cfl(const SimParams& p) {
    const double h = std::min(p.dx, p.dy);
    const double bound = 0.9 * h * h / 4.0;
    if (p.dt > bound)
        throw CflError("dt = " + std::to_string(p.dt) + " exceeds the stability bound " +
                       std::to_string(bound) + " for spacing " + std::to_string(h));
}

inline Eigen::VectorXd stefan_truth(double kappa) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(11);
    t[2] = -kappa;  // normal speed = -kappa * u_xn
    return t;
}

inline Eigen::VectorXd fisher_truth() {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(10);
    t[1] = 1.0;   // u
    t[2] = -1.0;  // u^2
    t[3] = 1.0;   // lap(u)
    return t;
}

namespace detail {

struct PlanarSolver {
    const SimParams& p;
    int nx, ny;
    std::vector<double> u, phi, s, s_new, scratch;
    BulkModel model;

    explicit PlanarSolver(const SimParams& params) : p(params) {
        nx = static_cast<int>(std::lround(p.length_x / p.dx)) + 1;
        ny = static_cast<int>(std::lround(p.length_y / p.dy));
        if (nx < 8 || ny < 4) throw InvalidParameterError("planar grid is too small");
        u.assign(static_cast<std::size_t>(nx) * ny, p.u_f);
        phi.assign(u.size(), 0.0);
        s.resize(static_cast<std::size_t>(ny));
        s_new.resize(s.size());
        model = bulk_model_from(fisher_truth());
        for (int j = 0; j < ny; ++j) {
            const double y = j * p.dy;
            s[static_cast<std::size_t>(j)] =
                p.front_x0 +
                p.perturb_amplitude * std::sin(2.0 * 3.14159265358979323846 * p.perturb_mode * y /
                                               p.length_y);
        }
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double x = i * p.dx;
                const double sj = s[static_cast<std::size_t>(j)];
                double& uij = u[static_cast<std::size_t>(j) * nx + i];
                if (x < sj) {
                    uij = p.uniform_init ? p.uniform_value
                                         : p.u_f + (p.u_ell - p.u_f) * (1.0 - x / sj);
                } else {
                    uij = p.u_f;
                }
            }
        update_phi();
    }

    void update_phi() {
        for (int j = 0; j < ny; ++j) {
            const double sj = s[static_cast<std::size_t>(j)];
            for (int i = 0; i < nx; ++i)
                phi[static_cast<std::size_t>(j) * nx + i] = i * p.dx - sj;
        }
    }

    // Interface speed of row j from the one-sided field gradient.
    double front_speed(int j) const {
        const double sj = s[static_cast<std::size_t>(j)];
        if (sj > p.length_x - 3.0 * p.dx || sj < 3.0 * p.dx) return 0.0;  // parked at a wall
        int I = static_cast<int>(std::floor(sj / p.dx));
        double alpha = sj / p.dx - I;
        if (alpha < 0.3) {
            I -= 1;
            alpha += 1.0;
        }
        if (I - 1 < 0) return 0.0;
        const double a = alpha * p.dx;
        const double b = (alpha + 1.0) * p.dx;
        const std::size_t row = static_cast<std::size_t>(j) * nx;
        const double ux = front_gradient(p.u_f, u[row + static_cast<std::size_t>(I)], a,
                                         u[row + static_cast<std::size_t>(I - 1)], b);
        const int jn = (j + 1) % ny, jp = (j + ny - 1) % ny;
        const double sy = (s[static_cast<std::size_t>(jn)] - s[static_cast<std::size_t>(jp)]) /
                          (2.0 * p.dy);
        return -p.kappa * (1.0 + sy * sy) * ux;
    }

    void step() {
        for (int j = 0; j < ny; ++j)
            s_new[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)] + p.dt * front_speed(j);
        bulk_field_step(u, phi, nx, ny, p.dx, p.dy, p.dt, true, p.u_f, model, scratch);
        s.swap(s_new);
        update_phi();
        for (std::size_t id = 0; id < u.size(); ++id)
            if (phi[id] >= 0.0) u[id] = p.u_f;
        guard();
    }

    void guard() const {
        for (int j = 0; j < ny; ++j) {
            const double sj = s[static_cast<std::size_t>(j)];
            if (!std::isfinite(sj)) throw SimulationError("front position became non-finite");
            const double sl = std::abs(s[static_cast<std::size_t>((j + 1) % ny)] - sj) / p.dy;
            if (sl > 20.0)
                throw TopologyError("front graph folded over (slope " + std::to_string(sl) + ")");
        }
    }

    FieldSnapshot snapshot(double time) const {
        FieldSnapshot snap;
        snap.time = time;
        snap.points.reserve(u.size());
        snap.values = u;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) snap.points.push_back({i * p.dx, j * p.dy});
        return snap;
    }

    BoundaryCurve curve(double time) const {
        BoundaryCurve c;
        c.time = time;
        c.topology = CurveTopology::periodic_graph;
        c.period_y = p.length_y;
        c.points.reserve(static_cast<std::size_t>(ny));
        for (int j = 0; j < ny; ++j) c.points.push_back({s[static_cast<std::size_t>(j)], j * p.dy});
        return c;
    }
};

struct StarSolver {
    const SimParams& p;
    int n;                     // nodes per side
    int ntheta;
    double x0;                 // = -half_width
    std::vector<double> u, phi, rho, rho_new, scratch;
    std::vector<double> node_r, node_tfrac;  // per-node radius and theta bin
    std::vector<int> node_tidx;
    BulkModel model;

    explicit StarSolver(const SimParams& params) : p(params) {
        if (p.dx != p.dy) throw InvalidParameterError("star solver needs square cells");
        n = 2 * static_cast<int>(std::lround(p.half_width / p.dx)) + 1;
        ntheta = p.n_theta;
        if (ntheta < 16) throw InvalidParameterError("star solver needs at least 16 rays");
        x0 = -p.half_width;
        model = bulk_model_from(fisher_truth());
        rho.resize(static_cast<std::size_t>(ntheta));
        for (int k = 0; k < ntheta; ++k) {
            const double th = 2.0 * 3.14159265358979323846 * k / ntheta;
            rho[static_cast<std::size_t>(k)] =
                p.star_radius +
                p.star_amplitude * (std::sin(3.0 * th) + std::sin(12.0 * th) + std::sin(16.0 * th));
        }
        u.assign(static_cast<std::size_t>(n) * n, p.u_f);
        phi.assign(u.size(), 1.0);
        node_r.resize(u.size());
        node_tidx.resize(u.size());
        node_tfrac.resize(u.size());
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double x = x0 + i * p.dx, y = x0 + j * p.dy;
                const std::size_t id = static_cast<std::size_t>(j) * n + i;
                node_r[id] = std::hypot(x, y);
                double th = std::atan2(y, x);
                if (th < 0.0) th += 2.0 * 3.14159265358979323846;
                const double bin = th * ntheta / (2.0 * 3.14159265358979323846);
                int k = static_cast<int>(bin);
                if (k >= ntheta) k = ntheta - 1;
                node_tidx[id] = k;
                node_tfrac[id] = bin - k;
            }
        update_phi();
        // Taper the interior value down to u_f over the true normal distance
        // to the front (the radial gap overstates the slope on tilted lobes).
        std::vector<Vec2> front(static_cast<std::size_t>(ntheta));
        for (int k = 0; k < ntheta; ++k) {
            const double th = 2.0 * 3.14159265358979323846 * k / ntheta;
            front[static_cast<std::size_t>(k)] = {rho[static_cast<std::size_t>(k)] * std::cos(th),
                                                  rho[static_cast<std::size_t>(k)] * std::sin(th)};
        }
        const int window = 64;  // bins searched either side of the node's ray
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t id = static_cast<std::size_t>(j) * n + i;
                if (phi[id] >= 0.0) continue;
                const Vec2 node{x0 + i * p.dx, x0 + j * p.dy};
                double dist = -phi[id];  // radial gap as the fallback bound
                for (int w = -window; w < window; ++w) {
                    const int a = ((node_tidx[id] + w) % ntheta + ntheta) % ntheta;
                    const int b = (a + 1) % ntheta;
                    const Vec2 foot = closest_point_on_segment(
                        node, front[static_cast<std::size_t>(a)], front[static_cast<std::size_t>(b)]);
                    dist = std::min(dist, (node - foot).norm());
                }
                const double ramp =
                    p.init_taper > 0.0 ? 1.0 - std::exp(-dist / p.init_taper) : 1.0;
                u[id] = p.u_f + (p.u_init - p.u_f) * ramp;
            }
    }

    double rho_at(std::size_t node) const {
        const int k = node_tidx[node];
        const int k1 = (k + 1) % ntheta;
        return rho[static_cast<std::size_t>(k)] +
               node_tfrac[node] *
                   (rho[static_cast<std::size_t>(k1)] - rho[static_cast<std::size_t>(k)]);
    }

    void update_phi() {
        for (std::size_t id = 0; id < u.size(); ++id) phi[id] = node_r[id] - rho_at(id);
    }

    void step() {
        if (rho_new.size() != rho.size()) rho_new.resize(rho.size());
        const double two_pi = 2.0 * 3.14159265358979323846;
        for (int k = 0; k < ntheta; ++k) {
            const double th = two_pi * k / ntheta;
            const double r = rho[static_cast<std::size_t>(k)];
            const double rp = rho[static_cast<std::size_t>((k + 1) % ntheta)];
            const double rm = rho[static_cast<std::size_t>((k + ntheta - 1) % ntheta)];
            const double drdth = (rp - rm) / (2.0 * two_pi / ntheta);
            const double slope = drdth / r;
            const double stretch = std::sqrt(1.0 + slope * slope);
            const Vec2 front{r * std::cos(th), r * std::sin(th)};
            // Outward unit normal of the polar graph.
            Vec2 nrm{std::cos(th) + slope * std::sin(th), std::sin(th) - slope * std::cos(th)};
            nrm = nrm / stretch;
            const double d1 = 1.2 * p.dx, d2 = 2.2 * p.dx;
            const double u1 = bilinear(u, n, n, x0, x0, p.dx, p.dy, front - nrm * d1);
            const double u2 = bilinear(u, n, n, x0, x0, p.dx, p.dy, front - nrm * d2);
            // Derivative along +n at the front; samples sit at -d1, -d2.
            const double un = front_gradient(p.u_f, u1, d1, u2, d2);
            rho_new[static_cast<std::size_t>(k)] = r + p.dt * (-p.kappa) * un * stretch;
        }
        bulk_field_step(u, phi, n, n, p.dx, p.dy, p.dt, false, p.u_f, model, scratch);
        rho.swap(rho_new);
        update_phi();
        for (std::size_t id = 0; id < u.size(); ++id)
            if (phi[id] >= 0.0) u[id] = p.u_f;
        guard();
    }

    void guard() const {
        for (int k = 0; k < ntheta; ++k) {
            const double r = rho[static_cast<std::size_t>(k)];
            if (!std::isfinite(r)) throw SimulationError("front radius became non-finite");
            if (r < 4.0 * p.dx) throw SimulationError("star front collapsed toward the origin");
            if (r > p.half_width - 4.0 * p.dx)
                throw SimulationError("star front reached the domain edge");
            const double rp = rho[static_cast<std::size_t>((k + 1) % ntheta)];
            if (std::abs(rp - r) / (2.0 * 3.14159265358979323846 / ntheta * r) > 20.0)
                throw TopologyError("star front folded over at ray " + std::to_string(k));
        }
    }

    FieldSnapshot snapshot(double time) const {
        FieldSnapshot snap;
        snap.time = time;
        snap.values = u;
        snap.points.reserve(u.size());
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) snap.points.push_back({x0 + i * p.dx, x0 + j * p.dy});
        return snap;
    }

    BoundaryCurve curve(double time) const {
        BoundaryCurve c;
        c.time = time;
        c.topology = CurveTopology::closed_loop;
        c.points.reserve(static_cast<std::size_t>(ntheta));
        const double two_pi = 2.0 * 3.14159265358979323846;
        for (int k = 0; k < ntheta; ++k) {
            const double th = two_pi * k / ntheta;
            c.points.push_back({rho[static_cast<std::size_t>(k)] * std::cos(th),
                                rho[static_cast<std::size_t>(k)] * std::sin(th)});
        }
        return c;
    }
};

}  // namespace detail

inline Dataset simulate(const SimParams& p) {
    if (p.dt <= 0.0 || p.t_end <= 0.0)
        throw InvalidParameterError("simulate: dt and t_end must be positive");
    if (p.dx <= 0.0 || p.dy <= 0.0) throw InvalidParameterError("simulate: spacing must be positive");
    if (p.snapshot_stride < 1) throw InvalidParameterError("simulate: snapshot_stride must be >= 1");
    check_cfl(p);

    Dataset ds;
    ds.params = p;
    ds.truth_stefan = stefan_truth(p.kappa);
    ds.truth_fisher = fisher_truth();

    const long n_steps = std::lround(p.t_end / p.dt);
    if (n_steps < 1) throw InvalidParameterError("simulate: t_end shorter than one step");

    auto run = [&](auto& solver) {
        ds.snapshots.push_back(solver.snapshot(0.0));
        ds.curves.push_back(solver.curve(0.0));
        for (long step = 1; step <= n_steps; ++step) {
            solver.step();
            if (step % p.snapshot_stride == 0 || step == n_steps) {
                const double t = static_cast<double>(step) * p.dt;
                ds.snapshots.push_back(solver.snapshot(t));
                ds.curves.push_back(solver.curve(t));
            }
        }
    };

    if (p.geometry == FrontGeometry::planar) {
        detail::PlanarSolver solver(p);
        run(solver);
    } else {
        detail::StarSolver solver(p);
        run(solver);
    }
    return ds;
}

// Additive Gaussian measurement noise on the field snapshots only; the noise
// scale is eta times the standard deviation of all stored field values.
// eta = 0 returns the dataset unchanged.
inline Dataset add_noise(Dataset ds, double eta, std::uint64_t seed) {
    if (eta < 0.0) throw InvalidParameterError("add_noise: eta must be non-negative");
    ds.noise_eta = eta;
    ds.noise_seed = seed;
    if (eta == 0.0) return ds;

    double mean = 0.0;
    std::size_t count = 0;
    for (const auto& snap : ds.snapshots)
        for (double v : snap.values) {
            mean += v;
            ++count;
        }
    if (count < 2) throw IncompleteDataError("add_noise: dataset holds no field values");
    mean /= static_cast<double>(count);
    double ss = 0.0;
    for (const auto& snap : ds.snapshots)
        for (double v : snap.values) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(count - 1));

    Rng rng(seed);
    for (auto& snap : ds.snapshots)
        for (double& v : snap.values) v += eta * sigma * rng.normal();
    return ds;
}

}  // namespace mbsindy
