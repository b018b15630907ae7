// End-to-end pipeline stages shared by the command-line tool and the tests:
// simulate, corrupt, discover, replay. Each stage reads and writes dataset or
// report directories and returns its in-memory result.
#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "common.hpp"
#include "ensemble.hpp"
#include "features.hpp"
#include "io.hpp"
#include "regression.hpp"
#include "replay.hpp"
#include "simulate.hpp"
#include "svg.hpp"

namespace mbsindy {

// Relative output paths are rooted at $MBSINDY_OUT when the variable is set.
inline std::filesystem::path resolve_output(const std::filesystem::path& p) {
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("MBSINDY_OUT"); root && *root)
        return std::filesystem::path(root) / p;
    return p;
}

struct SimulateJob {
    SimParams params;
    double eta = 0.0;  // optional immediate corruption
    std::uint64_t noise_seed = 777;
    std::filesystem::path out_dir;
};

inline Dataset run_simulate(const SimulateJob& job) {
    Dataset ds = simulate(job.params);
    if (job.eta != 0.0) ds = add_noise(std::move(ds), job.eta, job.noise_seed);
    if (!job.out_dir.empty()) write_dataset(job.out_dir, ds);
    return ds;
}

struct CorruptJob {
    std::filesystem::path in_dir;
    std::filesystem::path out_dir;
    double eta = 0.0;
    std::uint64_t seed = 777;
};

inline Dataset run_corrupt(const CorruptJob& job) {
    Dataset ds = add_noise(read_dataset(job.in_dir), job.eta, job.seed);
    if (!job.out_dir.empty()) write_dataset(job.out_dir, ds);
    return ds;
}

struct DiscoverJob {
    std::filesystem::path dataset_dir;
    std::filesystem::path out_dir;  // empty: return the report without writing
    std::string problem = "stefan";  // or "fisher"

    double lambda1 = -1.0;  // < 0: per-problem default
    double lambda2 = -1.0;  // < 0: default 1.0
    std::vector<double> lambda1_candidates;  // non-empty: pick by AIC

    int n_bootstrap = 60;
    int leave_out = -1;  // < 0: per-problem default (stefan 3, fisher 1)
    double inclusion_threshold = 0.7;
    bool per_presence = true;
    std::uint64_t seed = 93;
    int threads = 0;  // 0: hardware concurrency

    VelocityMethod velocity = VelocityMethod::normal_projection;
    double horizon_factor = 3.015;
    int space_stride = 1;
    int time_stride = 1;
    bool write_plots = true;
};

struct DiscoverOutcome {
    DiscoveryReport report;
    EnsembleResult ensemble;
};

namespace detail {

inline int feature_index(const std::vector<std::string>& names, const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw InvalidParameterError("unknown feature name '" + name + "'");
}

// Fold the split second derivatives into the rotationally invariant term when
// they carry matching weight: lap += (c_xx + c_yy) / 2. Returns false (and
// leaves the vector untouched) when the pair is visibly anisotropic.
inline bool fold_fisher_pair(const std::vector<std::string>& names, Eigen::VectorXd& coeffs) {
    const int i_lap = feature_index(names, "lap(u)");
    const int i_xx = feature_index(names, "u_xx");
    const int i_yy = feature_index(names, "u_yy");
    const double cxx = coeffs[i_xx], cyy = coeffs[i_yy];
    if (cxx == 0.0 && cyy == 0.0) return true;  // nothing to fold
    const double mag = std::max(std::abs(cxx), std::abs(cyy));
    if (std::abs(cxx - cyy) > 0.25 * mag) return false;
    coeffs[i_lap] += 0.5 * (cxx + cyy);
    coeffs[i_xx] = 0.0;
    coeffs[i_yy] = 0.0;
    return true;
}

}  // namespace detail

inline DiscoverOutcome run_discover(const DiscoverJob& job) {
    if (job.problem != "stefan" && job.problem != "fisher")
        throw InvalidParameterError("discover: problem must be 'stefan' or 'fisher'");
    const bool stefan = job.problem == "stefan";

    const Dataset ds = read_dataset(job.dataset_dir);
    const double period = ds.params.geometry == FrontGeometry::planar ? ds.params.length_y : 0.0;

    FeatureSystem sys;
    if (stefan) {
        StefanConfig cfg;
        cfg.grid_spacing = ds.params.dx;
        cfg.horizon_factor = job.horizon_factor;
        cfg.interface_value = ds.params.u_f;
        cfg.method = job.velocity;
        cfg.period_y = period;
        sys = build_stefan_system(ds.snapshots, ds.curves, cfg);
    } else {
        FisherConfig cfg;
        cfg.grid_spacing = ds.params.dx;
        cfg.horizon_factor = job.horizon_factor;
        cfg.period_y = period;
        cfg.space_stride = job.space_stride;
        cfg.time_stride = job.time_stride;
        sys = build_fisher_system(ds.snapshots, ds.curves, cfg);
    }
    sys = normalize(sys);

    RegressionParams reg;
    reg.lambda1 = job.lambda1 >= 0.0 ? job.lambda1 : (stefan ? 0.3 : 0.05);
    reg.lambda2 = job.lambda2 >= 0.0 ? job.lambda2 : 1.0;

    json lambda_table = json::array();
    if (!job.lambda1_candidates.empty()) {
        const LambdaSelection sel = select_lambda1(sys.F, sys.V, job.lambda1_candidates, reg);
        reg.lambda1 = sel.best_lambda1;
        for (const auto& row : sel.table)
            lambda_table.push_back({{"lambda1", row.lambda1},
                                    {"aic", row.aic},
                                    {"support_size", row.support_size},
                                    {"rss", row.rss},
                                    {"empty_model", row.empty_model}});
    }

    EnsembleConfig ec;
    ec.n_bootstrap = job.n_bootstrap;
    ec.leave_out = job.leave_out >= 0 ? job.leave_out : (stefan ? 3 : 1);
    ec.inclusion_threshold = job.inclusion_threshold;
    ec.regression = reg;
    ec.seed = job.seed;
    ec.per_presence_denominator = job.per_presence;
    ec.threads = job.threads > 0 ? job.threads
                                 : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    DiscoverOutcome out;
    out.ensemble = ensemble_fit(sys, ec);
    const EnsembleResult& res = out.ensemble;

    DiscoveryReport& rep = out.report;
    rep.problem = job.problem;
    for (const FeatureStats& s : res.features) {
        ReportFeature f;
        f.name = s.name;
        f.presence = s.presence;
        f.selections = s.selections;
        f.inclusion_probability = s.inclusion_probability;
        f.median = s.median;
        f.mean = s.mean;
        f.stddev = s.stddev;
        f.ci_lo = s.ci_lo;
        f.ci_hi = s.ci_hi;
        f.ci_is_point = s.ci_is_point;
        f.retained = s.retained;
        rep.features.push_back(std::move(f));
    }
    rep.coefficients.assign(res.coefficients.data(), res.coefficients.data() + res.coefficients.size());
    rep.empty_model = res.empty_model;
    rep.total_fits = res.total_fits;
    rep.failed_fits = res.failed_fits;

    const std::string lhs = stefan ? "d(xi_n)/dt" : "du/dt";
    std::vector<std::pair<std::string, double>> terms;
    for (std::size_t i = 0; i < res.features.size(); ++i)
        if (res.features[i].retained) terms.emplace_back(res.features[i].name, res.coefficients[static_cast<Eigen::Index>(i)]);
    rep.model = render_model(lhs, terms);

    Eigen::VectorXd folded = res.coefficients;
    bool folded_ok = true;
    if (!stefan) folded_ok = detail::fold_fisher_pair(sys.names, folded);
    rep.combined_terms.clear();
    for (std::size_t i = 0; i < sys.names.size(); ++i)
        if (folded[static_cast<Eigen::Index>(i)] != 0.0)
            rep.combined_terms.emplace_back(sys.names[i], folded[static_cast<Eigen::Index>(i)]);
    rep.combined_model = render_model(lhs, rep.combined_terms);

    const Eigen::VectorXd& truth = stefan ? ds.truth_stefan : ds.truth_fisher;
    if (truth.size() == res.coefficients.size() && truth.norm() > 0.0)
        rep.coefficient_error = coefficient_error(truth, folded);

    json cfg_echo;
    cfg_echo["problem"] = job.problem;
    cfg_echo["dataset"] = job.dataset_dir.filename().string();
    cfg_echo["lambda1"] = reg.lambda1;
    cfg_echo["lambda2"] = reg.lambda2;
    cfg_echo["n_bootstrap"] = ec.n_bootstrap;
    cfg_echo["leave_out"] = ec.leave_out;
    cfg_echo["inclusion_threshold"] = ec.inclusion_threshold;
    cfg_echo["per_presence_denominator"] = ec.per_presence_denominator;
    cfg_echo["seed"] = ec.seed;
    cfg_echo["velocity"] = job.velocity == VelocityMethod::normal_projection ? "normal_projection"
                                                                             : "nearest_point";
    cfg_echo["horizon_factor"] = job.horizon_factor;
    cfg_echo["space_stride"] = job.space_stride;
    cfg_echo["time_stride"] = job.time_stride;
    cfg_echo["anisotropy_folded"] = folded_ok;
    if (!lambda_table.empty()) cfg_echo["lambda1_selection"] = lambda_table;
    if (!sys.warnings.empty()) cfg_echo["builder_warnings"] = sys.warnings.size();
    rep.config = cfg_echo;

    if (!job.out_dir.empty()) {
        write_report(job.out_dir, rep);
        if (job.write_plots) {
            detail::write_text(job.out_dir / "coefficients.svg", coefficient_chart_svg(res));
            std::vector<std::pair<std::string, KdeCurve>> curves;
            for (const FeatureStats& s : res.features)
                if (s.retained && s.samples.size() >= 2)
                    curves.emplace_back(s.name, kde(s.samples, kde_auto_grid(s.samples)));
            if (!curves.empty())
                detail::write_text(job.out_dir / "kde.svg", kde_chart_svg(curves));
        }
    }
    return out;
}

struct ReplayJob {
    std::filesystem::path dataset_dir;
    std::filesystem::path report_path;
    std::filesystem::path out_dir;  // empty: no files written
    double t_target = -1.0;         // < 0: final recorded time
};

struct ReplayOutcome {
    std::optional<BoundaryBand> band;   // stefan reports
    std::optional<FieldReplay> field;   // fisher reports
};

inline ReplayOutcome run_replay(const ReplayJob& job) {
    const DiscoveryReport rep = read_report(job.report_path);
    const Dataset ds = read_dataset(job.dataset_dir);
    if (rep.empty_model) throw NoModelError("replay: the report carries an empty model");

    ReplayOutcome out;
    if (rep.problem == "stefan") {
        const ReportFeature* uxn = nullptr;
        for (const ReportFeature& f : rep.features) {
            if (!f.retained) continue;
            if (f.name == "u_xn")
                uxn = &f;
            else
                throw IllPosedModelError("replay: retained front term '" + f.name +
                                         "' is outside the replayable family");
        }
        if (!uxn) throw NoModelError("replay: the front law retains no u_xn term");

        const double t = job.t_target > 0.0 ? job.t_target : ds.curves.back().time;
        // The simulator's front coefficient is the negated u_xn coefficient.
        BoundaryBand band = replay_boundary(ds, -uxn->ci_hi, -uxn->median, -uxn->ci_lo, t);

        if (!job.out_dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(job.out_dir, ec);
            auto curve_csv = [&](const BoundaryCurve& c, const std::string& name) {
                std::string body = "# topology=" + topology_name(c.topology) +
                                   " period_y=" + detail::fmt17(c.period_y) +
                                   " time=" + detail::fmt17(c.time) + "\nx,y\n";
                for (const Vec2& p : c.points)
                    body += detail::fmt17(p.x) + "," + detail::fmt17(p.y) + "\n";
                detail::write_text(job.out_dir / name, body);
            };
            curve_csv(band.lower, "band_lower.csv");
            curve_csv(band.median, "band_median.csv");
            curve_csv(band.upper, "band_upper.csv");
            json j = {{"time", band.time},
                      {"area", band.area},
                      {"receding", band.receding},
                      {"kappa", {-uxn->ci_hi, -uxn->median, -uxn->ci_lo}}};
            detail::write_text(job.out_dir / "band.json", j.dump(2) + "\n");
            detail::write_text(job.out_dir / "band.svg", band_chart_svg(band, ds.curves));
        }
        out.band = std::move(band);
    } else {
        Eigen::VectorXd coeffs = Eigen::Map<const Eigen::VectorXd>(
            rep.coefficients.data(), static_cast<Eigen::Index>(rep.coefficients.size()));
        const double t = job.t_target > 0.0 ? job.t_target : ds.snapshots.back().time;
        FieldReplay fr = replay_field(ds, coeffs, t);

        if (!job.out_dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(job.out_dir, ec);
            std::string body = "x,y,u,abs_error\n";
            body.reserve(fr.replayed.points.size() * 64 + 16);
            for (std::size_t i = 0; i < fr.replayed.points.size(); ++i) {
                body += detail::fmt17(fr.replayed.points[i].x) + "," +
                        detail::fmt17(fr.replayed.points[i].y) + "," +
                        detail::fmt17(fr.replayed.values[i]) + "," +
                        detail::fmt17(fr.abs_error[i]) + "\n";
            }
            detail::write_text(job.out_dir / "replayed.csv", body);
            json j = {{"time", fr.replayed.time},
                      {"max_abs_error", fr.max_abs_error},
                      {"compared_snapshot", fr.compared_snapshot}};
            detail::write_text(job.out_dir / "field.json", j.dump(2) + "\n");
            detail::write_text(job.out_dir / "field_error.svg",
                               field_error_svg(fr, ds.params.dx, ds.params.dy));
        }
        out.field = std::move(fr);
    }
    return out;
}

}  // namespace mbsindy
