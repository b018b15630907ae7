// mbsindy: simulate moving-boundary reaction-diffusion datasets, corrupt them
// with noise, discover governing equations by ensemble sparse regression, and
// replay recovered models against the recorded data.
//
// Exit codes: 0 success, 2 usage or input error, 3 empty model, 4 numerical
// failure.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbsindy/pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitEmptyModel = 3;
constexpr int kExitNumerical = 4;

int run(CLI::App& app, int argc, char** argv) {
    using namespace mbsindy;

    // simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a ground-truth dataset");
    std::string sim_case = "planar";
    SimulateJob sj;
    std::string sim_out;
    double grid_h = -1.0;
    sim->add_option("--case", sim_case, "front geometry: planar or star")
        ->check(CLI::IsMember({"planar", "star"}));
    sim->add_option("--kappa", sj.params.kappa, "front transport coefficient");
    sim->add_option("--t-end", sj.params.t_end, "final simulated time");
    sim->add_option("--dt", sj.params.dt, "time step");
    sim->add_option("--spacing", grid_h, "grid spacing (sets both directions)");
    sim->add_option("--snapshot-stride", sj.params.snapshot_stride, "steps between stored snapshots");
    sim->add_option("--u-f", sj.params.u_f, "field value on the front");
    sim->add_option("--u-ell", sj.params.u_ell, "left-edge value (planar)");
    sim->add_option("--length-x", sj.params.length_x, "strip width (planar)");
    sim->add_option("--length-y", sj.params.length_y, "strip period (planar)");
    sim->add_option("--front-x0", sj.params.front_x0, "initial mean front position (planar)");
    sim->add_option("--perturb-amplitude", sj.params.perturb_amplitude, "initial front ripple");
    sim->add_option("--perturb-mode", sj.params.perturb_mode, "ripple mode count");
    sim->add_flag("--uniform-init", sj.params.uniform_init, "start from a uniform interior value");
    sim->add_option("--uniform-value", sj.params.uniform_value, "interior value for --uniform-init");
    sim->add_option("--half-width", sj.params.half_width, "half width of the square domain (star)");
    sim->add_option("--star-radius", sj.params.star_radius, "mean initial radius (star)");
    sim->add_option("--star-amplitude", sj.params.star_amplitude, "initial radius ripple (star)");
    sim->add_option("--u-init", sj.params.u_init, "initial interior density (star)");
    sim->add_option("--init-taper", sj.params.init_taper, "interior ramp width near the front (star)");
    sim->add_option("--n-theta", sj.params.n_theta, "front samples around the loop (star)");
    sim->add_option("--eta", sj.eta, "optional noise level applied before writing");
    sim->add_option("--noise-seed", sj.noise_seed, "seed for --eta noise");
    sim->add_option("--out", sim_out, "output dataset directory")->required();

    // corrupt ----------------------------------------------------------
    auto* cor = app.add_subcommand("corrupt", "add Gaussian noise to a dataset");
    CorruptJob cj;
    std::string cor_in, cor_out;
    cor->add_option("--in", cor_in, "input dataset directory")->required();
    cor->add_option("--out", cor_out, "output dataset directory")->required();
    cor->add_option("--eta", cj.eta, "noise level as a fraction of the field std")->required();
    cor->add_option("--seed", cj.seed, "noise seed");

    // discover ---------------------------------------------------------
    auto* dis = app.add_subcommand("discover", "recover a governing equation from a dataset");
    DiscoverJob dj;
    std::string dis_in, dis_out;
    std::string velocity = "normal_projection";
    bool total_denominator = false;
    bool no_plots = false;
    dis->add_option("--in", dis_in, "input dataset directory")->required();
    dis->add_option("--out", dis_out, "report directory (default: <in>/discovery-<problem>)");
    dis->add_option("--problem", dj.problem, "stefan (front law) or fisher (bulk law)")
        ->check(CLI::IsMember({"stefan", "fisher"}));
    dis->add_option("--lambda1", dj.lambda1, "sparsity threshold");
    dis->add_option("--lambda2", dj.lambda2, "ridge penalty");
    dis->add_option("--select-lambda1", dj.lambda1_candidates,
                    "comma-separated thresholds scored by AIC")
        ->delimiter(',');
    dis->add_option("--n-bootstrap", dj.n_bootstrap, "bootstrap resamples per library subset");
    dis->add_option("--leave-out", dj.leave_out, "library columns dropped per subset");
    dis->add_option("--threshold", dj.inclusion_threshold, "inclusion probability cutoff");
    dis->add_flag("--total-denominator", total_denominator,
                  "divide inclusion counts by all fits instead of fits offering the feature");
    dis->add_option("--seed", dj.seed, "ensemble seed");
    dis->add_option("--threads", dj.threads, "worker cap (0 = hardware)");
    dis->add_option("--velocity", velocity, "front speed estimator")
        ->check(CLI::IsMember({"normal_projection", "nearest_point"}));
    dis->add_option("--horizon-factor", dj.horizon_factor, "family horizon in grid spacings");
    dis->add_option("--space-stride", dj.space_stride, "grid subsampling (fisher)");
    dis->add_option("--time-stride", dj.time_stride, "snapshot subsampling (fisher)");
    dis->add_flag("--no-plots", no_plots, "skip SVG emission");

    // replay -----------------------------------------------------------
    auto* rep = app.add_subcommand("replay", "integrate a recovered model against the data");
    ReplayJob rj;
    std::string rep_in, rep_report, rep_out;
    rep->add_option("--in", rep_in, "dataset directory the report was discovered from")->required();
    rep->add_option("--report", rep_report, "path to report.json")->required();
    rep->add_option("--out", rep_out, "output directory")->required();
    rep->add_option("--t-target", rj.t_target, "replay time (default: final recorded time)");

    app.require_subcommand(1);
    app.parse(argc, argv);

    if (sim->parsed()) {
        sj.params.geometry = sim_case == "star" ? FrontGeometry::star : FrontGeometry::planar;
        if (grid_h > 0.0) sj.params.dx = sj.params.dy = grid_h;
        sj.out_dir = resolve_output(sim_out);
        const Dataset ds = run_simulate(sj);
        std::printf("wrote dataset to %s (%zu snapshots, %zu curves)\n",
                    sj.out_dir.string().c_str(), ds.snapshots.size(), ds.curves.size());
        return 0;
    }
    if (cor->parsed()) {
        cj.in_dir = cor_in;
        cj.out_dir = resolve_output(cor_out);
        run_corrupt(cj);
        std::printf("wrote corrupted dataset (eta = %g) to %s\n", cj.eta,
                    cj.out_dir.string().c_str());
        return 0;
    }
    if (dis->parsed()) {
        dj.dataset_dir = dis_in;
        dj.out_dir = resolve_output(dis_out.empty()
                                        ? (std::filesystem::path(dis_in) / ("discovery-" + dj.problem)).string()
                                        : dis_out);
        dj.per_presence = !total_denominator;
        dj.write_plots = !no_plots;
        dj.velocity = velocity == "nearest_point" ? VelocityMethod::nearest_point
                                                  : VelocityMethod::normal_projection;
        const DiscoverOutcome outcome = run_discover(dj);
        std::printf("%s\n", outcome.report.model.c_str());
        if (outcome.report.combined_model != outcome.report.model)
            std::printf("combined: %s\n", outcome.report.combined_model.c_str());
        if (outcome.report.coefficient_error)
            std::printf("coefficient error vs truth: %.3g\n", *outcome.report.coefficient_error);
        std::printf("report written to %s\n", dj.out_dir.string().c_str());
        if (outcome.report.empty_model) {
            std::fprintf(stderr, "error: discovery produced an empty model\n");
            return kExitEmptyModel;
        }
        return 0;
    }
    if (rep->parsed()) {
        rj.dataset_dir = rep_in;
        rj.report_path = rep_report;
        rj.out_dir = resolve_output(rep_out);
        const ReplayOutcome outcome = run_replay(rj);
        if (outcome.band)
            std::printf("band at t = %g: area %.6g%s\n", outcome.band->time, outcome.band->area,
                        outcome.band->receding ? " (receding)" : "");
        if (outcome.field)
            std::printf("field replay at t = %g: max |error| %.6g\n", outcome.field->replayed.time,
                        outcome.field->max_abs_error);
        return 0;
    }
    return kExitUsage;  // unreachable: a subcommand is required
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discovery of moving-boundary reaction-diffusion models"};
    try {
        return run(app, argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // Help and version requests exit cleanly; everything else is usage.
        return code == 0 ? 0 : kExitUsage;
    } catch (const mbsindy::NoModelError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitEmptyModel;
    } catch (const mbsindy::InvalidParameterError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mbsindy::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mbsindy::MissingSnapshotError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mbsindy::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitNumerical;
    }
}
