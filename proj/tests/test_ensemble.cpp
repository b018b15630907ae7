// Ensemble machinery: resampling, library subsets, inclusion bookkeeping,
// determinism, and the density/summary helpers.
#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <set>

#include "mbsindy/ensemble.hpp"
#include "mbsindy/features.hpp"
#include "mbsindy/rng.hpp"

using namespace mbsindy;

namespace {

// Synthetic normalized system with a planted sparse model.
FeatureSystem planted_system(int m, int n, const std::vector<std::pair<int, double>>& active,
                             double noise, std::uint64_t seed) {
    Rng rng(seed);
    FeatureSystem sys;
    sys.F.resize(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) sys.F(i, j) = rng.normal();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (auto [j, v] : active) c[j] = v;
    sys.V = sys.F * c;
    for (Eigen::Index i = 0; i < sys.V.size(); ++i) sys.V[i] += noise * rng.normal();
    for (int j = 0; j < n; ++j) sys.names.push_back("f" + std::to_string(j));
    return normalize(sys);
}

}  // namespace

TEST_CASE("library subsets enumerate exactly the leave-k-out combinations", "[ensemble]") {
    auto s11 = library_subsets(11, 3);
    CHECK(s11.size() == 165);  // C(11,3)
    auto s10 = library_subsets(10, 1);
    CHECK(s10.size() == 10);

    std::set<std::vector<int>> unique(s11.begin(), s11.end());
    CHECK(unique.size() == s11.size());
    for (const auto& subset : s11) {
        CHECK(subset.size() == 8);
        CHECK(std::is_sorted(subset.begin(), subset.end()));
        CHECK(subset.front() >= 0);
        CHECK(subset.back() < 11);
    }

    // Leaving nothing out keeps the full library once.
    auto all = library_subsets(5, 0);
    REQUIRE(all.size() == 1);
    CHECK(all[0] == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("bootstrap resamples the expected share of distinct rows", "[ensemble]") {
    const std::size_t m = 5000;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        auto idx = bootstrap_rows(m, rng);
        REQUIRE(idx.size() == m);
        std::set<std::size_t> distinct(idx.begin(), idx.end());
        for (std::size_t i : idx) CHECK(i < m);
        // With replacement, the expected distinct fraction is 1 - 1/e.
        const double frac = static_cast<double>(distinct.size()) / static_cast<double>(m);
        CHECK(frac > 0.60);
        CHECK(frac < 0.67);
    }
    Rng rng(4);
    CHECK_THROWS_AS(bootstrap_rows(0, rng), InvalidParameterError);
}

TEST_CASE("inclusion probability can use either denominator", "[ensemble]") {
    CHECK(inclusion_probability(180, 180, 240, true) == 1.0);
    CHECK(inclusion_probability(180, 180, 240, false) == 0.75);
    CHECK(inclusion_probability(0, 0, 240, true) == 0.0);
}

TEST_CASE("summary statistics match hand-computed values", "[ensemble]") {
    std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    CHECK(median_of(v) == 2.5);
    CHECK(median_of({5.0, 1.0, 3.0}) == 3.0);
    auto [mean, sd] = mean_and_std(v);
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(2.5, 1e-15));
    CHECK_THAT(sd, Catch::Matchers::WithinRel(std::sqrt(5.0 / 3.0), 1e-12));
    auto [lo, hi] = confidence_interval(v);
    CHECK_THAT(lo, Catch::Matchers::WithinAbs(2.5 - 3.0 * sd, 1e-12));
    CHECK_THAT(hi, Catch::Matchers::WithinAbs(2.5 + 3.0 * sd, 1e-12));
    CHECK_THROWS_AS(median_of({}), InvalidParameterError);
}

TEST_CASE("coefficient recovery error is a relative l2 distance", "[ensemble]") {
    Eigen::VectorXd t(3), r(3);
    t << 1.0, 0.0, -1.0;
    r << 1.0, 0.1, -1.0;
    CHECK_THAT(coefficient_error(t, r), Catch::Matchers::WithinRel(0.1 / std::sqrt(2.0), 1e-12));
    Eigen::VectorXd wrong(2);
    CHECK_THROWS_AS(coefficient_error(t, wrong), ShapeError);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(coefficient_error(zero, r), InvalidParameterError);
}

TEST_CASE("ensemble recovers a planted model with full inclusion", "[ensemble]") {
    FeatureSystem sys = planted_system(400, 6, {{1, 1.2}, {4, -0.8}}, 0.01, 42);

    EnsembleConfig cfg;
    cfg.n_bootstrap = 40;
    cfg.leave_out = 2;
    cfg.seed = 9;
    cfg.regression.lambda1 = 0.25;

    Eigen::VectorXd truth = Eigen::VectorXd::Zero(6);
    truth[1] = 1.2;
    truth[4] = -0.8;
    EnsembleResult res = ensemble_fit(sys, cfg, truth);

    CHECK(res.total_fits == 40 * 15);  // C(6,2) subsets per replicate
    CHECK(res.failed_fits == 0);
    CHECK_FALSE(res.empty_model);
    REQUIRE(res.features.size() == 6);

    for (int j = 0; j < 6; ++j) {
        const FeatureStats& f = res.features[static_cast<std::size_t>(j)];
        CHECK(f.inclusion_probability >= 0.0);
        CHECK(f.inclusion_probability <= 1.0);
        // Every subset offers each feature in C(5,2)=10 of 15 subsets.
        CHECK(f.presence == 40 * 10);
        if (j == 1 || j == 4) {
            CHECK(f.retained);
            CHECK(f.inclusion_probability == 1.0);
            CHECK_THAT(f.median, Catch::Matchers::WithinAbs(truth[j], 0.02));
            CHECK(f.ci_lo <= f.median);
            CHECK(f.ci_hi >= f.median);
            CHECK_FALSE(f.ci_is_point);
        } else {
            CHECK_FALSE(f.retained);
        }
    }
    REQUIRE(res.coefficient_error.has_value());
    CHECK(*res.coefficient_error <= 0.05);
}

TEST_CASE("ensemble results are deterministic and thread-count independent", "[ensemble]") {
    FeatureSystem sys = planted_system(250, 5, {{0, 1.0}, {3, -1.5}}, 0.02, 7);
    EnsembleConfig cfg;
    cfg.n_bootstrap = 30;
    cfg.leave_out = 1;
    cfg.seed = 1234;
    cfg.regression.lambda1 = 0.2;

    EnsembleResult a = ensemble_fit(sys, cfg);
    EnsembleResult b = ensemble_fit(sys, cfg);
    EnsembleConfig threaded = cfg;
    threaded.threads = 4;
    EnsembleResult c = ensemble_fit(sys, threaded);

    REQUIRE(a.features.size() == b.features.size());
    REQUIRE(a.features.size() == c.features.size());
    for (std::size_t j = 0; j < a.features.size(); ++j) {
        // Bitwise equality: same seed must give the same draws regardless of
        // how the fits were scheduled.
        CHECK(a.features[j].median == b.features[j].median);
        CHECK(a.features[j].median == c.features[j].median);
        CHECK(a.features[j].mean == c.features[j].mean);
        CHECK(a.features[j].selections == c.features[j].selections);
        CHECK(a.features[j].samples == c.features[j].samples);
    }

    EnsembleConfig other = cfg;
    other.seed = 4321;
    EnsembleResult d = ensemble_fit(sys, other);
    bool any_difference = false;
    for (std::size_t j = 0; j < a.features.size(); ++j)
        if (a.features[j].samples != d.features[j].samples) any_difference = true;
    CHECK(any_difference);
}

TEST_CASE("ensemble flags an empty consensus", "[ensemble]") {
    // Pure-noise targets with a high threshold: every fit drops everything.
    FeatureSystem sys = planted_system(200, 4, {}, 1.0, 3);
    EnsembleConfig cfg;
    cfg.n_bootstrap = 10;
    cfg.leave_out = 1;
    cfg.regression.lambda1 = 50.0;
    EnsembleResult res = ensemble_fit(sys, cfg);
    CHECK(res.empty_model);
    for (const auto& f : res.features) {
        CHECK(f.selections == 0);
        CHECK_FALSE(f.retained);
        CHECK(f.ci_is_point);
    }

    EnsembleConfig bad = cfg;
    bad.n_bootstrap = 0;
    CHECK_THROWS_AS(ensemble_fit(sys, bad), InvalidParameterError);
}

TEST_CASE("kernel density estimate behaves like a density", "[ensemble]") {
    Rng rng(55);
    std::vector<double> samples;
    for (int i = 0; i < 400; ++i) samples.push_back(0.5 + 0.1 * rng.normal());

    auto grid = kde_auto_grid(samples);
    REQUIRE(grid.size() == 513);
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    KdeCurve curve = kde(samples, grid);
    REQUIRE(curve.density.size() == grid.size());
    CHECK(curve.bandwidth > 0.0);

    double integral = 0.0, peak_x = 0.0, peak = -1.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        integral += 0.5 * (curve.density[i] + curve.density[i - 1]) * (grid[i] - grid[i - 1]);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(curve.density[i] >= 0.0);
        if (curve.density[i] > peak) {
            peak = curve.density[i];
            peak_x = grid[i];
        }
    }
    CHECK_THAT(integral, Catch::Matchers::WithinAbs(1.0, 1e-2));
    CHECK_THAT(peak_x, Catch::Matchers::WithinAbs(0.5, 0.05));

    // Identical draws: the bandwidth floor keeps the density finite.
    std::vector<double> point(25, 2.0);
    auto pgrid = kde_auto_grid(point);
    KdeCurve spike = kde(point, pgrid);
    for (double d : spike.density) CHECK(std::isfinite(d));

    CHECK_THROWS_AS(kde({}, grid), InvalidParameterError);
    CHECK_THROWS_AS(kde(samples, {0.0}), InvalidParameterError);
    CHECK_THROWS_AS(kde_auto_grid({}), InvalidParameterError);
}
