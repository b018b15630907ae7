// Ensemble sparse regression: bootstrap resampling of rows crossed with
// leave-k-out subsampling of library columns. Feature support is judged by
// inclusion probability across all fits; coefficients are aggregated as the
// median of the per-fit draws and reported with mean +/- 3 sigma intervals
// and kernel density estimates.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>
#include <vector>

#include "common.hpp"
#include "features.hpp"
#include "regression.hpp"
#include "rng.hpp"

namespace mbsindy {

struct EnsembleConfig {
    int n_bootstrap = 60;
    int leave_out = 3;                  // columns dropped per library subset
    double inclusion_threshold = 0.7;   // retain features at or above this
    RegressionParams regression;
    std::uint64_t seed = 0;
    double perturb_noise = 0.0;  // optional extra noise on resampled targets
    bool per_presence_denominator = true;
    int threads = 1;
};

struct FeatureStats {
    std::string name;
    long presence = 0;    // fits whose subset offered the feature
    long selections = 0;  // fits that kept it
    double inclusion_probability = 0.0;
    std::vector<double> samples;  // unscaled coefficient draws when selected
    double median = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    double ci_lo = 0.0;   // mean - 3 sigma
    double ci_hi = 0.0;   // mean + 3 sigma
    bool ci_is_point = false;  // fewer than two draws
    bool retained = false;
};

struct EnsembleResult {
    std::vector<FeatureStats> features;
    Eigen::VectorXd coefficients;  // aggregated, in raw feature units
    long total_fits = 0;
    long failed_fits = 0;
    bool empty_model = false;
    std::optional<double> coefficient_error;  // vs. ground truth when known
};

inline std::vector<std::size_t> bootstrap_rows(std::size_t m, Rng& rng) {
    if (m == 0) throw InvalidParameterError("bootstrap_rows: no rows to resample");
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = rng.uniform_below(m);
    return idx;
}

// All size-(n-k) column subsets of {0..n-1}, lexicographic by kept ids.
inline std::vector<std::vector<int>> library_subsets(int n_features, int leave_out) {
    if (leave_out < 0 || leave_out >= n_features)
        throw InvalidParameterError("library_subsets: leave_out must be in [0, n_features)");
    const int keep = n_features - leave_out;
    std::vector<std::vector<int>> out;
    std::vector<int> pick(static_cast<std::size_t>(keep));
    for (int i = 0; i < keep; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
        out.push_back(pick);
        int i = keep - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == n_features - keep + i) --i;
        if (i < 0) break;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < keep; ++j)
            pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

inline double inclusion_probability(long selections, long presence, long total_fits,
                                    bool per_presence) {
    const long denom = per_presence ? presence : total_fits;
    if (denom <= 0) return 0.0;
    return static_cast<double>(selections) / static_cast<double>(denom);
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw InvalidParameterError("median_of: empty sample set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Mean and sample (n-1) standard deviation; a single draw has zero spread.
inline std::pair<double, double> mean_and_std(const std::vector<double>& v) {
    if (v.empty()) throw InvalidParameterError("mean_and_std: empty sample set");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

// mean +/- 3 sigma.
inline std::pair<double, double> confidence_interval(const std::vector<double>& samples) {
    const auto [mean, sd] = mean_and_std(samples);
    return {mean - 3.0 * sd, mean + 3.0 * sd};
}

struct KdeCurve {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0.0;
};

inline double kde_bandwidth(const std::vector<double>& samples) {
    const auto [mean, sd] = mean_and_std(samples);
    (void)mean;
    double amax = 1.0;
    for (double v : samples) amax = std::max(amax, std::abs(v));
    const double scott = sd * std::pow(static_cast<double>(samples.size()), -0.2);
    return std::max(scott, 1e-6 * amax);
}

inline std::vector<double> kde_auto_grid(const std::vector<double>& samples, std::size_t n = 513) {
    if (samples.empty()) throw InvalidParameterError("kde_auto_grid: empty sample set");
    const double h = kde_bandwidth(samples);
    const double lo = *std::min_element(samples.begin(), samples.end()) - 4.0 * h;
    const double hi = *std::max_element(samples.begin(), samples.end()) + 4.0 * h;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return grid;
}

// Gaussian kernel density estimate over the given grid.
inline KdeCurve kde(const std::vector<double>& samples, const std::vector<double>& grid) {
    if (samples.empty()) throw InvalidParameterError("kde: empty sample set");
    if (grid.size() < 2) throw InvalidParameterError("kde: grid needs at least two points");
    KdeCurve curve;
    curve.bandwidth = kde_bandwidth(samples);
    curve.x = grid;
    curve.density.resize(grid.size());
    const double h = curve.bandwidth;
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * 3.14159265358979323846));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double acc = 0.0;
        for (double s : samples) {
            const double z = (grid[i] - s) / h;
            acc += std::exp(-0.5 * z * z);
        }
        curve.density[i] = norm * acc;
    }
    return curve;
}

// Relative l2 distance between coefficient vectors of equal length.
inline double coefficient_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& recovered) {
    if (truth.size() != recovered.size()) throw ShapeError("coefficient_error: size mismatch");
    const double tn = truth.norm();
    if (tn == 0.0) throw InvalidParameterError("coefficient_error: zero ground-truth vector");
    return (truth - recovered).norm() / tn;
}

// The full ensemble. `sys` should be the normalized system; coefficients are
// reported in raw units through its recorded scales. `truth`, when given, is
// a raw-unit coefficient vector used to compute the recovery error.
inline EnsembleResult ensemble_fit(const FeatureSystem& sys, const EnsembleConfig& cfg,
                                   const std::optional<Eigen::VectorXd>& truth = std::nullopt) {
    if (cfg.n_bootstrap < 1) throw InvalidParameterError("ensemble_fit: n_bootstrap must be positive");
    if (sys.F.rows() == 0) throw EmptySystemError("ensemble_fit: no rows");
    const int n_f = static_cast<int>(sys.F.cols());
    const std::size_t m = static_cast<std::size_t>(sys.F.rows());

    Eigen::VectorXd scales = sys.scales.size() ? sys.scales : Eigen::VectorXd::Ones(n_f);
    if (scales.size() != n_f) throw ShapeError("ensemble_fit: scales do not match columns");

    const auto subsets = library_subsets(n_f, cfg.leave_out);

    double v_std = 0.0;
    if (cfg.perturb_noise > 0.0) {
        const double mean = sys.V.mean();
        v_std = std::sqrt((sys.V.array() - mean).square().sum() /
                          std::max<double>(1.0, static_cast<double>(m - 1)));
    }

    // One slot per (replicate, subset) fit: kept feature ids with their
    // scaled coefficients, or nullopt when the fit failed. Filling slots in
    // parallel and reducing in fixed order keeps results independent of the
    // thread count.
    using FitRecord = std::optional<std::vector<std::pair<int, double>>>;
    std::vector<std::vector<FitRecord>> fits(static_cast<std::size_t>(cfg.n_bootstrap));

    auto run_replicate = [&](int r) {
        Rng rng = Rng::fork(cfg.seed, static_cast<std::uint64_t>(r));
        const auto idx = bootstrap_rows(m, rng);
        Eigen::MatrixXd Fb(sys.F.rows(), sys.F.cols());
        Eigen::VectorXd Vb(sys.V.size());
        for (std::size_t i = 0; i < m; ++i) {
            Fb.row(static_cast<Eigen::Index>(i)) = sys.F.row(static_cast<Eigen::Index>(idx[i]));
            Vb[static_cast<Eigen::Index>(i)] = sys.V[static_cast<Eigen::Index>(idx[i])];
        }
        if (cfg.perturb_noise > 0.0)
            for (Eigen::Index i = 0; i < Vb.size(); ++i)
                Vb[i] += cfg.perturb_noise * v_std * rng.normal();

        const GramSystem gram = make_gram(Fb, Vb);
        auto& slot = fits[static_cast<std::size_t>(r)];
        slot.resize(subsets.size());
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            try {
                const SparseFit fit = stridge_gram(gram, subsets[s], cfg.regression);
                std::vector<std::pair<int, double>> kept;
                kept.reserve(fit.support.size());
                for (int j : fit.support) kept.emplace_back(j, fit.coefficients[j]);
                slot[s] = std::move(kept);
            } catch (const Error&) {
                slot[s] = std::nullopt;  // failed fit: presence without selection
            }
        }
    };

    const int nthreads = std::max(1, cfg.threads);
    if (nthreads == 1) {
        for (int r = 0; r < cfg.n_bootstrap; ++r) run_replicate(r);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> cursor{0};
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (int r = cursor.fetch_add(1); r < cfg.n_bootstrap; r = cursor.fetch_add(1))
                    run_replicate(r);
            });
        for (auto& th : pool) th.join();
    }

    EnsembleResult result;
    result.features.resize(static_cast<std::size_t>(n_f));
    for (int j = 0; j < n_f; ++j)
        result.features[static_cast<std::size_t>(j)].name =
            static_cast<std::size_t>(j) < sys.names.size() ? sys.names[static_cast<std::size_t>(j)]
                                                           : std::to_string(j);

    result.total_fits = static_cast<long>(cfg.n_bootstrap) * static_cast<long>(subsets.size());
    for (int r = 0; r < cfg.n_bootstrap; ++r) {
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            const FitRecord& rec = fits[static_cast<std::size_t>(r)][s];
            for (int j : subsets[s]) ++result.features[static_cast<std::size_t>(j)].presence;
            if (!rec) {
                ++result.failed_fits;
                continue;
            }
            for (const auto& [j, scaled] : *rec) {
                FeatureStats& fs = result.features[static_cast<std::size_t>(j)];
                ++fs.selections;
                fs.samples.push_back(scaled / scales[j]);
            }
        }
    }

    result.coefficients = Eigen::VectorXd::Zero(n_f);
    for (int j = 0; j < n_f; ++j) {
        FeatureStats& fs = result.features[static_cast<std::size_t>(j)];
        fs.inclusion_probability = inclusion_probability(fs.selections, fs.presence,
                                                         result.total_fits,
                                                         cfg.per_presence_denominator);
        if (!fs.samples.empty()) {
            fs.median = median_of(fs.samples);
            const auto [mean, sd] = mean_and_std(fs.samples);
            fs.mean = mean;
            fs.stddev = sd;
            fs.ci_lo = mean - 3.0 * sd;
            fs.ci_hi = mean + 3.0 * sd;
        }
        fs.ci_is_point = fs.samples.size() < 2;
        fs.retained = !fs.samples.empty() && fs.inclusion_probability >= cfg.inclusion_threshold;
        if (fs.retained) result.coefficients[j] = fs.median;
    }
    result.empty_model =
        std::none_of(result.features.begin(), result.features.end(),
                     [](const FeatureStats& f) { return f.retained; });
    if (truth) result.coefficient_error = coefficient_error(*truth, result.coefficients);
    return result;
}

}  // namespace mbsindy
