// Sparse regression: ridge, sequentially thresholded least squares, and
// sequentially thresholded ridge (STRidge) with an optional unpenalized
// debias refit on the final support, plus AIC-based threshold selection.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "common.hpp"

namespace mbsindy {

struct RegressionParams {
    double lambda1 = 0.3;  // hard coefficient threshold
    double lambda2 = 1.0;  // ridge penalty
    int max_iterations = 50;
    bool debias = true;  // final least-squares refit on the surviving support
};

struct SparseFit {
    Eigen::VectorXd coefficients;       // full length, zero off the support
    std::vector<int> support;           // ascending column ids
    int iterations = 0;
    double rss = 0.0;                   // residual sum of squares
    bool empty_model = false;
    std::vector<std::vector<int>> support_history;  // support after each pass
};

inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& F, const Eigen::VectorXd& V,
                                   double lambda2) {
    if (F.rows() != V.size()) throw ShapeError("ridge_solve: row count of F must match V");
    if (F.rows() == 0 || F.cols() == 0) throw ShapeError("ridge_solve: empty system");
    if (lambda2 < 0.0) throw InvalidParameterError("ridge_solve: lambda2 must be non-negative");
    if (lambda2 == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(F);
        if (qr.rank() < F.cols())
            throw SingularSystemError("ridge_solve: rank-deficient system with lambda2 = 0");
        return qr.solve(V);
    }
    const Eigen::MatrixXd gram =
        F.transpose() * F + lambda2 * Eigen::MatrixXd::Identity(F.cols(), F.cols());
    return gram.ldlt().solve(F.transpose() * V);
}

namespace detail {

inline std::vector<int> threshold_support(const Eigen::VectorXd& coeffs,
                                          const std::vector<int>& active, double lambda1) {
    std::vector<int> kept;
    kept.reserve(active.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i)
        if (std::abs(coeffs[i]) >= lambda1) kept.push_back(active[static_cast<std::size_t>(i)]);
    return kept;
}

inline Eigen::MatrixXd restrict_columns(const Eigen::MatrixXd& F, const std::vector<int>& cols) {
    Eigen::MatrixXd sub(F.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = F.col(cols[j]);
    return sub;
}

inline SparseFit finish_fit(const Eigen::MatrixXd& F, const Eigen::VectorXd& V,
                            const std::vector<int>& support, const Eigen::VectorXd& sub_coeffs,
                            bool debias) {
    SparseFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(F.cols());
    fit.support = support;
    if (!support.empty()) {
        Eigen::VectorXd final_coeffs = sub_coeffs;
        if (debias) {
            const Eigen::MatrixXd sub = restrict_columns(F, support);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
            // Keep the ridge solution if the support happens to be
            // rank-deficient without the penalty.
            if (qr.rank() == sub.cols()) final_coeffs = qr.solve(V);
        }
        for (std::size_t j = 0; j < support.size(); ++j)
            fit.coefficients[support[j]] = final_coeffs[static_cast<Eigen::Index>(j)];
    }
    fit.empty_model = support.empty();
    fit.rss = (V - F * fit.coefficients).squaredNorm();
    return fit;
}

}  // namespace detail

// Sequentially thresholded ridge. lambda2 = 0 reduces this to sequentially
// thresholded least squares.
inline SparseFit stridge(const Eigen::MatrixXd& F, const Eigen::VectorXd& V,
                         const RegressionParams& params) {
    if (F.rows() != V.size()) throw ShapeError("stridge: row count of F must match V");
    if (F.rows() == 0 || F.cols() == 0) throw ShapeError("stridge: empty system");
    if (params.lambda1 < 0.0) throw InvalidParameterError("stridge: lambda1 must be non-negative");

    SparseFit fit;
    std::vector<int> active(static_cast<std::size_t>(F.cols()));
    for (std::size_t j = 0; j < active.size(); ++j) active[j] = static_cast<int>(j);

    Eigen::VectorXd coeffs = ridge_solve(F, V, params.lambda2);
    std::vector<int> next = detail::threshold_support(coeffs, active, params.lambda1);
    fit.support_history.push_back(next);
    int iter = 1;
    while (iter < params.max_iterations) {
        if (next.empty()) break;
        if (next == active) break;
        active = next;
        const Eigen::MatrixXd sub = detail::restrict_columns(F, active);
        coeffs = ridge_solve(sub, V, params.lambda2);
        next = detail::threshold_support(coeffs, active, params.lambda1);
        fit.support_history.push_back(next);
        ++iter;
    }
    if (!next.empty() && coeffs.size() != static_cast<Eigen::Index>(next.size())) {
        // Hit the iteration cap right after a shrink; refit on what's left.
        coeffs = ridge_solve(detail::restrict_columns(F, next), V, params.lambda2);
    }
    SparseFit out = detail::finish_fit(F, V, next, coeffs, params.debias);
    out.iterations = iter;
    out.support_history = std::move(fit.support_history);
    return out;
}

// Classic sequentially thresholded least squares (no ridge penalty).
inline SparseFit stls(const Eigen::MatrixXd& F, const Eigen::VectorXd& V, double lambda1,
                      int max_iterations = 50) {
    RegressionParams p;
    p.lambda1 = lambda1;
    p.lambda2 = 0.0;
    p.max_iterations = max_iterations;
    p.debias = false;  // the iteration is already unpenalized
    return stridge(F, V, p);
}

// Precomputed normal equations of one (sub)system; lets many restricted
// fits reuse a single pass over the data.
struct GramSystem {
    Eigen::MatrixXd G;   // F^T F
    Eigen::VectorXd c;   // F^T V
    double vtv = 0.0;    // V^T V
    Eigen::Index rows = 0;
};

inline GramSystem make_gram(const Eigen::MatrixXd& F, const Eigen::VectorXd& V) {
    GramSystem g;
    g.G = F.transpose() * F;
    g.c = F.transpose() * V;
    g.vtv = V.squaredNorm();
    g.rows = F.rows();
    return g;
}

namespace detail {

inline Eigen::VectorXd gram_ridge(const GramSystem& gs, const std::vector<int>& cols,
                                  double lambda2) {
    const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd G(k, k);
    Eigen::VectorXd c(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        c[i] = gs.c[cols[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < k; ++j)
            G(i, j) = gs.G(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
    if (lambda2 > 0.0) G.diagonal().array() += lambda2;
    if (lambda2 > 0.0) return G.ldlt().solve(c);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
    if (!lu.isInvertible()) throw SingularSystemError("gram_ridge: singular support");
    return lu.solve(c);
}

inline double gram_rss(const GramSystem& gs, const std::vector<int>& cols,
                       const Eigen::VectorXd& coeffs) {
    // ||V - Fa||^2 = V'V - 2 a'c + a'Ga, evaluated on the restricted blocks.
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        lin += coeffs[static_cast<Eigen::Index>(i)] * gs.c[cols[i]];
        for (std::size_t j = 0; j < cols.size(); ++j)
            quad += coeffs[static_cast<Eigen::Index>(i)] * gs.G(cols[i], cols[j]) *
                    coeffs[static_cast<Eigen::Index>(j)];
    }
    return std::max(0.0, gs.vtv - 2.0 * lin + quad);
}

}  // namespace detail

// STRidge through the normal equations, restricted to `columns` of the
// original system. Coefficients come back indexed over the full column set.
inline SparseFit stridge_gram(const GramSystem& gs, const std::vector<int>& columns,
                              const RegressionParams& params) {
    if (columns.empty()) throw ShapeError("stridge_gram: empty column subset");
    std::vector<int> active = columns;
    Eigen::VectorXd coeffs = detail::gram_ridge(gs, active, params.lambda2);
    std::vector<int> next = detail::threshold_support(coeffs, active, params.lambda1);
    int iter = 1;
    while (iter < params.max_iterations && !next.empty() && next != active) {
        active = next;
        coeffs = detail::gram_ridge(gs, active, params.lambda2);
        next = detail::threshold_support(coeffs, active, params.lambda1);
        ++iter;
    }

    SparseFit fit;
    fit.iterations = iter;
    fit.coefficients = Eigen::VectorXd::Zero(gs.G.cols());
    fit.support = next;
    fit.empty_model = next.empty();
    if (!next.empty()) {
        Eigen::VectorXd final_coeffs = coeffs;
        if (coeffs.size() != static_cast<Eigen::Index>(next.size())) {
            // Loop ended right after a shrink; refit on the final support.
            final_coeffs = detail::gram_ridge(gs, next, params.lambda2);
        }
        if (params.debias) {
            try {
                final_coeffs = detail::gram_ridge(gs, next, 0.0);
            } catch (const SingularSystemError&) {
                // Rank-deficient without the penalty: keep the ridge values.
            }
        }
        for (std::size_t j = 0; j < next.size(); ++j) fit.coefficients[next[j]] = final_coeffs[static_cast<Eigen::Index>(j)];
        fit.rss = detail::gram_rss(gs, next, final_coeffs);
    } else {
        fit.rss = gs.vtv;
    }
    return fit;
}

struct LambdaScore {
    double lambda1 = 0.0;
    double aic = 0.0;
    int support_size = 0;
    double rss = 0.0;
    bool empty_model = false;
};

struct LambdaSelection {
    double best_lambda1 = 0.0;
    std::vector<LambdaScore> table;
};

// Score candidate thresholds by AIC = 2k + m ln(RSS/m) and keep the winner;
// ties go to the sparser (larger) threshold. Candidates whose model is empty
// are listed but never win.
inline LambdaSelection select_lambda1(const Eigen::MatrixXd& F, const Eigen::VectorXd& V,
                                      std::vector<double> candidates,
                                      const RegressionParams& base) {
    if (candidates.empty()) throw InvalidParameterError("select_lambda1: no candidates");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const double m = static_cast<double>(F.rows());
    LambdaSelection sel;
    bool found = false;
    double best_aic = 0.0;
    for (double lam : candidates) {
        RegressionParams p = base;
        p.lambda1 = lam;
        const SparseFit fit = stridge(F, V, p);
        LambdaScore score;
        score.lambda1 = lam;
        score.support_size = static_cast<int>(fit.support.size());
        score.rss = fit.rss;
        score.empty_model = fit.empty_model;
        score.aic = 2.0 * score.support_size + m * std::log(std::max(fit.rss, 1e-300) / m);
        sel.table.push_back(score);
        if (fit.empty_model) continue;
        // Ascending scan with <= sends exact ties to the larger threshold.
        if (!found || score.aic <= best_aic) {
            best_aic = score.aic;
            sel.best_lambda1 = lam;
            found = true;
        }
    }
    if (!found) throw NoModelError("select_lambda1: every candidate threshold empties the model");
    return sel;
}

}  // namespace mbsindy
