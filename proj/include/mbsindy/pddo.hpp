// Peridynamic differential operator on 2D scattered points.
//
// For a family of neighbors around a center, moments of a Gaussian kernel
// against the quadratic monomial basis (1, x1, x2, x1^2, x2^2, x1x2) form a
// 6x6 system whose solution gives quadrature functions g^p. Integrating a
// field against g^p returns, in one shot, the reconstructed value, both
// first derivatives and all three second derivatives at the center. The
// construction is algebraically a weighted least-squares quadratic fit, so
// any field that is itself a quadratic is differentiated exactly regardless
// of how the points are scattered.
//
// Families can carry a local frame angle: member offsets are rotated into
// the frame before moments are assembled, which turns the derivative slots
// into directional derivatives along the frame axes. That is what couples
// field data to interface normals (frame axis 1 = normal, axis 2 = tangent).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace mbsindy {

inline double gaussian_weight(double distance, double horizon) {
    if (horizon <= 0.0) throw InvalidParameterError("gaussian_weight: horizon must be positive");
    const double q = distance / horizon;
    return std::exp(-4.0 * q * q);
}

// Scattered data sites with their quadrature volumes (areas in 2D).
struct PointCloud {
    std::vector<Vec2> points;
    std::vector<double> volumes;

    std::size_t size() const { return points.size(); }
};

// Uniform-bin spatial index for radius queries over a cloud.
class NeighborIndex {
public:
    NeighborIndex(const PointCloud& cloud, double cell_size)
        : cloud_(&cloud), cell_(cell_size) {
        if (cell_size <= 0.0) throw InvalidParameterError("NeighborIndex: cell size must be positive");
        bins_.reserve(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
            bins_[key(cloud.points[i])].push_back(static_cast<int>(i));
    }

    // Ids of all points within `radius` of `pos` (inclusive), ascending.
    std::vector<int> query(const Vec2& pos, double radius) const {
        std::vector<int> out;
        const double r2 = radius * radius;
        const long cx = cell_of(pos.x), cy = cell_of(pos.y);
        const long reach = static_cast<long>(std::ceil(radius / cell_)) + 1;
        for (long gx = cx - reach; gx <= cx + reach; ++gx) {
            for (long gy = cy - reach; gy <= cy + reach; ++gy) {
                auto it = bins_.find(pack(gx, gy));
                if (it == bins_.end()) continue;
                for (int id : it->second) {
                    if ((cloud_->points[static_cast<std::size_t>(id)] - pos).squared_norm() <= r2)
                        out.push_back(id);
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
    std::uint64_t pack(long gx, long gy) const {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(gx)) << 32) |
               static_cast<std::uint64_t>(static_cast<std::uint32_t>(gy));
    }
    std::uint64_t key(const Vec2& p) const { return pack(cell_of(p.x), cell_of(p.y)); }

    const PointCloud* cloud_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> bins_;
};

// Keep only points with (x - origin) . inward_normal >= 0.
struct HalfPlane {
    Vec2 origin;
    Vec2 inward_normal;
};

// A center plus its neighborhood, with offsets expressed in the local frame.
struct Family {
    Vec2 center;
    double horizon = 0.0;
    double frame_angle = 0.0;
    std::vector<int> members;      // ids into the source cloud
    std::vector<Vec2> xi;          // member offsets, rotated into the frame
    std::vector<double> volumes;   // member quadrature volumes
    std::vector<double> weights;   // gaussian kernel at each |xi|

    std::size_t size() const { return members.size(); }
};

namespace detail {

constexpr std::size_t kMonomials = 6;

// Basis order: 1, x1, x2, x1^2, x2^2, x1x2.
inline void monomials(const Vec2& xi, double m[kMonomials]) {
    m[0] = 1.0;
    m[1] = xi.x;
    m[2] = xi.y;
    m[3] = xi.x * xi.x;
    m[4] = xi.y * xi.y;
    m[5] = xi.x * xi.y;
}

inline Family assemble_family(const PointCloud& cloud, const Vec2& center, double horizon,
                              const std::vector<int>& candidate_ids,
                              const std::optional<HalfPlane>& keep, int exclude_id,
                              double frame_angle) {
    if (horizon <= 0.0) throw InvalidParameterError("build_family: horizon must be positive");
    Family fam;
    fam.center = center;
    fam.horizon = horizon;
    fam.frame_angle = frame_angle;
    const double r2 = horizon * horizon;
    const double c = std::cos(frame_angle), s = std::sin(frame_angle);
    for (int id : candidate_ids) {
        if (id == exclude_id) continue;
        const Vec2 offset = cloud.points[static_cast<std::size_t>(id)] - center;
        if (offset.squared_norm() > r2) continue;
        if (keep && (cloud.points[static_cast<std::size_t>(id)] - keep->origin).dot(keep->inward_normal) < -1e-12)
            continue;
        // Components of the offset along the frame axes (axis 1 at
        // frame_angle, axis 2 a counterclockwise quarter turn further).
        const Vec2 local{c * offset.x + s * offset.y, -s * offset.x + c * offset.y};
        fam.members.push_back(id);
        fam.xi.push_back(local);
        fam.volumes.push_back(cloud.volumes[static_cast<std::size_t>(id)]);
        fam.weights.push_back(gaussian_weight(offset.norm(), horizon));
    }
    if (fam.size() < kMonomials)
        throw DegenerateFamilyError("family has " + std::to_string(fam.size()) +
                                    " members; at least 6 are required");
    return fam;
}

}  // namespace detail

// Family around cloud point `center_id`. The center itself participates as a
// data site unless `include_center` is false.
inline Family build_family(const PointCloud& cloud, int center_id, double horizon,
                           const std::optional<HalfPlane>& keep = std::nullopt,
                           bool include_center = true, double frame_angle = 0.0,
                           const NeighborIndex* index = nullptr) {
    if (center_id < 0 || static_cast<std::size_t>(center_id) >= cloud.size())
        throw InvalidParameterError("build_family: center id out of range");
    const Vec2 center = cloud.points[static_cast<std::size_t>(center_id)];
    std::vector<int> candidates;
    if (index) {
        candidates = index->query(center, horizon);
    } else {
        candidates.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) candidates[i] = static_cast<int>(i);
    }
    return detail::assemble_family(cloud, center, horizon, candidates, keep,
                                   include_center ? -1 : center_id, frame_angle);
}

// Family around a free position that is not itself a cloud point.
inline Family build_family_at(const PointCloud& cloud, const Vec2& center, double horizon,
                              const std::optional<HalfPlane>& keep = std::nullopt,
                              double frame_angle = 0.0, const NeighborIndex* index = nullptr) {
    std::vector<int> candidates;
    if (index) {
        candidates = index->query(center, horizon);
    } else {
        candidates.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) candidates[i] = static_cast<int>(i);
    }
    return detail::assemble_family(cloud, center, horizon, candidates, keep, -1, frame_angle);
}

using Mat6 = Eigen::Matrix<double, 6, 6>;

// Weighted moment matrix A of the monomial basis over the family.
inline Mat6 assemble_moment_matrix(const Family& fam) {
    Mat6 A = Mat6::Zero();
    double m[detail::kMonomials];
    for (std::size_t j = 0; j < fam.size(); ++j) {
        detail::monomials(fam.xi[j], m);
        const double wv = fam.weights[j] * fam.volumes[j];
        for (std::size_t q = 0; q < detail::kMonomials; ++q)
            for (std::size_t r = q; r < detail::kMonomials; ++r) A(q, r) += wv * m[q] * m[r];
    }
    // Fill the lower triangle from the accumulated upper one so the matrix
    // is symmetric to the bit.
    for (std::size_t q = 0; q < detail::kMonomials; ++q)
        for (std::size_t r = 0; r < q; ++r) A(q, r) = A(r, q);
    return A;
}

// Coefficients of the six quadrature functions; column p belongs to slot p.
struct PDFunctions {
    Mat6 coefficients;
    double condition = 0.0;
};

// Right-hand sides: Taylor matching puts a factor 2 on the pure second
// derivative slots because of the 1/2! in the expansion.
inline Mat6 pd_rhs() {
    Mat6 b = Mat6::Zero();
    b(0, 0) = 1.0;
    b(1, 1) = 1.0;
    b(2, 2) = 1.0;
    b(3, 3) = 2.0;
    b(4, 4) = 2.0;
    b(5, 5) = 1.0;
    return b;
}

inline PDFunctions solve_pd_functions(const Mat6& A) {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(A);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
        throw IllConditionedFamilyError(
            "moment matrix condition " +
            std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
            " exceeds 1e12");
    const Mat6 b = pd_rhs();
    PDFunctions pd;
    pd.coefficients = A.ldlt().solve(b);
    pd.condition = hi / lo;
    const double residual = (A * pd.coefficients - b).cwiseAbs().maxCoeff() / 2.0;
    if (!(residual <= 1e-9))
        throw IllConditionedFamilyError("moment solve residual " + std::to_string(residual) +
                                        " exceeds 1e-9");
    return pd;
}

// Reconstruction and derivatives at the family center, in frame coordinates:
// d1 differentiates along the frame's first axis, d2 along the second.
struct DerivativeSet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d11 = 0.0;
    double d22 = 0.0;
    double d12 = 0.0;
    double frame_angle = 0.0;
};

// `field` holds one value per family member, in family order.
inline DerivativeSet evaluate_derivatives(std::span<const double> field, const Family& fam,
                                          const PDFunctions& pd) {
    if (field.size() != fam.size())
        throw IncompleteDataError("evaluate_derivatives: expected " + std::to_string(fam.size()) +
                                  " field values, got " + std::to_string(field.size()));
    double slots[detail::kMonomials] = {0, 0, 0, 0, 0, 0};
    double m[detail::kMonomials];
    for (std::size_t j = 0; j < fam.size(); ++j) {
        if (!std::isfinite(field[j]))
            throw IncompleteDataError("evaluate_derivatives: non-finite field value at member " +
                                      std::to_string(j));
        detail::monomials(fam.xi[j], m);
        const double fwv = field[j] * fam.weights[j] * fam.volumes[j];
        for (std::size_t p = 0; p < detail::kMonomials; ++p) {
            double g = 0.0;
            for (std::size_t q = 0; q < detail::kMonomials; ++q)
                g += pd.coefficients(q, p) * m[q];
            slots[p] += fwv * g;
        }
    }
    DerivativeSet out;
    out.value = slots[0];
    out.d1 = slots[1];
    out.d2 = slots[2];
    out.d11 = slots[3];
    out.d22 = slots[4];
    out.d12 = slots[5];
    out.frame_angle = fam.frame_angle;
    return out;
}

// One-call convenience: family, solve, evaluate. `values` spans the whole
// cloud; the family gathers what it needs.
inline DerivativeSet derivatives_at(const PointCloud& cloud, std::span<const double> values,
                                    const Vec2& center, double horizon, double frame_angle = 0.0,
                                    const std::optional<HalfPlane>& keep = std::nullopt,
                                    const NeighborIndex* index = nullptr) {
    if (values.size() != cloud.size())
        throw IncompleteDataError("derivatives_at: one value per cloud point is required");
    const Family fam = build_family_at(cloud, center, horizon, keep, frame_angle, index);
    const PDFunctions pd = solve_pd_functions(assemble_moment_matrix(fam));
    std::vector<double> local(fam.size());
    for (std::size_t j = 0; j < fam.size(); ++j)
        local[j] = values[static_cast<std::size_t>(fam.members[j])];
    return evaluate_derivatives(local, fam, pd);
}

}  // namespace mbsindy
