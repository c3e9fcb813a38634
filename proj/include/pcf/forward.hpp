#pragma once

// Lead fields, linear inverse operators and the resolution matrix.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "pcf/core.hpp"

namespace pcf {

struct ElectrodeArray {
    std::vector<std::string> labels;
    std::vector<Vec3> positions;

    std::size_t size() const noexcept { return labels.size(); }

    /// Labels unique, positions on the unit sphere.
    void validate() const {
        detail::require(!labels.empty(), ErrorCode::empty_input, "electrode array is empty");
        detail::require(labels.size() == positions.size(), ErrorCode::dimension_mismatch,
                        "electrode labels and positions differ in count");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            detail::require(seen.insert(labels[i]).second, ErrorCode::invalid_argument,
                            "duplicate electrode label '" + labels[i] + "'");
            detail::require(std::abs(positions[i].norm() - 1.0) <= 1e-9, ErrorCode::invalid_argument,
                            "electrode '" + labels[i] + "' is not on the unit sphere");
        }
    }

    /// Index of the electrode with this label, or -1.
    int find(const std::string& label) const {
        const auto it = std::find(labels.begin(), labels.end(), label);
        return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
    }
};

/// The 19 electrodes of the international 10/20 system.
///
/// Spherical angles (theta from vertex, positive toward the right
/// hemisphere; phi in the horizontal plane from the +x axis), with +x right,
/// +y anterior (nasion), +z up:
///   x = sin(theta) cos(phi), y = sin(theta) sin(phi), z = cos(theta).
inline ElectrodeArray builtin_1020() {
    struct Entry {
        const char* label;
        double theta;
        double phi;
    };
    static constexpr std::array<Entry, 19> table{{
        {"Fp1", -92, -72}, {"Fp2", 92, 72},  {"F7", -92, -36}, {"F3", -60, -51}, {"Fz", 45, 90},
        {"F4", 60, 51},    {"F8", 92, 36},   {"T3", -92, 0},   {"C3", -46, 0},   {"Cz", 0, 0},
        {"C4", 46, 0},     {"T4", 92, 0},    {"T5", -92, 36},  {"P3", -60, 51},  {"Pz", 45, -90},
        {"P4", 60, -51},   {"T6", 92, -36},  {"O1", -92, 72},  {"O2", 92, -72},
    }};
    constexpr double deg = std::numbers::pi / 180.0;
    ElectrodeArray out;
    for (const Entry& e : table) {
        const double t = e.theta * deg;
        const double p = e.phi * deg;
        out.labels.emplace_back(e.label);
        out.positions.emplace_back(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t));
    }
    return out;
}

struct VoxelGrid {
    static constexpr double kDefaultCortexRadius = 0.85;

    std::vector<Vec3> positions;
    double spacing = 0.0;
    double r_cortex = kDefaultCortexRadius;

    std::size_t size() const noexcept { return positions.size(); }

    void validate() const {
        detail::require(!positions.empty(), ErrorCode::empty_input, "voxel grid is empty");
        detail::require(spacing > 0.0, ErrorCode::invalid_argument, "voxel spacing must be positive");
        for (std::size_t i = 0; i < positions.size(); ++i) {
            detail::require(positions[i].allFinite() && positions[i].norm() < r_cortex, ErrorCode::invalid_argument,
                            "voxel " + std::to_string(i) + " lies outside the cortex radius");
        }
        std::vector<std::size_t> order(positions.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto key = [&](std::size_t i) {
            return std::array<double, 3>{positions[i].x(), positions[i].y(), positions[i].z()};
        };
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
        for (std::size_t i = 1; i < order.size(); ++i) {
            detail::require(key(order[i]) != key(order[i - 1]), ErrorCode::invalid_argument,
                            "duplicate voxel position (voxels " + std::to_string(order[i - 1]) + " and " +
                                std::to_string(order[i]) + ")");
        }
    }

    /// Smallest distance between two distinct voxels.
    static double min_spacing(const std::vector<Vec3>& positions) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < positions.size(); ++i) {
            for (std::size_t j = i + 1; j < positions.size(); ++j) {
                best = std::min(best, (positions[i] - positions[j]).norm());
            }
        }
        return best;
    }
};

/// Cubic lattice at multiples of `spacing` clipped to the ball |p| < r_cortex
/// and to z >= z_floor (no cortex below the temporal base).
inline VoxelGrid make_grid(double spacing, double r_cortex = VoxelGrid::kDefaultCortexRadius,
                           double z_floor = -0.45) {
    detail::require(spacing > 0.0 && r_cortex > 0.0, ErrorCode::invalid_argument,
                    "grid spacing and cortex radius must be positive");
    VoxelGrid grid;
    grid.spacing = spacing;
    grid.r_cortex = r_cortex;
    const int n = static_cast<int>(std::floor(r_cortex / spacing));
    for (int ix = -n; ix <= n; ++ix) {
        for (int iy = -n; iy <= n; ++iy) {
            for (int iz = -n; iz <= n; ++iz) {
                const Vec3 p(ix * spacing, iy * spacing, iz * spacing);
                if (p.norm() < r_cortex && p.z() >= z_floor) {
                    grid.positions.push_back(p);
                }
            }
        }
    }
    return grid;
}

struct RankDiagnostic {
    Eigen::Index rank = 0;
    double largest_singular = 0.0;
    double smallest_singular = 0.0;
};

/// Numerical rank of a wide matrix: singular values above tol * largest.
inline RankDiagnostic row_rank(const RMatrix& k, double tol = kDefaultRankTol) {
    RankDiagnostic d;
    if (k.size() == 0) return d;
    Eigen::BDCSVD<RMatrix> svd(k);
    const RVector& sv = svd.singularValues();
    d.largest_singular = sv(0);
    d.smallest_singular = sv(sv.size() - 1);
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol * d.largest_singular) ++d.rank;
    }
    return d;
}

/// Real N_E x N_V gain matrix with geometry. Immutable; full row rank.
class LeadField {
public:
    LeadField(RMatrix gain, ElectrodeArray electrodes, VoxelGrid voxels)
        : gain_(std::move(gain)), electrodes_(std::move(electrodes)), voxels_(std::move(voxels)) {
        electrodes_.validate();
        voxels_.validate();
        detail::require(gain_.rows() == static_cast<Eigen::Index>(electrodes_.size()) &&
                            gain_.cols() == static_cast<Eigen::Index>(voxels_.size()),
                        ErrorCode::dimension_mismatch,
                        "lead field is " + detail::dims(gain_.rows(), gain_.cols()) + " but geometry has " +
                            std::to_string(electrodes_.size()) + " electrodes and " +
                            std::to_string(voxels_.size()) + " voxels");
        detail::require(gain_.allFinite(), ErrorCode::invalid_argument, "lead field has non-finite entries");
        rank_ = row_rank(gain_);
        detail::require(rank_.rank == gain_.rows(), ErrorCode::rank_deficient,
                        "lead field has rank " + std::to_string(rank_.rank) + " < " + std::to_string(gain_.rows()) +
                            " electrodes; perturb the voxel grid or electrode positions");
    }

    const RMatrix& gain() const noexcept { return gain_; }
    const ElectrodeArray& electrodes() const noexcept { return electrodes_; }
    const VoxelGrid& voxels() const noexcept { return voxels_; }
    const RankDiagnostic& rank() const noexcept { return rank_; }
    Eigen::Index n_electrodes() const noexcept { return gain_.rows(); }
    Eigen::Index n_voxels() const noexcept { return gain_.cols(); }

private:
    RMatrix gain_;
    ElectrodeArray electrodes_;
    VoxelGrid voxels_;
    RankDiagnostic rank_;
};

/// K[e][v] = 1 / |r_e - r_v|, no re-referencing.
inline LeadField synth_leadfield(const ElectrodeArray& electrodes, const VoxelGrid& voxels) {
    electrodes.validate();
    voxels.validate();
    detail::require(voxels.size() >= electrodes.size(), ErrorCode::invalid_argument,
                    "need at least as many voxels as electrodes");
    RMatrix k(electrodes.size(), voxels.size());
    for (std::size_t e = 0; e < electrodes.size(); ++e) {
        for (std::size_t v = 0; v < voxels.size(); ++v) {
            k(e, v) = 1.0 / (electrodes.positions[e] - voxels.positions[v]).norm();
        }
    }
    return LeadField(std::move(k), electrodes, voxels);
}

/// Voxel whose gain toward electrode `e` is largest, i.e. the cortex directly under it.
inline Eigen::Index voxel_under_electrode(const LeadField& lf, Eigen::Index e) {
    detail::require(e >= 0 && e < lf.n_electrodes(), ErrorCode::invalid_argument,
                    "electrode index " + std::to_string(e) + " out of range");
    Eigen::Index best = 0;
    lf.gain().row(e).maxCoeff(&best);
    return best;
}

/// 64-bit FNV-1a over the shape and raw bytes of K.
inline std::uint64_t fingerprint(const RMatrix& k) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t shape[2] = {static_cast<std::uint64_t>(k.rows()), static_cast<std::uint64_t>(k.cols())};
    mix(shape, sizeof(shape));
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
        for (Eigen::Index c = 0; c < k.cols(); ++c) {
            const double v = k(r, c);
            mix(&v, sizeof(v));
        }
    }
    return h;
}

enum class InverseKind { minimum_norm, weighted };

struct InverseOperator {
    static constexpr double kIdentityTol = 1e-8;

    RMatrix T;  // N_V x N_E with K T = I
    InverseKind kind = InverseKind::minimum_norm;
    std::string description;
};

namespace detail {

inline void check_right_inverse(const RMatrix& k, const RMatrix& t) {
    const double defect = (k * t - RMatrix::Identity(k.rows(), k.rows())).norm();
    require(defect <= InverseOperator::kIdentityTol, ErrorCode::rank_deficient,
            "inverse operator violates K T = I (defect " + std::to_string(defect) + ")");
}

// (K W K^T)^{-1} applied from the right to W K^T.
inline RMatrix solve_gram(const RMatrix& k, const RMatrix& wkt) {
    const RMatrix gram = k * wkt;
    Eigen::LDLT<RMatrix> ldlt(gram);
    require(ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14, ErrorCode::rank_deficient,
            "Gram matrix K W K^T is numerically singular");
    // T = W K^T G^{-1}  <=>  T^T = G^{-1} K W  (G symmetric)
    return ldlt.solve(wkt.transpose()).transpose();
}

}  // namespace detail

/// T = K^T (K K^T)^{-1}.
inline InverseOperator min_norm_inverse(const RMatrix& k) {
    detail::require(k.rows() > 0 && k.cols() >= k.rows(), ErrorCode::invalid_argument,
                    "minimum-norm inverse needs a wide lead field, got " + detail::dims(k.rows(), k.cols()));
    InverseOperator op;
    op.T = detail::solve_gram(k, k.transpose());
    op.kind = InverseKind::minimum_norm;
    op.description = "minimum_norm";
    detail::check_right_inverse(k, op.T);
    return op;
}

inline InverseOperator min_norm_inverse(const LeadField& lf) { return min_norm_inverse(lf.gain()); }

/// T = W K^T (K W K^T)^{-1} for positive diagonal weights W.
inline InverseOperator weighted_inverse(const RMatrix& k, const RVector& weights) {
    detail::require(weights.size() == k.cols(), ErrorCode::dimension_mismatch,
                    "expected " + std::to_string(k.cols()) + " voxel weights, got " + std::to_string(weights.size()));
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        detail::require(weights(i) > 0.0 && std::isfinite(weights(i)), ErrorCode::invalid_argument,
                        "weight " + std::to_string(i) + " is not positive");
    }
    InverseOperator op;
    op.T = detail::solve_gram(k, weights.asDiagonal() * k.transpose());
    op.kind = InverseKind::weighted;
    op.description = "weighted";
    detail::check_right_inverse(k, op.T);
    return op;
}

inline InverseOperator weighted_inverse(const LeadField& lf, const RVector& weights) {
    return weighted_inverse(lf.gain(), weights);
}

/// Phi = K J for a real or complex source vector/matrix.
template <typename Derived>
auto forward_project(const RMatrix& k, const Eigen::MatrixBase<Derived>& j) {
    using Scalar = typename Derived::Scalar;
    detail::require(j.rows() == k.cols(), ErrorCode::dimension_mismatch,
                    "source has " + std::to_string(j.rows()) + " rows, lead field has " + std::to_string(k.cols()) +
                        " voxels");
    return Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(k.template cast<Scalar>() * j);
}

template <typename Derived>
auto forward_project(const LeadField& lf, const Eigen::MatrixBase<Derived>& j) {
    return forward_project(lf.gain(), j);
}

inline constexpr Eigen::Index kMaxDenseVoxels = 2000;

/// H = K^T (K K^T)^{-1} K, dense. Refused above kMaxDenseVoxels.
inline RMatrix resolution_matrix(const RMatrix& k) {
    detail::require(k.cols() <= kMaxDenseVoxels, ErrorCode::invalid_argument,
                    "dense resolution matrix refused for " + std::to_string(k.cols()) +
                        " voxels; use resolution_apply");
    const RMatrix t = min_norm_inverse(k).T;
    RMatrix h = t * k;
    return 0.5 * (h + h.transpose());
}

/// H x without forming H.
inline RMatrix resolution_apply(const RMatrix& k, const RMatrix& x) {
    detail::require(x.rows() == k.cols(), ErrorCode::dimension_mismatch, "operand does not match voxel count");
    const RMatrix t = min_norm_inverse(k).T;
    return t * (k * x);
}

/// ||K^T T^T - T K||_F: zero iff T K is symmetric (the extra Moore-Penrose condition).
inline double mp_symmetry_defect(const RMatrix& k, const InverseOperator& op) {
    detail::require(op.T.rows() == k.cols() && op.T.cols() == k.rows(), ErrorCode::dimension_mismatch,
                    "inverse operator " + detail::dims(op.T.rows(), op.T.cols()) + " does not conform to K " +
                        detail::dims(k.rows(), k.cols()));
    const RMatrix tk = op.T * k;
    return (tk.transpose() - tk).norm();
}

}  // namespace pcf
