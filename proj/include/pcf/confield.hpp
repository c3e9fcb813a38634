#pragma once

// Whole-cortex connectivity fields.
//
// Classical coherence comes from the source covariance T S T^T of a chosen
// linear inverse T, held as a factor A with T S T^T = A A^*.
//
// The partial coherence field uses the reflexive generalized inverse
// K^T S^+ K of that source covariance, which does not involve T at all. With
// U the Hermitian pseudo-inverse square root of S and V = K^T U, the partial
// coherence matrix is P = W W^* where W is V with unit-norm rows. Only the
// N_V x N_E factor W is ever stored.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pcf/core.hpp"
#include "pcf/forward.hpp"
#include "pcf/io.hpp"
#include "pcf/matcore.hpp"
#include "pcf/spectra.hpp"

namespace pcf {

enum class Measure { classical_coh, classical_lagged, partial_coh, partial_lagged };

inline std::string to_string(Measure m) {
    switch (m) {
        case Measure::classical_coh: return "classical_coh";
        case Measure::classical_lagged: return "classical_lagged";
        case Measure::partial_coh: return "partial_coh";
        case Measure::partial_lagged: return "partial_lagged";
    }
    return "unknown";
}

inline Measure parse_measure(const std::string& s) {
    for (Measure m : {Measure::classical_coh, Measure::classical_lagged, Measure::partial_coh, Measure::partial_lagged}) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorCode::invalid_argument, "unknown measure '" + s + "'");
}

inline bool is_partial(Measure m) { return m == Measure::partial_coh || m == Measure::partial_lagged; }
inline bool is_lagged(Measure m) { return m == Measure::classical_lagged || m == Measure::partial_lagged; }

struct ClassicalField {
    CMatrix A;     // N_V x N_E, S_J = A A^*
    RVector diag;  // source variances, ||row_i(A)||^2

    Eigen::Index n_voxels() const noexcept { return A.rows(); }
};

struct ConnectivityFactor {
    static constexpr double kRowNormTol = 1e-10;

    CMatrix W;  // N_V x N_E, unit-norm rows
    std::string method = "partial";
    double band_lo = 0.0;
    double band_hi = 0.0;
    std::uint64_t leadfield_fingerprint = 0;
    Eigen::Index effective_rank = 0;  // rank of the cross-spectrum used

    Eigen::Index n_voxels() const noexcept { return W.rows(); }
};

/// S_J = T S T^T in factored form A = T Gamma Lambda^{1/2}.
inline ClassicalField classical_field(const InverseOperator& op, const CrossSpectrum& s,
                                      double tol = kDefaultRankTol) {
    detail::require(op.T.cols() == s.dim(), ErrorCode::dimension_mismatch,
                    "inverse operator has " + std::to_string(op.T.cols()) + " electrodes, cross-spectrum has " +
                        std::to_string(s.dim()));
    const EigenDecomposition eig = hermitian_eig(s.matrix, tol);
    detail::require_psd(eig);
    ClassicalField f;
    f.A = op.T.cast<Complex>() * (eig.eigenvectors * eig.eigenvalues.cwiseSqrt().cast<Complex>().asDiagonal());
    f.diag = f.A.rowwise().squaredNorm();
    return f;
}

/// Voxels whose source variance is zero (no coherence defined there).
inline std::vector<Eigen::Index> invisible_voxels(const ClassicalField& f) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < f.diag.size(); ++i)
        if (!(f.diag(i) > 0.0)) out.push_back(i);
    return out;
}

namespace detail {

inline void require_voxel(Eigen::Index v, Eigen::Index n) {
    require(v >= 0 && v < n, ErrorCode::invalid_argument,
            "voxel " + std::to_string(v) + " out of range [0, " + std::to_string(n) + ")");
}

inline void require_positive_variance(const ClassicalField& f, Eigen::Index v) {
    require(f.diag(v) > 0.0, ErrorCode::degenerate,
            "voxel " + std::to_string(v) + " has zero estimated source power; coherence undefined");
}

}  // namespace detail

/// R_kl = S_kl / sqrt(S_kk S_ll).
inline Complex classical_coherence(const ClassicalField& f, Eigen::Index k, Eigen::Index l) {
    detail::require_voxel(k, f.n_voxels());
    detail::require_voxel(l, f.n_voxels());
    detail::require_positive_variance(f, k);
    detail::require_positive_variance(f, l);
    if (k == l) return Complex(1.0, 0.0);
    return f.A.row(l).dot(f.A.row(k)) / std::sqrt(f.diag(k) * f.diag(l));
}

/// Low-rank factor of the whole-cortex partial coherence. A rank-deficient
/// cross-spectrum (e.g. fewer epochs than electrodes) switches to its
/// Moore-Penrose inverse automatically.
inline ConnectivityFactor partial_field(const RMatrix& k, const CrossSpectrum& s, double tol = kDefaultRankTol) {
    detail::require(k.rows() == s.dim(), ErrorCode::dimension_mismatch,
                    "lead field has " + std::to_string(k.rows()) + " electrodes, cross-spectrum has " +
                        std::to_string(s.dim()));
    const EigenDecomposition eig = hermitian_eig(s.matrix, tol);
    const HermitianMatrix u = inv_sqrt_hermitian(eig);

    ConnectivityFactor f;
    f.effective_rank = eig.rank;
    f.W = k.transpose().cast<Complex>() * u.matrix();

    const RVector norms = f.W.rowwise().norm();
    const double largest = norms.maxCoeff();
    for (Eigen::Index v = 0; v < f.W.rows(); ++v) {
        detail::require(norms(v) > 1e-14 * largest && std::isfinite(norms(v)), ErrorCode::degenerate,
                        "voxel " + std::to_string(v) + " is invisible to the measured cross-spectrum (zero row)");
        f.W.row(v) /= norms(v);
    }
    f.band_lo = s.f_lo;
    f.band_hi = s.f_hi;
    f.leadfield_fingerprint = fingerprint(k);
    return f;
}

inline ConnectivityFactor partial_field(const LeadField& lf, const CrossSpectrum& s, double tol = kDefaultRankTol) {
    return partial_field(lf.gain(), s, tol);
}

/// P_kl = row_k(W) . conj(row_l(W)).
inline Complex factor_coherence(const ConnectivityFactor& f, Eigen::Index k, Eigen::Index l) {
    detail::require_voxel(k, f.n_voxels());
    detail::require_voxel(l, f.n_voxels());
    if (k == l) return Complex(1.0, 0.0);
    return f.W.row(l).dot(f.W.row(k));  // Eigen's dot conjugates its first argument
}

/// k_k^T S^+ k_l / sqrt((k_k^T S^+ k_k)(k_l^T S^+ k_l)) from the two lead-field columns alone.
inline Complex pairwise_partial(const RMatrix& k, const CrossSpectrum& s, Eigen::Index a, Eigen::Index b,
                                double tol = kDefaultRankTol) {
    detail::require(k.rows() == s.dim(), ErrorCode::dimension_mismatch, "lead field and cross-spectrum disagree");
    detail::require_voxel(a, k.cols());
    detail::require_voxel(b, k.cols());
    if (a == b) return Complex(1.0, 0.0);
    const CMatrix g = moore_penrose(s.matrix, tol).matrix();
    const CVector ka = k.col(a).cast<Complex>();
    const CVector kb = k.col(b).cast<Complex>();
    const double qaa = ka.dot(g * ka).real();
    const double qbb = kb.dot(g * kb).real();
    detail::require(qaa > 0.0 && qbb > 0.0, ErrorCode::degenerate,
                    "zero partial variance at voxel " + std::to_string(qaa > 0.0 ? b : a));
    return ka.dot(g * kb) / std::sqrt(qaa * qbb);
}

inline Complex pairwise_partial(const LeadField& lf, const CrossSpectrum& s, Eigen::Index a, Eigen::Index b,
                                double tol = kDefaultRankTol) {
    return pairwise_partial(lf.gain(), s, a, b, tol);
}

/// Dense P = W W^*. Refused above kMaxDenseVoxels.
inline CMatrix dense_partial_coherence(const ConnectivityFactor& f) {
    detail::require(f.n_voxels() <= kMaxDenseVoxels, ErrorCode::invalid_argument,
                    "dense partial coherence refused for " + std::to_string(f.n_voxels()) + " voxels");
    CMatrix p = f.W * f.W.adjoint();
    p.diagonal().setOnes();
    return p;
}

struct LaggedValue {
    double value = 0.0;
    bool degenerate = false;  // |Re r| == 1: purely instantaneous, reported as 0
};

/// sqrt(Im(r)^2 / (1 - Re(r)^2)).
inline LaggedValue lagged_measure(Complex r) {
    detail::require(std::abs(r) <= 1.0 + 1e-9, ErrorCode::invalid_argument,
                    "coherence magnitude " + std::to_string(std::abs(r)) + " exceeds 1");
    const double denom = 1.0 - r.real() * r.real();
    if (denom <= 1e-12) return {0.0, true};
    return {std::min(1.0, std::sqrt(r.imag() * r.imag() / denom)), false};
}

struct SeededMap {
    Eigen::Index seed = 0;
    RVector values;
    Measure measure = Measure::partial_coh;
    Eigen::Index degenerate_count = 0;  // lagged entries that saturated
};

namespace detail {

template <typename RowFn>
SeededMap build_map(Eigen::Index n, Eigen::Index seed, Measure measure, RowFn&& coherency) {
    SeededMap m;
    m.seed = seed;
    m.measure = measure;
    m.values.resize(n);
    for (Eigen::Index l = 0; l < n; ++l) {
        const Complex r = l == seed ? Complex(1.0, 0.0) : coherency(l);
        if (is_lagged(measure)) {
            const LaggedValue lv = lagged_measure(r);
            m.values(l) = lv.value;
            if (lv.degenerate && l != seed) ++m.degenerate_count;
        } else {
            m.values(l) = std::min(std::abs(r), 1.0 + 1e-12);
        }
    }
    return m;
}

}  // namespace detail

/// One row of the classical coherence matrix, O(N_V N_E).
inline SeededMap seeded_map(const ClassicalField& f, Eigen::Index seed, Measure measure) {
    detail::require(!is_partial(measure), ErrorCode::invalid_argument,
                    "partial measure requested from a classical field");
    detail::require_voxel(seed, f.n_voxels());
    detail::require_positive_variance(f, seed);
    // entry l is S_J[seed][l]
    const CVector s = (f.A * f.A.row(seed).adjoint()).conjugate();
    return detail::build_map(f.n_voxels(), seed, measure, [&](Eigen::Index l) {
        detail::require_positive_variance(f, l);
        return s(l) / std::sqrt(f.diag(seed) * f.diag(l));
    });
}

/// One row of P = W W^*, O(N_V N_E).
inline SeededMap seeded_map(const ConnectivityFactor& f, Eigen::Index seed, Measure measure) {
    detail::require(is_partial(measure), ErrorCode::invalid_argument,
                    "classical measure requested from a partial factor");
    detail::require_voxel(seed, f.n_voxels());
    // entry l is P[seed][l]
    const CVector p = (f.W * f.W.row(seed).adjoint()).conjugate();
    return detail::build_map(f.n_voxels(), seed, measure, [&](Eigen::Index l) { return p(l); });
}

/// Seeded maps for several seeds; seeds are independent so they are split across threads.
template <typename Source>
std::vector<SeededMap> seeded_maps(const Source& source, const std::vector<Eigen::Index>& seeds, Measure measure,
                                   unsigned threads = 1) {
    std::vector<SeededMap> out(seeds.size());
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(seeds.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) out[i] = seeded_map(source, seeds[i], measure);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < seeds.size(); i += threads) out[i] = seeded_map(source, seeds[i], measure);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct CompositeMap {
    RVector values;
    Measure measure = Measure::partial_coh;
    std::vector<Eigen::Index> seeds;
};

/// Per-voxel maximum over the maps, with each map's own seed entry excluded.
inline CompositeMap max_over_seeds(const std::vector<SeededMap>& maps) {
    detail::require(!maps.empty(), ErrorCode::empty_input, "no seeded maps to combine");
    CompositeMap c;
    c.measure = maps.front().measure;
    const Eigen::Index n = maps.front().values.size();
    c.values = RVector::Zero(n);
    for (const SeededMap& m : maps) {
        detail::require(m.measure == c.measure, ErrorCode::invalid_argument,
                        "cannot combine " + to_string(m.measure) + " with " + to_string(c.measure));
        detail::require(m.values.size() == n, ErrorCode::dimension_mismatch, "seeded maps differ in voxel count");
        for (Eigen::Index v = 0; v < n; ++v) {
            if (v != m.seed) c.values(v) = std::max(c.values(v), m.values(v));
        }
        c.seeds.push_back(m.seed);
    }
    return c;
}

struct ReflexiveResiduals {
    double sgs = 0.0;  // ||S_J G S_J - S_J||_F / ||S_J||_F
    double gsg = 0.0;  // ||G S_J G - G||_F / ||G||_F
    bool passes = false;
};

/// Checks that G = K^T S^+ K is a reflexive g-inverse of S_J = T S T^T.
///
/// Both products collapse onto N_E x N_E cores: S_J G S_J = T X T^T and
/// G S_J G = K^T Y K. The Frobenius norm of T X T^T is evaluated through the
/// Gram matrix C = T^T T as tr(C X C X^*), so nothing N_V x N_V is formed.
inline ReflexiveResiduals reflexive_residuals(const RMatrix& k, const CrossSpectrum& s, const InverseOperator& op,
                                              double tol = 1e-8, double rank_tol = kDefaultRankTol) {
    detail::require(op.T.rows() == k.cols() && op.T.cols() == k.rows() && s.dim() == k.rows(),
                    ErrorCode::dimension_mismatch, "inverse operator, lead field and cross-spectrum do not conform");
    const CMatrix sm = s.matrix.matrix();
    const CMatrix sp = moore_penrose(s.matrix, rank_tol).matrix();
    const CMatrix kt = (k * op.T).cast<Complex>();  // identity up to rounding
    const CMatrix ct = (op.T.transpose() * op.T).cast<Complex>();
    const CMatrix ck = (k * k.transpose()).cast<Complex>();

    auto sandwich_norm = [](const CMatrix& gram, const CMatrix& core) {
        return std::sqrt(std::max(0.0, (gram * core * gram * core.adjoint()).trace().real()));
    };

    // S_J G S_J = T [S (KT)^T S^+ (KT) S] T^T
    const CMatrix x = sm * kt.transpose() * sp * kt * sm;
    // G S_J G = K^T [S^+ (KT) S (KT)^T S^+] K
    const CMatrix y = sp * kt * sm * kt.transpose() * sp;

    ReflexiveResiduals r;
    const double sj_norm = sandwich_norm(ct, sm);
    const double g_norm = sandwich_norm(ck, sp);
    r.sgs = detail::relative_residual(sandwich_norm(ct, x - sm), sj_norm);
    r.gsg = detail::relative_residual(sandwich_norm(ck, y - sp), g_norm);
    r.passes = r.sgs <= tol && r.gsg <= tol;
    return r;
}

struct ResolutionReport {
    double mgm = 0.0;  // ||M G M - M||_F / ||M||_F with M = H S_J H
    double gmg = 0.0;  // ||G M G - G||_F / ||G||_F with G = K^T (K S_J K^T)^{-1} K
    bool passes = false;
};

inline constexpr Eigen::Index kMaxResolutionVoxels = 500;

/// Verifies that the inverse source covariance estimator is a reflexive
/// g-inverse of the true covariance as seen through the resolution matrix H.
inline ResolutionReport resolution_check(const RMatrix& k, const HermitianMatrix& sj_true, double tol = 1e-8) {
    detail::require(sj_true.dim() == k.cols(), ErrorCode::dimension_mismatch,
                    "true source covariance does not match the voxel count");
    detail::require(k.cols() <= kMaxResolutionVoxels, ErrorCode::invalid_argument,
                    "resolution check is dense; limited to " + std::to_string(kMaxResolutionVoxels) + " voxels");
    const CMatrix kc = k.cast<Complex>();
    const CMatrix sphi = kc * sj_true.matrix() * kc.transpose();
    Eigen::LLT<CMatrix> llt(sphi);
    detail::require(llt.info() == Eigen::Success, ErrorCode::rank_deficient, "K S_J K^T is singular");
    const CMatrix g = kc.transpose() * llt.solve(kc);
    const CMatrix h = resolution_matrix(k).cast<Complex>();
    const CMatrix m = h * sj_true.matrix() * h;
    const ReflexiveCheck c = is_reflexive_ginverse(m, g, tol);
    return {c.aga_residual, c.gag_residual, c.reflexive};
}

struct DominantComponent {
    CVector weights;  // unit-norm leading left singular vector of W (one entry per voxel)
    double singular_value = 0.0;
};

/// Leading left singular pair of W via the N_E x N_E matrix W^* W.
inline DominantComponent dominant_component(const CMatrix& w) {
    detail::require(w.size() > 0, ErrorCode::empty_input, "empty factor");
    const EigenDecomposition eig = hermitian_eig(HermitianMatrix::symmetrized(w.adjoint() * w), 0.0);
    DominantComponent d;
    d.singular_value = std::sqrt(std::max(0.0, eig.eigenvalues(0)));
    d.weights = w * eig.eigenvectors.col(0);
    const double n = d.weights.norm();
    if (n > 0.0) d.weights /= n;
    return d;
}

inline DominantComponent dominant_component(const ConnectivityFactor& f) { return dominant_component(f.W); }

namespace io {

inline std::string factor_manifest_csv(const ConnectivityFactor& f) {
    std::string out = "key,value\n";
    out += "method," + f.method + "\n";
    out += "band_lo," + format_double(f.band_lo) + "\n";
    out += "band_hi," + format_double(f.band_hi) + "\n";
    out += "fingerprint," + std::to_string(f.leadfield_fingerprint) + "\n";
    out += "effective_rank," + std::to_string(f.effective_rank) + "\n";
    return out;
}

/// `factor.pcf` plus `factor.manifest.csv`.
inline void save_factor(const ConnectivityFactor& f, const std::filesystem::path& path) {
    write_pcf(path, f.W);
    write_text(std::filesystem::path(path).replace_extension(".manifest.csv"), factor_manifest_csv(f));
}

inline ConnectivityFactor load_factor(const std::filesystem::path& path) {
    ConnectivityFactor f;
    f.W = read_pcf_complex(path);
    const auto mpath = std::filesystem::path(path).replace_extension(".manifest.csv");
    const CsvTable t = read_csv(mpath);
    expect_header(t, {"key", "value"}, mpath.string());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& key = t.rows[r][0];
        const std::string& val = t.rows[r][1];
        const std::string where = mpath.string() + ":" + std::to_string(t.line_numbers[r]);
        if (key == "method") f.method = val;
        else if (key == "band_lo") f.band_lo = parse_double(val, where);
        else if (key == "band_hi") f.band_hi = parse_double(val, where);
        else if (key == "fingerprint") f.leadfield_fingerprint = std::stoull(val);
        else if (key == "effective_rank") f.effective_rank = parse_int(val, where);
    }
    const RVector norms = f.W.rowwise().norm();
    for (Eigen::Index v = 0; v < norms.size(); ++v) {
        pcf::detail::require(std::abs(norms(v) - 1.0) <= ConnectivityFactor::kRowNormTol, ErrorCode::format,
                             path.string() + ": row " + std::to_string(v) + " is not unit norm");
    }
    return f;
}

/// `voxel_id,x,y,z,value`.
inline std::string map_csv(const VoxelGrid& grid, const RVector& values) {
    pcf::detail::require(static_cast<std::size_t>(values.size()) == grid.size(), ErrorCode::dimension_mismatch,
                         "map and grid differ in voxel count");
    std::string out = "voxel_id,x,y,z,value\n";
    for (std::size_t v = 0; v < grid.size(); ++v) {
        const Vec3& p = grid.positions[v];
        out += std::to_string(v) + "," + format_double(p.x()) + "," + format_double(p.y()) + "," +
               format_double(p.z()) + "," + format_double(values(static_cast<Eigen::Index>(v))) + "\n";
    }
    return out;
}

struct MapTable {
    std::vector<Vec3> positions;
    RVector values;
};

inline MapTable parse_map(const CsvTable& t, const std::string& name) {
    expect_header(t, {"voxel_id", "x", "y", "z", "value"}, name);
    MapTable m;
    m.values.resize(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = name + ":" + std::to_string(t.line_numbers[r]);
        pcf::detail::require(parse_int(t.rows[r][0], where) == static_cast<long long>(r), ErrorCode::format,
                             where + ": voxel ids must be 0..N-1 in order");
        m.positions.emplace_back(parse_double(t.rows[r][1], where), parse_double(t.rows[r][2], where),
                                 parse_double(t.rows[r][3], where));
        m.values(static_cast<Eigen::Index>(r)) = parse_double(t.rows[r][4], where);
    }
    return m;
}

}  // namespace io
}  // namespace pcf
