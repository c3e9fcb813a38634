#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pcf {

using Complex = std::complex<double>;
using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using Vec3 = Eigen::Vector3d;

/// Eigenvalues at or below this fraction of the largest magnitude count as zero.
inline constexpr double kDefaultRankTol = 1e-10;

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    empty_input,
    not_hermitian,
    not_psd,
    rank_deficient,
    degenerate,
    format,
    missing_input,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) {
        throw Error(code, what);
    }
}

inline std::string dims(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail
}  // namespace pcf
