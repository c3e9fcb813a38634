#pragma once

// Epoched recordings, the DFT and Hermitian cross-spectra.

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "pcf/core.hpp"
#include "pcf/io.hpp"
#include "pcf/matcore.hpp"

namespace pcf {

/// Real samples indexed (epoch, sample, channel), stored epoch-major.
class EpochedRecording {
public:
    using EpochView = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    EpochedRecording(Eigen::Index n_epochs, Eigen::Index n_samples, Eigen::Index n_channels, double rate,
                     std::vector<double> data, std::vector<std::string> channel_labels = {})
        : n_epochs_(n_epochs), n_samples_(n_samples), n_channels_(n_channels), rate_(rate), data_(std::move(data)),
          labels_(std::move(channel_labels)) {
        detail::require(n_epochs_ >= 1 && n_samples_ >= 2 && n_channels_ >= 1, ErrorCode::invalid_argument,
                        "recording needs >= 1 epoch, >= 2 samples and >= 1 channel");
        detail::require(rate_ > 0.0 && std::isfinite(rate_), ErrorCode::invalid_argument, "sampling rate must be positive");
        detail::require(data_.size() == static_cast<std::size_t>(n_epochs_ * n_samples_ * n_channels_),
                        ErrorCode::dimension_mismatch, "recording data size does not match its shape");
        for (double v : data_) {
            detail::require(std::isfinite(v), ErrorCode::invalid_argument, "recording contains non-finite samples");
        }
        if (labels_.empty()) {
            for (Eigen::Index e = 0; e < n_channels_; ++e) labels_.push_back("ch" + std::to_string(e + 1));
        }
        detail::require(labels_.size() == static_cast<std::size_t>(n_channels_), ErrorCode::dimension_mismatch,
                        "channel label count does not match channel count");
    }

    Eigen::Index n_epochs() const noexcept { return n_epochs_; }
    Eigen::Index n_samples() const noexcept { return n_samples_; }
    Eigen::Index n_channels() const noexcept { return n_channels_; }
    double rate() const noexcept { return rate_; }
    const std::vector<double>& data() const noexcept { return data_; }
    const std::vector<std::string>& channel_labels() const noexcept { return labels_; }

    double at(Eigen::Index epoch, Eigen::Index t, Eigen::Index ch) const {
        return data_[static_cast<std::size_t>((epoch * n_samples_ + t) * n_channels_ + ch)];
    }

    /// N_T x N_E view of one epoch.
    EpochView epoch(Eigen::Index i) const {
        return EpochView(data_.data() + i * n_samples_ * n_channels_, n_samples_, n_channels_);
    }

private:
    Eigen::Index n_epochs_;
    Eigen::Index n_samples_;
    Eigen::Index n_channels_;
    double rate_;
    std::vector<double> data_;
    std::vector<std::string> labels_;
};

/// Unnormalized forward DFT of each column at one bin:
/// X[e] = sum_t x[t][e] exp(-i 2 pi bin t / N_T), t = 0..N_T-1.
template <typename Derived>
CVector dft_epoch(const Eigen::MatrixBase<Derived>& epoch, Eigen::Index bin) {
    const Eigen::Index n = epoch.rows();
    detail::require(bin >= 0 && bin < n, ErrorCode::invalid_argument,
                    "DFT bin " + std::to_string(bin) + " outside [0, " + std::to_string(n) + ")");
    CVector twiddle(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        // reduce bin*t mod n first so the angle stays small and exact multiples give exact values
        const double angle = -2.0 * std::numbers::pi * static_cast<double>((bin * t) % n) / static_cast<double>(n);
        twiddle(t) = Complex(std::cos(angle), std::sin(angle));
    }
    return epoch.transpose().template cast<Complex>() * twiddle;
}

struct CrossSpectrum {
    HermitianMatrix matrix;
    double f_lo = 0.0;  // Hz, first bin used
    double f_hi = 0.0;  // Hz, last bin used
    std::vector<Eigen::Index> bins;
    Eigen::Index n_epochs = 0;

    Eigen::Index dim() const noexcept { return matrix.dim(); }
};

namespace detail {

inline CMatrix accumulate_bins(const EpochedRecording& rec, const std::vector<Eigen::Index>& bins) {
    const Eigen::Index ne = rec.n_channels();
    CMatrix total = CMatrix::Zero(ne, ne);
    for (Eigen::Index b : bins) {
        CMatrix s = CMatrix::Zero(ne, ne);
        // epochs summed in index order
        for (Eigen::Index i = 0; i < rec.n_epochs(); ++i) {
            const CVector phi = dft_epoch(rec.epoch(i), b);
            s.noalias() += phi * phi.adjoint();
        }
        total += s / static_cast<double>(rec.n_epochs());
    }
    return total / static_cast<double>(bins.size());
}

}  // namespace detail

/// S = (1/N_S) sum_i Phi_i Phi_i^* at one DFT bin.
inline CrossSpectrum cross_spectrum(const EpochedRecording& rec, Eigen::Index bin) {
    detail::require(bin >= 0 && bin < rec.n_samples(), ErrorCode::invalid_argument,
                    "DFT bin " + std::to_string(bin) + " out of range");
    CrossSpectrum out;
    out.bins = {bin};
    out.matrix = HermitianMatrix::symmetrized(detail::accumulate_bins(rec, out.bins));
    out.f_lo = out.f_hi = static_cast<double>(bin) * rec.rate() / static_cast<double>(rec.n_samples());
    out.n_epochs = rec.n_epochs();
    return out;
}

/// DFT bins with f_lo <= bin * rate / N_T <= f_hi. DC and Nyquist only when asked.
inline std::vector<Eigen::Index> band_bins(Eigen::Index n_samples, double rate, double f_lo, double f_hi,
                                           bool include_edges = false) {
    std::vector<Eigen::Index> bins;
    const double df = rate / static_cast<double>(n_samples);
    for (Eigen::Index b = 0; b <= n_samples / 2; ++b) {
        const bool edge = b == 0 || 2 * b == n_samples;
        if (edge && !include_edges) continue;
        const double f = static_cast<double>(b) * df;
        if (f >= f_lo && f <= f_hi) bins.push_back(b);
    }
    return bins;
}

/// Arithmetic mean of the per-bin cross-spectra over the band.
inline CrossSpectrum band_cross_spectrum(const EpochedRecording& rec, double f_lo, double f_hi,
                                         bool include_edges = false) {
    detail::require(f_lo <= f_hi, ErrorCode::invalid_argument, "band lower edge exceeds upper edge");
    CrossSpectrum out;
    out.bins = band_bins(rec.n_samples(), rec.rate(), f_lo, f_hi, include_edges);
    detail::require(!out.bins.empty(), ErrorCode::invalid_argument,
                    "band " + io::format_double(f_lo) + ":" + io::format_double(f_hi) + " Hz contains no DFT bin");
    out.matrix = HermitianMatrix::symmetrized(detail::accumulate_bins(rec, out.bins));
    const double df = rec.rate() / static_cast<double>(rec.n_samples());
    out.f_lo = static_cast<double>(out.bins.front()) * df;
    out.f_hi = static_cast<double>(out.bins.back()) * df;
    out.n_epochs = rec.n_epochs();
    return out;
}

/// Complex coherency S_kl / sqrt(S_kk S_ll) between two channels.
inline Complex channel_coherency(const CrossSpectrum& s, Eigen::Index k, Eigen::Index l) {
    const double d = std::sqrt(s.matrix(k, k).real() * s.matrix(l, l).real());
    detail::require(d > 0.0, ErrorCode::degenerate, "channel with zero power");
    return s.matrix(k, l) / d;
}

namespace io {

/// Header `epoch,t,<labels...>`, rows sorted by (epoch, t), both 0-based.
inline std::string epochs_csv(const EpochedRecording& rec) {
    std::string out = "epoch,t";
    for (const auto& l : rec.channel_labels()) out += "," + l;
    out += "\n";
    for (Eigen::Index i = 0; i < rec.n_epochs(); ++i) {
        for (Eigen::Index t = 0; t < rec.n_samples(); ++t) {
            out += std::to_string(i) + "," + std::to_string(t);
            for (Eigen::Index e = 0; e < rec.n_channels(); ++e) out += "," + format_double(rec.at(i, t, e));
            out += "\n";
        }
    }
    return out;
}

inline EpochedRecording parse_epochs(const CsvTable& t, double rate, const std::string& name) {
    pcf::detail::require(t.header.size() >= 3 && t.header[0] == "epoch" && t.header[1] == "t", ErrorCode::format,
                         name + ": header must be epoch,t,<channels...>");
    pcf::detail::require(!t.rows.empty(), ErrorCode::empty_input, name + ": no samples");
    const std::vector<std::string> labels(t.header.begin() + 2, t.header.end());
    const auto ne = static_cast<Eigen::Index>(labels.size());

    // Validate ordering: epochs 0..N_S-1, each with samples 0..N_T-1.
    long long n_samples = 0;
    while (static_cast<std::size_t>(n_samples) < t.rows.size() &&
           parse_int(t.rows[static_cast<std::size_t>(n_samples)][0], name) == 0)
        ++n_samples;
    pcf::detail::require(n_samples > 0 && t.rows.size() % static_cast<std::size_t>(n_samples) == 0, ErrorCode::format,
                         name + ": epochs have unequal lengths");
    const long long n_epochs = static_cast<long long>(t.rows.size()) / n_samples;

    std::vector<double> data;
    data.reserve(t.rows.size() * labels.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = name + ":" + std::to_string(t.line_numbers[r]);
        const long long ep = parse_int(t.rows[r][0], where);
        const long long ts = parse_int(t.rows[r][1], where);
        pcf::detail::require(ep == static_cast<long long>(r) / n_samples && ts == static_cast<long long>(r) % n_samples,
                             ErrorCode::format, where + ": rows must be sorted by (epoch, t) with equal epoch lengths");
        for (Eigen::Index e = 0; e < ne; ++e) data.push_back(parse_double(t.rows[r][static_cast<std::size_t>(e) + 2], where));
    }
    return EpochedRecording(n_epochs, n_samples, ne, rate, std::move(data), labels);
}

}  // namespace io
}  // namespace pcf
