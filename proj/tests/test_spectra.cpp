#include <gtest/gtest.h>

#include <numbers>

#include "test_support.hpp"

using namespace pcf;
using pcf::testing::Gen;
using pcf::testing::naive_dft;

namespace {

constexpr double kPi = std::numbers::pi;

// channel c of every epoch holds f(epoch, t, c)
template <typename F>
EpochedRecording make_recording(Eigen::Index ns, Eigen::Index nt, Eigen::Index ne, double rate, F f) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(ns * nt * ne));
    for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index t = 0; t < nt; ++t)
            for (Eigen::Index c = 0; c < ne; ++c) data.push_back(f(i, t, c));
    return EpochedRecording(ns, nt, ne, rate, std::move(data));
}

RVector series(const std::vector<double>& x) { return Eigen::Map<const RVector>(x.data(), static_cast<Eigen::Index>(x.size())); }

}  // namespace

TEST(Dft, ConstantSignalDc) {
    const std::vector<double> x(64, 0.7);
    const CVector f = dft_epoch(series(x), 0);
    EXPECT_NEAR(f(0).real(), 64 * 0.7, 1e-12);
    EXPECT_NEAR(f(0).imag(), 0.0, 1e-12);
    for (int k = 1; k < 64; ++k) EXPECT_LT(std::abs(dft_epoch(series(x), k)(0)), 1e-12);
}

TEST(Dft, CosineAndSineAtBin) {
    const int n = 64;
    for (int k : {1, 5, 8, 31}) {
        std::vector<double> c(n), s(n);
        for (int t = 0; t < n; ++t) {
            c[static_cast<std::size_t>(t)] = std::cos(2 * kPi * k * t / n);
            s[static_cast<std::size_t>(t)] = std::sin(2 * kPi * k * t / n);
        }
        const Complex fc = dft_epoch(series(c), k)(0);
        const Complex fs = dft_epoch(series(s), k)(0);
        EXPECT_NEAR(fc.real(), n / 2.0, 1e-10);
        EXPECT_NEAR(fc.imag(), 0.0, 1e-10);
        EXPECT_NEAR(fs.real(), 0.0, 1e-10);
        EXPECT_NEAR(fs.imag(), -n / 2.0, 1e-10);
    }
}

TEST(Dft, AgreesWithNaiveTransform) {
    Gen g(5);
    for (int n : {2, 7, 64, 100}) {
        std::vector<double> x(static_cast<std::size_t>(n));
        for (double& v : x) v = g.normal();
        for (int k = 0; k < n; ++k) {
            const Complex a = dft_epoch(series(x), k)(0);
            const Complex b = naive_dft(x, k);
            EXPECT_LT(std::abs(a - b), 1e-9 * std::max(1.0, std::abs(b))) << "n=" << n << " k=" << k;
        }
    }
}

TEST(Dft, Parseval) {
    Gen g(6);
    const int n = 50;
    std::vector<double> x(n);
    for (double& v : x) v = g.normal();
    double time = 0.0, freq = 0.0;
    for (double v : x) time += v * v;
    for (int k = 0; k < n; ++k) freq += std::norm(dft_epoch(series(x), k)(0));
    EXPECT_NEAR(freq / n, time, 1e-9 * time);
}

TEST(Dft, BinOutOfRange) {
    const std::vector<double> x(8, 1.0);
    EXPECT_THROW(dft_epoch(series(x), 8), Error);
    EXPECT_THROW(dft_epoch(series(x), -1), Error);
}

TEST(Recording, ShapeValidation) {
    EXPECT_THROW(EpochedRecording(1, 1, 1, 64, {1.0}), Error);
    EXPECT_THROW(EpochedRecording(1, 4, 1, 64, {1, 2, 3}), Error);
    EXPECT_THROW(EpochedRecording(1, 2, 1, 64, {1, std::nan("")}), Error);
    EXPECT_THROW(EpochedRecording(1, 2, 1, 0.0, {1, 2}), Error);
}

TEST(CrossSpectrum, SingleEpochCosine) {
    const auto rec = make_recording(1, 64, 1, 64, [](auto, auto t, auto) { return std::cos(2 * kPi * 8 * t / 64.0); });
    const CrossSpectrum s = cross_spectrum(rec, 8);
    EXPECT_NEAR(s.matrix(0, 0).real(), 1024.0, 1e-9);
    EXPECT_DOUBLE_EQ(s.f_lo, 8.0);
    EXPECT_EQ(s.n_epochs, 1);
}

TEST(CrossSpectrum, IdenticalChannelsFullyCoherent) {
    Gen g(7);
    std::vector<double> base(20 * 32);
    for (double& v : base) v = g.normal();
    const auto rec = make_recording(20, 32, 2, 32, [&](auto i, auto t, auto) { return base[static_cast<std::size_t>(i * 32 + t)]; });
    const CrossSpectrum s = cross_spectrum(rec, 5);
    const Complex c = channel_coherency(s, 0, 1);
    EXPECT_NEAR(c.real(), 1.0, 1e-12);
    EXPECT_NEAR(c.imag(), 0.0, 1e-12);
}

TEST(CrossSpectrum, IndependentNoiseIsIncoherent) {
    Gen g(8);
    const auto rec = make_recording(1000, 16, 2, 16, [&](auto, auto, auto) { return g.normal(); });
    EXPECT_LE(std::abs(channel_coherency(cross_spectrum(rec, 3), 0, 1)), 0.12);
}

TEST(CrossSpectrum, HermitianPsdAndMatchesOuterProducts) {
    Gen g(9);
    const auto rec = make_recording(6, 20, 4, 20, [&](auto, auto, auto) { return g.normal(); });
    const CrossSpectrum s = cross_spectrum(rec, 4);
    CMatrix ref = CMatrix::Zero(4, 4);
    for (Eigen::Index i = 0; i < 6; ++i) {
        CVector phi(4);
        for (Eigen::Index c = 0; c < 4; ++c) {
            std::vector<double> x(20);
            for (Eigen::Index t = 0; t < 20; ++t) x[static_cast<std::size_t>(t)] = rec.at(i, t, c);
            phi(c) = naive_dft(x, 4);
        }
        ref += phi * phi.adjoint();
    }
    ref /= 6.0;
    EXPECT_LT(pcf::testing::rel_fro(s.matrix.matrix(), ref), 1e-10);
    EXPECT_GE(hermitian_eig(s.matrix).eigenvalues.minCoeff(), -1e-9 * s.matrix.matrix().norm());
}

TEST(Band, AlphaBinsAtUnitResolution) {
    const auto bins = band_bins(64, 64.0, 8.0, 12.0);
    EXPECT_EQ(bins, (std::vector<Eigen::Index>{8, 9, 10, 11, 12}));
}

TEST(Band, EdgesExcludedUnlessAsked) {
    EXPECT_EQ(band_bins(8, 8.0, 0.0, 4.0), (std::vector<Eigen::Index>{1, 2, 3}));
    EXPECT_EQ(band_bins(8, 8.0, 0.0, 4.0, true), (std::vector<Eigen::Index>{0, 1, 2, 3, 4}));
}

TEST(Band, SingleBinMatchesCrossSpectrum) {
    Gen g(10);
    const auto rec = make_recording(5, 64, 3, 64, [&](auto, auto, auto) { return g.normal(); });
    const CrossSpectrum a = band_cross_spectrum(rec, 10.0, 10.0);
    const CrossSpectrum b = cross_spectrum(rec, 10);
    EXPECT_EQ((a.matrix.matrix() - b.matrix.matrix()).norm(), 0.0);
}

TEST(Band, MeanOfBins) {
    Gen g(11);
    const auto rec = make_recording(4, 64, 2, 64, [&](auto, auto, auto) { return g.normal(); });
    CMatrix mean = CMatrix::Zero(2, 2);
    for (int b = 8; b <= 12; ++b) mean += cross_spectrum(rec, b).matrix.matrix();
    mean /= 5.0;
    const CrossSpectrum s = band_cross_spectrum(rec, 8, 12);
    EXPECT_LT(pcf::testing::rel_fro(s.matrix.matrix(), mean), 1e-12);
    EXPECT_DOUBLE_EQ(s.f_lo, 8.0);
    EXPECT_DOUBLE_EQ(s.f_hi, 12.0);
}

TEST(Band, EmptyBandRejected) {
    const auto rec = make_recording(1, 64, 1, 64, [](auto, auto, auto) { return 1.0; });
    EXPECT_THROW(band_cross_spectrum(rec, 8.2, 8.8), Error);
    EXPECT_THROW(band_cross_spectrum(rec, 12, 8), Error);
}

TEST(EpochCsv, RoundTrip) {
    Gen g(12);
    const auto rec = make_recording(3, 5, 2, 128, [&](auto, auto, auto) { return g.normal(); });
    const std::string text = io::epochs_csv(rec);
    EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,t,ch1,ch2");
    const EpochedRecording back = io::parse_epochs(io::parse_csv(text, "e"), 128, "e");
    EXPECT_EQ(back.n_epochs(), 3);
    EXPECT_EQ(back.n_samples(), 5);
    EXPECT_EQ(back.data(), rec.data());
}

TEST(EpochCsv, MisorderedRowsRejected) {
    EXPECT_THROW(io::parse_epochs(io::parse_csv("epoch,t,a\n0,0,1\n0,1,2\n1,1,3\n1,0,4\n", "e"), 1, "e"), Error);
    EXPECT_THROW(io::parse_epochs(io::parse_csv("epoch,t,a\n0,0,1\n0,1,2\n1,0,3\n", "e"), 1, "e"), Error);
}
