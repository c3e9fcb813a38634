#pragma once

// Two lag-coupled cortical point sources under three layers of uniform noise:
//   x_t = e_x,t            (source under Fp1)
//   y_t = a x_{t-1} + e_y,t (source under O2)
// plus uniform noise at randomly placed cortical voxels and at every electrode.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pcf/confield.hpp"
#include "pcf/core.hpp"
#include "pcf/forward.hpp"
#include "pcf/io.hpp"
#include "pcf/spectra.hpp"

namespace pcf::sim {

/// splitmix64 finalizer; used to derive independent substream seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Portable uniform source: std::mt19937_64 (sequence fixed by the standard)
/// with hand-rolled conversions, since std:: distributions vary by library.
///
/// Substream s of master seed m is seeded with splitmix64(m ^ splitmix64(s)).
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

    /// Strictly inside (0, 1), 53-bit resolution.
    double unit() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53; }

    /// Strictly inside (-bound, +bound); exactly 0 when bound is 0.
    double symmetric(double bound) { return bound * (2.0 * unit() - 1.0); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection keeps the result unbiased
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = 0;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

enum Stream : std::uint64_t {
    kSourceStream = 1,
    kBioPlacementStream = 2,
    kBioAmplitudeStream = 3,
    kSensorStream = 4,
};

struct SimulationConfig {
    Eigen::Index n_epochs = 100;
    Eigen::Index n_samples = 64;
    double rate = 64.0;
    double source_amp = 0.15;
    double bio_noise_amp = 0.05;
    Eigen::Index bio_noise_count = 57;
    double sensor_noise_amp = 0.05;
    double ar_coefficient = 0.5;
    std::uint64_t seed = 1;
    std::string source_electrode_x = "Fp1";
    std::string source_electrode_y = "O2";
    std::optional<std::array<Eigen::Index, 2>> source_voxels;  // overrides the electrode mapping

    void validate() const {
        detail::require(n_epochs >= 1 && n_samples >= 2 && rate > 0.0, ErrorCode::invalid_argument,
                        "simulation needs n_epochs >= 1, n_samples >= 2 and rate > 0");
        detail::require(source_amp >= 0.0 && bio_noise_amp >= 0.0 && sensor_noise_amp >= 0.0, ErrorCode::invalid_argument,
                        "noise bounds must be nonnegative");
        detail::require(bio_noise_count >= 0, ErrorCode::invalid_argument, "bio_noise_count must be nonnegative");
        detail::require(std::isfinite(ar_coefficient), ErrorCode::invalid_argument, "ar_coefficient must be finite");
    }
};

/// Flat `key = value` text; `#` starts a comment. Errors carry line numbers.
inline SimulationConfig parse_config(const std::string& text, const std::string& name = "config") {
    SimulationConfig cfg;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        detail::require(eq != std::string::npos, ErrorCode::format, where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto as_int = [&] { return static_cast<Eigen::Index>(io::parse_int(val, where)); };
        auto as_double = [&] { return io::parse_double(val, where); };
        if (key == "n_epochs") cfg.n_epochs = as_int();
        else if (key == "n_samples") cfg.n_samples = as_int();
        else if (key == "rate") cfg.rate = as_double();
        else if (key == "source_amp") cfg.source_amp = as_double();
        else if (key == "bio_noise_amp") cfg.bio_noise_amp = as_double();
        else if (key == "bio_noise_count") cfg.bio_noise_count = as_int();
        else if (key == "sensor_noise_amp") cfg.sensor_noise_amp = as_double();
        else if (key == "ar_coefficient") cfg.ar_coefficient = as_double();
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(io::parse_int(val, where));
        else if (key == "source_electrodes") {
            const auto parts = io::split_csv_line(val);
            detail::require(parts.size() == 2, ErrorCode::format, where + ": source_electrodes needs two labels");
            cfg.source_electrode_x = parts[0];
            cfg.source_electrode_y = parts[1];
        } else if (key == "source_voxels") {
            const auto parts = io::split_csv_line(val);
            detail::require(parts.size() == 2, ErrorCode::format, where + ": source_voxels needs two ids");
            cfg.source_voxels = std::array<Eigen::Index, 2>{static_cast<Eigen::Index>(io::parse_int(parts[0], where)),
                                                            static_cast<Eigen::Index>(io::parse_int(parts[1], where))};
        } else {
            throw Error(ErrorCode::format, where + ": unknown key '" + key + "'");
        }
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::format, name + ": " + e.what());
    }
    return cfg;
}

inline std::string config_text(const SimulationConfig& cfg) {
    std::string out;
    out += "n_epochs = " + std::to_string(cfg.n_epochs) + "\n";
    out += "n_samples = " + std::to_string(cfg.n_samples) + "\n";
    out += "rate = " + io::format_double(cfg.rate) + "\n";
    out += "source_amp = " + io::format_double(cfg.source_amp) + "\n";
    out += "bio_noise_amp = " + io::format_double(cfg.bio_noise_amp) + "\n";
    out += "bio_noise_count = " + std::to_string(cfg.bio_noise_count) + "\n";
    out += "sensor_noise_amp = " + io::format_double(cfg.sensor_noise_amp) + "\n";
    out += "ar_coefficient = " + io::format_double(cfg.ar_coefficient) + "\n";
    out += "seed = " + std::to_string(cfg.seed) + "\n";
    if (cfg.source_voxels) {
        out += "source_voxels = " + std::to_string((*cfg.source_voxels)[0]) + "," +
               std::to_string((*cfg.source_voxels)[1]) + "\n";
    } else {
        out += "source_electrodes = " + cfg.source_electrode_x + "," + cfg.source_electrode_y + "\n";
    }
    return out;
}

struct SourceSeries {
    std::vector<double> x;
    std::vector<double> y;
};

/// One (x, y) pair per epoch; x history is zero at each epoch start.
inline std::vector<SourceSeries> gen_sources(const SimulationConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<SourceSeries> out(static_cast<std::size_t>(cfg.n_epochs));
    for (auto& ep : out) {
        ep.x.resize(static_cast<std::size_t>(cfg.n_samples));
        ep.y.resize(static_cast<std::size_t>(cfg.n_samples));
        double x_prev = 0.0;
        for (std::size_t t = 0; t < ep.x.size(); ++t) {
            ep.x[t] = rng.symmetric(cfg.source_amp);
            ep.y[t] = cfg.ar_coefficient * x_prev + rng.symmetric(cfg.source_amp);
            x_prev = ep.x[t];
        }
    }
    return out;
}

struct GroundTruth {
    std::array<Eigen::Index, 2> source_voxels{};
    std::vector<Eigen::Index> bio_voxels;
    std::vector<SourceSeries> sources;
    // mean squared scalp contribution per sample and electrode of each layer
    double source_power = 0.0;
    double bio_power = 0.0;
    double sensor_power = 0.0;

    double snr_db() const {
        const double noise = bio_power + sensor_power;
        return noise > 0.0 ? 10.0 * std::log10(source_power / noise) : std::numeric_limits<double>::infinity();
    }
};

inline std::array<Eigen::Index, 2> resolve_source_voxels(const SimulationConfig& cfg, const LeadField& lf) {
    if (cfg.source_voxels) {
        const auto v = *cfg.source_voxels;
        for (Eigen::Index id : v) {
            detail::require(id >= 0 && id < lf.n_voxels(), ErrorCode::invalid_argument,
                            "source voxel " + std::to_string(id) + " is not on the grid");
        }
        detail::require(v[0] != v[1], ErrorCode::invalid_argument, "source voxels must be distinct");
        return v;
    }
    std::array<Eigen::Index, 2> v{};
    const std::array<std::string, 2> labels{cfg.source_electrode_x, cfg.source_electrode_y};
    for (std::size_t i = 0; i < 2; ++i) {
        const int e = lf.electrodes().find(labels[i]);
        detail::require(e >= 0, ErrorCode::invalid_argument, "lead field has no electrode '" + labels[i] + "'");
        v[i] = voxel_under_electrode(lf, e);
    }
    detail::require(v[0] != v[1], ErrorCode::invalid_argument, "both source electrodes map to the same voxel");
    return v;
}

struct Simulation {
    EpochedRecording recording;
    GroundTruth truth;
};

/// Phi = K J + sensor noise, J holding the two sources and the bio-noise voxels.
inline Simulation simulate_eeg(const SimulationConfig& cfg, const LeadField& lf) {
    cfg.validate();
    const Eigen::Index nv = lf.n_voxels();
    const Eigen::Index ne = lf.n_electrodes();
    detail::require(cfg.bio_noise_count + 2 <= nv, ErrorCode::invalid_argument,
                    "grid has " + std::to_string(nv) + " voxels, too few for " + std::to_string(cfg.bio_noise_count) +
                        " noise voxels plus 2 sources");

    GroundTruth truth;
    truth.source_voxels = resolve_source_voxels(cfg, lf);

    // Partial Fisher-Yates over the non-source voxels.
    {
        Rng placement(cfg.seed, kBioPlacementStream);
        std::vector<Eigen::Index> pool;
        pool.reserve(static_cast<std::size_t>(nv));
        for (Eigen::Index v = 0; v < nv; ++v)
            if (v != truth.source_voxels[0] && v != truth.source_voxels[1]) pool.push_back(v);
        for (Eigen::Index i = 0; i < cfg.bio_noise_count; ++i) {
            const auto remaining = static_cast<std::uint64_t>(pool.size()) - static_cast<std::uint64_t>(i);
            const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(placement.below(remaining));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            truth.bio_voxels.push_back(pool[static_cast<std::size_t>(i)]);
        }
    }

    Rng source_rng(cfg.seed, kSourceStream);
    truth.sources = gen_sources(cfg, source_rng);

    Rng bio_rng(cfg.seed, kBioAmplitudeStream);
    Rng sensor_rng(cfg.seed, kSensorStream);
    const RMatrix& k = lf.gain();
    const RVector kx = k.col(truth.source_voxels[0]);
    const RVector ky = k.col(truth.source_voxels[1]);
    RMatrix kb(ne, static_cast<Eigen::Index>(truth.bio_voxels.size()));
    for (std::size_t j = 0; j < truth.bio_voxels.size(); ++j) kb.col(static_cast<Eigen::Index>(j)) = k.col(truth.bio_voxels[j]);

    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(cfg.n_epochs * cfg.n_samples * ne));
    RVector amp(kb.cols());
    RVector noise(ne);
    for (Eigen::Index i = 0; i < cfg.n_epochs; ++i) {
        const SourceSeries& src = truth.sources[static_cast<std::size_t>(i)];
        for (Eigen::Index t = 0; t < cfg.n_samples; ++t) {
            for (Eigen::Index j = 0; j < amp.size(); ++j) amp(j) = bio_rng.symmetric(cfg.bio_noise_amp);
            for (Eigen::Index e = 0; e < ne; ++e) noise(e) = sensor_rng.symmetric(cfg.sensor_noise_amp);
            const RVector signal = src.x[static_cast<std::size_t>(t)] * kx + src.y[static_cast<std::size_t>(t)] * ky;
            const RVector bio = kb * amp;
            truth.source_power += signal.squaredNorm();
            truth.bio_power += bio.squaredNorm();
            truth.sensor_power += noise.squaredNorm();
            const RVector phi = signal + bio + noise;
            data.insert(data.end(), phi.data(), phi.data() + ne);
        }
    }
    const double count = static_cast<double>(cfg.n_epochs * cfg.n_samples * ne);
    truth.source_power /= count;
    truth.bio_power /= count;
    truth.sensor_power /= count;

    EpochedRecording rec(cfg.n_epochs, cfg.n_samples, ne, cfg.rate, std::move(data), lf.electrodes().labels);
    return {std::move(rec), std::move(truth)};
}

/// Distance, in grid spacings, from each true source to the nearer of the
/// map's two largest voxels; the worse of the two sources is returned.
inline double localization_error(const RVector& values, const std::array<Eigen::Index, 2>& truth,
                                 const VoxelGrid& grid) {
    detail::require(values.size() >= 2 && static_cast<std::size_t>(values.size()) == grid.size(),
                    ErrorCode::dimension_mismatch, "map and grid differ in voxel count");
    Eigen::Index first = -1;
    Eigen::Index second = -1;
    for (Eigen::Index v = 0; v < values.size(); ++v) {
        if (first < 0 || values(v) > values(first)) {
            second = first;
            first = v;
        } else if (second < 0 || values(v) > values(second)) {
            second = v;
        }
    }
    double worst = 0.0;
    for (Eigen::Index t : truth) {
        const Vec3& p = grid.positions[static_cast<std::size_t>(t)];
        const double d = std::min((p - grid.positions[static_cast<std::size_t>(first)]).norm(),
                                  (p - grid.positions[static_cast<std::size_t>(second)]).norm());
        worst = std::max(worst, d);
    }
    return worst / grid.spacing;
}

inline double localization_error(const CompositeMap& map, const GroundTruth& truth, const VoxelGrid& grid) {
    return localization_error(map.values, truth.source_voxels, grid);
}

struct ExperimentReport {
    SimulationConfig config;
    std::vector<Eigen::Index> seeds;  // voxel under each electrode
    std::vector<SeededMap> classical_maps;
    std::vector<SeededMap> partial_maps;
    CompositeMap classical_composite;
    CompositeMap partial_composite;
    double classical_error = 0.0;
    double partial_error = 0.0;
    Eigen::Index effective_rank = 0;
    GroundTruth truth;

    std::string summary_csv() const {
        std::string out = "method,seed,localization_error\n";
        out += "classical_lagged," + std::to_string(config.seed) + "," + io::format_double(classical_error) + "\n";
        out += "partial_lagged," + std::to_string(config.seed) + "," + io::format_double(partial_error) + "\n";
        return out;
    }
};

/// Full pipeline: simulate, band cross-spectrum, both lagged connectivity
/// families seeded under every electrode, composites and their scores.
inline ExperimentReport run_experiment(const SimulationConfig& cfg, const LeadField& lf, double f_lo = 8.0,
                                       double f_hi = 12.0, unsigned threads = 1) {
    ExperimentReport r;
    r.config = cfg;
    Simulation sim = simulate_eeg(cfg, lf);
    const CrossSpectrum s = band_cross_spectrum(sim.recording, f_lo, f_hi);

    for (Eigen::Index e = 0; e < lf.n_electrodes(); ++e) r.seeds.push_back(voxel_under_electrode(lf, e));

    const ClassicalField classical = classical_field(min_norm_inverse(lf), s);
    const ConnectivityFactor partial = partial_field(lf, s);
    r.effective_rank = partial.effective_rank;
    r.classical_maps = seeded_maps(classical, r.seeds, Measure::classical_lagged, threads);
    r.partial_maps = seeded_maps(partial, r.seeds, Measure::partial_lagged, threads);
    r.classical_composite = max_over_seeds(r.classical_maps);
    r.partial_composite = max_over_seeds(r.partial_maps);
    r.truth = std::move(sim.truth);
    r.classical_error = localization_error(r.classical_composite, r.truth, lf.voxels());
    r.partial_error = localization_error(r.partial_composite, r.truth, lf.voxels());
    return r;
}

namespace io_detail {

inline std::string truth_csv(const GroundTruth& truth, const VoxelGrid& grid) {
    std::string out = "role,voxel_id,x,y,z\n";
    auto row = [&](const std::string& role, Eigen::Index v) {
        const Vec3& p = grid.positions[static_cast<std::size_t>(v)];
        out += role + "," + std::to_string(v) + "," + io::format_double(p.x()) + "," + io::format_double(p.y()) + "," +
               io::format_double(p.z()) + "\n";
    };
    row("source_x", truth.source_voxels[0]);
    row("source_y", truth.source_voxels[1]);
    for (Eigen::Index v : truth.bio_voxels) row("bio_noise", v);
    return out;
}

inline std::string sources_csv(const GroundTruth& truth) {
    std::string out = "epoch,t,x,y\n";
    for (std::size_t i = 0; i < truth.sources.size(); ++i) {
        for (std::size_t t = 0; t < truth.sources[i].x.size(); ++t) {
            out += std::to_string(i) + "," + std::to_string(t) + "," + io::format_double(truth.sources[i].x[t]) + "," +
                   io::format_double(truth.sources[i].y[t]) + "\n";
        }
    }
    return out;
}

inline std::string snr_csv(const GroundTruth& truth) {
    std::string out = "source_power,bio_power,sensor_power,snr_db\n";
    out += io::format_double(truth.source_power) + "," + io::format_double(truth.bio_power) + "," +
           io::format_double(truth.sensor_power) + "," + io::format_double(truth.snr_db()) + "\n";
    return out;
}

}  // namespace io_detail

/// Parses the `role,voxel_id,x,y,z` truth table; returns (source_x, source_y) voxel ids.
inline std::array<Eigen::Index, 2> parse_truth_sources(const io::CsvTable& t, const std::string& name) {
    io::expect_header(t, {"role", "voxel_id", "x", "y", "z"}, name);
    std::array<Eigen::Index, 2> v{-1, -1};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = name + ":" + std::to_string(t.line_numbers[r]);
        if (t.rows[r][0] == "source_x") v[0] = static_cast<Eigen::Index>(io::parse_int(t.rows[r][1], where));
        if (t.rows[r][0] == "source_y") v[1] = static_cast<Eigen::Index>(io::parse_int(t.rows[r][1], where));
    }
    detail::require(v[0] >= 0 && v[1] >= 0, ErrorCode::format, name + ": missing source_x/source_y rows");
    return v;
}

/// Writes seeded maps, composites, summary, truth and SNR into `dir`.
inline void write_report(const ExperimentReport& r, const VoxelGrid& grid, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
        const std::string id = std::to_string(r.seeds[i]);
        io::write_text(dir / ("classical_lagged_seed_" + id + ".csv"), io::map_csv(grid, r.classical_maps[i].values));
        io::write_text(dir / ("partial_lagged_seed_" + id + ".csv"), io::map_csv(grid, r.partial_maps[i].values));
    }
    io::write_text(dir / "classical_lagged_composite.csv", io::map_csv(grid, r.classical_composite.values));
    io::write_text(dir / "partial_lagged_composite.csv", io::map_csv(grid, r.partial_composite.values));
    io::write_text(dir / "summary.csv", r.summary_csv());
    io::write_text(dir / "truth.csv", io_detail::truth_csv(r.truth, grid));
    io::write_text(dir / "snr.csv", io_detail::snr_csv(r.truth));
}

}  // namespace pcf::sim
