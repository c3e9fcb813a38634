// pcfield: command-line front end for partial coherence field connectivity.
//
// Exit codes: 0 success, 2 numerical/validation failure, 64 usage, 66 missing input.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcf/pcf.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 2;
constexpr int kExitUsage = 64;
constexpr int kExitNoInput = 66;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_input(const fs::path& p) {
    if (!fs::exists(p)) throw pcf::Error(pcf::ErrorCode::missing_input, "missing input: " + p.string());
}

unsigned thread_count() {
    if (const char* env = std::getenv("PCF_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw UsageError("PCF_THREADS must be a positive integer");
    }
    return 1;
}

std::pair<double, double> parse_band(const std::string& band) {
    const auto colon = band.find(':');
    if (colon == std::string::npos) throw UsageError("--band must look like lo:hi");
    try {
        return {pcf::io::parse_double(band.substr(0, colon), "--band"),
                pcf::io::parse_double(band.substr(colon + 1), "--band")};
    } catch (const pcf::Error&) {
        throw UsageError("--band must look like lo:hi with numeric edges");
    }
}

// ---------------------------------------------------------------------------

struct LeadfieldArgs {
    std::string electrodes;
    bool builtin = false;
    std::string voxels;
    double grid = 0.0;
    std::string out;
};

int cmd_leadfield(const LeadfieldArgs& a) {
    if (!a.electrodes.empty()) require_input(a.electrodes);
    if (!a.voxels.empty()) require_input(a.voxels);

    const pcf::ElectrodeArray electrodes =
        a.builtin ? pcf::builtin_1020() : pcf::io::parse_electrodes(pcf::io::read_csv(a.electrodes), a.electrodes);
    const pcf::VoxelGrid voxels =
        a.voxels.empty() ? pcf::make_grid(a.grid) : pcf::io::parse_voxels(pcf::io::read_csv(a.voxels), a.voxels);
    const pcf::LeadField lf = pcf::synth_leadfield(electrodes, voxels);
    pcf::io::save_leadfield(lf, a.out);
    std::cout << "lead field " << lf.n_electrodes() << " electrodes x " << lf.n_voxels() << " voxels\n"
              << "rank " << lf.rank().rank << " of " << lf.n_electrodes() << " (singular values "
              << lf.rank().largest_singular << " .. " << lf.rank().smallest_singular << ")\n";
    return kExitOk;
}

struct SimulateArgs {
    std::string config;
    std::string leadfield;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    if (!a.config.empty()) require_input(a.config);
    require_input(a.leadfield);
    pcf::sim::SimulationConfig cfg;
    if (!a.config.empty()) cfg = pcf::sim::parse_config(pcf::io::detail::read_bytes(a.config), a.config);
    const pcf::LeadField lf = pcf::io::load_leadfield(a.leadfield);
    const pcf::sim::Simulation sim = pcf::sim::simulate_eeg(cfg, lf);

    fs::create_directories(a.out);
    const fs::path dir(a.out);
    pcf::io::write_text(dir / "epochs.csv", pcf::io::epochs_csv(sim.recording));
    pcf::io::write_text(dir / "truth.csv", pcf::sim::io_detail::truth_csv(sim.truth, lf.voxels()));
    pcf::io::write_text(dir / "sources.csv", pcf::sim::io_detail::sources_csv(sim.truth));
    pcf::io::write_text(dir / "snr.csv", pcf::sim::io_detail::snr_csv(sim.truth));
    pcf::io::write_text(dir / "config.txt", pcf::sim::config_text(cfg));
    std::cout << "simulated " << sim.recording.n_epochs() << " epochs x " << sim.recording.n_samples()
              << " samples x " << sim.recording.n_channels() << " channels at " << cfg.rate << " Hz\n"
              << "sources at voxels " << sim.truth.source_voxels[0] << ", " << sim.truth.source_voxels[1]
              << "; SNR " << sim.truth.snr_db() << " dB\n";
    return kExitOk;
}

struct XspecArgs {
    std::string epochs;
    double rate = 0.0;
    std::string band;
    std::string out;
    bool include_edges = false;
};

int cmd_xspec(const XspecArgs& a) {
    const auto [lo, hi] = parse_band(a.band);
    require_input(a.epochs);
    const pcf::EpochedRecording rec = pcf::io::parse_epochs(pcf::io::read_csv(a.epochs), a.rate, a.epochs);
    const pcf::CrossSpectrum s = pcf::band_cross_spectrum(rec, lo, hi, a.include_edges);
    pcf::io::write_pcf(a.out, s.matrix.matrix());
    std::cout << "averaged " << s.bins.size() << " bins (" << s.f_lo << "-" << s.f_hi << " Hz) over "
              << s.n_epochs << " epochs; bins:";
    for (auto b : s.bins) std::cout << ' ' << b;
    std::cout << '\n';
    return kExitOk;
}

struct ConnectArgs {
    std::string leadfield;
    std::string xspec;
    std::string method;
    std::string measure;
    std::string seeds = "all-1020";
    std::string out;
};

std::vector<Eigen::Index> parse_seeds(const std::string& spec, const pcf::LeadField& lf) {
    std::vector<Eigen::Index> seeds;
    if (spec == "all-1020") {
        for (Eigen::Index e = 0; e < lf.n_electrodes(); ++e) seeds.push_back(pcf::voxel_under_electrode(lf, e));
        return seeds;
    }
    for (const std::string& part : pcf::io::split_csv_line(spec)) {
        long long id = 0;
        try {
            id = pcf::io::parse_int(part, "--seeds");
        } catch (const pcf::Error&) {
            throw UsageError("--seeds takes all-1020 or a comma-separated voxel id list");
        }
        if (id < 0 || id >= lf.n_voxels()) {
            throw pcf::Error(pcf::ErrorCode::invalid_argument, "seed voxel " + part + " is not on the grid");
        }
        seeds.push_back(static_cast<Eigen::Index>(id));
    }
    return seeds;
}

int cmd_connect(const ConnectArgs& a) {
    require_input(a.leadfield);
    require_input(a.xspec);
    const pcf::LeadField lf = pcf::io::load_leadfield(a.leadfield);
    pcf::CrossSpectrum s;
    s.matrix = pcf::HermitianMatrix::symmetrized(pcf::io::read_pcf_complex(a.xspec));
    const bool lagged = a.measure == "lagged";
    const pcf::Measure measure = a.method == "partial"
                                     ? (lagged ? pcf::Measure::partial_lagged : pcf::Measure::partial_coh)
                                     : (lagged ? pcf::Measure::classical_lagged : pcf::Measure::classical_coh);
    const std::vector<Eigen::Index> seeds = parse_seeds(a.seeds, lf);
    const unsigned threads = thread_count();

    std::vector<pcf::SeededMap> maps;
    const fs::path dir(a.out);
    fs::create_directories(dir);
    if (a.method == "partial") {
        std::cout << "partial field does not depend on the inverse operator; none built\n";
        const pcf::ConnectivityFactor f = pcf::partial_field(lf, s);
        std::cout << "cross-spectrum effective rank " << f.effective_rank << " of " << s.dim() << '\n';
        pcf::io::save_factor(f, dir / "factor.pcf");
        maps = pcf::seeded_maps(f, seeds, measure, threads);
    } else {
        std::cout << "classical field uses the minimum-norm inverse\n";
        const pcf::ClassicalField f = pcf::classical_field(pcf::min_norm_inverse(lf), s);
        for (Eigen::Index v : pcf::invisible_voxels(f)) {
            throw pcf::Error(pcf::ErrorCode::degenerate,
                             "voxel " + std::to_string(v) + " has zero estimated source power");
        }
        maps = pcf::seeded_maps(f, seeds, measure, threads);
    }

    for (const pcf::SeededMap& m : maps) {
        pcf::io::write_text(dir / ("map_seed_" + std::to_string(m.seed) + ".csv"), pcf::io::map_csv(lf.voxels(), m.values));
    }
    const pcf::CompositeMap composite = pcf::max_over_seeds(maps);
    pcf::io::write_text(dir / "composite.csv", pcf::io::map_csv(lf.voxels(), composite.values));

    std::string manifest = "key,value\nmethod," + a.method + "\nmeasure," + pcf::to_string(measure) + "\nseeds,";
    for (std::size_t i = 0; i < seeds.size(); ++i) manifest += (i ? " " : "") + std::to_string(seeds[i]);
    manifest += "\n";
    pcf::io::write_text(dir / "manifest.csv", manifest);
    std::cout << "wrote " << maps.size() << " seeded maps and composite to " << dir.string() << '\n';
    return kExitOk;
}

struct RenderArgs {
    std::string map;
    std::string out;
    double scale_percent = 95.0;
};

int cmd_render(const RenderArgs& a) {
    require_input(a.map);
    const pcf::io::MapTable m = pcf::io::parse_map(pcf::io::read_csv(a.map), a.map);
    if (m.values.size() == 0) throw pcf::Error(pcf::ErrorCode::empty_input, "map " + a.map + " has no voxels");
    const double spacing = m.positions.size() > 1 ? pcf::VoxelGrid::min_spacing(m.positions) : 0.1;
    pcf::render::RenderOptions opt;
    opt.scale_percent = a.scale_percent;
    pcf::io::write_text(a.out, pcf::render::render_ppm(m.positions, m.values, spacing, opt));
    std::cout << "color scale saturates at " << pcf::render::saturation_level(m.values, a.scale_percent) << '\n';
    return kExitOk;
}

struct CompareArgs {
    std::vector<std::string> maps;
    std::string truth;
    std::string out;
};

int cmd_compare(const CompareArgs& a) {
    require_input(a.truth);
    for (const auto& d : a.maps) {
        require_input(fs::path(d) / "composite.csv");
        require_input(fs::path(d) / "manifest.csv");
    }
    const auto truth = pcf::sim::parse_truth_sources(pcf::io::read_csv(a.truth), a.truth);

    std::string out = "method,measure,localization_error\n";
    for (const auto& d : a.maps) {
        const fs::path dir(d);
        const pcf::io::MapTable m = pcf::io::parse_map(pcf::io::read_csv(dir / "composite.csv"), (dir / "composite.csv").string());
        std::string method, measure;
        const pcf::io::CsvTable manifest = pcf::io::read_csv(dir / "manifest.csv");
        for (const auto& row : manifest.rows) {
            if (row[0] == "method") method = row[1];
            if (row[0] == "measure") measure = row[1];
        }
        pcf::VoxelGrid grid;
        grid.positions = m.positions;
        grid.spacing = pcf::VoxelGrid::min_spacing(m.positions);
        for (auto id : truth) {
            if (id >= m.values.size()) throw pcf::Error(pcf::ErrorCode::invalid_argument, "truth voxel outside map " + d);
        }
        const double err = pcf::sim::localization_error(m.values, truth, grid);
        out += method + "," + measure + "," + pcf::io::format_double(err) + "\n";
        std::cout << method << " " << measure << ": localization error " << err << " grid spacings\n";
    }
    pcf::io::write_text(a.out, out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial coherence field connectivity from multichannel EEG"};
    app.require_subcommand(1);

    LeadfieldArgs lf;
    auto* leadfield = app.add_subcommand("leadfield", "Build an inverse-distance lead field on a spherical head");
    auto* lf_elec = leadfield->add_option("--electrodes", lf.electrodes, "Electrode CSV (label,x,y,z)");
    auto* lf_builtin = leadfield->add_flag("--builtin-1020", lf.builtin, "Use the built-in 19-channel 10/20 set");
    auto* lf_vox = leadfield->add_option("--voxels", lf.voxels, "Voxel CSV (id,x,y,z)");
    auto* lf_grid = leadfield->add_option("--grid", lf.grid, "Cubic grid spacing")->check(CLI::PositiveNumber);
    leadfield->add_option("--out", lf.out, "Output PCF1 path")->required();
    lf_elec->excludes(lf_builtin);
    lf_vox->excludes(lf_grid);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate two lag-coupled sources and record EEG");
    simulate->add_option("--config", sim.config, "key=value configuration file");
    simulate->add_option("--leadfield", sim.leadfield, "Lead field PCF1")->required();
    simulate->add_option("--out", sim.out, "Output directory")->required();

    XspecArgs xs;
    auto* xspec = app.add_subcommand("xspec", "Band-averaged cross-spectrum of epoched EEG");
    xspec->add_option("--epochs", xs.epochs, "Epoch CSV")->required();
    xspec->add_option("--rate", xs.rate, "Sampling rate in Hz")->required()->check(CLI::PositiveNumber);
    xspec->add_option("--band", xs.band, "Band lo:hi in Hz")->required();
    xspec->add_option("--out", xs.out, "Output PCF1 path")->required();
    xspec->add_flag("--include-edges", xs.include_edges, "Allow DC and Nyquist bins in the band");

    ConnectArgs cn;
    auto* connect = app.add_subcommand("connect", "Seeded connectivity maps and their max-over-seeds composite");
    connect->add_option("--leadfield", cn.leadfield, "Lead field PCF1")->required();
    connect->add_option("--xspec", cn.xspec, "Cross-spectrum PCF1")->required();
    connect->add_option("--method", cn.method, "classical or partial")->required()->check(CLI::IsMember({"classical", "partial"}));
    connect->add_option("--measure", cn.measure, "coherence or lagged")->required()->check(CLI::IsMember({"coherence", "lagged"}));
    connect->add_option("--seeds", cn.seeds, "all-1020 or comma-separated voxel ids")->capture_default_str();
    connect->add_option("--out", cn.out, "Output directory")->required();

    RenderArgs rn;
    auto* render = app.add_subcommand("render", "Render a map CSV as a three-view PPM");
    render->add_option("--map", rn.map, "Map CSV")->required();
    render->add_option("--out", rn.out, "Output PPM")->required();
    render->add_option("--scale-percent", rn.scale_percent, "Color saturation as percent of the map maximum")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 100.0));

    CompareArgs cp;
    auto* compare = app.add_subcommand("compare", "Localization error of composite maps against ground truth");
    compare->add_option("--maps", cp.maps, "Directories written by connect")->required();
    compare->add_option("--truth", cp.truth, "truth.csv written by simulate")->required();
    compare->add_option("--out", cp.out, "Output summary CSV")->required();

    try {
        app.parse(argc, argv);
        if (leadfield->parsed()) {
            if (lf_elec->count() + lf_builtin->count() == 0) throw UsageError("need --electrodes or --builtin-1020");
            if (lf_vox->count() + lf_grid->count() == 0) throw UsageError("need --voxels or --grid");
            return cmd_leadfield(lf);
        }
        if (simulate->parsed()) return cmd_simulate(sim);
        if (xspec->parsed()) return cmd_xspec(xs);
        if (connect->parsed()) return cmd_connect(cn);
        if (render->parsed()) return cmd_render(rn);
        if (compare->parsed()) return cmd_compare(cp);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const pcf::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == pcf::ErrorCode::missing_input ? kExitNoInput : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
