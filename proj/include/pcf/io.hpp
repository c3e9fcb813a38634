#pragma once

// PCF1 binary matrices and the small CSV dialect used for geometry and maps.
//
// PCF1 layout (all little-endian):
//   bytes 0-3   magic "PCF1"
//   byte  4     dtype: 0 = real float64, 1 = complex float64 (re, im interleaved)
//   bytes 5-8   rows, uint32
//   bytes 9-12  cols, uint32
//   then rows*cols values (or re,im pairs) in row-major order.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pcf/core.hpp"
#include "pcf/forward.hpp"

namespace pcf::io {

enum class Dtype : std::uint8_t { real64 = 0, complex64 = 1 };

inline constexpr char kMagic[4] = {'P', 'C', 'F', '1'};
inline constexpr std::size_t kHeaderBytes = 13;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const char* p, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

inline double get_f64(const char* p) { return std::bit_cast<double>(get_le(p, 8)); }

inline std::string header(Dtype dtype, Eigen::Index rows, Eigen::Index cols) {
    pcf::detail::require(rows >= 0 && cols >= 0 && rows <= 0xffffffffll && cols <= 0xffffffffll,
                         ErrorCode::invalid_argument, "matrix too large for PCF1");
    std::string out(kMagic, 4);
    out.push_back(static_cast<char>(dtype));
    put_u32(out, static_cast<std::uint32_t>(rows));
    put_u32(out, static_cast<std::uint32_t>(cols));
    return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    pcf::detail::require(static_cast<bool>(f), ErrorCode::invalid_argument, "cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    pcf::detail::require(static_cast<bool>(f), ErrorCode::format, "failed writing " + path.string());
}

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    pcf::detail::require(static_cast<bool>(f), ErrorCode::missing_input, "cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace detail

inline std::string encode(const RMatrix& m) {
    std::string out = detail::header(Dtype::real64, m.rows(), m.cols());
    out.reserve(kHeaderBytes + 8 * static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_f64(out, m(r, c));
    return out;
}

inline std::string encode(const CMatrix& m) {
    std::string out = detail::header(Dtype::complex64, m.rows(), m.cols());
    out.reserve(kHeaderBytes + 16 * static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            detail::put_f64(out, m(r, c).real());
            detail::put_f64(out, m(r, c).imag());
        }
    }
    return out;
}

struct Decoded {
    Dtype dtype = Dtype::real64;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::string_view payload;
};

inline Decoded decode_header(std::string_view bytes) {
    pcf::detail::require(bytes.size() >= kHeaderBytes && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::format,
                         "not a PCF1 file (bad magic or truncated header)");
    Decoded d;
    const auto dtype = static_cast<unsigned char>(bytes[4]);
    pcf::detail::require(dtype <= 1, ErrorCode::format, "unknown PCF1 dtype " + std::to_string(dtype));
    d.dtype = static_cast<Dtype>(dtype);
    d.rows = static_cast<std::uint32_t>(detail::get_le(bytes.data() + 5, 4));
    d.cols = static_cast<std::uint32_t>(detail::get_le(bytes.data() + 9, 4));
    const std::size_t width = d.dtype == Dtype::real64 ? 8 : 16;
    const std::size_t expected = static_cast<std::size_t>(d.rows) * d.cols * width;
    pcf::detail::require(bytes.size() - kHeaderBytes == expected, ErrorCode::format,
                         "PCF1 payload is " + std::to_string(bytes.size() - kHeaderBytes) + " bytes, expected " +
                             std::to_string(expected) + " for " + std::to_string(d.rows) + "x" +
                             std::to_string(d.cols));
    d.payload = bytes.substr(kHeaderBytes);
    return d;
}

inline RMatrix decode_real(std::string_view bytes) {
    const Decoded d = decode_header(bytes);
    pcf::detail::require(d.dtype == Dtype::real64, ErrorCode::format, "expected a real PCF1 matrix, found complex");
    RMatrix m(d.rows, d.cols);
    const char* p = d.payload.data();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c, p += 8) m(r, c) = detail::get_f64(p);
    return m;
}

inline CMatrix decode_complex(std::string_view bytes) {
    const Decoded d = decode_header(bytes);
    pcf::detail::require(d.dtype == Dtype::complex64, ErrorCode::format, "expected a complex PCF1 matrix, found real");
    CMatrix m(d.rows, d.cols);
    const char* p = d.payload.data();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c, p += 16) m(r, c) = Complex(detail::get_f64(p), detail::get_f64(p + 8));
    return m;
}

inline void write_pcf(const std::filesystem::path& path, const RMatrix& m) { detail::write_bytes(path, encode(m)); }
inline void write_pcf(const std::filesystem::path& path, const CMatrix& m) { detail::write_bytes(path, encode(m)); }
inline RMatrix read_pcf_real(const std::filesystem::path& path) { return decode_real(detail::read_bytes(path)); }
inline CMatrix read_pcf_complex(const std::filesystem::path& path) { return decode_complex(detail::read_bytes(path)); }

// ---------------------------------------------------------------------------
// CSV

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
        while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
        fields.emplace_back(f);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline double parse_double(std::string_view s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    pcf::detail::require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::format,
                         where + ": cannot parse number '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s, const std::string& where) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    pcf::detail::require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::format,
                         where + ": cannot parse integer '" + std::string(s) + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

inline CsvTable parse_csv(std::string_view text, const std::string& name) {
    CsvTable t;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        pcf::detail::require(fields.size() == t.header.size(), ErrorCode::format,
                             name + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                                 " fields, got " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    pcf::detail::require(have_header, ErrorCode::format, name + ": empty CSV");
    return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    return parse_csv(detail::read_bytes(path), path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) { detail::write_bytes(path, text); }

inline void expect_header(const CsvTable& t, const std::vector<std::string>& expected, const std::string& name) {
    pcf::detail::require(t.header == expected, ErrorCode::format, name + ": unexpected CSV header");
}

// ---------------------------------------------------------------------------
// Geometry sidecars and lead fields

inline std::string electrodes_csv(const ElectrodeArray& e) {
    std::string out = "label,x,y,z\n";
    for (std::size_t i = 0; i < e.size(); ++i) {
        out += e.labels[i] + "," + format_double(e.positions[i].x()) + "," + format_double(e.positions[i].y()) + "," +
               format_double(e.positions[i].z()) + "\n";
    }
    return out;
}

inline std::string voxels_csv(const VoxelGrid& g) {
    std::string out = "id,x,y,z\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        out += std::to_string(i) + "," + format_double(g.positions[i].x()) + "," + format_double(g.positions[i].y()) +
               "," + format_double(g.positions[i].z()) + "\n";
    }
    return out;
}

inline ElectrodeArray parse_electrodes(const CsvTable& t, const std::string& name) {
    expect_header(t, {"label", "x", "y", "z"}, name);
    ElectrodeArray e;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = name + ":" + std::to_string(t.line_numbers[r]);
        e.labels.push_back(t.rows[r][0]);
        e.positions.emplace_back(parse_double(t.rows[r][1], where), parse_double(t.rows[r][2], where),
                                 parse_double(t.rows[r][3], where));
    }
    e.validate();
    return e;
}

/// Voxel ids must run 0..N-1 in file order. Spacing is the smallest inter-voxel distance.
inline VoxelGrid parse_voxels(const CsvTable& t, const std::string& name,
                              double r_cortex = VoxelGrid::kDefaultCortexRadius) {
    expect_header(t, {"id", "x", "y", "z"}, name);
    VoxelGrid g;
    g.r_cortex = r_cortex;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = name + ":" + std::to_string(t.line_numbers[r]);
        pcf::detail::require(parse_int(t.rows[r][0], where) == static_cast<long long>(r), ErrorCode::format,
                             where + ": voxel ids must be 0..N-1 in order");
        g.positions.emplace_back(parse_double(t.rows[r][1], where), parse_double(t.rows[r][2], where),
                                 parse_double(t.rows[r][3], where));
    }
    pcf::detail::require(!g.positions.empty(), ErrorCode::empty_input, name + ": no voxels");
    g.spacing = 1.0;
    g.validate();  // rejects duplicates before the spacing scan
    if (g.positions.size() > 1) g.spacing = VoxelGrid::min_spacing(g.positions);
    return g;
}

struct LeadFieldPaths {
    std::filesystem::path matrix;
    std::filesystem::path electrodes;
    std::filesystem::path voxels;
};

/// `lf.pcf` -> `lf.electrodes.csv`, `lf.voxels.csv`.
inline LeadFieldPaths leadfield_paths(const std::filesystem::path& matrix) {
    LeadFieldPaths p;
    p.matrix = matrix;
    p.electrodes = std::filesystem::path(matrix).replace_extension(".electrodes.csv");
    p.voxels = std::filesystem::path(matrix).replace_extension(".voxels.csv");
    return p;
}

inline void save_leadfield(const LeadField& lf, const std::filesystem::path& path) {
    const LeadFieldPaths p = leadfield_paths(path);
    write_pcf(p.matrix, lf.gain());
    write_text(p.electrodes, electrodes_csv(lf.electrodes()));
    write_text(p.voxels, voxels_csv(lf.voxels()));
}

inline LeadField load_leadfield(const std::filesystem::path& path) {
    const LeadFieldPaths p = leadfield_paths(path);
    RMatrix k = read_pcf_real(p.matrix);
    pcf::detail::require(k.allFinite(), ErrorCode::format, p.matrix.string() + ": lead field contains NaN/Inf");
    ElectrodeArray e = parse_electrodes(read_csv(p.electrodes), p.electrodes.string());
    VoxelGrid g = parse_voxels(read_csv(p.voxels), p.voxels.string());
    return LeadField(std::move(k), std::move(e), std::move(g));
}

}  // namespace pcf::io
