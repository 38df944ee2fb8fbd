#pragma once
// Binary checkpoint of an MPSState ("MPSC1").
//
// Layout:
//   8 bytes   magic "MPSCHKP1"
//   8 bytes   manifest length N, little-endian uint64
//   N bytes   UTF-8 JSON manifest
//   M bytes   payload: little-endian float64 values, blocks in manifest order,
//             complex blocks as interleaved (re, im) in row-major order,
//             real blocks (lambda) as plain values
//   4 bytes   CRC32 of the payload, little-endian
//
// The payload length M is recorded in the manifest as "payload_bytes".

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcmps/errors.hpp"
#include "lcmps/itebd.hpp"

namespace lcmps {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

enum class CheckpointErrc {
    bad_magic = 1,
    version_mismatch = 2,
    checksum_mismatch = 3,
    truncated = 4,
    malformed = 5,
    io = 6,
};

class CheckpointError : public IoError {
  public:
    CheckpointError(CheckpointErrc code, const std::string& what) : IoError(what), code_(code) {}
    CheckpointErrc code() const { return code_; }

  private:
    CheckpointErrc code_;
};

inline constexpr char kCheckpointMagic[8] = {'M', 'P', 'S', 'C', 'H', 'K', 'P', '1'};
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

inline void put_f64(std::string& out, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

inline std::uint32_t crc32_of(const std::string& bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

inline nlohmann::json matrix_entry(const std::string& name, const GradedMatrix& m, std::string& payload) {
    nlohmann::json sectors = nlohmann::json::array();
    for (const auto& [q, b] : m.blocks()) {
        sectors.push_back({{"q", q}, {"rows", b.rows()}, {"cols", b.cols()}, {"byte_offset", payload.size()}});
        for (Index r = 0; r < b.rows(); ++r)
            for (Index c = 0; c < b.cols(); ++c) {
                put_f64(payload, b(r, c).real());
                put_f64(payload, b(r, c).imag());
            }
    }
    return {{"name", name}, {"charge_shift", m.charge_shift()}, {"real", false}, {"sectors", sectors}};
}

inline nlohmann::json spectrum_entry(const std::string& name, const SchmidtSpectrum& s, std::string& payload) {
    nlohmann::json sectors = nlohmann::json::array();
    for (const auto& [q, v] : s.sectors()) {
        sectors.push_back({{"q", q}, {"rows", v.size()}, {"cols", 1}, {"byte_offset", payload.size()}});
        for (Index i = 0; i < v.size(); ++i) put_f64(payload, v(i));
    }
    return {{"name", name}, {"charge_shift", 0}, {"real", true}, {"sectors", sectors}};
}

inline double get_f64(const std::string& payload, std::size_t off) {
    double v;
    std::memcpy(&v, payload.data() + off, 8);
    return v;
}

} // namespace detail

inline std::string serialize_checkpoint(const MPSState& state, const QuenchConfig& config) {
    std::string payload;
    nlohmann::json tensors = nlohmann::json::array();
    tensors.push_back(detail::matrix_entry("A_A_up", state.A_A[Spin::up], payload));
    tensors.push_back(detail::matrix_entry("A_A_dn", state.A_A[Spin::down], payload));
    tensors.push_back(detail::matrix_entry("A_B_up", state.A_B[Spin::up], payload));
    tensors.push_back(detail::matrix_entry("A_B_dn", state.A_B[Spin::down], payload));
    tensors.push_back(detail::spectrum_entry("lambda_A", state.lambda_A, payload));
    tensors.push_back(detail::spectrum_entry("lambda_B", state.lambda_B, payload));

    nlohmann::json manifest = {
        {"format_version", kCheckpointVersion},
        {"delta", config.delta},
        {"dt", config.dt},
        {"k_max", config.k_max},
        {"t_init", state.time},
        {"payload_bytes", payload.size()},
        {"tensors", tensors},
    };
    const std::string text = manifest.dump();

    std::string out(kCheckpointMagic, 8);
    detail::put_u64(out, text.size());
    out += text;
    out += payload;
    const std::uint32_t crc = detail::crc32_of(payload);
    char b[4];
    std::memcpy(b, &crc, 4);
    out.append(b, 4);
    return out;
}

inline std::pair<MPSState, QuenchConfig> deserialize_checkpoint(const std::string& bytes) {
    using detail::get_f64;
    if (bytes.size() < 16) throw CheckpointError(CheckpointErrc::truncated, "checkpoint: file too short");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw CheckpointError(CheckpointErrc::bad_magic, "checkpoint: bad magic");
    std::uint64_t mlen;
    std::memcpy(&mlen, bytes.data() + 8, 8);
    if (mlen > bytes.size() - 16) throw CheckpointError(CheckpointErrc::truncated, "checkpoint: manifest truncated");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointErrc::malformed, std::string("checkpoint: manifest: ") + e.what());
    }

    try {
        if (manifest.at("format_version").get<int>() != kCheckpointVersion)
            throw CheckpointError(CheckpointErrc::version_mismatch,
                                  "checkpoint: unsupported format_version " +
                                      manifest.at("format_version").dump());
        const std::uint64_t plen = manifest.at("payload_bytes").get<std::uint64_t>();
        const std::size_t start = 16 + mlen;
        if (bytes.size() < start + plen + 4)
            throw CheckpointError(CheckpointErrc::truncated, "checkpoint: payload truncated");
        if (bytes.size() != start + plen + 4)
            throw CheckpointError(CheckpointErrc::malformed, "checkpoint: trailing bytes");
        const std::string payload = bytes.substr(start, plen);
        std::uint32_t stored;
        std::memcpy(&stored, bytes.data() + start + plen, 4);
        if (stored != detail::crc32_of(payload))
            throw CheckpointError(CheckpointErrc::checksum_mismatch, "checkpoint: CRC32 mismatch");

        QuenchConfig cfg;
        cfg.delta = manifest.at("delta").get<double>();
        cfg.dt = manifest.at("dt").get<double>();
        cfg.k_max = manifest.at("k_max").get<Index>();
        cfg.t_init = manifest.at("t_init").get<double>();

        std::map<std::string, nlohmann::json> by_name;
        for (const auto& t : manifest.at("tensors")) by_name[t.at("name").get<std::string>()] = t;
        for (const char* n : {"A_A_up", "A_A_dn", "A_B_up", "A_B_dn", "lambda_A", "lambda_B"})
            if (!by_name.count(n))
                throw CheckpointError(CheckpointErrc::malformed, std::string("checkpoint: missing tensor ") + n);

        auto check_range = [&](std::size_t off, std::size_t n) {
            if (off + n > payload.size() || off + n < off)
                throw CheckpointError(CheckpointErrc::malformed, "checkpoint: block outside payload");
        };
        auto read_spectrum = [&](const nlohmann::json& t) {
            std::map<Charge, RealVector> sectors;
            for (const auto& s : t.at("sectors")) {
                const Index n = s.at("rows").get<Index>();
                const std::size_t off = s.at("byte_offset").get<std::size_t>();
                check_range(off, static_cast<std::size_t>(n) * 8);
                RealVector v(n);
                for (Index i = 0; i < n; ++i) v(i) = get_f64(payload, off + static_cast<std::size_t>(i) * 8);
                sectors[s.at("q").get<Charge>()] = std::move(v);
            }
            return SchmidtSpectrum(std::move(sectors));
        };

        MPSState st;
        st.lambda_A = read_spectrum(by_name["lambda_A"]);
        st.lambda_B = read_spectrum(by_name["lambda_B"]);
        st.time = cfg.t_init;
        const SectorDims bond_a = st.lambda_A.dims();
        const SectorDims bond_b = st.lambda_B.dims();

        auto read_matrix = [&](const nlohmann::json& t, const SectorDims& rows, const SectorDims& cols) {
            GradedMatrix m(rows, cols, t.at("charge_shift").get<int>());
            for (const auto& s : t.at("sectors")) {
                const Index r = s.at("rows").get<Index>();
                const Index c = s.at("cols").get<Index>();
                const std::size_t off = s.at("byte_offset").get<std::size_t>();
                check_range(off, static_cast<std::size_t>(r * c) * 16);
                Matrix b(r, c);
                std::size_t p = off;
                for (Index i = 0; i < r; ++i)
                    for (Index j = 0; j < c; ++j) {
                        b(i, j) = Complex(get_f64(payload, p), get_f64(payload, p + 8));
                        p += 16;
                    }
                m.set_block(s.at("q").get<Charge>(), std::move(b));
            }
            return m;
        };
        st.A_A[Spin::up] = read_matrix(by_name["A_A_up"], bond_b, bond_a);
        st.A_A[Spin::down] = read_matrix(by_name["A_A_dn"], bond_b, bond_a);
        st.A_B[Spin::up] = read_matrix(by_name["A_B_up"], bond_a, bond_b);
        st.A_B[Spin::down] = read_matrix(by_name["A_B_dn"], bond_a, bond_b);
        return {std::move(st), cfg};
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointErrc::malformed, std::string("checkpoint: manifest: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(CheckpointErrc::malformed, std::string("checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const MPSState& state, const QuenchConfig& config, const std::string& path) {
    const std::string bytes = serialize_checkpoint(state, config);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointErrc::io, "checkpoint: cannot open " + path + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError(CheckpointErrc::io, "checkpoint: write failed for " + path);
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline std::pair<MPSState, QuenchConfig> load_checkpoint(const std::string& path) {
    std::string bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const IoError& e) {
        throw CheckpointError(CheckpointErrc::io, std::string("checkpoint: ") + e.what());
    }
    return deserialize_checkpoint(bytes);
}

} // namespace lcmps
