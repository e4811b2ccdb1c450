// On-disk formats. All binary formats are little-endian regardless of host.
//
// Grid file ("FGRD", version 1):
//   magic[4] u16 version u16 flags u32 H u32 W u32 D
//   f32 features[H*W*D]
//   flags bit0: f32 cls_attn[H*W]
//   flags bit1: f32 text_sim[H*W]
//   flags bit2: f32 q_cls[D], f32 keys[H*W*D]
//   bit0 and bit2 are mutually exclusive.
//
// Sequence file ("DCSQ", version 1):
//   magic[4] u16 version u16 flags(bit0: vectors scaled) u32 n_max u32 count u32 D
//   f64 lambda f64 rho
//   per token: i32 row i32 col (-1 for cluster summaries) i32 cluster_id (-1 for geometric)
//              u8 stream (0 semantic, 1 geometric) u8 is_anchor f64 weight f32 vector[D]
//
// Router model file ("DCRT", version 1):
//   magic[4] u16 version f64 rho_min u32 input u32 hidden1 u32 hidden2
//   then trunk1, trunk2, head_lambda, head_rho: f64 weights (out x in, row-major), f64 bias[out]
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "dualcomp/fusion.hpp"
#include "dualcomp/grid.hpp"
#include "dualcomp/labels.hpp"
#include "dualcomp/router.hpp"

namespace dualcomp::io {

namespace detail {

class ByteWriter {
  public:
    void bytes(std::string_view s) { buf_.append(s); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
    void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
    [[nodiscard]] const std::string& data() const noexcept { return buf_; }

  private:
    template <typename U>
    void put_le(U v) {
        for (std::size_t k = 0; k < sizeof(U); ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
    }
    std::string buf_;
};

class ByteReader {
  public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    [[nodiscard]] std::size_t offset() const noexcept { return pos_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError(what_ + ": at byte offset " + std::to_string(pos_) + ": " + msg);
    }
    void need(std::size_t n, std::string_view field) const {
        if (remaining() < n)
            fail("truncated " + std::string(field) + ": expected " + std::to_string(n) + " bytes, got " +
                 std::to_string(remaining()));
    }
    std::string_view bytes(std::size_t n, std::string_view field) {
        need(n, field);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8(std::string_view f) { return static_cast<std::uint8_t>(bytes(1, f)[0]); }
    std::uint16_t u16(std::string_view f) { return get_le<std::uint16_t>(f); }
    std::uint32_t u32(std::string_view f) { return get_le<std::uint32_t>(f); }
    std::int32_t i32(std::string_view f) { return static_cast<std::int32_t>(get_le<std::uint32_t>(f)); }
    float f32(std::string_view f) { return std::bit_cast<float>(get_le<std::uint32_t>(f)); }
    double f64(std::string_view f) { return std::bit_cast<double>(get_le<std::uint64_t>(f)); }

  private:
    template <typename U>
    U get_le(std::string_view field) {
        const auto s = bytes(sizeof(U), field);
        U v = 0;
        for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(static_cast<unsigned char>(s[k])) << (8 * k);
        return v;
    }
    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace detail

[[nodiscard]] inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Grid file

inline constexpr std::uint16_t kGridVersion = 1;
inline constexpr std::uint16_t kGridHasAttn = 1u << 0;
inline constexpr std::uint16_t kGridHasText = 1u << 1;
inline constexpr std::uint16_t kGridHasQK = 1u << 2;

[[nodiscard]] inline std::string encode_grid(const FeatureGrid& g) {
    validate(g);
    detail::ByteWriter w;
    w.bytes("FGRD");
    w.u16(kGridVersion);
    std::uint16_t flags = 0;
    if (g.cls_attn) flags |= kGridHasAttn;
    if (g.text_sim) flags |= kGridHasText;
    if (g.q_cls) flags |= kGridHasQK;
    w.u16(flags);
    w.u32(static_cast<std::uint32_t>(g.height));
    w.u32(static_cast<std::uint32_t>(g.width));
    w.u32(static_cast<std::uint32_t>(g.dim));
    for (float v : g.features) w.f32(v);
    if (g.cls_attn)
        for (double v : *g.cls_attn) w.f32(static_cast<float>(v));
    if (g.text_sim)
        for (double v : *g.text_sim) w.f32(static_cast<float>(v));
    if (g.q_cls) {
        for (float v : *g.q_cls) w.f32(v);
        for (float v : *g.keys) w.f32(v);
    }
    return w.data();
}

[[nodiscard]] inline FeatureGrid decode_grid(std::string_view data, const std::string& what = "grid file") {
    detail::ByteReader r(data, what);
    if (r.bytes(4, "magic") != "FGRD") r.fail("bad magic (expected \"FGRD\")");
    const auto version = r.u16("version");
    if (version != kGridVersion) r.fail("unsupported version " + std::to_string(version));
    const auto flags = r.u16("flags");
    if ((flags & kGridHasAttn) && (flags & kGridHasQK)) r.fail("flags set both cls_attn (bit0) and q_cls/keys (bit2)");
    if (flags & ~(kGridHasAttn | kGridHasText | kGridHasQK)) r.fail("unknown flag bits " + std::to_string(flags));
    const auto h = r.u32("height");
    const auto w = r.u32("width");
    const auto d = r.u32("dim");
    if (h == 0 || w == 0 || d == 0) r.fail("zero grid dimension");
    const std::uint64_t cells = static_cast<std::uint64_t>(h) * w;
    std::uint64_t floats = cells * d;
    if (flags & kGridHasAttn) floats += cells;
    if (flags & kGridHasText) floats += cells;
    if (flags & kGridHasQK) floats += d + cells * d;
    if (floats * 4 != r.remaining())
        r.fail("payload size mismatch: expected " + std::to_string(floats * 4) + " bytes, got " +
               std::to_string(r.remaining()));
    FeatureGrid g(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
    for (float& v : g.features) v = r.f32("features");
    auto read_map = [&](std::string_view field) {
        std::vector<double> m(cells);
        for (double& v : m) v = r.f32(field);
        return m;
    };
    if (flags & kGridHasAttn) g.cls_attn = read_map("cls_attn");
    if (flags & kGridHasText) g.text_sim = read_map("text_sim");
    if (flags & kGridHasQK) {
        g.q_cls.emplace(d);
        for (float& v : *g.q_cls) v = r.f32("q_cls");
        g.keys.emplace(cells * d);
        for (float& v : *g.keys) v = r.f32("keys");
    }
    try {
        validate(g);
    } catch (const InvalidInput& e) {
        throw FormatError(what + ": " + e.what());
    }
    return g;
}

inline void write_grid(const FeatureGrid& g, const std::filesystem::path& path) {
    write_file_atomic(path, encode_grid(g));
}

[[nodiscard]] inline FeatureGrid read_grid(const std::filesystem::path& path) {
    return decode_grid(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Sequence file

inline constexpr std::uint16_t kSequenceVersion = 1;

[[nodiscard]] inline std::string encode_sequence(const fusion::CompressedSequence& seq, bool scaled) {
    detail::ByteWriter w;
    w.bytes("DCSQ");
    w.u16(kSequenceVersion);
    w.u16(scaled ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(seq.n_max));
    w.u32(static_cast<std::uint32_t>(seq.tokens.size()));
    w.u32(static_cast<std::uint32_t>(seq.dim));
    w.f64(seq.lambda_used);
    w.f64(seq.rho_used);
    for (const auto& t : seq.tokens) {
        if (t.vector.size() != static_cast<std::size_t>(seq.dim)) throw InvalidInput("token dimension mismatch");
        w.i32(t.cell ? t.cell->row : -1);
        w.i32(t.cell ? t.cell->col : -1);
        w.i32(t.cluster_id);
        w.u8(static_cast<std::uint8_t>(t.stream));
        w.u8(t.is_anchor ? 1 : 0);
        w.f64(t.weight);
        for (double v : t.vector) w.f32(static_cast<float>(v));
    }
    return w.data();
}

// Vectors come back at f32 precision.
[[nodiscard]] inline fusion::CompressedSequence decode_sequence(std::string_view data,
                                                                const std::string& what = "sequence file") {
    detail::ByteReader r(data, what);
    if (r.bytes(4, "magic") != "DCSQ") r.fail("bad magic (expected \"DCSQ\")");
    if (const auto v = r.u16("version"); v != kSequenceVersion) r.fail("unsupported version " + std::to_string(v));
    (void)r.u16("flags");
    fusion::CompressedSequence seq;
    seq.n_max = r.u32("n_max");
    const auto count = r.u32("count");
    seq.dim = static_cast<int>(r.u32("dim"));
    seq.lambda_used = r.f64("lambda");
    seq.rho_used = r.f64("rho");
    const std::uint64_t per_token = 4 + 4 + 4 + 1 + 1 + 8 + 4ull * static_cast<std::uint64_t>(seq.dim);
    if (per_token * count != r.remaining())
        r.fail("payload size mismatch: expected " + std::to_string(per_token * count) + " bytes, got " +
               std::to_string(r.remaining()));
    seq.tokens.resize(count);
    for (auto& t : seq.tokens) {
        const int row = r.i32("row");
        const int col = r.i32("col");
        if (row >= 0 && col >= 0) t.cell = Cell{row, col};
        t.cluster_id = r.i32("cluster_id");
        const auto stream = r.u8("stream");
        if (stream > 1) r.fail("invalid stream tag " + std::to_string(stream));
        t.stream = static_cast<fusion::Stream>(stream);
        t.is_anchor = r.u8("is_anchor") != 0;
        t.weight = r.f64("weight");
        t.vector.resize(static_cast<std::size_t>(seq.dim));
        for (double& v : t.vector) v = r.f32("vector");
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Router model file

inline constexpr std::uint16_t kModelVersion = 1;

[[nodiscard]] inline std::string encode_model(const RouterModel& m) {
    detail::ByteWriter w;
    w.bytes("DCRT");
    w.u16(kModelVersion);
    w.f64(m.rho_min);
    const auto dims = m.dims();
    w.u32(static_cast<std::uint32_t>(dims.input));
    w.u32(static_cast<std::uint32_t>(dims.hidden1));
    w.u32(static_cast<std::uint32_t>(dims.hidden2));
    m.for_each_layer([&](const DenseLayer& l) {
        for (double v : l.weights) w.f64(v);
        for (double v : l.bias) w.f64(v);
    });
    return w.data();
}

[[nodiscard]] inline RouterModel decode_model(std::string_view data, const std::string& what = "model file") {
    detail::ByteReader r(data, what);
    if (r.bytes(4, "magic") != "DCRT") r.fail("bad magic (expected \"DCRT\")");
    if (const auto v = r.u16("version"); v != kModelVersion) r.fail("unsupported version " + std::to_string(v));
    const double rho_min = r.f64("rho_min");
    if (!(rho_min > 0.0 && rho_min <= 1.0)) r.fail("rho_min outside (0,1]");
    RouterDims dims;
    dims.input = static_cast<int>(r.u32("input dim"));
    dims.hidden1 = static_cast<int>(r.u32("hidden1 dim"));
    dims.hidden2 = static_cast<int>(r.u32("hidden2 dim"));
    if (dims.input <= 0 || dims.hidden1 <= 0 || dims.hidden2 <= 0) r.fail("non-positive layer dimension");
    RouterModel m(dims, rho_min);
    if (m.param_count() * 8 != r.remaining())
        r.fail("payload size mismatch: expected " + std::to_string(m.param_count() * 8) + " bytes, got " +
               std::to_string(r.remaining()));
    m.for_each_layer([&](DenseLayer& l) {
        for (double& v : l.weights) v = r.f64("weights");
        for (double& v : l.bias) v = r.f64("bias");
    });
    bool finite = true;
    m.for_each_layer([&](const DenseLayer& l) {
        finite = finite && all_finite(std::span<const double>(l.weights)) && all_finite(std::span<const double>(l.bias));
    });
    if (!finite) throw FormatError(what + ": model contains non-finite weights");
    return m;
}

inline void write_model(const RouterModel& m, const std::filesystem::path& path) {
    write_file_atomic(path, encode_model(m));
}

[[nodiscard]] inline RouterModel read_model(const std::filesystem::path& path) {
    return decode_model(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Label file: one JSON object per line with keys text, lambda_llm (nullable),
// lambda_rule, rho_gt. alpha is configuration, not stored per record.

[[nodiscard]] inline std::vector<LabelRecord> parse_labels(std::istream& in, double alpha, double rho_min,
                                                           const std::string& what = "label file") {
    std::vector<LabelRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = what + ":" + std::to_string(lineno);
        try {
            const auto j = nlohmann::json::parse(line);
            std::optional<double> llm;
            if (j.contains("lambda_llm") && !j.at("lambda_llm").is_null()) llm = j.at("lambda_llm").get<double>();
            out.push_back(make_label(j.at("text").get<std::string>(), j.at("lambda_rule").get<double>(), llm, alpha,
                                     j.at("rho_gt").get<double>(), rho_min));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return out;
}

[[nodiscard]] inline std::string format_labels(const std::vector<LabelRecord>& labels) {
    std::string out;
    for (const auto& l : labels) {
        nlohmann::json j;
        j["text"] = l.text;
        j["lambda_llm"] = l.lambda_llm ? nlohmann::json(*l.lambda_llm) : nlohmann::json(nullptr);
        j["lambda_rule"] = l.lambda_rule;
        j["rho_gt"] = l.rho_gt;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace dualcomp::io
