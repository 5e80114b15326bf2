#pragma once

// Model checkpoint, little-endian:
//   "XAUDCKPT"           8-byte magic
//   u32 version          (1)
//   i32 input_size
//   u32 conv count; per conv: i32 filters, i32 kernel, i32 stride, u8 pool
//   i32 hidden_units
//   u8  head             (0 softmax, 1 linear scalar)
//   i32 class_count
//   u8  normalization    (0 per_image_zscore, 1 global_minmax, 2 raw)
//   u8  use_calibration
//   f64 lo, f64 hi
//   u64 seed
//   u64 weight count, then that many f64 weights

#include <span>
#include <vector>

#include "xaudit/binio.hpp"
#include "xaudit/model.hpp"

namespace xaudit {

inline constexpr std::string_view kCheckpointMagic = "XAUDCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> write_checkpoint(const PrototypeModel& m) {
    validate(m);
    ByteWriter w;
    w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
    w.u32(kCheckpointVersion);
    w.i32(m.arch.input_size);
    w.u32(static_cast<std::uint32_t>(m.arch.conv_layers.size()));
    for (const auto& c : m.arch.conv_layers) {
        w.i32(c.filters);
        w.i32(c.kernel);
        w.i32(c.stride);
        w.u8(c.pool ? 1 : 0);
    }
    w.i32(m.arch.hidden_units);
    w.u8(m.arch.head == Head::Softmax ? 0 : 1);
    w.i32(m.arch.class_count);
    w.u8(static_cast<std::uint8_t>(m.input.normalization));
    w.u8(m.input.use_calibration ? 1 : 0);
    w.f64(m.input.lo);
    w.f64(m.input.hi);
    w.u64(m.seed);
    w.u64(m.weights.size());
    for (double v : m.weights) w.f64(v);
    return w.take();
}

inline PrototypeModel read_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "checkpoint");
    r.expect(kCheckpointMagic);
    const auto version = r.u32();
    require(version == kCheckpointVersion, ErrorKind::BadMagic, "unsupported checkpoint version " + std::to_string(version));
    PrototypeModel m;
    m.arch.input_size = r.i32();
    const auto n_conv = r.u32();
    require(n_conv < 1024, ErrorKind::ArchError, "implausible conv layer count");
    for (std::uint32_t i = 0; i < n_conv; ++i) {
        ConvSpec c;
        c.filters = r.i32();
        c.kernel = r.i32();
        c.stride = r.i32();
        c.pool = r.u8() != 0;
        m.arch.conv_layers.push_back(c);
    }
    m.arch.hidden_units = r.i32();
    const auto head = r.u8();
    require(head <= 1, ErrorKind::ArchError, "unknown head kind");
    m.arch.head = head == 0 ? Head::Softmax : Head::LinearScalar;
    m.arch.class_count = r.i32();
    const auto norm = r.u8();
    require(norm <= 2, ErrorKind::ArchError, "unknown normalization");
    m.input.normalization = static_cast<Normalization>(norm);
    m.input.use_calibration = r.u8() != 0;
    m.input.lo = r.f64();
    m.input.hi = r.f64();
    m.seed = r.u64();
    const auto count = r.u64();
    const Layout L = compute_layout(m.arch);
    require(count == L.weight_count, ErrorKind::ArchError, "checkpoint weight count does not match architecture");
    m.weights.resize(count);
    for (auto& v : m.weights) v = r.f64();
    require(r.at_end(), ErrorKind::SchemaError, "trailing bytes after checkpoint payload");
    validate(m);
    return m;
}

inline std::string model_id(const PrototypeModel& m) {
    Fnv1a h;
    h.update(write_checkpoint(m));
    return "model-" + h.hex();
}

}  // namespace xaudit
