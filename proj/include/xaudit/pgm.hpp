#pragma once

// Binary portable graymap ("P5") codec, 8 and 16 bit.

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xaudit/image.hpp"

namespace xaudit {

namespace detail {

class PgmHeaderReader {
public:
    explicit PgmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    std::uint64_t read_uint(const char* what) {
        skip_space_and_comments();
        if (pos_ >= bytes_.size()) fail(ErrorKind::TruncatedPayload, std::string("header ends before ") + what);
        if (!std::isdigit(bytes_[pos_])) fail(ErrorKind::MalformedHeader, std::string("expected ") + what);
        std::uint64_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 0xFFFF'FFFFULL) fail(ErrorKind::MalformedHeader, std::string(what) + " too large");
            ++pos_;
        }
        return value;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline ImageSlice parse_pgm(std::span<const std::uint8_t> bytes, std::string id = {}) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail(ErrorKind::BadMagic, "not a binary PGM (P5)");
    detail::PgmHeaderReader reader(bytes);
    reader.advance(2);
    if (reader.pos() < bytes.size() && !std::isspace(bytes[reader.pos()]) && bytes[reader.pos()] != '#')
        fail(ErrorKind::BadMagic, "magic not followed by whitespace");

    ImageSlice slice;
    slice.id = std::move(id);
    const auto width = reader.read_uint("width");
    const auto height = reader.read_uint("height");
    const auto maxval = reader.read_uint("max value");
    if (width == 0 || height == 0) fail(ErrorKind::MalformedHeader, "zero image dimension");
    if (maxval != 255 && maxval != 65535) fail(ErrorKind::UnsupportedMaxVal, "max value " + std::to_string(maxval));
    if (reader.pos() >= bytes.size() || !std::isspace(bytes[reader.pos()]))
        fail(ErrorKind::TruncatedPayload, "missing whitespace after max value");
    reader.advance(1);

    slice.width = static_cast<int>(width);
    slice.height = static_cast<int>(height);
    slice.max_value = static_cast<std::uint32_t>(maxval);
    const std::size_t count = static_cast<std::size_t>(width) * height;
    const std::size_t sample_bytes = maxval == 255 ? 1 : 2;
    const std::size_t available = bytes.size() - reader.pos();
    if (available < count * sample_bytes)
        fail(ErrorKind::TruncatedPayload, "need " + std::to_string(count * sample_bytes) + " payload bytes, have " +
                                              std::to_string(available));

    slice.pixels.resize(count);
    const std::uint8_t* payload = bytes.data() + reader.pos();
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t v = sample_bytes == 1 ? payload[i]
                                                  : (static_cast<std::uint32_t>(payload[2 * i]) << 8) | payload[2 * i + 1];
        if (v > maxval) fail(ErrorKind::ValueOverflow, "sample " + std::to_string(v) + " above max value");
        slice.pixels[i] = static_cast<std::uint16_t>(v);
    }
    return slice;
}

// Canonical encoding: "P5\n<w> <h>\n<maxval>\n" followed by raw samples.
inline std::vector<std::uint8_t> write_pgm(const ImageSlice& slice) {
    validate(slice);
    const std::string header = "P5\n" + std::to_string(slice.width) + " " + std::to_string(slice.height) + "\n" +
                               std::to_string(slice.max_value) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    if (slice.max_value == 255) {
        out.reserve(out.size() + slice.pixels.size());
        for (auto p : slice.pixels) out.push_back(static_cast<std::uint8_t>(p));
    } else {
        out.reserve(out.size() + 2 * slice.pixels.size());
        for (auto p : slice.pixels) {
            out.push_back(static_cast<std::uint8_t>(p >> 8));
            out.push_back(static_cast<std::uint8_t>(p & 0xFF));
        }
    }
    return out;
}

}  // namespace xaudit
