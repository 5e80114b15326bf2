#pragma once

// Run-length encoding for binary masks: row-major, alternating run lengths,
// always starting with a (possibly empty) run of zeros.

#include <cstdint>
#include <vector>

#include "xaudit/image.hpp"

namespace xaudit {

inline std::vector<std::uint32_t> rle_encode(const Mask& mask) {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t length = 0;
    for (auto bit : mask.bits) {
        const std::uint8_t b = bit ? 1 : 0;
        if (b != current) {
            runs.push_back(length);
            current = b;
            length = 0;
        }
        ++length;
    }
    runs.push_back(length);
    return runs;
}

inline Mask rle_decode(const std::vector<std::uint32_t>& runs, int width, int height) {
    Mask mask(width, height);
    std::size_t pos = 0;
    bool value = false;
    for (auto run : runs) {
        require(pos + run <= mask.bits.size(), ErrorKind::SchemaError, "RLE runs exceed mask size");
        if (value) std::fill(mask.bits.begin() + static_cast<std::ptrdiff_t>(pos),
                             mask.bits.begin() + static_cast<std::ptrdiff_t>(pos + run), 1);
        pos += run;
        value = !value;
    }
    require(pos == mask.bits.size(), ErrorKind::SchemaError, "RLE runs do not cover the mask");
    return mask;
}

}  // namespace xaudit
