#pragma once

// On-disk dataset layout:
//   <root>/manifest.json
//   <root>/images/<id>.pgm

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xaudit/manifest.hpp"
#include "xaudit/parallel.hpp"
#include "xaudit/pgm.hpp"

namespace xaudit {

struct CalibratedImage {
    std::string source_id;
    int width = 0;
    int height = 0;
    std::vector<double> values;  // slope * pixel + intercept
};

inline CalibratedImage apply_calibration(const ImageSlice& slice, const CalibrationMeta& meta) {
    CalibratedImage out{slice.id, slice.width, slice.height, {}};
    out.values.resize(slice.pixels.size());
    for (std::size_t i = 0; i < slice.pixels.size(); ++i)
        out.values[i] = meta.slope * static_cast<double>(slice.pixels[i]) + meta.intercept;
    return out;
}

struct Dataset {
    DatasetManifest manifest;
    std::vector<ImageSlice> images;  // manifest order
    std::vector<std::string> warnings;

    std::size_t size() const { return images.size(); }
};

inline std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::IoError, "write failed for '" + path.string() + "'");
}

inline Dataset load_dataset(const std::filesystem::path& root, unsigned workers = 1) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.manifest = load_manifest(read_text_file((root / "manifest.json").string()));

    const fs::path image_dir = root / "images";
    for (const auto& e : ds.manifest.entries)
        if (!fs::is_regular_file(image_dir / (e.id + ".pgm"))) fail(ErrorKind::MissingImage, e.id);

    ds.images.resize(ds.manifest.entries.size());
    parallel_for(ds.images.size(), workers, [&](std::size_t i) {
        const auto& id = ds.manifest.entries[i].id;
        const auto bytes = read_binary_file(image_dir / (id + ".pgm"));
        try {
            ds.images[i] = parse_pgm(bytes, id);
        } catch (const Error& err) {
            throw Error(err.kind(), "image '" + id + "': " + err.detail());
        }
    });

    std::set<std::string> known;
    for (const auto& e : ds.manifest.entries) known.insert(e.id + ".pgm");
    if (fs::is_directory(image_dir)) {
        std::vector<std::string> extra;
        for (const auto& f : fs::directory_iterator(image_dir)) {
            const auto name = f.path().filename().string();
            if (!known.count(name)) extra.push_back(name);
        }
        std::sort(extra.begin(), extra.end());
        for (const auto& name : extra) ds.warnings.push_back("ignored file not in manifest: images/" + name);
    }
    return ds;
}

inline void write_dataset(const std::filesystem::path& root, const Dataset& ds) {
    namespace fs = std::filesystem;
    require(ds.images.size() == ds.manifest.entries.size(), ErrorKind::InvalidArgument,
            "dataset image count does not match manifest");
    validate(ds.manifest);
    fs::create_directories(root / "images");
    write_text_file((root / "manifest.json").string(), write_manifest(ds.manifest));
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        require(ds.images[i].id == ds.manifest.entries[i].id, ErrorKind::InvalidArgument,
                "image order does not match manifest at " + std::to_string(i));
        write_binary_file(root / "images" / (ds.images[i].id + ".pgm"), write_pgm(ds.images[i]));
    }
}

inline std::size_t find_entry(const DatasetManifest& m, const std::string& id) {
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        if (m.entries[i].id == id) return i;
    return m.entries.size();
}

// FNV-1a 64-bit, rendered as 16 hex digits.
class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001B3ULL;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    void update(const std::vector<std::uint8_t>& v) { update(v.data(), v.size()); }
    std::string hex() const {
        std::ostringstream ss;
        ss << std::hex << std::setw(16) << std::setfill('0') << hash_;
        return ss.str();
    }

private:
    std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

// Content identity of a dataset: hash of the canonical manifest and images.
inline std::string dataset_id(const Dataset& ds) {
    Fnv1a h;
    h.update(write_manifest(ds.manifest));
    for (const auto& img : ds.images) h.update(write_pgm(img));
    return "ds-" + h.hex();
}

}  // namespace xaudit
