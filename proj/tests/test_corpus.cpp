#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "xaudit/dataset.hpp"
#include "xaudit/pgm.hpp"
#include "xaudit/rle.hpp"

using namespace xaudit;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

template <class Fn>
ErrorKind error_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::InvalidArgument;
}

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("xaudit_corpus_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ImageSlice random_slice(std::mt19937& gen, const std::string& id) {
    std::uniform_int_distribution<int> dim(1, 17);
    const bool wide = gen() % 2;
    ImageSlice s{id, dim(gen), dim(gen), wide ? 65535u : 255u, {}};
    std::uniform_int_distribution<int> px(0, static_cast<int>(s.max_value));
    s.pixels.resize(static_cast<std::size_t>(s.width) * s.height);
    for (auto& p : s.pixels) p = static_cast<std::uint16_t>(px(gen));
    return s;
}

}  // namespace

TEST(Pgm, MinimalFile) {
    const auto s = parse_pgm(bytes(std::string("P5 1 1 255 ") + '\0'), "a");
    EXPECT_EQ(s.width, 1);
    EXPECT_EQ(s.height, 1);
    EXPECT_EQ(s.max_value, 255u);
    ASSERT_EQ(s.pixels.size(), 1u);
    EXPECT_EQ(s.pixels[0], 0);
}

TEST(Pgm, CanonicalEncoding) {
    const ImageSlice s{"a", 1, 1, 255, {7}};
    EXPECT_EQ(write_pgm(s), bytes(std::string("P5\n1 1\n255\n") + '\x07'));
}

TEST(Pgm, SixteenBitIsBigEndian) {
    const ImageSlice s{"a", 1, 1, 65535, {256}};
    const auto b = write_pgm(s);
    ASSERT_GE(b.size(), 2u);
    EXPECT_EQ(b[b.size() - 2], 0x01);
    EXPECT_EQ(b[b.size() - 1], 0x00);
}

TEST(Pgm, TruncatedSixteenBitPayload) {
    EXPECT_EQ(error_of([] { parse_pgm(bytes("P5 2 2 65535\n" + std::string(7, 'x')), "a"); }), ErrorKind::TruncatedPayload);
}

TEST(Pgm, Errors) {
    EXPECT_EQ(error_of([] { parse_pgm(bytes("P2 1 1 255\n0"), "a"); }), ErrorKind::BadMagic);
    EXPECT_EQ(error_of([] { parse_pgm(bytes("P5 1 1 1000\n00"), "a"); }), ErrorKind::UnsupportedMaxVal);
    EXPECT_EQ(error_of([] { parse_pgm(bytes("P5 1 x 255\n0"), "a"); }), ErrorKind::MalformedHeader);
}

TEST(Pgm, CommentsInHeader) {
    auto b = bytes("P5 # comment\n2 # w\n1\n255\n");
    b.push_back(3);
    b.push_back(4);
    const auto s = parse_pgm(b, "a");
    EXPECT_EQ(s.width, 2);
    EXPECT_EQ(s.pixels, (std::vector<std::uint16_t>{3, 4}));
}

TEST(Pgm, ValueOverflowOnWrite) {
    const ImageSlice bad{"a", 1, 1, 255, {300}};
    EXPECT_EQ(error_of([&] { write_pgm(bad); }), ErrorKind::ValueOverflow);
}

TEST(Pgm, RoundTripProperty) {
    std::mt19937 gen(11);
    for (int i = 0; i < 200; ++i) {
        const auto s = random_slice(gen, "s" + std::to_string(i));
        const auto b = write_pgm(s);
        const auto back = parse_pgm(b, s.id);
        EXPECT_EQ(back, s);
        EXPECT_EQ(write_pgm(back), b);
    }
}

TEST(Manifest, MinimalClassification) {
    const auto m = load_manifest(R"({"task":"classification","class_count":2,"entries":[
        {"id":"a","label":0,"calibration":{"slope":1,"intercept":0,"declared_range":null}},
        {"id":"b","label":1,"calibration":{"slope":1,"intercept":0,"declared_range":[-1024,3071]}}]})");
    EXPECT_EQ(m.entries.size(), 2u);
    EXPECT_EQ(m.task, Task::Classification);
    ASSERT_TRUE(m.entries[1].calibration.declared_range.has_value());
    EXPECT_EQ(m.entries[1].calibration.declared_range->second, 3071.0);
}

TEST(Manifest, Errors) {
    const std::string cal = R"("calibration":{"slope":1,"intercept":0,"declared_range":null})";
    EXPECT_EQ(error_of([&] {
                  load_manifest(R"({"task":"classification","class_count":2,"entries":[{"id":"a","label":3,)" + cal + "}]}");
              }),
              ErrorKind::LabelOutOfRange);
    EXPECT_EQ(error_of([&] {
                  load_manifest(R"({"task":"classification","class_count":2,"entries":[{"id":"a","label":0,)" + cal +
                                R"(},{"id":"a","label":1,)" + cal + "}]}");
              }),
              ErrorKind::DuplicateId);
    EXPECT_EQ(error_of([&] { load_manifest(R"({"task":"classification","class_count":2})"); }), ErrorKind::SchemaError);
    EXPECT_EQ(error_of([&] {
                  load_manifest(R"({"task":"classification","class_count":2,"extra":1,"entries":[]})");
              }),
              ErrorKind::SchemaError);
    EXPECT_EQ(error_of([&] {
                  load_manifest(R"({"task":"classification","class_count":2,"entries":[{"id":"a","label":0,"calibration":{"slope":0,"intercept":0,"declared_range":null}}]})");
              }),
              ErrorKind::SchemaError);
    EXPECT_EQ(error_of([&] {
                  load_manifest(R"({"task":"classification","class_count":2,"entries":[{"id":"a","label":0.5,)" + cal + "}]}");
              }),
              ErrorKind::SchemaError);
}

TEST(Manifest, RegressionRoundTrip) {
    DatasetManifest m;
    m.task = Task::Regression;
    m.entries = {{"r1", 0.25, {}}, {"r2", -3.5, {2.0, -1024.0, std::make_pair(-1024.0, 3071.0)}}};
    const auto back = load_manifest(write_manifest(m));
    EXPECT_EQ(back.entries, m.entries);
    EXPECT_EQ(back.task, Task::Regression);
}

TEST(Calibration, Arithmetic) {
    const ImageSlice s{"a", 3, 1, 65535, {1000, 0, 5}};
    const auto id = apply_calibration(s, {});
    EXPECT_EQ(id.values, (std::vector<double>{1000, 0, 5}));
    const auto c = apply_calibration(s, {1.0, -1024.0, std::nullopt});
    EXPECT_DOUBLE_EQ(c.values[0], -24.0);
}

TEST(Calibration, MonotoneForPositiveSlope) {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> slope(0.01, 10.0), icpt(-5000, 5000);
    for (int t = 0; t < 50; ++t) {
        const auto s = random_slice(gen, "m");
        const CalibrationMeta meta{slope(gen), icpt(gen), std::nullopt};
        const auto c = apply_calibration(s, meta);
        for (std::size_t i = 0; i < s.pixels.size(); ++i) {
            EXPECT_EQ(c.values[i], meta.slope * s.pixels[i] + meta.intercept);
            for (std::size_t j = 0; j < s.pixels.size(); ++j)
                if (s.pixels[i] < s.pixels[j]) {
                    EXPECT_LT(c.values[i], c.values[j]);
                }
        }
    }
}

TEST(Dataset, LoadInManifestOrderWithOrphanWarning) {
    const auto root = temp_dir("load");
    Dataset ds;
    ds.manifest.class_count = 2;
    for (const char* id : {"c", "a", "b"}) {
        ds.manifest.entries.push_back({id, 1, {}});
        ds.images.push_back({id, 2, 2, 255, {1, 2, 3, 4}});
    }
    write_dataset(root, ds);
    write_binary_file(root / "images" / "orphan.pgm", write_pgm({"orphan", 1, 1, 255, {0}}));
    const auto back = load_dataset(root, 3);
    ASSERT_EQ(back.images.size(), 3u);
    EXPECT_EQ(back.images[0].id, "c");
    EXPECT_EQ(back.images[2].id, "b");
    ASSERT_EQ(back.warnings.size(), 1u);
    EXPECT_NE(back.warnings[0].find("orphan.pgm"), std::string::npos);
    const auto again = load_dataset(root, 1);
    EXPECT_EQ(again.images, back.images);
    EXPECT_EQ(again.manifest, back.manifest);
    EXPECT_EQ(dataset_id(again), dataset_id(back));
}

TEST(Dataset, MissingImage) {
    const auto root = temp_dir("missing");
    Dataset ds;
    ds.manifest.entries.push_back({"x", 0, {}});
    ds.images.push_back({"x", 1, 1, 255, {0}});
    write_dataset(root, ds);
    fs::remove(root / "images" / "x.pgm");
    try {
        load_dataset(root);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingImage);
        EXPECT_EQ(e.detail(), "x");
    }
}

TEST(Rle, RoundTripAndLeadingZeroRun) {
    Mask m(4, 2);
    m.set(0, 0);
    m.set(1, 0);
    m.set(3, 1);
    const auto runs = rle_encode(m);
    EXPECT_EQ(runs, (std::vector<std::uint32_t>{0, 2, 5, 1}));
    EXPECT_EQ(rle_decode(runs, 4, 2), m);
    std::mt19937 gen(3);
    for (int t = 0; t < 100; ++t) {
        Mask r(1 + static_cast<int>(gen() % 20), 1 + static_cast<int>(gen() % 20));
        for (auto& b : r.bits) b = gen() % 3 == 0;
        EXPECT_EQ(rle_decode(rle_encode(r), r.width, r.height), r);
    }
    EXPECT_THROW(rle_decode({3}, 2, 2), Error);
}
