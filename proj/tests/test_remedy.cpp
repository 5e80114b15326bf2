#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "xaudit/remedy.hpp"
#include "xaudit/synthgen.hpp"

using namespace xaudit;

namespace {

Dataset noise_dataset(std::size_t n, int size = 64, std::uint64_t seed = 1) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> u(100, 1000);
    Dataset ds;
    ds.manifest.class_count = 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "img" + std::to_string(i);
        ds.manifest.entries.push_back({id, static_cast<double>(i % 2), {}});
        ImageSlice s{id, size, size, 65535, std::vector<std::uint16_t>(static_cast<std::size_t>(size) * size)};
        for (auto& p : s.pixels) p = static_cast<std::uint16_t>(u(gen));
        ds.images.push_back(std::move(s));
    }
    return ds;
}

AuditFinding finding(const std::string& image, RegionMask region, double severity) {
    AuditFinding f;
    f.image_id = image;
    f.kind = region.kind;
    f.severity = severity;
    f.region = std::move(region);
    return f;
}

RegionMask padding_region(int size, int left, int right) {
    RegionMask r{IssueKind::PaddingConfound, Mask(size, size), Json{{"left", left}, {"right", right}, {"top", 0}, {"bottom", 0}}};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (x < left || x >= size - right) r.mask.set(x, y);
    return r;
}

RegionMask square_region(IssueKind k, int size, int x0, int y0, int side) {
    RegionMask r{k, Mask(size, size), Json::object()};
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) r.mask.set(x, y);
    return r;
}

RegionMask full_region(int size) { return {IssueKind::CalibrationShift, Mask(size, size, true), Json::object()}; }

AuditReport report_of(const Dataset& ds, std::vector<AuditFinding> findings) {
    AuditReport r;
    r.dataset = dataset_id(ds);
    r.image_count = ds.size();
    r.findings = std::move(findings);
    r.aggregates = compute_aggregates(r.findings, r.image_count, r.s_flag);
    return r;
}

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

}  // namespace

TEST(Plan, EmptyReportGivesEmptyPlan) {
    const auto ds = noise_dataset(3);
    EXPECT_TRUE(plan_remediation(report_of(ds, {}), RemediationPolicy::defaults()).actions.empty());
}

TEST(Plan, OnePaddingFinding) {
    const auto ds = noise_dataset(3);
    const auto plan = plan_remediation(report_of(ds, {finding("img1", padding_region(64, 6, 6), 0.4)}),
                                       RemediationPolicy::defaults());
    ASSERT_EQ(plan.actions.size(), 1u);
    EXPECT_EQ(plan.actions[0].action, Action::CropPadding);
    EXPECT_EQ(plan.actions[0].findings, (std::vector<std::string>{"img1:padding"}));
}

TEST(Plan, ThresholdOneDropsEverythingBelowOne) {
    const auto ds = noise_dataset(3);
    auto policy = RemediationPolicy::defaults();
    policy.severity_threshold = 1.0;
    const auto plan = plan_remediation(report_of(ds, {finding("img0", padding_region(64, 6, 6), 0.99),
                                                      finding("img1", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.5)}),
                                       policy);
    EXPECT_TRUE(plan.actions.empty());
}

TEST(Plan, PolicyGap) {
    const auto ds = noise_dataset(2);
    auto policy = RemediationPolicy::defaults();
    policy.actions.erase(IssueKind::CornerMarker);
    EXPECT_EQ(error_of([&] {
                  plan_remediation(report_of(ds, {finding("img0", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.9)}),
                                   policy);
              }),
              ErrorKind::PolicyGap);
}

TEST(Plan, OrderingAndExclusionAbsorbsOtherFindings) {
    const auto ds = noise_dataset(3);
    const auto plan = plan_remediation(
        report_of(ds, {finding("img2", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.9),
                       finding("img2", padding_region(64, 3, 3), 0.5), finding("img0", full_region(64), 1.0),
                       finding("img0", padding_region(64, 6, 6), 0.5)}),
        RemediationPolicy::defaults());
    ASSERT_EQ(plan.actions.size(), 3u);
    EXPECT_EQ(plan.actions[0].image_id, "img0");
    EXPECT_EQ(plan.actions[0].action, Action::Exclude);
    EXPECT_EQ(plan.actions[0].findings.size(), 2u);
    EXPECT_EQ(plan.actions[1].action, Action::CropPadding);
    EXPECT_EQ(plan.actions[2].action, Action::MaskRegion);
}

TEST(Plan, EveryActionCitesAQualifyingFinding) {
    const auto ds = noise_dataset(10);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<AuditFinding> findings;
    for (int i = 0; i < 10; ++i) {
        const std::string id = "img" + std::to_string(i);
        findings.push_back(finding(id, padding_region(64, 4, 4), u(gen)));
        findings.push_back(finding(id, square_region(IssueKind::CornerMarker, 64, 56, 56, 8), u(gen)));
        findings.push_back(finding(id, square_region(IssueKind::PatientTable, 64, 10, 50, 4), u(gen)));
    }
    const auto report = report_of(ds, findings);
    const auto plan = plan_remediation(report, RemediationPolicy::defaults());
    std::map<std::string, double> severity;
    for (const auto& f : report.findings) severity[f.id()] = f.severity;
    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
        const auto& a = plan.actions[i];
        ASSERT_FALSE(a.findings.empty());
        for (const auto& id : a.findings) EXPECT_GE(severity.at(id), 0.25);
        if (i > 0 && plan.actions[i - 1].image_id == a.image_id) {
            EXPECT_LE(static_cast<int>(plan.actions[i - 1].action), static_cast<int>(a.action));
        }
    }
}

TEST(Apply, EmptyPlanIsIdentity) {
    const auto ds = noise_dataset(4);
    const auto out = apply_remediation(ds, plan_remediation(report_of(ds, {}), RemediationPolicy::defaults()));
    EXPECT_EQ(out.dataset.images, ds.images);
    EXPECT_EQ(out.dataset.manifest, ds.manifest);
    EXPECT_EQ(dataset_id(out.dataset), dataset_id(ds));
    EXPECT_TRUE(out.log.entries.empty());
}

TEST(Apply, CropSixColumnsEachSide) {
    const auto ds = noise_dataset(1);
    const auto plan = plan_remediation(report_of(ds, {finding("img0", padding_region(64, 6, 6), 0.5)}),
                                       RemediationPolicy::defaults());
    const auto out = apply_remediation(ds, plan);
    const auto& img = out.dataset.images[0];
    EXPECT_EQ(img.width, 52);
    EXPECT_EQ(img.height, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 52; ++x) EXPECT_EQ(img.at(x, y), ds.images[0].at(x + 6, y));
    ASSERT_EQ(out.log.entries.size(), 1u);
    EXPECT_EQ(out.log.entries[0].before.width, 64);
    EXPECT_EQ(out.log.entries[0].after.width, 52);
}

TEST(Apply, MaskUsesLowerMedianOfTheRestAndShiftsAfterCrop) {
    const auto ds = noise_dataset(1);
    const auto plan = plan_remediation(report_of(ds, {finding("img0", padding_region(64, 6, 6), 0.5),
                                                      finding("img0", square_region(IssueKind::CornerMarker, 64, 6, 0, 8), 0.9)}),
                                       RemediationPolicy::defaults());
    const auto out = apply_remediation(ds, plan);
    const auto& img = out.dataset.images[0];
    std::vector<std::uint16_t> rest;
    for (int y = 0; y < 64; ++y)
        for (int x = 6; x < 58; ++x)
            if (!(x < 14 && y < 8)) rest.push_back(ds.images[0].at(x, y));
    std::sort(rest.begin(), rest.end());
    const auto median = rest[(rest.size() - 1) / 2];
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 52; ++x) EXPECT_EQ(img.at(x, y), x < 8 && y < 8 ? median : ds.images[0].at(x + 6, y));
    EXPECT_EQ(out.log.entries[1].params["fill"], median);
}

TEST(Apply, ConstantFill) {
    const auto ds = noise_dataset(1);
    auto policy = RemediationPolicy::defaults();
    policy.fill = {true, 7.0};
    const auto plan = plan_remediation(report_of(ds, {finding("img0", square_region(IssueKind::PatientTable, 64, 0, 50, 4), 0.9)}),
                                       policy);
    const auto out = apply_remediation(ds, plan, policy.fill);
    for (int y = 50; y < 54; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_EQ(out.dataset.images[0].at(x, y), 7);
}

TEST(Apply, ExcludeRemovesEntryAndImage) {
    const auto ds = noise_dataset(4);
    const auto plan = plan_remediation(report_of(ds, {finding("img1", full_region(64), 1.0)}), RemediationPolicy::defaults());
    const auto out = apply_remediation(ds, plan);
    ASSERT_EQ(out.dataset.size(), 3u);
    for (const auto& e : out.dataset.manifest.entries) EXPECT_NE(e.id, "img1");
    for (const auto& s : out.dataset.images) EXPECT_NE(s.id, "img1");
    const auto n = std::count_if(out.log.entries.begin(), out.log.entries.end(),
                                 [](const ProvenanceEntry& e) { return e.image_id == "img1" && e.excluded; });
    EXPECT_EQ(n, 1);
}

TEST(Apply, Errors) {
    const auto ds = noise_dataset(2);
    const auto other = noise_dataset(3);
    const auto plan = plan_remediation(report_of(other, {finding("img2", padding_region(64, 6, 6), 0.5)}),
                                       RemediationPolicy::defaults());
    EXPECT_EQ(error_of([&] { apply_remediation(ds, plan); }), ErrorKind::UnknownImage);
    const auto wide = plan_remediation(report_of(ds, {finding("img0", padding_region(64, 32, 32), 0.5)}),
                                       RemediationPolicy::defaults());
    EXPECT_EQ(error_of([&] { apply_remediation(ds, wide); }), ErrorKind::GeometryError);
}

TEST(Apply, RecalibrateKeepsPhysicalValues) {
    auto ds = noise_dataset(4);
    ds.manifest.entries[1].calibration.intercept = -500;
    for (auto& p : ds.images[1].pixels) p = static_cast<std::uint16_t>(p + 500);
    auto report = report_of(ds, {finding("img1", full_region(64), 1.0)});
    report.calibration = Json{{"metadata", {{"clusters", Json::array({Json::array({1.0, 0.0}), Json::array({1.0, -500.0})})},
                                            {"reference_cluster", 0}}}};
    auto policy = RemediationPolicy::defaults();
    policy.actions[IssueKind::CalibrationShift] = Action::Recalibrate;
    const auto out = apply_remediation(ds, plan_remediation(report, policy));
    EXPECT_EQ(out.dataset.manifest.entries[1].calibration, CalibrationMeta{});
    const auto before = apply_calibration(ds.images[1], ds.manifest.entries[1].calibration);
    const auto after = apply_calibration(out.dataset.images[1], out.dataset.manifest.entries[1].calibration);
    EXPECT_EQ(before.values, after.values);
}

TEST(Apply, ParallelMatchesSerial) {
    const auto ds = noise_dataset(12);
    std::vector<AuditFinding> findings;
    for (int i = 0; i < 12; ++i) {
        findings.push_back(finding("img" + std::to_string(i), padding_region(64, 3, 5), 0.5));
        findings.push_back(finding("img" + std::to_string(i), square_region(IssueKind::CornerMarker, 64, 3, 0, 8), 0.5));
    }
    const auto plan = plan_remediation(report_of(ds, findings), RemediationPolicy::defaults());
    const auto a = apply_remediation(ds, plan, {}, 1);
    const auto b = apply_remediation(ds, plan, {}, 4);
    EXPECT_EQ(a.dataset.images, b.dataset.images);
    EXPECT_EQ(to_jsonl(a.log), to_jsonl(b.log));
}

// Detector regions applied on synthetic corpora touch nothing else, and the
// remediated images present no further detections.
TEST(Apply, NonDestructiveAndIdempotentOnSyntheticCorpora) {
    for (auto k : {IssueKind::PaddingConfound, IssueKind::CircularArtifact, IssueKind::PatientTable, IssueKind::CornerMarker}) {
        CorpusSpec spec;
        spec.count = 40;
        spec.seed = 5;
        IssueSpec issue;
        issue.kind = k;
        const auto c = generate_corpus(spec, {issue});
        const auto& ds = c.dataset;
        std::vector<AuditFinding> findings;
        for (const auto& img : ds.images)
            for (auto& r : detect_regions(img, {})) findings.push_back(finding(img.id, std::move(r), 1.0));
        const auto plan = plan_remediation(report_of(ds, findings), RemediationPolicy::defaults());
        ASSERT_FALSE(plan.actions.empty()) << to_string(k);
        const auto out = apply_remediation(ds, plan);
        std::set<std::string> changed;
        for (const auto& e : out.log.entries) changed.insert(e.image_id);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& before = ds.images[i];
            const auto& after = out.dataset.images[i];
            if (!changed.count(before.id)) {
                EXPECT_EQ(after, before);
                continue;
            }
            int dx = 0, dy = 0;
            Mask touched(before.width, before.height);
            for (const auto& a : plan.actions)
                if (a.image_id == before.id) {
                    touched = mask_union(touched, a.region);
                    if (a.action == Action::CropPadding) {
                        dx = a.params["left"];
                        dy = a.params["top"];
                    }
                }
            for (int y = 0; y < after.height; ++y)
                for (int x = 0; x < after.width; ++x)
                    if (!touched.at(x + dx, y + dy)) {
                        EXPECT_EQ(after.at(x, y), before.at(x + dx, y + dy)) << to_string(k);
                    }
            EXPECT_TRUE(detect_regions(after, {}).empty()) << to_string(k) << " " << before.id;
        }
    }
}

TEST(Verify, Examples) {
    const auto ds = noise_dataset(10);
    const auto base = report_of(ds, {finding("img0", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.8),
                                     finding("img1", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.6)});
    const auto same = verify_remediation(base, base);
    EXPECT_EQ(same.verdict, "unchanged");
    for (const auto& d : same.kinds) {
        EXPECT_EQ(d.flagged_after - d.flagged_before, 0.0);
        EXPECT_EQ(d.severity_after - d.severity_before, 0.0);
    }
    const auto better = report_of(ds, {finding("img0", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.05),
                                       finding("img1", square_region(IssueKind::CornerMarker, 64, 0, 0, 8), 0.02)});
    EXPECT_EQ(verify_remediation(base, better).verdict, "improved");
    auto worse = better;
    worse.findings.push_back(finding("img4", square_region(IssueKind::PatientTable, 64, 0, 50, 4), 0.9));
    worse.aggregates = compute_aggregates(worse.findings, worse.image_count, worse.s_flag);
    EXPECT_EQ(verify_remediation(base, worse).verdict, "regressed");
    auto other = base;
    other.dataset = "dataset-other";
    EXPECT_EQ(verify_remediation(base, other).verdict, "unchanged");
    other.config = Json{{"method", "grad_input"}};
    EXPECT_EQ(error_of([&] { verify_remediation(base, other); }), ErrorKind::DatasetMismatch);
}

TEST(Policy, JsonRoundTripAndValidation) {
    auto p = RemediationPolicy::defaults();
    p.severity_threshold = 0.4;
    p.fill = {true, 12.0};
    const auto back = policy_from_json(to_json(p));
    EXPECT_EQ(to_json(back), to_json(p));
    EXPECT_THROW(policy_from_json(Json{{"actions", {{"corner_marker", "crop_padding"}}}}), Error);
    EXPECT_THROW(policy_from_json(Json{{"actions", {{"calibration_shift", "mask_region"}}}}), Error);
    EXPECT_THROW(policy_from_json(Json{{"severity_threshold", 1.5}}), Error);
    EXPECT_THROW(policy_from_json(Json{{"bogus", 1}}), Error);
    const auto gap = policy_from_json(Json{{"actions", {{"corner_marker", nullptr}}}});
    EXPECT_FALSE(gap.actions.count(IssueKind::CornerMarker));
}

TEST(Provenance, JsonLinesOnePerAction) {
    const auto ds = noise_dataset(3);
    const auto plan = plan_remediation(report_of(ds, {finding("img0", padding_region(64, 6, 6), 0.5),
                                                      finding("img2", full_region(64), 1.0)}),
                                       RemediationPolicy::defaults());
    const auto out = apply_remediation(ds, plan);
    const auto text = to_jsonl(out.log);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    const auto first = Json::parse(text.substr(0, text.find('\n')));
    EXPECT_EQ(first["sequence"], 0);
    EXPECT_EQ(first["action"], "crop_padding");
    EXPECT_EQ(first["pixels_changed"], 12 * 64);
}
