#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "xaudit/explain.hpp"

using namespace xaudit;

namespace {

PrototypeModel affine_scalar(int size, const std::vector<double>& w, double bias = 0.0) {
    ArchSpec a;
    a.input_size = size;
    a.conv_layers.clear();
    a.hidden_units = 0;
    a.head = Head::LinearScalar;
    a.class_count = 1;
    PrototypeModel m;
    m.arch = a;
    m.weights = w;
    m.weights.push_back(bias);
    return m;
}

PrototypeModel constant_model(int size) {
    auto m = init_model(ArchSpec::default_for(size, Task::Classification), 1);
    std::fill(m.weights.begin(), m.weights.end(), 0.0);
    m.weights.back() = 0.7;
    return m;
}

Plane positive_plane(int size, std::mt19937_64& gen) {
    Plane p(size, size);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (auto& v : p.values) v = u(gen);
    return p;
}

AttributionMap map_of(int w, int h, std::vector<double> values) {
    return AttributionMap{w, h, std::move(values), AttributionMethod::Occlusion, "m", 0};
}

std::vector<std::size_t> cell_indices(const CriticalSet& s, int grid) {
    std::vector<std::size_t> out;
    for (const auto& c : s.patches) out.push_back(static_cast<std::size_t>(c.row * grid + c.col));
    return out;
}

}  // namespace

TEST(Occlusion, ConstantModelGivesZeroMap) {
    std::mt19937_64 gen(1);
    const auto m = constant_model(32);
    const auto x = oracle::random_plane(32, gen);
    for (auto b : {Baseline::Zero, Baseline::LocalMean, Baseline::DatasetMean}) {
        const Plane mean(32, 32, 0.3);
        const auto map = occlusion_map(m, x, {8, 4, b}, 0, &mean);
        for (double v : map.values) EXPECT_EQ(v, 0.0);
    }
}

TEST(Occlusion, AffineDropIsPatchSumInsideRegion) {
    const int S = 16;
    std::vector<double> w(S * S, 0.0);
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) w[static_cast<std::size_t>(y * S + x)] = 1.0;
    const auto m = affine_scalar(S, w);
    std::mt19937_64 gen(2);
    const auto img = positive_plane(S, gen);
    const auto map = occlusion_map(m, img, {4, 4, Baseline::Zero}, kRegressionTarget);
    for (int py = 0; py < S; py += 4)
        for (int px = 0; px < S; px += 4) {
            double expected = 0.0;
            for (int y = py; y < py + 4; ++y)
                for (int x = px; x < px + 4; ++x) expected += w[static_cast<std::size_t>(y * S + x)] * img.at(x, y);
            for (int y = py; y < py + 4; ++y)
                for (int x = px; x < px + 4; ++x) EXPECT_NEAR(map.values[static_cast<std::size_t>(y * S + x)], expected, 1e-9);
        }
}

TEST(Occlusion, SinglePatchIsConstant) {
    std::mt19937_64 gen(3);
    const auto m = oracle::random_model(oracle::random_arch(gen), gen);
    const int S = m.arch.input_size;
    const auto x = oracle::random_plane(S, gen);
    const int target = m.arch.head == Head::Softmax ? 0 : kRegressionTarget;
    const auto map = occlusion_map(m, x, {S, S, Baseline::Zero}, target);
    const TargetScorer scorer(m, target);
    const double expected = std::max(scorer.score(x.values) - scorer.score(Plane(S, S).values), 0.0);
    for (double v : map.values) EXPECT_DOUBLE_EQ(v, expected);
}

TEST(Occlusion, NonNegativeFiniteAndLocal) {
    std::mt19937_64 gen(4);
    const int S = 16;
    for (int t = 0; t < 10; ++t) {
        oracle::IndicatorScorer s = oracle::random_indicator(gen);
        const auto m = s.model();
        const auto x = positive_plane(S, gen);
        const auto map = occlusion_map(m, x, {2, 2, Baseline::Zero}, 1);
        for (int y = 0; y < S; ++y)
            for (int xx = 0; xx < S; ++xx) {
                const double v = map.values[static_cast<std::size_t>(y * S + xx)];
                EXPECT_TRUE(std::isfinite(v));
                EXPECT_GE(v, 0.0);
                if (s.cell_weight[static_cast<std::size_t>((y / 2) * 8 + xx / 2)] == 0.0) {
                    EXPECT_EQ(v, 0.0);
                }
            }
    }
}

TEST(Occlusion, Errors) {
    const auto m = constant_model(32);
    EXPECT_THROW(occlusion_map(m, Plane(16, 16), {}, 0), Error);
    EXPECT_THROW(occlusion_map(m, Plane(32, 32), {4, 8, Baseline::Zero}, 0), Error);
    EXPECT_THROW(occlusion_map(m, Plane(32, 32), {8, 4, Baseline::DatasetMean}, 0), Error);
}

TEST(Occlusion, WorkerCountDoesNotChangeMap) {
    std::mt19937_64 gen(5);
    const auto m = init_model(ArchSpec::default_for(32, Task::Classification), 3);
    const auto x = oracle::random_plane(32, gen);
    const Plane mean(32, 32, 0.1);
    EXPECT_EQ(occlusion_map(m, x, {}, 1, &mean, 1).values, occlusion_map(m, x, {}, 1, &mean, 4).values);
}

TEST(Saliency, ZeroImageAndAffine) {
    std::mt19937_64 gen(6);
    const auto rm = init_model(ArchSpec::default_for(32, Task::Classification), 1);
    for (double v : saliency_map(rm, Plane(32, 32), 0).values) EXPECT_EQ(v, 0.0);

    std::vector<double> w(64);
    std::normal_distribution<double> nd;
    for (auto& v : w) v = nd(gen);
    const auto m = affine_scalar(8, w, 0.3);
    const auto x = oracle::random_plane(8, gen);
    const auto map = saliency_map(m, x, kRegressionTarget);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(map.values[i], std::abs(w[i] * x.values[i]), 1e-15);
}

TEST(Saliency, MatchesFiniteDifferenceOracle) {
    std::mt19937_64 gen(7);
    for (int t = 0; t < 10; ++t) {
        const auto m = oracle::random_model(oracle::random_arch(gen), gen);
        const int S = m.arch.input_size;
        const int target = m.arch.head == Head::Softmax ? 0 : kRegressionTarget;
        const int out_index = std::max(target, 0);
        auto x = oracle::random_plane(S, gen);
        const auto map = saliency_map(m, x, target);
        const Layout L = compute_layout(m.arch);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double x0 = x.values[i], h = 1e-4;
            x.values[i] = x0 + h;
            const double up = forward_outputs(L, m.weights, x.values)[static_cast<std::size_t>(out_index)];
            x.values[i] = x0 - h;
            const double down = forward_outputs(L, m.weights, x.values)[static_cast<std::size_t>(out_index)];
            x.values[i] = x0;
            const double fd = std::abs((up - down) / (2 * h) * x0);
            if (std::abs(map.values[i] - fd) > 1e-3 * std::max({map.values[i], fd, 1e-6})) {
                // Central differences straddling a ReLU switch are not gradients.
                const double mid = forward_outputs(L, m.weights, x.values)[static_cast<std::size_t>(out_index)];
                const double fwd = (up - mid) / h, bwd = (mid - down) / h;
                EXPECT_GT(std::abs(fwd - bwd), 1e-3 * std::max({std::abs(fwd), std::abs(bwd), 1e-3}))
                    << "config " << t << " pixel " << i;
            }
        }
    }
}

TEST(MethodAgreement, AffineArgmax) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> w(100);
        for (auto& v : w) v = u(gen);
        const auto m = affine_scalar(10, w);
        const auto x = positive_plane(10, gen);
        const auto occ = occlusion_map(m, x, {1, 1, Baseline::Zero}, kRegressionTarget);
        const auto sal = saliency_map(m, x, kRegressionTarget);
        EXPECT_EQ(std::max_element(occ.values.begin(), occ.values.end()) - occ.values.begin(),
                  std::max_element(sal.values.begin(), sal.values.end()) - sal.values.begin());
    }
}

TEST(CriticalFactors, SingleCellIndicator) {
    oracle::IndicatorScorer s;
    s.cell_weight.assign(64, 0.0);
    s.cell_weight[19] = 5.0;
    s.bias = -3.0;
    const auto m = s.model();
    const Plane x(16, 16, 1.0);
    const auto out = critical_factors(m, x, 2, 0.5, Plane(16, 16));
    ASSERT_TRUE(std::holds_alternative<CriticalSet>(out));
    const auto& set = std::get<CriticalSet>(out);
    ASSERT_EQ(set.patches.size(), 1u);
    EXPECT_EQ(set.patches[0], (GridCell{2, 3, 2}));
}

TEST(CriticalFactors, ConstantModelNotReachable) {
    const auto m = constant_model(32);
    const auto out = critical_factors(m, Plane(32, 32, 1.0), 8, 0.5, Plane(32, 32));
    EXPECT_TRUE(std::holds_alternative<NotReachable>(out));
}

TEST(CriticalFactors, GreedyMatchesExhaustiveMinimum) {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> gamma_dist(0.2, 0.8);
    int reached = 0;
    for (int t = 0; t < 200; ++t) {
        const auto s = oracle::random_indicator(gen);
        const auto m = s.model();
        const Plane x(16, 16, 1.0);
        const double gamma = gamma_dist(gen);
        const auto expected = oracle::exhaustive_min_critical(s, x, gamma);
        const auto out = critical_factors(m, x, 2, gamma, Plane(16, 16));
        if (!expected) {
            EXPECT_TRUE(std::holds_alternative<NotReachable>(out)) << "instance " << t;
            continue;
        }
        ASSERT_TRUE(std::holds_alternative<CriticalSet>(out)) << "instance " << t;
        ++reached;
        const auto cells = cell_indices(std::get<CriticalSet>(out), 8);
        EXPECT_EQ(cells.size(), *expected) << "instance " << t;
        const double p0 = oracle::class1_probability(m, x);
        EXPECT_LE(oracle::class1_probability(m, oracle::occlude_cells(x, cells, 8, 2)), gamma * p0);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            EXPECT_NE(s.cell_weight[cells[i]], 0.0);
            auto rest = cells;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
            if (rest.empty()) continue;
            EXPECT_GT(oracle::class1_probability(m, oracle::occlude_cells(x, rest, 8, 2)), gamma * p0);
        }
    }
    EXPECT_GT(reached, 100);
}

TEST(CriticalFactors, ContractOnRandomModels) {
    std::mt19937_64 gen(10);
    for (int t = 0; t < 10; ++t) {
        const auto m = init_model(ArchSpec::default_for(16, Task::Classification), gen());
        const auto x = oracle::random_plane(16, gen);
        const Plane base(16, 16);
        const auto out = critical_factors(m, x, 4, 0.5, base, 2);
        if (!std::holds_alternative<CriticalSet>(out)) continue;
        const auto& set = std::get<CriticalSet>(out);
        EXPECT_LE(set.resulting_confidence, 0.5 * set.original_confidence);
        auto sorted = set.patches;
        std::sort(sorted.begin(), sorted.end());
        EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    }
}

TEST(CriticalFactors, BadArguments) {
    const auto m = constant_model(32);
    EXPECT_THROW(critical_factors(m, Plane(32, 32), 5, 0.5, Plane(32, 32)), Error);
    EXPECT_THROW(critical_factors(m, Plane(32, 32), 8, 1.0, Plane(32, 32)), Error);
}

TEST(Binarize, Examples) {
    const auto uniform = binarize(map_of(4, 4, std::vector<double>(16, 2.0)), 0.5);
    EXPECT_EQ(uniform.count(), 16u);
    EXPECT_EQ(binarize(map_of(4, 4, std::vector<double>(16, 0.0)), 0.5).count(), 0u);
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = 1.0 + i;
    std::mt19937_64 gen(11);
    std::shuffle(v.begin(), v.end(), gen);
    EXPECT_EQ(binarize(map_of(10, 10, v), 0.9).count(), 10u);
}

TEST(Binarize, MatchesRankOracle) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const int w = 1 + static_cast<int>(gen() % 12), h = 1 + static_cast<int>(gen() % 12);
        std::vector<double> values(static_cast<std::size_t>(w * h));
        for (auto& v : values) v = gen() % 3 == 0 ? 0.0 : std::round(u(gen) * 20) / 4;
        const double q = 0.05 + 0.9 * u(gen);
        const auto mask = binarize(map_of(w, h, values), q);
        std::size_t n = 0;
        for (double v : values) n += v > 0.0;
        const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(n)));
        for (std::size_t i = 0; i < values.size(); ++i) {
            // Kept iff more than k positives are <= it (k clamped to n - 1).
            std::size_t at_or_below = 0;
            for (double o : values)
                if (o > 0.0 && o <= values[i]) ++at_or_below;
            const bool expected = values[i] > 0.0 && at_or_below > std::min(k, n - 1);
            EXPECT_EQ(mask.bits[i] != 0, expected) << "case " << t;
        }
    }
}

TEST(MassFraction, Examples) {
    const auto m = map_of(4, 4, std::vector<double>(16, 3.0));
    Mask all(4, 4);
    for (auto& b : all.bits) b = 1;
    EXPECT_EQ(mass_fraction(m, all), 1.0);
    Mask quarter(4, 4);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) quarter.set(x, y);
    EXPECT_DOUBLE_EQ(mass_fraction(m, quarter), 0.25);
    try {
        mass_fraction(map_of(4, 4, std::vector<double>(16, 0.0)), all);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroMass);
    }
    EXPECT_THROW(mass_fraction(m, Mask(2, 2)), Error);
}

TEST(MassFraction, PartitionAdditivity) {
    std::mt19937_64 gen(13);
    std::exponential_distribution<double> ex(1.0);
    for (int t = 0; t < 200; ++t) {
        const int w = 2 + static_cast<int>(gen() % 30), h = 2 + static_cast<int>(gen() % 30);
        std::vector<double> v(static_cast<std::size_t>(w * h));
        for (auto& x : v) x = ex(gen);
        const auto map = map_of(w, h, v);
        const int k = 1 + static_cast<int>(gen() % 6);
        std::vector<Mask> parts(static_cast<std::size_t>(k), Mask(w, h));
        for (std::size_t i = 0; i < v.size(); ++i) parts[gen() % static_cast<std::size_t>(k)].bits[i] = 1;
        double sum = 0.0;
        for (const auto& p : parts) sum += mass_fraction(map, p);
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(AttributionIo, RoundTripAndPreview) {
    std::mt19937_64 gen(14);
    AttributionMap m = map_of(5, 3, {});
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (int i = 0; i < 15; ++i) m.values.push_back(u(gen));
    m.method = AttributionMethod::GradInput;
    m.target = 1;
    const auto back = read_attribution(write_attribution(m));
    EXPECT_EQ(back.width, 5);
    EXPECT_EQ(back.method, AttributionMethod::GradInput);
    EXPECT_EQ(back.image_id, "m");
    for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(m.values[i])));
    const auto preview = attribution_preview(m);
    EXPECT_EQ(*std::max_element(preview.pixels.begin(), preview.pixels.end()), 255);
}

TEST(ImageGrid, ResampledMapsStayNonNegative) {
    std::mt19937_64 gen(15);
    auto m = map_of(8, 8, {});
    for (int i = 0; i < 64; ++i) m.values.push_back(gen() % 2 ? 0.0 : 1.0);
    const auto r = to_image_grid(m, 13, 21);
    EXPECT_EQ(r.width, 13);
    EXPECT_EQ(r.values.size(), 13u * 21u);
    for (double v : r.values) EXPECT_GE(v, 0.0);
}
