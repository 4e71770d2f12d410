#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "polyrl/curriculum.hpp"

using namespace polyrl;

namespace {

std::map<ResourceTier, std::vector<BenchInstance>> toy_pools(int per_tier) {
    std::map<ResourceTier, std::vector<BenchInstance>> pools;
    const std::map<ResourceTier, LanguageCode> lang = {
        {ResourceTier::High, LanguageCode::French},
        {ResourceTier::Medium, LanguageCode::Korean},
        {ResourceTier::Low, LanguageCode::Yoruba}};
    for (const auto& [tier, lc] : lang) {
        for (int i = 0; i < per_tier; ++i) {
            BenchInstance inst;
            inst.id = std::string(tier_name(tier)) + "-" + std::to_string(i);
            inst.language = lc;
            inst.question = "q";
            inst.gold_answer = "a";
            pools[tier].push_back(inst);
        }
    }
    return pools;
}

} // namespace

TEST_CASE("tier_of matches the pinned partition") {
    CHECK(tier_of(LanguageCode::French) == ResourceTier::High);
    CHECK(tier_of(LanguageCode::Japanese) == ResourceTier::High);
    CHECK(tier_of(LanguageCode::Spanish) == ResourceTier::High);
    CHECK(tier_of(LanguageCode::Vietnamese) == ResourceTier::High);
    CHECK(tier_of(LanguageCode::Korean) == ResourceTier::Medium);
    CHECK(tier_of(LanguageCode::Thai) == ResourceTier::Medium);
    CHECK(tier_of(LanguageCode::Turkish) == ResourceTier::Medium);
    CHECK(tier_of(LanguageCode::Bengali) == ResourceTier::Medium);
    CHECK(tier_of(LanguageCode::Amharic) == ResourceTier::Low);
    CHECK(tier_of(LanguageCode::Yoruba) == ResourceTier::Low);
    CHECK(tier_of(LanguageCode::Hausa) == ResourceTier::Low);
    CHECK(tier_of(LanguageCode::Hindi) == ResourceTier::Low);
    CHECK(tier_of(LanguageCode::Swahili) == ResourceTier::Low);
}

TEST_CASE("phase distributions expand the retention recursion") {
    const auto p1 = phase_distribution(1, 0.85);
    CHECK(p1[0] == 1.0);
    CHECK(p1[1] == 0.0);
    CHECK(p1[2] == 0.0);

    const auto p2 = phase_distribution(2, 0.85);
    CHECK(std::abs(p2[0] - 0.85) <= 1e-15);
    CHECK(std::abs(p2[1] - 0.15) <= 1e-15);
    CHECK(p2[2] == 0.0);

    const auto p3 = phase_distribution(3, 0.85);
    CHECK(std::abs(p3[0] - 0.7225) <= 1e-15);
    CHECK(std::abs(p3[1] - 0.1275) <= 1e-15);
    CHECK(std::abs(p3[2] - 0.15) <= 1e-15);
}

TEST_CASE("distributions sum to one and respect introduction order") {
    for (double alpha : {0.0, 0.25, 0.5, 0.85, 1.0}) {
        for (int phase = 1; phase <= 3; ++phase) {
            const auto d = phase_distribution(phase, alpha);
            CHECK(std::abs(d[0] + d[1] + d[2] - 1.0) <= 1e-12);
            if (phase < 2) CHECK(d[1] == 0.0);
            if (phase < 3) CHECK(d[2] == 0.0);
        }
    }
    // monotone introduction: positive mass from a tier's phase onward (0<alpha<1)
    for (double alpha : {0.25, 0.5, 0.85}) {
        for (int phase = 1; phase <= 3; ++phase) {
            const auto d = phase_distribution(phase, alpha);
            if (phase >= 2) CHECK(d[1] > 0.0);
            if (phase >= 3) CHECK(d[2] > 0.0);
        }
    }
}

TEST_CASE("retention recursion gives High mass alpha^(i-1)") {
    for (double alpha : {0.3, 0.85, 0.99}) {
        for (int phase = 1; phase <= 3; ++phase) {
            const auto d = phase_distribution(phase, alpha);
            CHECK(d[0] == doctest::Approx(std::pow(alpha, phase - 1)).epsilon(1e-12));
        }
    }
}

TEST_CASE("phase-3 distribution cross-checked by Monte Carlo") {
    const auto d = phase_distribution(3, 0.85);
    util::Rng rng(2024);
    const int n = 1'000'000;
    std::array<int, 3> counts{};
    for (int i = 0; i < n; ++i) {
        const double u = util::uniform_double(rng);
        if (u < d[0])
            ++counts[0];
        else if (u < d[0] + d[1])
            ++counts[1];
        else
            ++counts[2];
    }
    CHECK(std::abs(counts[0] / static_cast<double>(n) - 0.7225) < 0.005);
    CHECK(std::abs(counts[1] / static_cast<double>(n) - 0.1275) < 0.005);
    CHECK(std::abs(counts[2] / static_cast<double>(n) - 0.15) < 0.005);
}

TEST_CASE("alpha 0 puts all mass on the newest tier") {
    const auto d = phase_distribution(2, 0.0);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 1.0);
}

TEST_CASE("sampler: phase 1 draws only High-tier instances") {
    const auto pools = toy_pools(10);
    CurriculumPhase phase;
    phase.index = 1;
    const auto batch = sample_batch(phase, pools, 64, 7);
    REQUIRE(batch.size() == 64);
    for (const auto& inst : batch)
        CHECK(tier_of(inst.language) == ResourceTier::High);
}

TEST_CASE("sampler: alpha 0 at phase 2 draws only Medium") {
    const auto pools = toy_pools(10);
    CurriculumPhase phase;
    phase.index = 2;
    phase.alpha = 0.0;
    const auto batch = sample_batch(phase, pools, 32, 7);
    for (const auto& inst : batch)
        CHECK(tier_of(inst.language) == ResourceTier::Medium);
}

TEST_CASE("sampler tier frequencies match the distribution within 3 sigma") {
    const auto pools = toy_pools(25);
    TierSampler sampler(toy_pools(25), 99);
    const auto dist = phase_distribution(2, 0.85);
    const int batches = 10'000, batch_size = 16;
    long medium = 0;
    for (int b = 0; b < batches; ++b) {
        for (const auto& inst : sampler.sample_batch(dist, batch_size))
            if (tier_of(inst.language) == ResourceTier::Medium) ++medium;
    }
    const double n = static_cast<double>(batches) * batch_size;
    const double p = 0.15;
    const double sigma = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(medium - n * p) < 3.0 * sigma);
}

TEST_CASE("sampler walks each tier pool uniformly") {
    TierSampler sampler(toy_pools(10), 3);
    const TierDistribution dist{1.0, 0.0, 0.0};
    std::map<std::string, int> counts;
    for (int b = 0; b < 100; ++b)
        for (const auto& inst : sampler.sample_batch(dist, 10)) ++counts[inst.id];
    // without-replacement epochs give perfectly even coverage
    for (const auto& [id, n] : counts) CHECK(n == 100);
}

TEST_CASE("sampler is deterministic in the seed") {
    const auto pools = toy_pools(10);
    CurriculumPhase phase;
    phase.index = 3;
    const auto a = sample_batch(phase, pools, 20, 11);
    const auto b = sample_batch(phase, pools, 20, 11);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
}

TEST_CASE("sampler errors on empty required pools") {
    auto pools = toy_pools(10);
    pools[ResourceTier::Medium].clear();
    CurriculumPhase phase;
    phase.index = 2;
    CHECK_THROWS_AS(sample_batch(phase, pools, 8, 1), Error);
    // the empty Medium pool is irrelevant during phase 1
    phase.index = 1;
    CHECK_NOTHROW(sample_batch(phase, pools, 8, 1));
}

TEST_CASE("plateau: improving histories are not flat") {
    PlateauDetector det{5, 0.005, 2};
    std::vector<double> rising;
    for (int i = 0; i < 40; ++i) rising.push_back(0.01 * i);
    CHECK_FALSE(plateau(rising, det));
}

TEST_CASE("plateau: constant history of sufficient length fires") {
    PlateauDetector det{5, 0.005, 2};
    CHECK(plateau(std::vector<double>(15, 0.4), det));
    // too short for a verdict
    CHECK_FALSE(plateau(std::vector<double>(14, 0.4), det));
}

TEST_CASE("plateau: hand-computed window example") {
    PlateauDetector det{20, 0.005, 2};
    std::vector<double> history;
    for (int i = 0; i < 20; ++i) history.push_back(0.2);
    for (int i = 0; i < 20; ++i) history.push_back(0.21);
    for (int i = 0; i < 20; ++i) history.push_back(0.212);
    for (int i = 0; i < 20; ++i) history.push_back(0.213);
    // window means 0.21, 0.212, 0.213: improvements 0.002 and 0.001 < 0.005
    CHECK(plateau(history, det));

    // a jump of at least delta in the last window breaks the plateau
    std::vector<double> recovered = history;
    for (int i = 0; i < 20; ++i) recovered[recovered.size() - 20 + i] = 0.22;
    CHECK_FALSE(plateau(recovered, det));
}

TEST_CASE("curriculum state advances High -> Medium -> Low and then errors") {
    CurriculumSchedule schedule;
    schedule.step_budgets = {3, 3, 3};
    schedule.detector = {1, 0.0, 1}; // plateau effectively disabled by delta 0
    CurriculumState state(schedule);

    CHECK(state.phase().index == 1);
    CHECK(state.phase().new_tier == ResourceTier::High);
    for (int i = 0; i < 3; ++i) state.record_reward(0.1 * i);
    CHECK(state.should_advance()); // budget exhausted without plateau
    state.advance();
    CHECK(state.phase().index == 2);
    CHECK(state.phase().new_tier == ResourceTier::Medium);
    CHECK(state.history().empty()); // reward history reset

    for (int i = 0; i < 3; ++i) state.record_reward(0.5);
    state.advance();
    CHECK(state.phase().index == 3);
    CHECK(state.phase().new_tier == ResourceTier::Low);
    CHECK_FALSE(state.has_next_phase());
    CHECK_THROWS_AS(state.advance(), Error);
}

TEST_CASE("phase-1 plateau leads to the documented phase-2 distribution") {
    CurriculumSchedule schedule;
    schedule.detector = {2, 0.005, 1};
    CurriculumState state(schedule);
    state.record_reward(0.5);
    state.record_reward(0.5);
    state.record_reward(0.5);
    state.record_reward(0.5);
    CHECK(state.should_advance()); // plateau fired
    state.advance();
    const auto d = state.distribution();
    CHECK(d[0] == doctest::Approx(0.85));
    CHECK(d[1] == doctest::Approx(0.15));
}

TEST_CASE("schedule serialization round trip") {
    CurriculumSchedule schedule;
    schedule.alpha = 0.8;
    schedule.step_budgets = {10, 20, 30};
    schedule.detector = {7, 0.01, 2};
    const auto round = CurriculumSchedule::from_json(schedule.to_json());
    CHECK(round.alpha == 0.8);
    CHECK(round.step_budgets == std::array<int, 3>{10, 20, 30});
    CHECK(round.detector.window == 7);
    CHECK(round.detector.min_delta == 0.01);
    CHECK(round.detector.patience == 2);

    CHECK_THROWS_AS(CurriculumSchedule::from_json("{}"), Error);
}
