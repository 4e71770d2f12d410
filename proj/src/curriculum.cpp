#include "polyrl/curriculum.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>

namespace polyrl {

using nlohmann::json;

ResourceTier tier_of(LanguageCode language) {
    switch (language) {
        case LanguageCode::French:
        case LanguageCode::Japanese:
        case LanguageCode::Spanish:
        case LanguageCode::Vietnamese:
            return ResourceTier::High;
        case LanguageCode::Korean:
        case LanguageCode::Thai:
        case LanguageCode::Turkish:
        case LanguageCode::Bengali:
            return ResourceTier::Medium;
        case LanguageCode::Amharic:
        case LanguageCode::Yoruba:
        case LanguageCode::Hausa:
        case LanguageCode::Hindi:
        case LanguageCode::Swahili:
            return ResourceTier::Low;
    }
    throw data_error("unknown language");
}

TierDistribution phase_distribution(int phase_index, double alpha) {
    if (phase_index < 1 || phase_index > 3)
        throw config_error("phase index must be in [1,3]");
    if (alpha < 0.0 || alpha > 1.0)
        throw config_error("alpha must be in [0,1]");

    TierDistribution dist{0.0, 0.0, 0.0};
    dist[static_cast<std::size_t>(ResourceTier::High)] = 1.0;
    static const std::array<ResourceTier, 3> intro = {
        ResourceTier::High, ResourceTier::Medium, ResourceTier::Low};
    for (int i = 2; i <= phase_index; ++i) {
        for (auto& p : dist) p *= alpha;
        dist[static_cast<std::size_t>(intro[static_cast<std::size_t>(i - 1)])] +=
            1.0 - alpha;
    }
    return dist;
}

void PlateauDetector::validate() const {
    if (window < 1) throw config_error("plateau window must be >= 1");
    if (min_delta < 0.0) throw config_error("plateau min_delta must be >= 0");
    if (patience < 1) throw config_error("plateau patience must be >= 1");
}

bool plateau(const std::vector<double>& reward_history, const PlateauDetector& detector) {
    detector.validate();
    const std::size_t w = static_cast<std::size_t>(detector.window);
    const std::size_t needed = w * static_cast<std::size_t>(detector.patience + 1);
    if (reward_history.size() < needed) return false;

    // Window means over the trailing W*(P+1) steps.
    const std::size_t base = reward_history.size() - needed;
    std::vector<double> means(static_cast<std::size_t>(detector.patience) + 1);
    for (std::size_t k = 0; k < means.size(); ++k) {
        const auto begin = reward_history.begin() + static_cast<std::ptrdiff_t>(base + k * w);
        means[k] = std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(w), 0.0) /
                   static_cast<double>(w);
    }
    for (std::size_t k = 1; k < means.size(); ++k)
        if (means[k] - means[k - 1] >= detector.min_delta) return false;
    return true;
}

std::vector<CurriculumPhase> CurriculumSchedule::phases() const {
    static const std::array<ResourceTier, 3> intro = {
        ResourceTier::High, ResourceTier::Medium, ResourceTier::Low};
    std::vector<CurriculumPhase> out;
    for (int i = 0; i < 3; ++i) {
        CurriculumPhase p;
        p.index = i + 1;
        p.new_tier = intro[static_cast<std::size_t>(i)];
        p.alpha = alpha;
        p.step_budget = step_budgets[static_cast<std::size_t>(i)];
        out.push_back(p);
    }
    return out;
}

void CurriculumSchedule::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw config_error("alpha must be in [0,1]");
    for (int b : step_budgets)
        if (b < 1) throw config_error("phase step budgets must be >= 1");
    detector.validate();
}

std::string CurriculumSchedule::to_json() const {
    json doc;
    doc["phases"] = json::array();
    for (const auto& p : phases()) {
        doc["phases"].push_back({{"index", p.index},
                                 {"new_tier", std::string(tier_name(p.new_tier))},
                                 {"alpha", p.alpha},
                                 {"step_budget", p.step_budget}});
    }
    doc["detector"] = {{"W", detector.window},
                       {"delta", detector.min_delta},
                       {"patience", detector.patience}};
    return doc.dump(2);
}

CurriculumSchedule CurriculumSchedule::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw data_error(std::string("schedule is not valid JSON: ") + e.what());
    }
    CurriculumSchedule s;
    try {
        const auto& phases = doc.at("phases");
        if (!phases.is_array() || phases.size() != 3)
            throw data_error("schedule must declare exactly 3 phases");
        static const std::array<std::string, 3> expect = {"High", "Medium", "Low"};
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& p = phases[i];
            if (p.at("index").get<int>() != static_cast<int>(i) + 1 ||
                p.at("new_tier").get<std::string>() != expect[i])
                throw data_error("phases must be ordered High, Medium, Low");
            s.step_budgets[i] = p.at("step_budget").get<int>();
            s.alpha = p.at("alpha").get<double>();
        }
        const auto& d = doc.at("detector");
        s.detector.window = d.at("W").get<int>();
        s.detector.min_delta = d.at("delta").get<double>();
        s.detector.patience = d.at("patience").get<int>();
    } catch (const json::exception& e) {
        throw data_error(std::string("malformed schedule: ") + e.what());
    }
    s.validate();
    return s;
}

CurriculumState::CurriculumState(CurriculumSchedule schedule)
    : schedule_(std::move(schedule)), phases_(schedule_.phases()) {
    schedule_.validate();
}

TierDistribution CurriculumState::distribution() const {
    return phase_distribution(phase().index, schedule_.alpha);
}

void CurriculumState::record_reward(double mean_reward) {
    history_.push_back(mean_reward);
    ++steps_in_phase_;
}

bool CurriculumState::should_advance() const {
    if (steps_in_phase_ >= phase().step_budget) return true;
    return plateau(history_, schedule_.detector);
}

void CurriculumState::advance() {
    if (!has_next_phase())
        throw data_error("cannot advance: the Low tier is the final phase");
    ++phase_idx_;
    steps_in_phase_ = 0;
    history_.clear();
}

// --- sampling ---

TierSampler::TierSampler(std::map<ResourceTier, std::vector<BenchInstance>> pools,
                         std::uint64_t seed)
    : pools_(std::move(pools)), rng_(util::mix64(seed ^ 0x7c5f2a3d9e1b4c68ULL)) {
    for (const auto& [tier, pool] : pools_) {
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        order_[tier] = std::move(order);
        cursor_[tier] = pool.size(); // trigger reshuffle on first draw
    }
}

const BenchInstance& TierSampler::draw_from_tier(ResourceTier tier) {
    auto pit = pools_.find(tier);
    if (pit == pools_.end() || pit->second.empty())
        throw data_error("tier " + std::string(tier_name(tier)) +
                         " has an empty pool but positive probability");
    auto& order = order_[tier];
    auto& cur = cursor_[tier];
    if (cur >= order.size()) {
        util::shuffle(order, rng_);
        cur = 0;
    }
    return pit->second[order[cur++]];
}

std::vector<BenchInstance> TierSampler::sample_batch(const TierDistribution& dist,
                                                     int batch_size) {
    double sum = 0.0;
    for (double p : dist) sum += p;
    if (std::fabs(sum - 1.0) > 1e-9)
        throw data_error("tier distribution does not sum to 1");
    for (std::size_t t = 0; t < dist.size(); ++t) {
        if (dist[t] > 0.0) {
            auto tier = static_cast<ResourceTier>(t);
            auto pit = pools_.find(tier);
            if (pit == pools_.end() || pit->second.empty())
                throw data_error("tier " + std::string(tier_name(tier)) +
                                 " has an empty pool but positive probability");
        }
    }

    std::vector<BenchInstance> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const double u = util::uniform_double(rng_);
        double acc = 0.0;
        ResourceTier tier = ResourceTier::Low;
        for (std::size_t t = 0; t < dist.size(); ++t) {
            acc += dist[t];
            if (u < acc) {
                tier = static_cast<ResourceTier>(t);
                break;
            }
        }
        batch.push_back(draw_from_tier(tier));
    }
    return batch;
}

std::vector<BenchInstance>
sample_batch(const CurriculumPhase& phase,
             const std::map<ResourceTier, std::vector<BenchInstance>>& pools,
             int batch_size, std::uint64_t rng_seed) {
    TierSampler sampler(pools, rng_seed);
    return sampler.sample_batch(phase_distribution(phase.index, phase.alpha),
                                batch_size);
}

} // namespace polyrl
