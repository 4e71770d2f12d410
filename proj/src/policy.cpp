#include "polyrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "polyrl/curriculum.hpp"
#include "polyrl/kernels.hpp"
#include "polyrl/util.hpp"

namespace polyrl {

namespace {

// Language-indexed content tables (LanguageCode enum order: Amharic, Bengali,
// French, Hausa, Hindi, Japanese, Korean, Spanish, Swahili, Thai, Turkish,
// Vietnamese, Yoruba). Answers are target-language-only; thinking fillers mix
// an English pivot with these target-language chunks.

constexpr int kNumKeysInternal = 4;

const std::array<std::array<const char*, kNumKeysInternal>, kNumLanguages> kAnswers = {{
    {"ወቅታዊ ጉንፋን ሳይሆን አይቀርም", "አጣዳፊ የሳንባ ቧንቧ እብጠት ሳይሆን አይቀርም",
     "የቆዳ አለርጂ ሳይሆን አይቀርም", "የእጅ አንጓ ስብራት ሳይሆን አይቀርም"},
    {"সম্ভবত মৌসুমি ফ্লু হয়েছে", "সম্ভবত তীব্র ব্রংকাইটিস হয়েছে",
     "সম্ভবত ত্বকের অ্যালার্জি হয়েছে", "সম্ভবত কবজির হাড় ভেঙেছে"},
    {"une grippe saisonnière est probable", "une bronchite aiguë est probable",
     "une réaction allergique est probable", "une fracture du poignet est probable"},
    {"mura ce mafi yiwuwa", "ciwon huhu ne mafi yiwuwa",
     "kurjin fata ne mafi yiwuwa", "karyewar ƙashi ne mafi yiwuwa"},
    {"मौसमी फ्लू की संभावना है", "तीव्र ब्रोंकाइटिस की संभावना है",
     "त्वचा एलर्जी की संभावना है", "कलाई की हड्डी टूटने की संभावना है"},
    {"季節性インフルエンザの可能性が高い", "急性気管支炎の可能性が高い",
     "皮膚アレルギーの可能性が高い", "手首の骨折の可能性が高い"},
    {"계절성 독감일 가능성이 높습니다", "급성 기관지염일 가능성이 높습니다",
     "피부 알레르기일 가능성이 높습니다", "손목 골절일 가능성이 높습니다"},
    {"una gripe estacional es probable", "una bronquitis aguda es probable",
     "una reacción alérgica es probable", "una fractura de muñeca es probable"},
    {"huenda ni homa ya mafua", "huenda ni ugonjwa wa kifua",
     "huenda ni mzio wa ngozi", "huenda ni mvunjiko wa mfupa"},
    {"น่าจะเป็นไข้หวัดใหญ่ตามฤดูกาล", "น่าจะเป็นหลอดลมอักเสบเฉียบพลัน",
     "น่าจะเป็นภูมิแพ้ผิวหนัง", "น่าจะเป็นกระดูกข้อมือหัก"},
    {"mevsimsel grip olasıdır", "akut bronşit olasıdır",
     "alerjik cilt reaksiyonu olasıdır", "bilek kırığı olasıdır"},
    {"có thể là cúm mùa", "có thể là viêm phế quản cấp",
     "có thể là dị ứng da", "có thể là gãy xương cổ tay"},
    {"àrùn ibà ni ó ṣeé ṣe", "àrùn ikọ́ ẹ̀dọ̀fóró ni ó ṣeé ṣe",
     "àléfọ̀ ara ni ó ṣeé ṣe", "egungun ọwọ́ tó ṣẹ́ ni ó ṣeé ṣe"},
}};

const std::array<std::array<const char*, 5>, kNumLanguages> kLangFillers = {{
    {"የታካሚው ምልክቶች እንደሚከተለው ነው", "ትኩሳቱ በጣም ከፍተኛ ነው", "በዚህ ክሊኒካዊ ሁኔታ",
     "ህመሙ በግልጽ ይታያል", "ይህ አስፈላጊ ምልክት ነው"},
    {"রোগীর লক্ষণগুলো নিম্নরূপ", "জ্বর খুব বেশি", "এই ক্লিনিক্যাল অবস্থায়",
     "ব্যথা স্পষ্টভাবে আছে", "এটি একটি গুরুত্বপূর্ণ লক্ষণ"},
    {"les symptômes du patient", "et la fièvre est présente", "dans ce contexte clinique",
     "une douleur est signalée", "ce qui est très évocateur"},
    {"alamomin majinyacin sune", "zazzaɓin yana da yawa", "a wannan hali na jinya",
     "ciwon yana nan sosai", "wannan yana da muhimmanci"},
    {"रोगी के लक्षण इस प्रकार हैं", "बुखार बहुत तेज़ है", "इस नैदानिक स्थिति में",
     "दर्द स्पष्ट रूप से मौजूद है", "यह एक महत्वपूर्ण संकेत है"},
    {"患者の症状は次のとおりで", "熱が非常に高く", "この臨床状況では",
     "痛みがはっきりしており", "これは重要な所見である"},
    {"환자의 증상은 다음과 같고", "열이 매우 높으며", "이러한 임상 상황에서",
     "통증이 뚜렷하게 나타나고", "이는 매우 중요한 소견이다"},
    {"los síntomas del paciente", "y hay fiebre alta", "en este contexto clínico",
     "el dolor está presente", "esto es muy sugestivo"},
    {"dalili za mgonjwa huyu", "homa iko juu sana", "katika hali hii ya matibabu",
     "maumivu yapo wazi kabisa", "jambo hili ni muhimu sana"},
    {"อาการของผู้ป่วยมีดังนี้", "ไข้สูงมาก", "ในสถานการณ์ทางคลินิกนี้",
     "อาการปวดชัดเจน", "นี่เป็นข้อสังเกตที่สำคัญ"},
    {"hastanın belirtileri şunlardır", "ve ateş çok yüksek", "bu klinik tabloda",
     "ağrı belirgin şekilde mevcut", "bu durum oldukça anlamlıdır"},
    {"các triệu chứng của bệnh nhân", "và sốt rất cao", "trong bối cảnh lâm sàng này",
     "cơn đau rất rõ ràng", "điều này rất đáng chú ý"},
    {"àwọn àmì àìsàn náà", "ibà náà ga púpọ̀", "nínú ipò ìtọ́jú yìí",
     "ìrora náà hàn gbangba", "èyí ṣe pàtàkì púpọ̀"},
}};

const std::array<std::array<const char*, kNumKeysInternal>, kNumLanguages> kSymptoms = {{
    {"ትኩሳት", "ሳል", "ሽፍታ", "ስብራት"},
    {"জ্বর", "কাশি", "ফুসকুড়ি", "হাড় ভাঙা"},
    {"une fièvre persistante", "une toux persistante", "une éruption cutanée",
     "une douleur au poignet"},
    {"zazzaɓi", "tari", "kurji", "karaya"},
    {"बुखार", "खांसी", "चकत्ते", "हड्डी टूटना"},
    {"発熱", "咳", "発疹", "骨折"},
    {"발열", "기침", "발진", "골절"},
    {"fiebre persistente", "tos persistente", "erupción cutánea", "dolor de muñeca"},
    {"homa", "kikohozi", "upele", "mvunjiko"},
    {"ไข้", "ไอ", "ผื่น", "กระดูกหัก"},
    {"ateş", "öksürük", "döküntü", "kırık"},
    {"sốt", "ho", "phát ban", "gãy xương"},
    {"ibà", "ikọ́", "àléfọ̀", "egungun ṣíṣẹ́"},
}};

const std::array<const char*, kNumLanguages> kQuestionStems = {
    "ለዚህ ምልክት በጣም ሊሆን የሚችለው ምርመራ ምንድነው:",
    "এই উপসর্গের জন্য সবচেয়ে সম্ভাব্য রোগ নির্ণয় কী:",
    "Quel est le diagnostic le plus probable devant",
    "Menene cutar da ta fi yiwuwa ga",
    "इस लक्षण के लिए सबसे संभावित निदान क्या है:",
    "次の症状に対して最も可能性の高い診断は何ですか:",
    "다음 증상에 대한 가장 가능성 있는 진단은 무엇입니까:",
    "¿Cuál es el diagnóstico más probable ante",
    "Ni ugonjwa gani unaowezekana zaidi kwa",
    "การวินิจฉัยที่เป็นไปได้มากที่สุดสำหรับอาการ",
    "Şu belirti için en olası tanı nedir:",
    "Chẩn đoán có khả năng nhất cho triệu chứng",
    "Kí ni àrùn tó ṣeé ṣe jùlọ fún",
};

const std::array<const char*, 20> kEnglishFillers = {
    "the",  "patient", "shows",    "signs", "of",      "a",     "high",
    "fever", "and",    "cough",    "this",  "suggests", "an",    "acute",
    "illness", "with", "clear",    "risk",  "likely",  "present",
};

// Neutral padding lexemes bring the vocabulary to exactly 200 tokens.
const std::array<const char*, 49> kPadLexemes = {
    "case", "note", "exam", "dose", "test", "plan", "data", "view", "unit",
    "item", "code", "form", "line", "page", "rate", "sign", "type", "year",
    "zone", "area", "base", "care", "cell", "chart", "claim", "desk", "fact",
    "file", "goal", "grid", "hint", "idea", "lab", "list", "mark", "mode",
    "name", "part", "path", "peak", "rank", "role", "rule", "scan", "site",
    "slot", "task", "term", "level",
};

const std::array<const char*, kNumKeysInternal> kKeyNameTable = {
    "fever", "cough", "rash", "fracture"};

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 0x20);
    return out;
}

} // namespace

const std::array<std::string_view, ToyTask::kNumKeys> ToyTask::kKeyNames = {
    "fever", "cough", "rash", "fracture"};

void ToyVocab::add(const std::string& surface) {
    if (index_.count(surface))
        throw data_error("duplicate vocabulary surface: " + surface);
    index_[surface] = static_cast<int>(surface_.size());
    surface_.push_back(surface);
    const auto words = util::split_ws(surface).size();
    max_lexeme_words_ = std::max(max_lexeme_words_, words);
}

const ToyVocab& ToyVocab::standard() {
    static const ToyVocab vocab = [] {
        ToyVocab v;
        v.add("<s>");
        v.bos_ = 0;
        v.add("</s>");
        v.eos_ = 1;
        v.add("<thinking>");
        v.thinking_open_ = v.index_.at("<thinking>");
        v.add("</thinking>");
        v.thinking_close_ = v.index_.at("</thinking>");
        v.add("<answer>");
        v.answer_open_ = v.index_.at("<answer>");
        v.add("</answer>");
        v.answer_close_ = v.index_.at("</answer>");
        for (int s = 0; s < 4; ++s) {
            const std::string n = std::to_string(s + 1);
            v.add("<step " + n + ">");
            v.step_open_[static_cast<std::size_t>(s)] = v.index_.at("<step " + n + ">");
            v.add("</step " + n + ">");
            v.step_close_[static_cast<std::size_t>(s)] = v.index_.at("</step " + n + ">");
        }
        for (const char* w : kEnglishFillers) v.add(w);
        for (int l = 0; l < kNumLanguages; ++l) {
            for (const char* a : kAnswers[static_cast<std::size_t>(l)]) v.add(a);
            for (const char* f : kLangFillers[static_cast<std::size_t>(l)]) v.add(f);
        }
        for (const char* p : kPadLexemes) v.add(p);
        if (v.size() != 200)
            throw data_error("toy vocabulary must hold exactly 200 tokens, got " +
                             std::to_string(v.size()));
        return v;
    }();
    return vocab;
}

int ToyVocab::id_of(const std::string& text) const {
    auto it = index_.find(text);
    if (it == index_.end()) throw data_error("unknown token: \"" + text + "\"");
    return it->second;
}

std::string ToyVocab::decode(std::span<const int> tokens) const {
    std::string out;
    for (int id : tokens) {
        if (id == bos_ || id == eos_) continue;
        const std::string& s = surface(id);
        if (!out.empty()) out.push_back(' ');
        out += s;
    }
    return out;
}

std::vector<int> ToyVocab::encode(const std::string& text) const {
    const auto words = util::split_ws(text);
    std::vector<int> out;
    std::size_t i = 0;
    while (i < words.size()) {
        bool matched = false;
        const std::size_t max_n = std::min(max_lexeme_words_, words.size() - i);
        for (std::size_t n = max_n; n >= 1; --n) {
            std::string candidate = words[i];
            for (std::size_t k = 1; k < n; ++k) candidate += " " + words[i + k];
            auto it = index_.find(candidate);
            if (it != index_.end()) {
                out.push_back(it->second);
                i += n;
                matched = true;
                break;
            }
        }
        if (!matched)
            throw data_error("cannot tokenize: unknown word \"" + words[i] + "\"");
    }
    return out;
}

std::string ToyVocab::content_hash() const {
    std::string joined;
    for (const auto& s : surface_) {
        joined += s;
        joined.push_back('\x1f');
    }
    return util::sha256_hex(joined);
}

ToyTask::ToyTask() : vocab_(&ToyVocab::standard()) {
    const ToyVocab& v = *vocab_;
    for (int l = 0; l < kNumLanguages; ++l) {
        const auto lang = static_cast<LanguageCode>(l);
        for (int k = 0; k < kNumKeys; ++k) {
            ToyTaskItem item;
            item.prompt = {lang, k};

            const int e1 = (3 * k) % 20, e2 = (3 * k + 1) % 20, e3 = (3 * k + 2) % 20;
            const int f1 = k % 5, f2 = (k + 1) % 5, f3 = (k + 2) % 5;
            auto eng = [&](int i) { return v.id_of(kEnglishFillers[static_cast<std::size_t>(i)]); };
            auto fil = [&](int i) {
                return v.id_of(kLangFillers[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)]);
            };
            const int ans =
                v.id_of(kAnswers[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)]);

            item.gold_tokens = {v.thinking_open(),
                                v.step_open_[0],
                                eng(e1),
                                eng(e2),
                                fil(f1),
                                v.step_close_[0],
                                v.step_open_[1],
                                eng(e3),
                                fil(f2),
                                fil(f3),
                                v.step_close_[1],
                                v.thinking_close(),
                                v.answer_open(),
                                ans,
                                v.answer_close(),
                                v.eos()};

            BenchInstance inst;
            inst.id = lower_ascii(language_name(lang)) + "-" +
                      std::string(kKeyNames[static_cast<std::size_t>(k)]);
            inst.language = lang;
            inst.question =
                std::string(kQuestionStems[static_cast<std::size_t>(l)]) + " " +
                kSymptoms[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] + "?";
            inst.gold_answer = kAnswers[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
            inst.source_concept = std::string(kKeyNames[static_cast<std::size_t>(k)]);
            ReasoningStep s1, s2;
            s1.text = v.decode(std::array<int, 3>{eng(e1), eng(e2), fil(f1)});
            s2.text = v.decode(std::array<int, 3>{eng(e3), fil(f2), fil(f3)});
            inst.reasoning_steps = {s1, s2};
            item.instance = std::move(inst);

            by_id_[item.instance.id] = items_.size();
            items_.push_back(std::move(item));
        }
    }
}

const ToyTaskItem& ToyTask::item(LanguageCode language, int key) const {
    return items_.at(static_cast<std::size_t>(static_cast<int>(language) * kNumKeys + key));
}

const ToyTaskItem* ToyTask::find(const std::string& instance_id) const {
    auto it = by_id_.find(instance_id);
    if (it == by_id_.end()) return nullptr;
    return &items_[it->second];
}

std::map<ResourceTier, std::vector<BenchInstance>> ToyTask::pools() const {
    std::map<ResourceTier, std::vector<BenchInstance>> pools;
    for (const auto& item : items_)
        pools[tier_of(item.instance.language)].push_back(item.instance);
    return pools;
}

std::vector<ToyTaskItem> ToyTask::tier_items(ResourceTier tier) const {
    std::vector<ToyTaskItem> out;
    for (const auto& item : items_)
        if (tier_of(item.instance.language) == tier) out.push_back(item);
    return out;
}

// --- policy ---

PolicyParams PolicyParams::init(const ToyVocab& vocab, int feature_dim,
                                double temperature) {
    if (feature_dim < 1) throw config_error("feature_dim must be >= 1");
    if (temperature <= 0.0) throw config_error("temperature must be > 0");
    PolicyParams p;
    p.feature_dim = feature_dim;
    p.vocab_size = vocab.size();
    p.temperature = temperature;
    p.vocab_hash = vocab.content_hash();
    p.weights.assign(static_cast<std::size_t>(feature_dim) *
                         static_cast<std::size_t>(p.vocab_size),
                     0.0);
    return p;
}

void active_features(const ToyPrompt& prompt, int position, int prev_token,
                     int feature_dim, std::array<std::uint32_t, kActiveFeatures>& out) {
    using util::hash_combine;
    using util::mix64;
    const auto lang = static_cast<std::uint64_t>(prompt.language) + 1;
    const auto key = static_cast<std::uint64_t>(prompt.key) + 1;
    const auto pos =
        static_cast<std::uint64_t>(std::min(position, kMaxPosition)) + 1;
    const auto prev = static_cast<std::uint64_t>(prev_token + 2); // BOS (-1) -> 1
    const auto f = static_cast<std::uint64_t>(feature_dim);

    out[0] = static_cast<std::uint32_t>(mix64(1) % f);
    out[1] = static_cast<std::uint32_t>(hash_combine(2, lang) % f);
    out[2] = static_cast<std::uint32_t>(hash_combine(3, key) % f);
    out[3] = static_cast<std::uint32_t>(hash_combine(hash_combine(4, lang), key) % f);
    out[4] = static_cast<std::uint32_t>(hash_combine(5, prev) % f);
    out[5] = static_cast<std::uint32_t>(hash_combine(6, pos) % f);
    out[6] = static_cast<std::uint32_t>(hash_combine(hash_combine(7, prev), pos) % f);
    out[7] = static_cast<std::uint32_t>(hash_combine(hash_combine(8, lang), prev) % f);
    out[8] = static_cast<std::uint32_t>(
        hash_combine(hash_combine(hash_combine(9, lang), key), pos) % f);
}

ToyTaskItem toy_item_from_instance(const ToyTask& task, const BenchInstance& instance) {
    if (const ToyTaskItem* builtin = task.find(instance.id)) {
        ToyTaskItem item = *builtin;
        item.instance = instance;
        return item;
    }
    int key = -1;
    for (int k = 0; k < ToyTask::kNumKeys; ++k)
        if (ToyTask::kKeyNames[static_cast<std::size_t>(k)] == instance.source_concept)
            key = k;
    if (key < 0)
        throw data_error("instance " + instance.id + ": source_concept \"" +
                         instance.source_concept + "\" is not a task key");
    if (instance.reasoning_steps.empty())
        throw data_error("instance " + instance.id +
                         " has no reasoning steps; cannot build a trajectory");

    std::string text = "<thinking>";
    int step_no = 1;
    for (const auto& step : instance.reasoning_steps) {
        text += " <step " + std::to_string(step_no) + "> " + step.text + " </step " +
                std::to_string(step_no) + ">";
        ++step_no;
    }
    text += " </thinking> <answer> " + instance.gold_answer + " </answer>";

    ToyTaskItem item;
    item.prompt = {instance.language, key};
    item.instance = instance;
    item.gold_tokens = task.vocab().encode(text);
    item.gold_tokens.push_back(task.vocab().eos());
    return item;
}

double logprob(const PolicyParams& params, const ToyPrompt& prompt,
               std::span<const int> tokens) {
    kernels::Sequence seq{prompt, std::vector<int>(tokens.begin(), tokens.end())};
    double out = 0.0;
    kernels::serial::batch_logprob(params, std::span(&seq, 1), std::span(&out, 1));
    return out;
}

namespace {

void prompt_logits(const PolicyParams& params, const ToyPrompt& prompt, int position,
                   int prev, std::vector<double>& logits) {
    std::array<std::uint32_t, kActiveFeatures> rows;
    active_features(prompt, position, prev, params.feature_dim, rows);
    std::fill(logits.begin(), logits.end(), 0.0);
    for (std::uint32_t f : rows) {
        const double* row = params.row(f);
        for (int v = 0; v < params.vocab_size; ++v) logits[static_cast<std::size_t>(v)] += row[v];
    }
}

} // namespace

Completion sample_one(const PolicyParams& params, const ToyVocab& vocab,
                      const ToyPrompt& prompt, std::uint64_t seed, int max_len,
                      double temperature) {
    const bool greedy = temperature <= 1e-12;
    util::Rng rng(util::mix64(seed ^ 0x51ab3f27c9e04d85ULL));
    std::vector<double> logits(static_cast<std::size_t>(params.vocab_size));
    std::vector<double> probs(static_cast<std::size_t>(params.vocab_size));

    Completion completion;
    completion.logprob_under_sampler = 0.0;
    int prev = -1;
    for (int t = 0; t < max_len; ++t) {
        prompt_logits(params, prompt, t, prev, logits);
        int chosen = 0;
        if (greedy) {
            for (int v = 1; v < params.vocab_size; ++v)
                if (logits[static_cast<std::size_t>(v)] >
                    logits[static_cast<std::size_t>(chosen)])
                    chosen = v;
        } else {
            const double inv_t = 1.0 / temperature;
            double max_z = -1e300;
            for (auto& z : logits) {
                z *= inv_t;
                max_z = std::max(max_z, z);
            }
            double sum = 0.0;
            for (std::size_t v = 0; v < logits.size(); ++v) {
                probs[v] = std::exp(logits[v] - max_z);
                sum += probs[v];
            }
            const double u = util::uniform_double(rng) * sum;
            double acc = 0.0;
            chosen = params.vocab_size - 1;
            for (int v = 0; v < params.vocab_size; ++v) {
                acc += probs[static_cast<std::size_t>(v)];
                if (u < acc) {
                    chosen = v;
                    break;
                }
            }
            completion.logprob_under_sampler +=
                std::log(probs[static_cast<std::size_t>(chosen)] / sum);
        }
        completion.token_ids.push_back(chosen);
        if (chosen == vocab.eos()) break;
        prev = chosen;
    }
    completion.text = vocab.decode(completion.token_ids);
    return completion;
}

std::vector<Completion> sample_k(const PolicyParams& params, const ToyVocab& vocab,
                                 const ToyPrompt& prompt, int g, std::uint64_t seed,
                                 int max_len) {
    if (g < 1) throw config_error("sample_k: G must be >= 1");
    std::vector<Completion> out(static_cast<std::size_t>(g));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < g; ++i)
        out[static_cast<std::size_t>(i)] =
            sample_one(params, vocab, prompt,
                       util::hash_combine(seed, static_cast<std::uint64_t>(i)),
                       max_len, params.temperature);
    return out;
}

// --- checkpoint io ---

namespace {
constexpr char kCkptMagic[8] = {'P', 'L', 'R', 'L', 'C', 'K', 'P', 'T'};
}

void PolicyParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write checkpoint: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    const std::uint32_t version = 1;
    auto put_u32 = [&](std::uint32_t x) {
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
    };
    put_u32(version);
    put_u32(static_cast<std::uint32_t>(feature_dim));
    put_u32(static_cast<std::uint32_t>(vocab_size));
    put_u32(static_cast<std::uint32_t>(vocab_hash.size()));
    out.write(vocab_hash.data(), static_cast<std::streamsize>(vocab_hash.size()));
    out.write(reinterpret_cast<const char*>(&temperature), sizeof(temperature));
    out.write(reinterpret_cast<const char*>(weights.data()),
              static_cast<std::streamsize>(weights.size() * sizeof(double)));
    if (!out) throw data_error("short write to checkpoint: " + path);
}

PolicyParams PolicyParams::load(const std::string& path, const ToyVocab& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw data_error("not a policy checkpoint: " + path);
    auto get_u32 = [&]() {
        std::uint32_t x = 0;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        return x;
    };
    const std::uint32_t version = get_u32();
    if (version != 1) throw data_error("unsupported checkpoint version");
    PolicyParams p;
    p.feature_dim = static_cast<int>(get_u32());
    p.vocab_size = static_cast<int>(get_u32());
    const std::uint32_t hash_len = get_u32();
    p.vocab_hash.resize(hash_len);
    in.read(p.vocab_hash.data(), hash_len);
    in.read(reinterpret_cast<char*>(&p.temperature), sizeof(p.temperature));
    if (p.vocab_hash != vocab.content_hash())
        throw data_error("checkpoint vocabulary hash mismatch; refusing to load");
    p.weights.resize(static_cast<std::size_t>(p.feature_dim) *
                     static_cast<std::size_t>(p.vocab_size));
    in.read(reinterpret_cast<char*>(p.weights.data()),
            static_cast<std::streamsize>(p.weights.size() * sizeof(double)));
    if (!in) throw data_error("truncated checkpoint: " + path);
    return p;
}

// --- optimization ---

void AdamWState::step(std::span<double> params, std::span<const double> grad,
                      double lr, double weight_decay) {
    if (m.empty()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * params[i]);
    }
}

double cosine_warmup_lr(double lr_max, int step, int total_steps, double warmup_ratio) {
    if (total_steps <= 0) return lr_max;
    const int warmup = static_cast<int>(std::floor(warmup_ratio * total_steps + 0.5));
    if (step < warmup) return lr_max * static_cast<double>(step + 1) / warmup;
    if (total_steps == warmup) return lr_max;
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return lr_max * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
}

void SftConfig::validate() const {
    if (lr < 0.0) throw config_error("sft lr must be >= 0");
    if (epochs < 1) throw config_error("sft epochs must be >= 1");
    if (batch < 0) throw config_error("sft batch must be >= 0");
    if (weight_decay < 0.0) throw config_error("sft weight_decay must be >= 0");
}

namespace {

double mean_nll_per_token(const PolicyParams& params,
                          std::span<const kernels::Sequence> seqs) {
    std::vector<double> lps(seqs.size());
    kernels::batch_logprob(params, seqs, lps);
    double total_lp = 0.0;
    std::size_t total_tokens = 0;
    for (std::size_t j = 0; j < seqs.size(); ++j) {
        total_lp += lps[j];
        total_tokens += seqs[j].tokens.size();
    }
    return total_tokens == 0 ? 0.0 : -total_lp / static_cast<double>(total_tokens);
}

} // namespace

PolicyParams sft_fit(PolicyParams params, const std::vector<ToyTaskItem>& instances,
                     const SftConfig& config, SftReport* report) {
    config.validate();
    if (instances.empty()) throw data_error("sft_fit: no instances");

    std::vector<kernels::Sequence> seqs;
    seqs.reserve(instances.size());
    for (const auto& item : instances) {
        if (item.gold_tokens.empty())
            throw data_error("sft_fit: instance " + item.instance.id +
                             " has no gold tokens");
        seqs.push_back({item.prompt, item.gold_tokens});
    }

    const std::size_t batch =
        config.batch == 0 ? seqs.size() : static_cast<std::size_t>(config.batch);
    const int steps_per_epoch =
        static_cast<int>((seqs.size() + batch - 1) / batch);
    const int total_steps = config.epochs * steps_per_epoch;

    SftReport local;
    local.epoch_nll.push_back(mean_nll_per_token(params, seqs));

    AdamWState adam;
    std::vector<double> grad(params.weights.size());
    int step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t start = 0; start < seqs.size(); start += batch) {
            const std::size_t count = std::min(batch, seqs.size() - start);
            std::span<const kernels::Sequence> slice(seqs.data() + start, count);
            std::size_t slice_tokens = 0;
            for (const auto& s : slice) slice_tokens += s.tokens.size();

            std::fill(grad.begin(), grad.end(), 0.0);
            // mean NLL per token: d/dW = -(1/T) sum_j d logp_j
            std::vector<double> coefs(count,
                                      -1.0 / static_cast<double>(slice_tokens));
            kernels::accumulate_grad(params, slice, coefs, grad);

            if (config.optimizer == SftConfig::Optimizer::AdamW) {
                const double lr =
                    cosine_warmup_lr(config.lr, step, total_steps, config.warmup_ratio);
                adam.step(params.weights, grad, lr, config.weight_decay);
            } else {
                // plain gradient descent at constant lr
                for (std::size_t i = 0; i < grad.size(); ++i)
                    params.weights[i] -= config.lr * grad[i];
            }
            ++step;
        }
        const double nll = mean_nll_per_token(params, seqs);
        if (!std::isfinite(nll)) throw data_error("sft_fit diverged: non-finite NLL");
        local.epoch_nll.push_back(nll);
    }

    if (report) *report = std::move(local);
    return params;
}

} // namespace polyrl
