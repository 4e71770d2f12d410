// Runs the detector over the language-ID corpus and records each sample's
// detection outcome into the "expected" field, reporting per-language accuracy
// against the labels. Used to freeze fixture expectations before the test
// suite pins them.
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "polyrl/core.hpp"
#include "polyrl/langid.hpp"

using nlohmann::json;
using namespace polyrl;

int main(int argc, char** argv) {
    const std::string path =
        argc > 1 ? argv[1] : std::string(POLYRL_DATA_DIR "/langid_corpus.json");

    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 1;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    json doc = json::parse(ss.str());

    const LanguageDetector& det = default_detector();

    std::map<std::string, std::pair<int, int>> tally; // lang -> {hits, total}
    int mislabeled = 0;
    for (auto& sample : doc["samples"]) {
        const std::string text = sample["text"].get<std::string>();
        const LangDetection d = det.detect(text);
        json expected = nullptr;
        if (d.language) expected = std::string(language_name(*d.language));
        sample["expected"] = expected;

        if (sample["language"].is_null()) {
            if (!expected.is_null()) {
                ++mislabeled;
                std::cout << "MIXED DETECTED AS " << expected << ": " << text
                          << "\n";
            }
            continue;
        }
        const std::string label = sample["language"].get<std::string>();
        auto& [hits, total] = tally[label];
        ++total;
        if (!expected.is_null() && expected.get<std::string>() == label) {
            ++hits;
        } else {
            std::cout << "MISS [" << label << " -> "
                      << (expected.is_null() ? std::string("none")
                                             : expected.get<std::string>())
                      << ", conf " << d.confidence << "]: " << text << "\n";
        }
    }

    std::cout << "\nper-language accuracy:\n";
    for (const auto& [lang, ht] : tally)
        std::printf("  %-12s %d/%d\n", lang.c_str(), ht.first, ht.second);
    std::cout << "undetectable-mixed misdetections: " << mislabeled << "\n";

    std::ofstream out(path);
    out << doc.dump(1) << "\n";
    std::cout << "expectations written to " << path << "\n";
    return 0;
}
