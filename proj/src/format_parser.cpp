#include "polyrl/format_parser.hpp"

#include <regex>

#include "polyrl/util.hpp"

namespace polyrl {

namespace {

struct Block {
    std::size_t begin = 0; // offset of the opening tag
    std::size_t end = 0;   // offset one past the closing tag
    std::string content;
};

// Non-greedy, left-to-right, non-overlapping pair matches of <tag>...</tag>.
std::vector<Block> find_blocks(const std::string& text, const char* tag) {
    const std::regex re("<" + std::string(tag) + ">([\\s\\S]*?)</" +
                        std::string(tag) + ">");
    std::vector<Block> out;
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        Block b;
        b.begin = static_cast<std::size_t>(it->position(0));
        b.end = b.begin + static_cast<std::size_t>(it->length(0));
        b.content = (*it)[1].str();
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace

ParsedOutput parse_output(std::string_view text_view, const ParseOptions& opts) {
    const std::string text(text_view);
    ParsedOutput out;

    const auto thinking = find_blocks(text, "thinking");
    const auto answers = find_blocks(text, "answer");
    out.thinking_count = static_cast<int>(thinking.size());
    out.answer_count = static_cast<int>(answers.size());
    if (!thinking.empty()) out.thinking = thinking.front().content;
    if (!answers.empty()) out.answer = answers.front().content;

    // <step N>...</step N>; the closing tag must repeat the same number.
    static const std::regex step_re("<step ([1-9][0-9]*)>([\\s\\S]*?)</step \\1>");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), step_re);
         it != std::sregex_iterator(); ++it) {
        ParsedStep step;
        step.index = std::stoi((*it)[1].str());
        step.text = (*it)[2].str();
        out.steps.push_back(std::move(step));
    }

    bool ok = out.thinking_count == 1 && out.answer_count == 1;
    if (ok && opts.strict_order) {
        ok = thinking.front().end <= answers.front().begin &&
             !util::is_blank(thinking.front().content) &&
             !util::is_blank(answers.front().content);
    }
    out.well_formed = ok;
    return out;
}

std::string serialize_parsed(const ParsedOutput& parsed) {
    std::string out;
    if (parsed.thinking) {
        out += "<thinking>";
        out += *parsed.thinking;
        out += "</thinking>";
    }
    if (parsed.answer) {
        out += "<answer>";
        out += *parsed.answer;
        out += "</answer>";
    }
    return out;
}

double format_reward(const ParsedOutput& parsed) {
    return parsed.well_formed ? 1.0 : 0.0;
}

} // namespace polyrl
