#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace polyrl {

struct ParsedStep {
    int index = 0; // declared step number, not required to be contiguous
    std::string text;
};

struct ParsedOutput {
    std::optional<std::string> thinking; // first thinking block, verbatim
    std::vector<ParsedStep> steps;       // textual order
    std::optional<std::string> answer;   // first answer block, verbatim
    int thinking_count = 0;
    int answer_count = 0;
    bool well_formed = false;
};

struct ParseOptions {
    // Requires the thinking block to close before the answer opens and both
    // blocks to be non-blank. Off reduces to the count-only rule.
    bool strict_order = true;
};

// Extracts <thinking>/<step N>/<answer> blocks. Non-greedy, non-overlapping
// pair matching; content spans line breaks; never fails on malformed text.
ParsedOutput parse_output(std::string_view text, const ParseOptions& opts = {});

// Canonical text for a parse: the first thinking and answer blocks, verbatim.
// Step tags embedded in the thinking content survive as-is.
std::string serialize_parsed(const ParsedOutput& parsed);

// 1.0 iff well_formed; step tags are diagnostic only.
double format_reward(const ParsedOutput& parsed);

} // namespace polyrl
