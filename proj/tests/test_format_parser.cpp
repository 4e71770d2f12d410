#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polyrl/format_parser.hpp"

using namespace polyrl;

TEST_CASE("minimal well-formed output") {
    const auto p = parse_output("<thinking>a</thinking><answer>b</answer>");
    CHECK(p.well_formed);
    CHECK(p.thinking_count == 1);
    CHECK(p.answer_count == 1);
    CHECK(p.steps.empty());
    CHECK(*p.thinking == "a");
    CHECK(*p.answer == "b");
    CHECK(format_reward(p) == 1.0);
}

TEST_CASE("missing thinking block") {
    const auto p = parse_output("<answer>b</answer>");
    CHECK_FALSE(p.well_formed);
    CHECK(p.thinking_count == 0);
    CHECK(format_reward(p) == 0.0);
}

TEST_CASE("duplicate thinking blocks") {
    const auto p =
        parse_output("<thinking>x</thinking><thinking>y</thinking><answer>z</answer>");
    CHECK_FALSE(p.well_formed);
    CHECK(p.thinking_count == 2);
    CHECK(*p.thinking == "x"); // first block recorded
}

TEST_CASE("content spans line breaks") {
    const auto p = parse_output("<thinking>line1\nline2</thinking><answer>ok</answer>");
    CHECK(p.well_formed);
    CHECK(*p.thinking == "line1\nline2");
}

TEST_CASE("step tags are diagnostic only") {
    const auto with_steps = parse_output(
        "<thinking><step 1>a</step 1><step 2>b</step 2><step 3>c</step 3>"
        "<step 4>d</step 4></thinking><answer>e</answer>");
    CHECK(with_steps.well_formed);
    REQUIRE(with_steps.steps.size() == 4);
    CHECK(with_steps.steps[0].index == 1);
    CHECK(with_steps.steps[3].index == 4);
    CHECK(with_steps.steps[1].text == "b");
    CHECK(format_reward(with_steps) == 1.0);

    const auto without_steps = parse_output("<thinking>a</thinking><answer>b</answer>");
    CHECK(format_reward(without_steps) == 1.0);
}

TEST_CASE("step indices need not be contiguous") {
    const auto p = parse_output(
        "<thinking><step 2>x</step 2><step 7>y</step 7></thinking><answer>z</answer>");
    CHECK(p.well_formed);
    REQUIRE(p.steps.size() == 2);
    CHECK(p.steps[0].index == 2);
    CHECK(p.steps[1].index == 7);
}

TEST_CASE("mismatched step close tag does not count") {
    const auto p = parse_output(
        "<thinking><step 1>x</step 2><step 1>y</step1></thinking><answer>z</answer>");
    CHECK(p.steps.empty());
    CHECK(p.well_formed); // thinking and answer blocks are intact
}

TEST_CASE("answer before thinking violates strict order") {
    const auto strict = parse_output("<answer>b</answer><thinking>a</thinking>");
    CHECK_FALSE(strict.well_formed);
    CHECK(format_reward(strict) == 0.0);

    ParseOptions relaxed;
    relaxed.strict_order = false;
    const auto loose = parse_output("<answer>b</answer><thinking>a</thinking>", relaxed);
    CHECK(loose.well_formed);
}

TEST_CASE("empty blocks fail under strict order only") {
    const auto strict = parse_output("<thinking>  \n </thinking><answer>b</answer>");
    CHECK_FALSE(strict.well_formed);

    ParseOptions relaxed;
    relaxed.strict_order = false;
    CHECK(parse_output("<thinking> </thinking><answer>b</answer>", relaxed).well_formed);
}

TEST_CASE("unclosed tags do not count as blocks") {
    const auto p = parse_output("<thinking>a<answer>b</answer>");
    CHECK(p.thinking_count == 0);
    CHECK(p.answer_count == 1);
    CHECK_FALSE(p.well_formed);
}

TEST_CASE("text outside blocks is ignored") {
    const auto p = parse_output(
        "preamble <thinking>a</thinking> interlude <answer>b</answer> coda");
    CHECK(p.well_formed);
}

TEST_CASE("enumeration of one-thinking one-answer orderings") {
    // thinking fully before answer is the only well-formed arrangement
    CHECK(parse_output("<thinking>a</thinking><answer>b</answer>").well_formed);
    CHECK_FALSE(parse_output("<answer>b</answer><thinking>a</thinking>").well_formed);
    // nested answer inside thinking: the thinking block closes after the
    // answer opens, so strict order rejects it
    const auto nested =
        parse_output("<thinking>x<answer>b</answer>y</thinking>");
    CHECK(nested.thinking_count == 1);
    CHECK(nested.answer_count == 1);
    CHECK_FALSE(nested.well_formed);
}

TEST_CASE("monotone violation: adding an extra block flips the reward") {
    const std::string base = "<thinking>a</thinking><answer>b</answer>";
    CHECK(format_reward(parse_output(base)) == 1.0);
    CHECK(format_reward(parse_output(base + "<thinking>c</thinking>")) == 0.0);
    CHECK(format_reward(parse_output(base + "<answer>c</answer>")) == 0.0);
    CHECK(format_reward(parse_output("<thinking>z</thinking>" + base)) == 0.0);
}

TEST_CASE("line-break transparency inside blocks") {
    const std::string base = "<thinking>abc</thinking><answer>xyz</answer>";
    const auto reference = parse_output(base).well_formed;
    // insert "\n" at every interior content offset
    for (std::size_t pos : {11, 12, 13, 32, 33}) {
        std::string variant = base;
        variant.insert(pos, "\n");
        CHECK(parse_output(variant).well_formed == reference);
    }
}

TEST_CASE("serialize round trip preserves counts and contents") {
    const std::string text =
        "noise <thinking><step 1>alpha</step 1>\nbeta</thinking> mid "
        "<answer>gamma\ndelta</answer> tail";
    const auto p = parse_output(text);
    REQUIRE(p.well_formed);
    const auto q = parse_output(serialize_parsed(p));
    CHECK(q.well_formed);
    CHECK(q.thinking_count == p.thinking_count);
    CHECK(q.answer_count == p.answer_count);
    CHECK(*q.thinking == *p.thinking);
    CHECK(*q.answer == *p.answer);
    CHECK(q.steps.size() == p.steps.size());
}

TEST_CASE("binary range for arbitrary junk") {
    for (const char* junk :
         {"", "plain text", "<thinking>", "</answer>", "<answer></answer>",
          "<thinking>a</thinking>", "<<<>>>", "<step 1>x</step 1>"}) {
        const double r = format_reward(parse_output(junk));
        CHECK((r == 0.0 || r == 1.0));
    }
}
