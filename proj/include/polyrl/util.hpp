#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace polyrl::util {

// Deterministic RNG helpers. std::mt19937_64's raw output stream is pinned by
// the standard; the distribution objects are not, so we roll our own draws.
using Rng = std::mt19937_64;

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Unbiased draw in [0, n) via rejection.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

// Uniform double in [0, 1) with 53 bits of entropy.
inline double uniform_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// --- UTF-8 ---

// Decodes the code point starting at byte offset `i`, advancing `i`.
// Malformed bytes decode as U+FFFD and advance by one.
char32_t next_codepoint(std::string_view s, std::size_t& i);

std::vector<char32_t> decode_utf8(std::string_view s);

// Encodes one code point.
void append_utf8(std::string& out, char32_t cp);

// --- strings ---

std::string trim(std::string_view s);
bool is_blank(std::string_view s);

// Trim + collapse internal whitespace runs to single spaces.
std::string collapse_whitespace(std::string_view s);

// Lowercases Latin-range code points (ASCII, Latin-1, Extended A/B used by the
// 13-language set, Latin Extended Additional). Other scripts pass through.
char32_t fold_latin(char32_t cp);
std::string fold_case(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);

// --- hashing / time ---

std::string sha256_hex(std::string_view data);

std::string iso8601_now();

} // namespace polyrl::util
