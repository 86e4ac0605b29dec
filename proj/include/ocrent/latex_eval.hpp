#pragma once

// Scoring of recognized LaTeX against a reference: extract equation blocks,
// tokenize the LaTeX, align equations (by \tag when both documents are fully
// tagged, by position otherwise) and measure normalized token-level edit
// distance. Token-level rather than character-level so that \langle vs
// \rangle counts as a single substitution.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocrent/errors.hpp"

namespace ocrent::latex_eval {

struct EquationBlock {
    std::string body;                // LaTeX between the markers, \tag removed, trimmed
    std::optional<std::string> tag;  // contents of \tag{...} when present
    std::size_t ordinal = 0;         // order of appearance
};

enum class TokenKind {
    control_sequence,
    brace,
    symbol,
    number,
    // Whitespace collapses into a token boundary; no token is emitted for it.
    boundary,
};

struct LatexToken {
    TokenKind kind;
    std::string text;

    bool operator==(const LatexToken& other) const noexcept { return text == other.text; }
};

namespace detail {

inline bool is_ascii_letter(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Matching close brace for the '{' at `open`, honoring nesting.
inline std::optional<std::size_t> matching_brace(const std::string& s, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        if (s[i] == '}') {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::nullopt;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

// Deterministic lexer: control sequences are atomic (\langle is one token,
// \{ is one token), braces are individual tokens, digit runs form number
// tokens, anything else is a single symbol (one UTF-8 code point).
// Concatenating the token texts reproduces the input minus whitespace.
inline std::vector<LatexToken> tokenize(const std::string& body) {
    std::vector<LatexToken> tokens;
    std::size_t i = 0;
    while (i < body.size()) {
        const char c = body[i];
        if (detail::is_space(c)) {
            ++i;
            continue;
        }
        if (c == '\\') {
            std::size_t j = i + 1;
            if (j < body.size() && detail::is_ascii_letter(body[j])) {
                while (j < body.size() && detail::is_ascii_letter(body[j])) ++j;
            } else if (j < body.size()) {
                ++j;  // control symbol such as \{ or \,
            }
            tokens.push_back({TokenKind::control_sequence, body.substr(i, j - i)});
            i = j;
            continue;
        }
        if (c == '{' || c == '}') {
            tokens.push_back({TokenKind::brace, std::string(1, c)});
            ++i;
            continue;
        }
        if (detail::is_ascii_digit(c)) {
            std::size_t j = i;
            while (j < body.size() && detail::is_ascii_digit(body[j])) ++j;
            tokens.push_back({TokenKind::number, body.substr(i, j - i)});
            i = j;
            continue;
        }
        // One UTF-8 code point: leading byte plus continuation bytes.
        std::size_t j = i + 1;
        while (j < body.size() && (static_cast<unsigned char>(body[j]) & 0xC0) == 0x80) ++j;
        tokens.push_back({TokenKind::symbol, body.substr(i, j - i)});
        i = j;
    }
    return tokens;
}

// Scans for \begin{equation} ... \end{equation} blocks, tolerating prose and
// code fences around them. The \tag{...} contents, when present, move into
// the tag field and out of the body.
inline std::vector<EquationBlock> extract_equations(const std::string& text) {
    static const std::string kBegin = "\\begin{equation}";
    static const std::string kEnd = "\\end{equation}";

    std::vector<EquationBlock> blocks;
    std::size_t pos = 0;
    while (true) {
        const std::size_t begin = text.find(kBegin, pos);
        const std::size_t stray_end = text.find(kEnd, pos);
        if (begin == std::string::npos) {
            if (stray_end != std::string::npos) {
                throw ParseError("\\end{equation} without matching \\begin{equation}",
                                 stray_end);
            }
            break;
        }
        if (stray_end != std::string::npos && stray_end < begin) {
            throw ParseError("\\end{equation} without matching \\begin{equation}", stray_end);
        }
        const std::size_t body_start = begin + kBegin.size();
        const std::size_t end = text.find(kEnd, body_start);
        if (end == std::string::npos) {
            throw ParseError("\\begin{equation} without matching \\end{equation}", begin);
        }
        std::string body = text.substr(body_start, end - body_start);
        const std::size_t nested = body.find(kBegin);
        if (nested != std::string::npos) {
            throw ParseError("nested \\begin{equation}", body_start + nested);
        }

        EquationBlock block;
        block.ordinal = blocks.size();
        const std::size_t tag_pos = body.find("\\tag");
        if (tag_pos != std::string::npos) {
            const std::size_t open = body.find('{', tag_pos);
            if (open == std::string::npos) {
                throw ParseError("\\tag without braces", body_start + tag_pos);
            }
            const auto close = detail::matching_brace(body, open);
            if (!close) {
                throw ParseError("unterminated \\tag{...}", body_start + open);
            }
            block.tag = detail::trim(body.substr(open + 1, *close - open - 1));
            body.erase(tag_pos, *close - tag_pos + 1);
        }
        block.body = detail::trim(body);
        if (block.body.empty()) {
            throw ParseError("empty equation body", begin);
        }
        blocks.push_back(std::move(block));
        pos = end + kEnd.size();
    }
    return blocks;
}

// Levenshtein distance over token texts, normalized by max(len); 0 for two
// empty sequences.
inline double token_edit_distance(const std::vector<LatexToken>& a,
                                  const std::vector<LatexToken>& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0 && m == 0) return 0.0;
    std::vector<std::size_t> prev(m + 1);
    std::vector<std::size_t> cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t substitution = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitution});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

struct EquationScore {
    std::string id;  // tag when present, otherwise the ordinal
    double distance; // normalized edit distance in [0, 1]
};

struct AccuracyScore {
    std::vector<EquationScore> per_equation;  // matched pairs only
    double document_score = 1.0;              // 1 - mean distance, unmatched count as 1
    std::size_t unmatched_reference = 0;
    std::size_t unmatched_candidate = 0;
};

namespace detail {

inline bool fully_tagged(const std::vector<EquationBlock>& blocks) {
    return std::all_of(blocks.begin(), blocks.end(),
                       [](const EquationBlock& b) { return b.tag.has_value(); });
}

}  // namespace detail

inline AccuracyScore score(const std::vector<EquationBlock>& candidate,
                           const std::vector<EquationBlock>& reference) {
    AccuracyScore result;
    std::vector<std::pair<const EquationBlock*, const EquationBlock*>> pairs;

    if (!candidate.empty() && !reference.empty() && detail::fully_tagged(candidate) &&
        detail::fully_tagged(reference)) {
        // Tag alignment: equal tags pair up in order of appearance.
        std::vector<bool> used(candidate.size(), false);
        for (const auto& ref : reference) {
            const EquationBlock* match = nullptr;
            for (std::size_t i = 0; i < candidate.size(); ++i) {
                if (!used[i] && candidate[i].tag == ref.tag) {
                    used[i] = true;
                    match = &candidate[i];
                    break;
                }
            }
            if (match) {
                pairs.emplace_back(match, &ref);
            } else {
                ++result.unmatched_reference;
            }
        }
        for (bool u : used) {
            if (!u) ++result.unmatched_candidate;
        }
    } else {
        const std::size_t shared = std::min(candidate.size(), reference.size());
        for (std::size_t i = 0; i < shared; ++i) {
            pairs.emplace_back(&candidate[i], &reference[i]);
        }
        result.unmatched_reference = reference.size() - shared;
        result.unmatched_candidate = candidate.size() - shared;
    }

    double distance_sum = 0.0;
    for (const auto& [cand, ref] : pairs) {
        const double d = token_edit_distance(tokenize(cand->body), tokenize(ref->body));
        result.per_equation.push_back(
            {ref->tag ? *ref->tag : std::to_string(ref->ordinal), d});
        distance_sum += d;
    }
    const std::size_t slots =
        pairs.size() + result.unmatched_reference + result.unmatched_candidate;
    distance_sum +=
        static_cast<double>(result.unmatched_reference + result.unmatched_candidate);
    result.document_score =
        slots == 0 ? 1.0 : 1.0 - distance_sum / static_cast<double>(slots);
    return result;
}

inline nlohmann::ordered_json score_to_json(const AccuracyScore& score) {
    nlohmann::ordered_json j;
    j["document_score"] = score.document_score;
    j["per_equation"] = nlohmann::ordered_json::array();
    for (const auto& e : score.per_equation) {
        j["per_equation"].push_back({{"id", e.id}, {"distance", e.distance}});
    }
    j["unmatched_reference"] = score.unmatched_reference;
    j["unmatched_candidate"] = score.unmatched_candidate;
    return j;
}

}  // namespace ocrent::latex_eval
