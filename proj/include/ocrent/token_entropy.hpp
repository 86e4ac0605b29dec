#pragma once

// Per-position and sequence-level entropy of an LLM generation, computed from
// the API's logprob payload. Two estimators: the chosen-token surprisal
// -log P(token), and the entropy of the top-k alternatives distribution. The
// top-k case is reported as a [lower, upper] interval: lumping the residual
// mass into one pseudo-outcome minimizes the completed entropy, spreading it
// uniformly over the unseen vocabulary maximizes it.
//
// API logprobs arrive in natural log; the base is converted once on output
// and tracked explicitly in every report.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocrent/detail/strings.hpp"
#include "ocrent/errors.hpp"
#include "ocrent/infotheory.hpp"

namespace ocrent::token_entropy {

using infotheory::LogBase;

// Order-of-magnitude of modern tokenizers; only affects vocab normalization.
inline constexpr std::size_t kDefaultVocabSize = 200000;
// The chat-completions API caps top_logprobs at 20.
inline constexpr std::size_t kTopLogprobsLimit = 20;
// Residual masses below this are treated as exactly zero.
inline constexpr double kResidualEpsilon = 1e-12;

struct AlternativeToken {
    std::string text;
    double logprob;  // natural log; -inf allowed for probability-0 entries
};

// The top-k most probable tokens at one position, as delivered by the API.
class TokenAlternatives {
public:
    explicit TokenAlternatives(std::vector<AlternativeToken> entries,
                               std::size_t top_k_limit = kTopLogprobsLimit)
        : entries_(std::move(entries)) {
        if (entries_.empty()) throw ValidationError("token alternatives must not be empty");
        if (entries_.size() > top_k_limit) {
            throw ValidationError("token alternatives exceed the top-k limit of " +
                                  std::to_string(top_k_limit));
        }
        double mass = 0.0;
        for (const auto& e : entries_) {
            if (std::isnan(e.logprob) || e.logprob > 0.0) {
                throw ValidationError("alternative logprob must be <= 0");
            }
            mass += std::exp(e.logprob);
        }
        if (mass > 1.0 + 1e-6) {
            throw ValidationError("alternative probabilities sum above 1 (got " +
                                  std::to_string(mass) + ")");
        }
        mass_ = mass;
    }

    const std::vector<AlternativeToken>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    double mass() const noexcept { return mass_; }

private:
    std::vector<AlternativeToken> entries_;
    double mass_;
};

// One generated token with its own logprob and the top-k alternatives.
class TokenRecord {
public:
    TokenRecord(std::string token, double logprob, TokenAlternatives alternatives)
        : token_(std::move(token)), logprob_(logprob), alternatives_(std::move(alternatives)) {
        // The chosen token's probability exp(logprob) must lie in (0, 1].
        if (std::isnan(logprob_) || logprob_ > 0.0 || std::isinf(logprob_)) {
            throw ValidationError("chosen-token logprob must be finite and <= 0");
        }
    }

    const std::string& token() const noexcept { return token_; }
    double logprob() const noexcept { return logprob_; }
    const TokenAlternatives& alternatives() const noexcept { return alternatives_; }

private:
    std::string token_;
    double logprob_;
    TokenAlternatives alternatives_;
};

struct VocabSpec {
    std::size_t size = kDefaultVocabSize;
};

enum class Estimator { surprisal, topk_lower, topk_upper };

inline const char* to_string(Estimator e) {
    switch (e) {
        case Estimator::surprisal: return "surprisal";
        case Estimator::topk_lower: return "topk_lower";
        default: return "topk_upper";
    }
}

inline Estimator estimator_from_string(const std::string& s) {
    if (s == "surprisal") return Estimator::surprisal;
    // "topk" resolves to the lower (lumped-residual) bound.
    if (s == "topk" || s == "topk_lower") return Estimator::topk_lower;
    if (s == "topk_upper") return Estimator::topk_upper;
    throw ValidationError("unknown estimator '" + s +
                          "' (expected surprisal, topk, topk_lower or topk_upper)");
}

struct SequenceEntropyReport {
    std::vector<double> per_position;  // H_i in `base` units
    double total = 0.0;                // sum of per_position
    std::size_t token_count = 0;
    double mean_per_token = 0.0;       // total / n (the Table-1 style quantity)
    double vocab_normalized = 0.0;     // total / (n * log |V|), in [0, 1]
    Estimator estimator = Estimator::surprisal;
    LogBase base = LogBase::bits;
};

// -log P of the emitted token, in the requested base. The +0.0 folds the
// negative zero from logprob == 0 back to plain zero.
inline double surprisal(const TokenRecord& t, LogBase base) {
    return infotheory::from_nats(-t.logprob() + 0.0, base);
}

struct EntropyInterval {
    double lower;
    double upper;
};

namespace detail {

inline void check_vocab(const VocabSpec& v, std::size_t observed_alternatives) {
    if (v.size < 2) throw ValidationError("vocab size must be >= 2");
    if (v.size < observed_alternatives) {
        throw ValidationError("vocab size " + std::to_string(v.size) +
                              " is smaller than the observed alternatives count " +
                              std::to_string(observed_alternatives));
    }
}

}  // namespace detail

// Entropy bounds for the next-token distribution reconstructed from the
// top-k payload. With zero residual mass both endpoints equal the exact
// entropy of the alternatives; they also coincide when exactly one unseen
// token remains.
inline EntropyInterval topk_entropy_interval(const TokenRecord& t, const VocabSpec& v,
                                             LogBase base) {
    const TokenAlternatives& alts = t.alternatives();
    detail::check_vocab(v, alts.size());

    double residual = 1.0 - alts.mass();
    if (residual < -1e-6) {
        throw ValidationError("inconsistent payload: alternatives mass exceeds 1");
    }
    if (residual < kResidualEpsilon) residual = 0.0;

    double h_top = 0.0;  // nats, observed part
    for (const auto& e : alts.entries()) {
        h_top += infotheory::detail::entropy_nats_term(std::exp(e.logprob));
    }

    const std::size_t unseen = v.size - alts.size();
    if (residual > 0.0 && unseen == 0) {
        throw ValidationError(
            "inconsistent payload: residual mass left but the vocabulary is exhausted");
    }

    double lower = h_top;
    double upper = h_top;
    if (residual > 0.0) {
        lower += -residual * std::log(residual);
        upper += residual * std::log(static_cast<double>(unseen) / residual);
    }
    return {infotheory::from_nats(lower, base), infotheory::from_nats(upper, base)};
}

// h_i / log |V|; errors when h_i exceeds the maximum possible entropy.
inline double normalized_position_entropy(double h_i, const VocabSpec& v, LogBase base) {
    if (!(h_i >= 0.0) || !std::isfinite(h_i)) {
        throw ValidationError("position entropy must be finite and >= 0");
    }
    detail::check_vocab(v, 0);
    const double h_max = infotheory::log_in(static_cast<double>(v.size), base);
    if (h_i > h_max + infotheory::kMassTolerance) {
        throw ValidationError("inconsistency: position entropy exceeds log |V|");
    }
    return std::min(h_i / h_max, 1.0);
}

inline SequenceEntropyReport sequence_report(const std::vector<TokenRecord>& tokens,
                                             const VocabSpec& v, Estimator estimator,
                                             LogBase base) {
    if (tokens.empty()) {
        throw ValidationError("empty token sequence: normalizations are undefined at n = 0");
    }
    std::size_t max_alternatives = 0;
    for (const auto& t : tokens) max_alternatives = std::max(max_alternatives, t.alternatives().size());
    detail::check_vocab(v, max_alternatives);

    SequenceEntropyReport report;
    report.estimator = estimator;
    report.base = base;
    report.token_count = tokens.size();
    report.per_position.reserve(tokens.size());
    for (const auto& t : tokens) {
        double h = 0.0;
        switch (estimator) {
            case Estimator::surprisal: h = surprisal(t, base); break;
            case Estimator::topk_lower: h = topk_entropy_interval(t, v, base).lower; break;
            case Estimator::topk_upper: h = topk_entropy_interval(t, v, base).upper; break;
        }
        report.per_position.push_back(h);
        report.total += h;
    }
    report.mean_per_token = report.total / static_cast<double>(report.token_count);
    const double h_max = infotheory::log_in(static_cast<double>(v.size), base);
    const double normalized =
        report.total / (static_cast<double>(report.token_count) * h_max);
    if (normalized > 1.0 + infotheory::kMassTolerance) {
        // Can only happen for surprisal payloads whose chosen token is less
        // likely than uniform; the configured vocab size cannot explain them.
        throw ValidationError(
            "inconsistency: entropy exceeds the vocabulary maximum; raise the vocab size or "
            "use a top-k estimator");
    }
    report.vocab_normalized = std::min(normalized, 1.0);
    return report;
}

struct UncertaintySpan {
    std::size_t begin;  // inclusive
    std::size_t end;    // inclusive
    double peak;
};

// Maximal runs of consecutive positions with H_i >= threshold, in order.
inline std::vector<UncertaintySpan> high_uncertainty_spans(const SequenceEntropyReport& report,
                                                           double threshold) {
    if (!(threshold >= 0.0)) throw ValidationError("threshold must be >= 0");
    std::vector<UncertaintySpan> spans;
    const auto& h = report.per_position;
    std::size_t i = 0;
    while (i < h.size()) {
        if (h[i] >= threshold) {
            UncertaintySpan span{i, i, h[i]};
            while (span.end + 1 < h.size() && h[span.end + 1] >= threshold) {
                ++span.end;
                span.peak = std::max(span.peak, h[span.end]);
            }
            spans.push_back(span);
            i = span.end + 1;
        } else {
            ++i;
        }
    }
    return spans;
}

inline nlohmann::ordered_json report_to_json(const SequenceEntropyReport& report) {
    nlohmann::ordered_json j;
    j["estimator"] = to_string(report.estimator);
    j["base"] = infotheory::to_string(report.base);
    j["token_count"] = report.token_count;
    j["total"] = report.total;
    j["mean_per_token"] = report.mean_per_token;
    j["vocab_normalized"] = report.vocab_normalized;
    j["per_position"] = report.per_position;
    return j;
}

// Per-position CSV, entropies always in bits regardless of the report base.
inline std::string positions_csv(const SequenceEntropyReport& report,
                                 const std::vector<TokenRecord>& tokens) {
    if (tokens.size() != report.per_position.size()) {
        throw ValidationError("token list does not match the report positions");
    }
    std::string out = "index,token,h_bits\n";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        double h_bits = report.per_position[i];
        if (report.base == LogBase::nats) h_bits /= std::numbers::ln2;
        out += std::to_string(i);
        out += ',';
        out += ocrent::detail::csv_field(tokens[i].token());
        out += ',';
        out += ocrent::detail::format_real(h_bits);
        out += '\n';
    }
    return out;
}

}  // namespace ocrent::token_entropy
