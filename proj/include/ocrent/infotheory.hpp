#pragma once

// Exact information-theoretic primitives over finite discrete distributions:
// entropies, mutual information, binary entropy, and an inverse Fano-bound
// solver. All quantities are computed in nats internally and converted on
// the way out; the 0 * log 0 = 0 convention is applied termwise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ocrent/errors.hpp"

namespace ocrent::infotheory {

// Probability-mass sums are accepted within this absolute tolerance of 1.
inline constexpr double kMassTolerance = 1e-9;

enum class LogBase { bits, nats };

inline const char* to_string(LogBase base) {
    return base == LogBase::bits ? "bits" : "nats";
}

inline LogBase log_base_from_string(const std::string& s) {
    if (s == "bits") return LogBase::bits;
    if (s == "nats") return LogBase::nats;
    throw ValidationError("unknown log base '" + s + "' (expected bits or nats)");
}

// The conversion factor between the two bases is exactly ln 2.
inline double from_nats(double nats, LogBase base) {
    return base == LogBase::bits ? nats / std::numbers::ln2 : nats;
}

inline double log_in(double x, LogBase base) {
    return from_nats(std::log(x), base);
}

// Probability mass over a finite alphabet of integer symbol ids.
// Invariants: probabilities finite and >= 0, total mass within kMassTolerance
// of 1, symbol ids unique. Inputs are never renormalized silently; use
// normalized() when that is what you want.
class DiscreteDistribution {
public:
    struct Mass {
        std::int64_t symbol;
        double probability;
    };

    explicit DiscreteDistribution(std::vector<Mass> masses) : masses_(std::move(masses)) {
        validate();
    }

    // Symbols 0..n-1 in order.
    static DiscreteDistribution from_probabilities(const std::vector<double>& probabilities) {
        std::vector<Mass> masses;
        masses.reserve(probabilities.size());
        for (std::size_t i = 0; i < probabilities.size(); ++i) {
            masses.push_back({static_cast<std::int64_t>(i), probabilities[i]});
        }
        return DiscreteDistribution(std::move(masses));
    }

    static DiscreteDistribution uniform(std::size_t n) {
        if (n == 0) throw ValidationError("uniform distribution needs at least one symbol");
        return from_probabilities(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    // Explicit renormalization of nonnegative weights.
    static DiscreteDistribution normalized(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ValidationError("weights must be finite and nonnegative");
            }
            total += w;
        }
        if (total <= 0.0) throw ValidationError("weights must have positive total mass");
        std::vector<double> probabilities(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) probabilities[i] = weights[i] / total;
        return from_probabilities(probabilities);
    }

    const std::vector<Mass>& masses() const noexcept { return masses_; }
    std::size_t size() const noexcept { return masses_.size(); }

private:
    void validate() const {
        if (masses_.empty()) throw ValidationError("distribution must not be empty");
        double total = 0.0;
        for (const Mass& m : masses_) {
            if (!std::isfinite(m.probability)) {
                throw ValidationError("probability must be finite");
            }
            if (m.probability < 0.0) {
                throw ValidationError("probability must be nonnegative");
            }
            total += m.probability;
        }
        if (std::abs(total - 1.0) > kMassTolerance) {
            throw ValidationError("probabilities must sum to 1 within 1e-9 (got " +
                                  std::to_string(total) + ")");
        }
        for (std::size_t i = 0; i < masses_.size(); ++i) {
            for (std::size_t j = i + 1; j < masses_.size(); ++j) {
                if (masses_[i].symbol == masses_[j].symbol) {
                    throw ValidationError("symbol ids must be unique (duplicate " +
                                          std::to_string(masses_[i].symbol) + ")");
                }
            }
        }
    }

    std::vector<Mass> masses_;
};

// Joint probability mass P(x, y) as a dense matrix, rows indexed by x.
// Invariants: entries finite and >= 0, total mass within kMassTolerance of 1.
class JointDistribution {
public:
    explicit JointDistribution(std::vector<std::vector<double>> cells) : cells_(std::move(cells)) {
        validate();
    }

    std::size_t x_size() const noexcept { return cells_.size(); }
    std::size_t y_size() const noexcept { return cells_.front().size(); }
    const std::vector<std::vector<double>>& cells() const noexcept { return cells_; }
    double cell(std::size_t x, std::size_t y) const { return cells_.at(x).at(y); }

    DiscreteDistribution marginal_x() const {
        std::vector<double> probabilities(x_size(), 0.0);
        for (std::size_t x = 0; x < x_size(); ++x) {
            for (double p : cells_[x]) probabilities[x] += p;
        }
        return DiscreteDistribution::from_probabilities(probabilities);
    }

    DiscreteDistribution marginal_y() const {
        std::vector<double> probabilities(y_size(), 0.0);
        for (const auto& row : cells_) {
            for (std::size_t y = 0; y < row.size(); ++y) probabilities[y] += row[y];
        }
        return DiscreteDistribution::from_probabilities(probabilities);
    }

private:
    void validate() const {
        if (cells_.empty() || cells_.front().empty()) {
            throw ValidationError("joint distribution must not be empty");
        }
        const std::size_t width = cells_.front().size();
        double total = 0.0;
        for (const auto& row : cells_) {
            if (row.size() != width) {
                throw ValidationError("joint distribution rows must have equal length");
            }
            for (double p : row) {
                if (!std::isfinite(p)) throw ValidationError("probability must be finite");
                if (p < 0.0) throw ValidationError("probability must be nonnegative");
                total += p;
            }
        }
        if (std::abs(total - 1.0) > kMassTolerance) {
            throw ValidationError("joint probabilities must sum to 1 within 1e-9 (got " +
                                  std::to_string(total) + ")");
        }
    }

    std::vector<std::vector<double>> cells_;
};

namespace detail {

inline double entropy_nats_term(double p) {
    return p > 0.0 ? -p * std::log(p) : 0.0;
}

inline double entropy_nats(const DiscreteDistribution& d) {
    double h = 0.0;
    for (const auto& m : d.masses()) h += entropy_nats_term(m.probability);
    return h;
}

inline double joint_entropy_nats(const JointDistribution& j) {
    double h = 0.0;
    for (const auto& row : j.cells()) {
        for (double p : row) h += entropy_nats_term(p);
    }
    return h;
}

// Tiny negatives from floating-point cancellation are clamped to zero.
inline double clamp_negative_eps(double v) {
    return (v < 0.0 && v > -kMassTolerance) ? 0.0 : v;
}

}  // namespace detail

// H(X) = -sum p log p.
inline double entropy(const DiscreteDistribution& d, LogBase base) {
    return from_nats(detail::entropy_nats(d), base);
}

// H(X, Y).
inline double joint_entropy(const JointDistribution& j, LogBase base) {
    return from_nats(detail::joint_entropy_nats(j), base);
}

// H(Y | X) = H(X, Y) - H(X).
inline double conditional_entropy(const JointDistribution& j, LogBase base) {
    double h = detail::joint_entropy_nats(j) - detail::entropy_nats(j.marginal_x());
    return from_nats(detail::clamp_negative_eps(h), base);
}

// I(X; Y) = H(X) + H(Y) - H(X, Y).
inline double mutual_information(const JointDistribution& j, LogBase base) {
    double i = detail::entropy_nats(j.marginal_x()) + detail::entropy_nats(j.marginal_y()) -
               detail::joint_entropy_nats(j);
    return from_nats(detail::clamp_negative_eps(i), base);
}

// H_b(p) = -p log p - (1-p) log(1-p).
inline double binary_entropy(double p, LogBase base) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("binary_entropy requires p in [0, 1]");
    }
    return from_nats(detail::entropy_nats_term(p) + detail::entropy_nats_term(1.0 - p), base);
}

// Smallest error probability consistent with Fano's bound
//   H_b(p) + p * log(|Y| - 1) >= h_cond
// on p in [0, 1 - 1/|Y|], where the left side is monotone increasing.
// Solved by bisection to absolute tolerance 1e-9; h_cond = 0 short-circuits.
inline double fano_min_error(double h_cond, std::size_t alphabet_size, LogBase base) {
    if (alphabet_size < 2) {
        throw ValidationError("fano_min_error requires alphabet_size >= 2");
    }
    if (!(h_cond >= 0.0) || !std::isfinite(h_cond)) {
        throw ValidationError("fano_min_error requires h_cond >= 0");
    }
    const double log_alphabet = log_in(static_cast<double>(alphabet_size), base);
    if (h_cond > log_alphabet + kMassTolerance) {
        throw ValidationError("infeasible: h_cond exceeds log(alphabet_size)");
    }
    if (h_cond == 0.0) return 0.0;

    const double log_rest = log_in(static_cast<double>(alphabet_size - 1), base);
    const auto bound = [&](double p) { return binary_entropy(p, base) + p * log_rest; };
    const double p_max = 1.0 - 1.0 / static_cast<double>(alphabet_size);
    if (h_cond >= bound(p_max)) return p_max;

    double lo = 0.0;  // bound(lo) < h_cond <= bound(hi)
    double hi = p_max;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (bound(mid) >= h_cond) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

}  // namespace ocrent::infotheory
