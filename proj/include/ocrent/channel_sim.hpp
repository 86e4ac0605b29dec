#pragma once

// Desk-scale discrete noisy-channel model of OCR. A "resolution" knob drives
// a symmetric confusion channel; sweeping it shows mutual information falling
// and conditional entropy rising as noise grows, and input coarsenings give a
// direct check of the data-processing inequality.

#include <cstddef>
#include <string>
#include <vector>

#include "ocrent/detail/strings.hpp"
#include "ocrent/errors.hpp"
#include "ocrent/infotheory.hpp"

namespace ocrent::channel_sim {

using infotheory::DiscreteDistribution;
using infotheory::JointDistribution;
using infotheory::LogBase;

// Row-stochastic confusion matrix P(y | x), rows indexed by input symbol.
class Channel {
public:
    explicit Channel(std::vector<std::vector<double>> confusion)
        : confusion_(std::move(confusion)) {
        validate();
    }

    std::size_t input_size() const noexcept { return confusion_.size(); }
    std::size_t output_size() const noexcept { return confusion_.front().size(); }
    const std::vector<std::vector<double>>& confusion() const noexcept { return confusion_; }

private:
    void validate() const {
        if (confusion_.empty() || confusion_.front().empty()) {
            throw ValidationError("channel must not be empty");
        }
        const std::size_t width = confusion_.front().size();
        for (const auto& row : confusion_) {
            if (row.size() != width) {
                throw ValidationError("channel rows must have equal length");
            }
            double total = 0.0;
            for (double p : row) {
                if (!std::isfinite(p) || p < 0.0) {
                    throw ValidationError("channel entries must be finite and nonnegative");
                }
                total += p;
            }
            if (std::abs(total - 1.0) > infotheory::kMassTolerance) {
                throw ValidationError("channel rows must sum to 1 within 1e-9 (got " +
                                      std::to_string(total) + ")");
            }
        }
    }

    std::vector<std::vector<double>> confusion_;
};

// noise_level 0 must yield the identity channel and 1 the uniform channel.
struct ResolutionProfile {
    double noise_level = 0.0;
    std::size_t alphabet_size = 2;
};

// Total map from input symbols onto a (possibly smaller) image alphabet.
class Coarsening {
public:
    Coarsening(std::vector<std::size_t> image_of, std::size_t image_size)
        : image_of_(std::move(image_of)), image_size_(image_size) {
        if (image_size_ == 0) throw ValidationError("coarsening image must not be empty");
        for (std::size_t v : image_of_) {
            if (v >= image_size_) {
                throw ValidationError("coarsening maps a symbol outside the image alphabet");
            }
        }
    }

    static Coarsening identity(std::size_t n) {
        std::vector<std::size_t> map(n);
        for (std::size_t i = 0; i < n; ++i) map[i] = i;
        return Coarsening(std::move(map), n);
    }

    std::size_t domain_size() const noexcept { return image_of_.size(); }
    std::size_t image_size() const noexcept { return image_size_; }
    std::size_t operator()(std::size_t x) const { return image_of_.at(x); }

private:
    std::vector<std::size_t> image_of_;
    std::size_t image_size_;
};

// Symmetric confusion channel: 1 - eps on the diagonal, eps/(k-1) elsewhere,
// with eps = noise_level * (k-1)/k so that noise_level 1 reaches the uniform
// channel exactly.
inline Channel make_symmetric_channel(const ResolutionProfile& profile) {
    const std::size_t k = profile.alphabet_size;
    if (k < 2) throw ValidationError("alphabet_size must be >= 2");
    if (!(profile.noise_level >= 0.0 && profile.noise_level <= 1.0)) {
        throw ValidationError("noise_level must be in [0, 1]");
    }
    const double eps =
        profile.noise_level * static_cast<double>(k - 1) / static_cast<double>(k);
    const double off_diagonal = eps / static_cast<double>(k - 1);
    std::vector<std::vector<double>> rows(k, std::vector<double>(k, off_diagonal));
    for (std::size_t i = 0; i < k; ++i) rows[i][i] = 1.0 - eps;
    return Channel(std::move(rows));
}

// P(x, y) = P(x) * P(y | x).
inline JointDistribution push_through(const DiscreteDistribution& input, const Channel& channel) {
    if (input.size() != channel.input_size()) {
        throw ValidationError("input distribution size does not match channel input size");
    }
    std::vector<std::vector<double>> cells(input.size(),
                                           std::vector<double>(channel.output_size()));
    for (std::size_t x = 0; x < input.size(); ++x) {
        const double px = input.masses()[x].probability;
        for (std::size_t y = 0; y < channel.output_size(); ++y) {
            cells[x][y] = px * channel.confusion()[x][y];
        }
    }
    return JointDistribution(std::move(cells));
}

// Joint of (f(X), Y): rows merged by the coarsening; the Y-marginal and total
// mass are untouched.
inline JointDistribution coarsen_input(const JointDistribution& joint, const Coarsening& f) {
    if (f.domain_size() != joint.x_size()) {
        throw ValidationError("coarsening does not cover all input symbols of the joint");
    }
    std::vector<std::vector<double>> cells(f.image_size(),
                                           std::vector<double>(joint.y_size(), 0.0));
    for (std::size_t x = 0; x < joint.x_size(); ++x) {
        for (std::size_t y = 0; y < joint.y_size(); ++y) {
            cells[f(x)][y] += joint.cell(x, y);
        }
    }
    return JointDistribution(std::move(cells));
}

struct SweepPoint {
    double noise_level;
    double mutual_information_bits;
    double conditional_entropy_bits;
};

// Uniform input through the symmetric channel at each noise level.
// Levels must be strictly increasing within [0, 1].
inline std::vector<SweepPoint> resolution_sweep(std::size_t alphabet_size,
                                                const std::vector<double>& noise_levels) {
    if (noise_levels.empty()) throw ValidationError("noise_levels must not be empty");
    for (std::size_t i = 0; i < noise_levels.size(); ++i) {
        if (!(noise_levels[i] >= 0.0 && noise_levels[i] <= 1.0)) {
            throw ValidationError("noise levels must lie within [0, 1]");
        }
        if (i > 0 && !(noise_levels[i] > noise_levels[i - 1])) {
            throw ValidationError("noise levels must be strictly increasing");
        }
    }
    const DiscreteDistribution input = DiscreteDistribution::uniform(alphabet_size);
    std::vector<SweepPoint> points;
    points.reserve(noise_levels.size());
    for (double level : noise_levels) {
        const Channel channel = make_symmetric_channel({level, alphabet_size});
        const JointDistribution joint = push_through(input, channel);
        points.push_back({level, infotheory::mutual_information(joint, LogBase::bits),
                          infotheory::conditional_entropy(joint, LogBase::bits)});
    }
    return points;
}

inline std::vector<double> uniform_grid(std::size_t points) {
    if (points == 0) throw ValidationError("grid must have at least one point");
    if (points == 1) return {0.0};
    std::vector<double> levels(points);
    for (std::size_t i = 0; i < points; ++i) {
        levels[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return levels;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string out = "noise_level,mutual_information_bits,conditional_entropy_bits\n";
    for (const auto& p : points) {
        out += detail::format_real(p.noise_level);
        out += ',';
        out += detail::format_real(p.mutual_information_bits);
        out += ',';
        out += detail::format_real(p.conditional_entropy_bits);
        out += '\n';
    }
    return out;
}

}  // namespace ocrent::channel_sim
