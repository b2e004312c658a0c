#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bitd {

enum class Head { forward, backward, bidirectional };

/// Which of the three value functions is the composite of the other two.
/// FR:  v_bi   = v_fwd + v_back   (heads: fwd on w2, back on w3)
/// BiR: v_fwd  = v_bi  - v_back   (heads: bi  on w2, back on w3)
/// FBi: v_back = v_bi  - v_fwd    (heads: fwd on w2, bi   on w3)
enum class Parameterization { FR, BiR, FBi };

const char* to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& s);

struct GradientVector {
    Head head = Head::forward;
    std::vector<double> g;  // aligned with the owning net's flat layout
};

/// Shared rectifier torso with two scalar heads; the third value function is
/// structural. hidden == 0 selects plain linear heads on the raw features
/// (no torso, no biases), in which case the forward-head gradient is the
/// feature vector itself.
///
/// Flat parameter layout: [w1 (hidden*input), b1 (hidden), w2 (hidden), b2,
/// w3 (hidden), b3]; linear nets use [w2 (input), w3 (input)].
struct MultiHeadNet {
    Parameterization parameterization = Parameterization::FR;
    int input_dim = 0;
    int hidden = 0;
    std::vector<double> params;

    int param_count() const { return static_cast<int>(params.size()); }
    bool linear() const { return hidden == 0; }

    struct Values {
        double forward;
        double backward;
        double bidirectional;
    };
    Values forward_all(std::span<const double> x) const;
    double value(std::span<const double> x, Head h) const;

    /// Exact partials of the requested head w.r.t. its own parameter subset;
    /// entries outside the subset are zero. Rectifier subgradient at 0 is 0.
    GradientVector gradient(std::span<const double> x, Head h) const;

    /// params += coefficient * grad.
    void sgd_step(const GradientVector& grad, double coefficient);

    bool finite() const;

    std::string to_json() const;
    static MultiHeadNet from_json(const std::string& text);

    /// Weights uniform in [-0.5, 0.5] from the seed; biases zero.
    static MultiHeadNet make(Parameterization p, int input_dim, int hidden, std::uint64_t seed);
    /// Zero-initialized linear net.
    static MultiHeadNet make_linear(Parameterization p, int input_dim);
};

}  // namespace bitd
