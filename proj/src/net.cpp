#include "bitd/net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace bitd {

const char* to_string(Parameterization p) {
    switch (p) {
        case Parameterization::FR: return "FR";
        case Parameterization::BiR: return "BiR";
        case Parameterization::FBi: return "FBi";
    }
    return "?";
}

Parameterization parameterization_from_string(const std::string& s) {
    if (s == "FR") return Parameterization::FR;
    if (s == "BiR") return Parameterization::BiR;
    if (s == "FBi") return Parameterization::FBi;
    throw std::invalid_argument("unknown parameterization: " + s);
}

namespace {

// Signed combination of the two physical heads realizing each value function.
struct HeadCoeffs {
    double a;  // w2 head
    double b;  // w3 head
};

HeadCoeffs coeffs(Parameterization p, Head h) {
    switch (p) {
        case Parameterization::FR:
            if (h == Head::forward) return {1, 0};
            if (h == Head::backward) return {0, 1};
            return {1, 1};
        case Parameterization::BiR:
            if (h == Head::forward) return {1, -1};
            if (h == Head::backward) return {0, 1};
            return {1, 0};
        case Parameterization::FBi:
            if (h == Head::forward) return {1, 0};
            if (h == Head::backward) return {-1, 1};
            return {0, 1};
    }
    return {0, 0};
}

}  // namespace

MultiHeadNet::Values MultiHeadNet::forward_all(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim)
        throw std::invalid_argument("MultiHeadNet: feature dimension mismatch");

    double a = 0.0, b = 0.0;
    if (linear()) {
        for (int j = 0; j < input_dim; ++j) {
            a += params[j] * x[j];
            b += params[input_dim + j] * x[j];
        }
    } else {
        const int h = hidden, d = input_dim;
        const double* w1 = params.data();
        const double* b1 = w1 + static_cast<size_t>(h) * d;
        const double* w2 = b1 + h;
        const double b2 = w2[h];
        const double* w3 = w2 + h + 1;
        const double b3 = w3[h];
        a = b2;
        b = b3;
        for (int i = 0; i < h; ++i) {
            double z = b1[i];
            for (int j = 0; j < d; ++j) z += w1[static_cast<size_t>(i) * d + j] * x[j];
            if (z > 0.0) {
                a += w2[i] * z;
                b += w3[i] * z;
            }
        }
    }
    auto at = [&](Head hd) {
        auto c = coeffs(parameterization, hd);
        return c.a * a + c.b * b;
    };
    return {at(Head::forward), at(Head::backward), at(Head::bidirectional)};
}

double MultiHeadNet::value(std::span<const double> x, Head h) const {
    auto v = forward_all(x);
    switch (h) {
        case Head::forward: return v.forward;
        case Head::backward: return v.backward;
        case Head::bidirectional: return v.bidirectional;
    }
    return 0.0;
}

GradientVector MultiHeadNet::gradient(std::span<const double> x, Head h) const {
    if (static_cast<int>(x.size()) != input_dim)
        throw std::invalid_argument("MultiHeadNet: feature dimension mismatch");

    GradientVector out;
    out.head = h;
    out.g.assign(params.size(), 0.0);
    const auto c = coeffs(parameterization, h);

    if (linear()) {
        for (int j = 0; j < input_dim; ++j) {
            out.g[j] = c.a * x[j];
            out.g[input_dim + j] = c.b * x[j];
        }
        return out;
    }

    const int hd = hidden, d = input_dim;
    const size_t w1_off = 0, b1_off = static_cast<size_t>(hd) * d;
    const size_t w2_off = b1_off + hd, b2_off = w2_off + hd;
    const size_t w3_off = b2_off + 1, b3_off = w3_off + hd;
    const double* w1 = params.data();
    const double* b1 = w1 + b1_off;
    const double* w2 = w1 + w2_off;
    const double* w3 = w1 + w3_off;

    for (int i = 0; i < hd; ++i) {
        double z = b1[i];
        for (int j = 0; j < d; ++j) z += w1[static_cast<size_t>(i) * d + j] * x[j];
        double act = z > 0.0 ? z : 0.0;
        double gate = z > 0.0 ? 1.0 : 0.0;  // subgradient at the kink is 0
        if (c.a != 0.0) {
            out.g[w2_off + i] = c.a * act;
        }
        if (c.b != 0.0) {
            out.g[w3_off + i] = c.b * act;
        }
        double torso = (c.a * w2[i] + c.b * w3[i]) * gate;
        if (torso != 0.0) {
            for (int j = 0; j < d; ++j) out.g[w1_off + static_cast<size_t>(i) * d + j] = torso * x[j];
            out.g[b1_off + i] = torso;
        }
    }
    if (c.a != 0.0) out.g[b2_off] = c.a;
    if (c.b != 0.0) out.g[b3_off] = c.b;
    return out;
}

void MultiHeadNet::sgd_step(const GradientVector& grad, double coefficient) {
    if (grad.g.size() != params.size())
        throw std::invalid_argument("sgd_step: gradient length mismatch");
    if (coefficient == 0.0) return;
    for (size_t i = 0; i < params.size(); ++i) params[i] += coefficient * grad.g[i];
}

bool MultiHeadNet::finite() const {
    for (double p : params)
        if (!std::isfinite(p)) return false;
    return true;
}

std::string MultiHeadNet::to_json() const {
    nlohmann::json j;
    j["parameterization"] = to_string(parameterization);
    j["input"] = input_dim;
    j["hidden"] = hidden;
    j["params"] = params;
    return j.dump();
}

MultiHeadNet MultiHeadNet::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MultiHeadNet n;
    n.parameterization = parameterization_from_string(j.at("parameterization").get<std::string>());
    n.input_dim = j.at("input").get<int>();
    n.hidden = j.at("hidden").get<int>();
    n.params = j.at("params").get<std::vector<double>>();
    size_t expect = n.hidden == 0 ? 2 * static_cast<size_t>(n.input_dim)
                                  : static_cast<size_t>(n.hidden) * n.input_dim + 3 * n.hidden + 2;
    if (n.params.size() != expect) throw std::invalid_argument("net json: parameter count mismatch");
    return n;
}

MultiHeadNet MultiHeadNet::make(Parameterization p, int input_dim, int hidden, std::uint64_t seed) {
    if (input_dim <= 0 || hidden < 0) throw std::invalid_argument("MultiHeadNet: bad dimensions");
    MultiHeadNet n;
    n.parameterization = p;
    n.input_dim = input_dim;
    n.hidden = hidden;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    if (hidden == 0) {
        n.params.resize(2 * static_cast<size_t>(input_dim));
        for (auto& w : n.params) w = u(rng);
        return n;
    }
    const size_t b1_off = static_cast<size_t>(hidden) * input_dim;
    const size_t w2_off = b1_off + hidden, b2_off = w2_off + hidden;
    const size_t w3_off = b2_off + 1, b3_off = w3_off + hidden;
    n.params.assign(b3_off + 1, 0.0);
    for (size_t i = 0; i < b1_off; ++i) n.params[i] = u(rng);
    for (size_t i = w2_off; i < b2_off; ++i) n.params[i] = u(rng);
    for (size_t i = w3_off; i < b3_off; ++i) n.params[i] = u(rng);
    return n;
}

MultiHeadNet MultiHeadNet::make_linear(Parameterization p, int input_dim) {
    MultiHeadNet n;
    n.parameterization = p;
    n.input_dim = input_dim;
    n.hidden = 0;
    n.params.assign(2 * static_cast<size_t>(input_dim), 0.0);
    return n;
}

}  // namespace bitd
