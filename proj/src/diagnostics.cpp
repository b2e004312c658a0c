#include "bitd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bitd/parallel.hpp"

namespace bitd {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace

std::vector<StalenessRecord> staleness_probe(const std::vector<GradientVector>& recorded,
                                             const std::vector<int>& episode_states,
                                             const MultiHeadNet& current, const FeatureMap& fm,
                                             double lambda, double gamma, double delta_t) {
    if (recorded.size() != episode_states.size())
        throw std::invalid_argument("staleness_probe: recorded gradients missing");
    const int t = static_cast<int>(recorded.size());
    std::vector<StalenessRecord> out;
    out.reserve(recorded.size());
    for (int i = 0; i < t; ++i) {
        const int s = episode_states[i];
        const auto fresh = current.gradient(fm.encode(s), Head::forward);
        StalenessRecord rec;
        rec.step = t;
        rec.past_index = i;
        rec.past_state = s;
        rec.dot = dot(recorded[i].g, fresh.g);
        const double denom = norm(recorded[i].g) * norm(fresh.g);
        rec.cosine = denom > 0.0 ? rec.dot / denom : 0.0;
        rec.obtuse = rec.dot < 0.0;
        const double w = std::pow(lambda * gamma, t - i);
        rec.effective_sign = sign_of(delta_t * w * rec.dot);
        rec.intended_sign = sign_of(delta_t);
        out.push_back(rec);
    }
    return out;
}

std::optional<StaleDemo> stale_demo_for_seed(std::uint64_t seed, const StaleDemoSettings& settings) {
    const TabularMdp mdp = make_two_state();
    const double gamma = mdp.gamma;
    const double lambda = settings.lambda;
    const double alpha = settings.alpha;
    const FeatureMap fm = FeatureMap::one_hot(2);

    MultiHeadNet net = MultiHeadNet::make(Parameterization::FR, 2, settings.hidden, seed);
    const MultiHeadNet net0 = net;
    const auto x0 = fm.encode(0);
    const auto x1 = fm.encode(1);

    // t = 0 at s0, reward 0, next s1
    const GradientVector g0 = net.gradient(x0, Head::forward);
    const double delta0 = gamma * net.value(x1, Head::forward) - net.value(x0, Head::forward);
    GradientVector trace = g0;  // lambda*gamma*0 + g0
    net.sgd_step(trace, alpha * delta0);

    // t = 1 at s1, reward 0, next terminal
    const MultiHeadNet net1 = net;
    const GradientVector fresh0 = net1.gradient(x0, Head::forward);
    const GradientVector g1 = net1.gradient(x1, Head::forward);
    const double delta1 = -net1.value(x1, Head::forward);
    if (delta1 == 0.0) return std::nullopt;

    for (size_t i = 0; i < trace.g.size(); ++i) trace.g[i] = lambda * gamma * trace.g[i] + g1.g[i];
    MultiHeadNet stale = net1;
    stale.sgd_step(trace, alpha * delta1);

    GradientVector refreshed_trace = fresh0;
    for (size_t i = 0; i < refreshed_trace.g.size(); ++i)
        refreshed_trace.g[i] = lambda * gamma * refreshed_trace.g[i] + g1.g[i];
    MultiHeadNet refreshed = net1;
    refreshed.sgd_step(refreshed_trace, alpha * delta1);

    StaleDemo demo;
    demo.seed = seed;
    demo.initial_net = net0;
    demo.delta0 = delta0;
    demo.delta1 = delta1;
    demo.dv_stale = stale.value(x0, Head::forward) - net1.value(x0, Head::forward);
    demo.dv_refreshed = refreshed.value(x0, Head::forward) - net1.value(x0, Head::forward);

    demo.record.step = 1;
    demo.record.past_index = 0;
    demo.record.past_state = 0;
    demo.record.dot = dot(g0.g, fresh0.g);
    const double denom = norm(g0.g) * norm(fresh0.g);
    demo.record.cosine = denom > 0.0 ? demo.record.dot / denom : 0.0;
    demo.record.obtuse = demo.record.dot < 0.0;
    demo.record.effective_sign = sign_of(delta1 * demo.record.dot);
    demo.record.intended_sign = sign_of(delta1);

    const bool exhibits = demo.record.obtuse && sign_of(demo.dv_stale) == -sign_of(delta1) &&
                          sign_of(demo.dv_refreshed) == sign_of(delta1);
    if (!exhibits) return std::nullopt;
    return demo;
}

std::optional<StaleDemo> find_stale_demo(std::uint64_t seed_begin, std::uint64_t seed_end,
                                         const StaleDemoSettings& settings, bool parallel) {
    const std::uint64_t block = 512;
    for (std::uint64_t lo = seed_begin; lo < seed_end; lo += block) {
        const std::uint64_t hi = std::min(seed_end, lo + block);
        const long n = static_cast<long>(hi - lo);
        std::vector<std::uint8_t> hit(n, 0);
        parallel_for(
            n,
            [&](long i) {
                if (stale_demo_for_seed(lo + static_cast<std::uint64_t>(i), settings)) hit[i] = 1;
            },
            parallel);
        for (long i = 0; i < n; ++i)
            if (hit[i]) return stale_demo_for_seed(lo + static_cast<std::uint64_t>(i), settings);
    }
    return std::nullopt;
}

double mstde(const std::vector<double>& values, const TabularMdp& mdp, const Policy& pi,
             const std::vector<double>& visit_dist) {
    const int n = mdp.n_states;
    if (values.size() != static_cast<size_t>(n) || visit_dist.size() != static_cast<size_t>(n))
        throw std::invalid_argument("mstde: size mismatch");
    const auto kernel = mdp.state_kernel(pi);
    const auto rpi = mdp.state_reward(pi);
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
        if (mdp.is_terminal(s) || visit_dist[s] == 0.0) continue;
        double exp_next = 0.0;
        for (int s2 = 0; s2 < n; ++s2) {
            if (mdp.is_terminal(s2)) continue;
            exp_next += kernel[static_cast<size_t>(s) * n + s2] * values[s2];
        }
        const double resid = rpi[s] + mdp.gamma * exp_next - values[s];
        acc += visit_dist[s] * resid * resid;
    }
    return acc;
}

double rmsve(const std::vector<double>& values, const ValueTable& exact,
             const std::vector<double>& visit_dist) {
    if (values.size() != exact.values.size() || values.size() != visit_dist.size())
        throw std::invalid_argument("rmsve: size mismatch");
    double acc = 0.0;
    for (size_t s = 0; s < values.size(); ++s) {
        const double d = values[s] - exact.values[s];
        acc += visit_dist[s] * d * d;
    }
    return std::sqrt(acc);
}

std::vector<double> forward_values(const MultiHeadNet& net, const FeatureMap& fm,
                                   const TabularMdp& mdp) {
    std::vector<double> v(mdp.n_states, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        v[s] = net.value(fm.encode(s), Head::forward);
    }
    return v;
}

}  // namespace bitd
