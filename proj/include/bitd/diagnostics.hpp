#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bitd/exact.hpp"
#include "bitd/features.hpp"
#include "bitd/learners.hpp"
#include "bitd/mdp.hpp"
#include "bitd/net.hpp"

namespace bitd {

/// Alignment between a past state's stored gradient (taken at the weights of
/// its visit) and the gradient of the same state under the current weights.
struct StalenessRecord {
    int step = 0;        // current time t
    int past_index = 0;  // visit index i <= t
    int past_state = 0;  // S_i
    double dot = 0.0;    // stored . fresh
    double cosine = 0.0;
    bool obtuse = false;         // dot < 0
    int effective_sign = 0;      // sign of the trace contribution's effect on v(S_i)
    int intended_sign = 0;       // sign the fresh gradient would give
};

/// One record per recorded past visit; `recorded[i]` must be the forward-head
/// gradient of episode_states[i] taken at the weights of visit i.
std::vector<StalenessRecord> staleness_probe(const std::vector<GradientVector>& recorded,
                                             const std::vector<int>& episode_states,
                                             const MultiHeadNet& current, const FeatureMap& fm,
                                             double lambda, double gamma, double delta_t);

/// A two-state episode whose second TD(lambda) update pushes v(s0) against
/// the sign of the TD error while the refreshed trace pushes with it.
struct StaleDemo {
    std::uint64_t seed = 0;
    MultiHeadNet initial_net;
    double delta0 = 0.0;
    double delta1 = 0.0;
    double dv_stale = 0.0;      // exact change of v(s0) from the t=1 stale update
    double dv_refreshed = 0.0;  // same, refreshed trace from the same weights
    StalenessRecord record;     // the s0 record at t=1
};

struct StaleDemoSettings {
    double alpha = 0.5;
    int hidden = 2;
    double lambda = 0.95;
    // gamma comes from the two-state MDP (0.99)
};

/// Scans seeds [seed_begin, seed_end) over uniform [-0.5, 0.5] initializations
/// and returns the first seed exhibiting the obtuse-trace event; nullopt when
/// the range holds none.
std::optional<StaleDemo> find_stale_demo(std::uint64_t seed_begin, std::uint64_t seed_end,
                                         const StaleDemoSettings& settings = {},
                                         bool parallel = true);

/// Reconstructs the full demo for one seed (no search).
std::optional<StaleDemo> stale_demo_for_seed(std::uint64_t seed, const StaleDemoSettings& settings);

/// Visitation-weighted squared expected Bellman residual of forward values.
double mstde(const std::vector<double>& values, const TabularMdp& mdp, const Policy& pi,
             const std::vector<double>& visit_dist);

/// Visitation-weighted root-mean-squared error against exact forward values.
double rmsve(const std::vector<double>& values, const ValueTable& exact,
             const std::vector<double>& visit_dist);

/// Forward-head values of a net per MDP state (0 at terminals).
std::vector<double> forward_values(const MultiHeadNet& net, const FeatureMap& fm,
                                   const TabularMdp& mdp);

}  // namespace bitd
