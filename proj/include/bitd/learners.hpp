#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bitd/features.hpp"
#include "bitd/net.hpp"

namespace bitd {

enum class Algorithm { TD0, TDLambda, RefreshedTDLambda, BackwardMC, BiTD };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

/// Regression-target selectors for the three heads (BiTD).
///   theta: td0 | bidir-minus-back | bidir-minus-G
///   phi:   mc | td | bidir-minus-fwd
///   psi:   bellman | back-plus-td | back-plus-fwd
struct TargetVariants {
    std::string theta = "td0";
    std::string phi = "mc";
    std::string psi = "bellman";
};

struct LearnerConfig {
    Algorithm algorithm = Algorithm::TD0;
    Parameterization parameterization = Parameterization::FR;
    double alpha = 0.1;
    double lambda = 0.0;
    double gamma = 0.99;
    TargetVariants targets;

    void validate() const;
    std::string to_json() const;
    static LearnerConfig from_json(const std::string& text);
};

/// Mutable per-episode learner state. Everything resets at episode start;
/// prev_state is empty at t = 0.
struct LearnerState {
    GradientVector trace;            // e_t
    double backward_return = 0.0;    // discounted reward sum behind the agent
    bool has_prev = false;
    int prev_state = -1;
    double prev_reward = 0.0;
    int t = 0;
    std::vector<int> episode_states;           // visit order, up to the previous step
    bool record_gradients = false;             // diagnostics opt-in
    std::vector<GradientVector> episode_gradients;

    void reset(const MultiHeadNet& net);
};

/// Bookkeeping shared by all algorithms; call after the per-step update.
void advance_episode_state(LearnerState& st, int state, double reward);

struct TransitionView {
    int state;
    double reward;
    int next_state;
    bool next_terminal;
};

/// One-step TD on the forward head. Returns the TD error.
double td0_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                const LearnerConfig& cfg);

/// Accumulating-trace TD(lambda): the trace folds in the current state's
/// gradient at the current weights, then the whole trace is applied with the
/// current TD error. Returns the TD error; the trace is stored back in `st`.
double td_lambda_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                      LearnerState& st, const LearnerConfig& cfg);

/// Corrected variant: the full trace is recomputed from scratch with every
/// visited state's gradient taken at the *current* weights (cost grows with
/// the episode). Accumulation order matches the recursive trace so the two
/// coincide exactly for linear nets.
double refreshed_td_lambda_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                                LearnerState& st, const LearnerConfig& cfg);

/// Online backward Monte-Carlo regression of the backward head onto the
/// running backward return. No-op at t = 0. Returns the target when applied.
std::optional<double> backward_mc_step(MultiHeadNet& net, const FeatureMap& fm, int state,
                                       LearnerState& st, const LearnerConfig& cfg);

/// Joint three-head update. All targets and gradients are evaluated against a
/// frozen pre-step snapshot, then applied together; the backward and
/// bidirectional heads update only from t >= 1.
void bitd_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr, LearnerState& st,
               const LearnerConfig& cfg);

/// Scalar regression target for one head, by catalog identifier (see
/// TargetVariants). Backward-referencing kinds require a previous state.
double appendix_f_target(const std::string& kind, const MultiHeadNet& snapshot,
                         const FeatureMap& fm, const TransitionView& tr, const LearnerState& st,
                         const LearnerConfig& cfg);

/// Convenience driver: owns net + state, dispatches per algorithm, and keeps
/// the episode bookkeeping straight.
class OnlineLearner {
  public:
    OnlineLearner(LearnerConfig cfg, MultiHeadNet net, FeatureMap fm);

    void begin_episode();
    void observe(int state, double reward, int next_state, bool next_terminal);

    const MultiHeadNet& net() const { return net_; }
    MultiHeadNet& net() { return net_; }
    const LearnerState& state() const { return st_; }
    const LearnerConfig& config() const { return cfg_; }

  private:
    LearnerConfig cfg_;
    MultiHeadNet net_;
    FeatureMap fm_;
    LearnerState st_;
};

}  // namespace bitd
