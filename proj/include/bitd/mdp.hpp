#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace bitd {

struct TabularMdp;

struct Policy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs;  // [s * n_actions + a]

    double prob(int s, int a) const { return probs[static_cast<size_t>(s) * n_actions + a]; }
    void validate() const;
};

Policy uniform_policy(const TabularMdp& mdp);

/// Finite MDP with absorbing terminal states (self-loop, reward 0).
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    std::vector<double> transition;      // [s][a][s'] flattened
    std::vector<double> reward;          // [s][a]
    std::vector<double> start_dist;      // [s]
    std::vector<std::uint8_t> terminal;  // [s]

    double p(int s, int a, int s2) const {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<size_t>(s) * n_actions + a]; }
    bool is_terminal(int s) const { return terminal[s] != 0; }
    std::vector<int> nonterminal_states() const;

    // policy-induced state kernel p(s'|s) and expected state reward
    std::vector<double> state_kernel(const Policy& pi) const;  // [s * n_states + s']
    std::vector<double> state_reward(const Policy& pi) const;  // [s]

    void validate() const;
};

/// Chain of `n_nonterminal` states flanked by two absorbing terminals.
/// Actions move deterministically left/right; entering nonterminal state i
/// pays +amplitude for even i, -amplitude for odd i; entering a terminal pays 0.
/// Start distribution is uniform over the nonterminal states.
TabularMdp make_chain(int n_nonterminal, double reward_amplitude, double gamma);

/// Two nonterminal states s0 -> s1 -> terminal, every reward 0, gamma 0.99.
TabularMdp make_two_state();

/// Builds an MDP from a JSON description:
///   {"n_states":N, "n_actions":A, "gamma":g,
///    "transitions":[{"s":i,"a":j,"s2":k,"p":x}, ...],
///    "rewards":[{"s":i,"a":j,"r":x}, ...],
///    "start_dist":[...], "terminal":[...]}
TabularMdp mdp_from_json_text(const std::string& text);
TabularMdp load_mdp(const std::string& path);

/// Resolves "chain" / "two-state" preset names; anything else is a JSON path.
TabularMdp make_preset(const std::string& name, int chain_n = 9,
                       double amplitude = 5.0, double gamma = 0.99);

struct Transition {
    int state;
    int action;
    double reward;
    int next_state;
};

struct Trajectory {
    std::vector<Transition> steps;
    bool terminated = false;
    double discounted_return(double gamma) const;
};

Trajectory sample_episode(const TabularMdp& mdp, const Policy& pi, std::mt19937_64& rng,
                          int max_steps = 10000);

/// Stationary distribution of the chain in which terminal absorption restarts
/// from the start distribution, restricted and renormalized over nonterminal
/// states (terminal entries are 0). Power iteration until the total-variation
/// change drops below `tol`.
std::vector<double> visitation_distribution(const TabularMdp& mdp, const Policy& pi,
                                            double tol = 1e-13, int max_iters = 1000000);

/// Time-reversed kernel. For nonterminal s, p_back(s'|s) is the probability
/// that the previous step was at s'; p_start(s) is the remaining mass carried
/// by the episode-start (dummy) predecessor, so each row sums to 1 including
/// it. r_back(s) is the expected reward received on entering s, summed over
/// real predecessors only (the dummy carries reward 0 and value 0).
struct BackwardKernel {
    int n_states = 0;
    std::vector<double> p_back;      // [s][s_prev]; zero rows for terminal / excluded s
    std::vector<double> p_start;     // [s]
    std::vector<double> r_back;      // [s]
    std::vector<double> visit_dist;  // distribution used to construct it
    std::vector<int> zero_mass;      // nonterminal states excluded for zero visitation mass

    double back(int s, int s_prev) const {
        return p_back[static_cast<size_t>(s) * n_states + s_prev];
    }
};

BackwardKernel backward_kernel(const TabularMdp& mdp, const Policy& pi,
                               const std::vector<double>& visit_dist);

}  // namespace bitd
