#include "bitd/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bitd {

namespace {

constexpr double kRowSumTol = 1e-12;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void Policy::validate() const {
    require(n_states > 0 && n_actions > 0, "policy: empty state or action set");
    require(probs.size() == static_cast<size_t>(n_states) * n_actions, "policy: size mismatch");
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            double p = prob(s, a);
            require(p >= 0.0, "policy: negative probability");
            sum += p;
        }
        require(std::abs(sum - 1.0) <= kRowSumTol, "policy: row does not sum to 1");
    }
}

Policy uniform_policy(const TabularMdp& mdp) {
    Policy pi;
    pi.n_states = mdp.n_states;
    pi.n_actions = mdp.n_actions;
    pi.probs.assign(static_cast<size_t>(mdp.n_states) * mdp.n_actions, 1.0 / mdp.n_actions);
    return pi;
}

std::vector<int> TabularMdp::nonterminal_states() const {
    std::vector<int> out;
    for (int s = 0; s < n_states; ++s)
        if (!is_terminal(s)) out.push_back(s);
    return out;
}

std::vector<double> TabularMdp::state_kernel(const Policy& pi) const {
    std::vector<double> k(static_cast<size_t>(n_states) * n_states, 0.0);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double pa = pi.prob(s, a);
            if (pa == 0.0) continue;
            for (int s2 = 0; s2 < n_states; ++s2)
                k[static_cast<size_t>(s) * n_states + s2] += pa * p(s, a, s2);
        }
    return k;
}

std::vector<double> TabularMdp::state_reward(const Policy& pi) const {
    std::vector<double> rp(n_states, 0.0);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) rp[s] += pi.prob(s, a) * r(s, a);
    return rp;
}

void TabularMdp::validate() const {
    require(n_states > 0 && n_actions > 0, "mdp: empty state or action set");
    require(gamma > 0.0 && gamma < 1.0, "mdp: gamma must lie in (0,1)");
    require(transition.size() == static_cast<size_t>(n_states) * n_actions * n_states,
            "mdp: transition tensor size mismatch");
    require(reward.size() == static_cast<size_t>(n_states) * n_actions, "mdp: reward size mismatch");
    require(start_dist.size() == static_cast<size_t>(n_states), "mdp: start_dist size mismatch");
    require(terminal.size() == static_cast<size_t>(n_states), "mdp: terminal size mismatch");

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double pr = p(s, a, s2);
                require(pr >= 0.0, "mdp: negative transition probability");
                sum += pr;
            }
            require(std::abs(sum - 1.0) <= kRowSumTol, "mdp: transition row does not sum to 1");
            if (is_terminal(s)) {
                require(p(s, a, s) == 1.0, "mdp: terminal states must self-loop");
                require(r(s, a) == 0.0, "mdp: terminal states must have zero reward");
            }
        }
    }
    double d0 = 0.0;
    for (int s = 0; s < n_states; ++s) {
        require(start_dist[s] >= 0.0, "mdp: negative start probability");
        if (is_terminal(s)) require(start_dist[s] == 0.0, "mdp: terminal start probability must be 0");
        d0 += start_dist[s];
    }
    require(std::abs(d0 - 1.0) <= kRowSumTol, "mdp: start_dist does not sum to 1");
}

TabularMdp make_chain(int n_nonterminal, double reward_amplitude, double gamma) {
    if (n_nonterminal < 2) throw std::invalid_argument("make_chain: need at least 2 states");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("make_chain: gamma outside (0,1)");

    const int n = n_nonterminal;
    TabularMdp m;
    m.n_states = n + 2;  // states n and n+1 are the left/right terminals
    m.n_actions = 2;     // 0 = left, 1 = right
    m.gamma = gamma;
    m.transition.assign(static_cast<size_t>(m.n_states) * m.n_actions * m.n_states, 0.0);
    m.reward.assign(static_cast<size_t>(m.n_states) * m.n_actions, 0.0);
    m.start_dist.assign(m.n_states, 0.0);
    m.terminal.assign(m.n_states, 0);
    m.terminal[n] = m.terminal[n + 1] = 1;

    auto set_p = [&](int s, int a, int s2) {
        m.transition[(static_cast<size_t>(s) * m.n_actions + a) * m.n_states + s2] = 1.0;
    };
    auto enter_reward = [&](int dest) {
        if (dest >= n) return 0.0;  // terminal
        return (dest % 2 == 0) ? reward_amplitude : -reward_amplitude;
    };
    for (int i = 0; i < n; ++i) {
        int left = (i > 0) ? i - 1 : n;
        int right = (i < n - 1) ? i + 1 : n + 1;
        set_p(i, 0, left);
        set_p(i, 1, right);
        m.reward[static_cast<size_t>(i) * 2 + 0] = enter_reward(left);
        m.reward[static_cast<size_t>(i) * 2 + 1] = enter_reward(right);
        m.start_dist[i] = 1.0 / n;
    }
    set_p(n, 0, n);
    set_p(n, 1, n);
    set_p(n + 1, 0, n + 1);
    set_p(n + 1, 1, n + 1);
    m.validate();
    return m;
}

TabularMdp make_two_state() {
    TabularMdp m;
    m.n_states = 3;
    m.n_actions = 1;
    m.gamma = 0.99;
    m.transition.assign(9, 0.0);
    m.reward.assign(3, 0.0);
    m.start_dist = {1.0, 0.0, 0.0};
    m.terminal = {0, 0, 1};
    m.transition[0 * 3 + 1] = 1.0;  // s0 -> s1
    m.transition[1 * 3 + 2] = 1.0;  // s1 -> terminal
    m.transition[2 * 3 + 2] = 1.0;
    m.validate();
    return m;
}

TabularMdp mdp_from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TabularMdp m;
    m.n_states = j.at("n_states").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.gamma = j.at("gamma").get<double>();
    if (m.n_states <= 0 || m.n_actions <= 0)
        throw std::invalid_argument("mdp json: nonpositive state or action count");
    m.transition.assign(static_cast<size_t>(m.n_states) * m.n_actions * m.n_states, 0.0);
    m.reward.assign(static_cast<size_t>(m.n_states) * m.n_actions, 0.0);
    m.start_dist = j.at("start_dist").get<std::vector<double>>();
    for (bool t : j.at("terminal").get<std::vector<bool>>()) m.terminal.push_back(t ? 1 : 0);
    for (const auto& e : j.at("transitions")) {
        int s = e.at("s").get<int>(), a = e.at("a").get<int>(), s2 = e.at("s2").get<int>();
        if (s < 0 || s >= m.n_states || a < 0 || a >= m.n_actions || s2 < 0 || s2 >= m.n_states)
            throw std::invalid_argument("mdp json: transition index out of range");
        m.transition[(static_cast<size_t>(s) * m.n_actions + a) * m.n_states + s2] =
            e.at("p").get<double>();
    }
    if (j.contains("rewards"))
        for (const auto& e : j.at("rewards")) {
            int s = e.at("s").get<int>(), a = e.at("a").get<int>();
            if (s < 0 || s >= m.n_states || a < 0 || a >= m.n_actions)
                throw std::invalid_argument("mdp json: reward index out of range");
            m.reward[static_cast<size_t>(s) * m.n_actions + a] = e.at("r").get<double>();
        }
    m.validate();
    return m;
}

TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open MDP description: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return mdp_from_json_text(buf.str());
}

TabularMdp make_preset(const std::string& name, int chain_n, double amplitude, double gamma) {
    if (name == "chain") return make_chain(chain_n, amplitude, gamma);
    if (name == "two-state") return make_two_state();
    return load_mdp(name);
}

double Trajectory::discounted_return(double gamma) const {
    double g = 0.0;
    double w = 1.0;
    for (const auto& t : steps) {
        g += w * t.reward;
        w *= gamma;
    }
    return g;
}

namespace {

int sample_index(const double* probs, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double u = u01(rng);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    for (int i = n - 1; i >= 0; --i)
        if (probs[i] > 0.0) return i;
    throw std::logic_error("sample_index: all-zero distribution");
}

}  // namespace

Trajectory sample_episode(const TabularMdp& mdp, const Policy& pi, std::mt19937_64& rng,
                          int max_steps) {
    Trajectory traj;
    int s = sample_index(mdp.start_dist.data(), mdp.n_states, rng);
    for (int step = 0; step < max_steps; ++step) {
        if (mdp.is_terminal(s)) {
            traj.terminated = true;
            return traj;
        }
        const double* row = &pi.probs[static_cast<size_t>(s) * mdp.n_actions];
        int a = sample_index(row, mdp.n_actions, rng);
        const double* trow =
            &mdp.transition[(static_cast<size_t>(s) * mdp.n_actions + a) * mdp.n_states];
        int s2 = sample_index(trow, mdp.n_states, rng);
        traj.steps.push_back({s, a, mdp.r(s, a), s2});
        s = s2;
    }
    traj.terminated = mdp.is_terminal(s);
    return traj;
}

std::vector<double> visitation_distribution(const TabularMdp& mdp, const Policy& pi, double tol,
                                            int max_iters) {
    if (!(tol > 0.0)) throw std::invalid_argument("visitation_distribution: tol must be positive");
    const int n = mdp.n_states;
    std::vector<double> kernel = mdp.state_kernel(pi);
    // restart augmentation: terminal rows redirect to the start distribution
    for (int s = 0; s < n; ++s)
        if (mdp.is_terminal(s))
            for (int s2 = 0; s2 < n; ++s2) kernel[static_cast<size_t>(s) * n + s2] = mdp.start_dist[s2];

    std::vector<double> mu(n, 1.0 / n), next(n);
    bool converged = false;
    for (int it = 0; it < max_iters; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < n; ++s) {
            if (mu[s] == 0.0) continue;
            const double* row = &kernel[static_cast<size_t>(s) * n];
            for (int s2 = 0; s2 < n; ++s2) next[s2] += mu[s] * row[s2];
        }
        double tv = 0.0;
        for (int s = 0; s < n; ++s) tv += std::abs(next[s] - mu[s]);
        mu.swap(next);
        if (tv < tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw std::runtime_error("visitation_distribution: power iteration did not converge");

    double mass = 0.0;
    for (int s = 0; s < n; ++s)
        if (!mdp.is_terminal(s)) mass += mu[s];
    std::vector<double> d(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (!mdp.is_terminal(s)) d[s] = mu[s] / mass;
    return d;
}

BackwardKernel backward_kernel(const TabularMdp& mdp, const Policy& pi,
                               const std::vector<double>& visit_dist) {
    const int n = mdp.n_states;
    if (visit_dist.size() != static_cast<size_t>(n))
        throw std::invalid_argument("backward_kernel: visit_dist size mismatch");

    BackwardKernel k;
    k.n_states = n;
    k.p_back.assign(static_cast<size_t>(n) * n, 0.0);
    k.p_start.assign(n, 0.0);
    k.r_back.assign(n, 0.0);
    k.visit_dist = visit_dist;

    for (int s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) continue;
        if (visit_dist[s] <= 0.0) {
            k.zero_mass.push_back(s);
            continue;
        }
        // Bayes inversion over the stationary flow: the d-normalizer cancels,
        // so the renormalized nonterminal distribution gives the same rows.
        double row_sum = 0.0;
        for (int sp = 0; sp < n; ++sp) {
            if (mdp.is_terminal(sp) || visit_dist[sp] <= 0.0) continue;
            double flow = 0.0, rflow = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double w = pi.prob(sp, a) * mdp.p(sp, a, s);
                flow += w;
                rflow += w * mdp.r(sp, a);
            }
            if (flow == 0.0) continue;
            double pb = visit_dist[sp] * flow / visit_dist[s];
            k.p_back[static_cast<size_t>(s) * n + sp] = pb;
            k.r_back[s] += visit_dist[sp] * rflow / visit_dist[s];
            row_sum += pb;
        }
        // The remaining mass is the episode-start event; by stationarity of
        // the restart-augmented chain it equals the terminal-restart flow into s.
        k.p_start[s] = std::max(0.0, 1.0 - row_sum);
    }
    return k;
}

}  // namespace bitd
