#include "bitd/exact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bitd {

namespace {

// Dense solve by Gaussian elimination with partial pivoting; a is row-major n*n.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int row = col + 1; row < n; ++row)
            if (std::abs(a[static_cast<size_t>(row) * n + col]) >
                std::abs(a[static_cast<size_t>(piv) * n + col]))
                piv = row;
        if (a[static_cast<size_t>(piv) * n + col] == 0.0)
            throw std::logic_error("solve_dense: singular system");
        if (piv != col) {
            for (int k = col; k < n; ++k)
                std::swap(a[static_cast<size_t>(piv) * n + k], a[static_cast<size_t>(col) * n + k]);
            std::swap(b[piv], b[col]);
        }
        double d = a[static_cast<size_t>(col) * n + col];
        for (int row = col + 1; row < n; ++row) {
            double f = a[static_cast<size_t>(row) * n + col] / d;
            if (f == 0.0) continue;
            for (int k = col; k < n; ++k)
                a[static_cast<size_t>(row) * n + k] -= f * a[static_cast<size_t>(col) * n + k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int row = n - 1; row >= 0; --row) {
        double s = b[row];
        for (int k = row + 1; k < n; ++k) s -= a[static_cast<size_t>(row) * n + k] * x[k];
        x[row] = s / a[static_cast<size_t>(row) * n + row];
    }
    return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

ValueTable zero_table(Direction dir, int n_states, double lambda, double gamma) {
    return ValueTable{dir, lambda, gamma, std::vector<double>(n_states, 0.0)};
}

double backward_contraction_factor(double lambda, double gamma) { return lambda * gamma; }

double bidirectional_contraction_factor(double lambda, double gamma) {
    return gamma * (1.0 + lambda) / (1.0 + lambda * gamma * gamma);
}

namespace {

ValueTable solve_forward_gamma(const TabularMdp& mdp, const Policy& pi, double gamma) {
    const auto nt = mdp.nonterminal_states();
    const int m = static_cast<int>(nt.size());
    const auto kernel = mdp.state_kernel(pi);
    const auto rpi = mdp.state_reward(pi);

    std::vector<double> a(static_cast<size_t>(m) * m, 0.0), b(m);
    for (int i = 0; i < m; ++i) {
        b[i] = rpi[nt[i]];
        for (int j = 0; j < m; ++j) {
            double pij = kernel[static_cast<size_t>(nt[i]) * mdp.n_states + nt[j]];
            a[static_cast<size_t>(i) * m + j] = (i == j ? 1.0 : 0.0) - gamma * pij;
        }
    }
    auto x = solve_dense(std::move(a), std::move(b));

    ValueTable v = zero_table(Direction::forward, mdp.n_states, 0.0, gamma);
    for (int i = 0; i < m; ++i) v.values[nt[i]] = x[i];

    for (int i = 0; i < m; ++i) {
        double rhs = rpi[nt[i]];
        for (int s2 = 0; s2 < mdp.n_states; ++s2)
            rhs += gamma * kernel[static_cast<size_t>(nt[i]) * mdp.n_states + s2] * v.values[s2];
        if (std::abs(rhs - v.values[nt[i]]) > 1e-10)
            throw std::logic_error("solve_forward: Bellman residual exceeds 1e-10");
    }
    return v;
}

}  // namespace

ValueTable solve_forward(const TabularMdp& mdp, const Policy& pi) {
    return solve_forward_gamma(mdp, pi, mdp.gamma);
}

ValueTable apply_backward_operator(const ValueTable& values, const BackwardKernel& kernel,
                                   double lambda, double gamma) {
    if (values.direction != Direction::backward)
        throw std::invalid_argument("apply_backward_operator: table direction must be backward");
    if (static_cast<int>(values.values.size()) != kernel.n_states)
        throw std::invalid_argument("apply_backward_operator: state-count mismatch");

    const int n = kernel.n_states;
    ValueTable out = zero_table(Direction::backward, n, lambda, gamma);
    for (int s = 0; s < n; ++s) {
        const double* row = &kernel.p_back[static_cast<size_t>(s) * n];
        double acc = kernel.r_back[s];
        for (int sp = 0; sp < n; ++sp) acc += row[sp] * values.values[sp];
        out.values[s] = lambda * gamma * acc;
    }
    return out;
}

ValueTable solve_backward(const TabularMdp& mdp, const Policy& pi, const BackwardKernel& kernel,
                          double lambda, double gamma) {
    (void)pi;
    const auto nt = mdp.nonterminal_states();
    const int m = static_cast<int>(nt.size());
    const int n = mdp.n_states;
    std::vector<double> a(static_cast<size_t>(m) * m, 0.0), b(m);
    for (int i = 0; i < m; ++i) {
        b[i] = lambda * gamma * kernel.r_back[nt[i]];
        for (int j = 0; j < m; ++j)
            a[static_cast<size_t>(i) * m + j] = (i == j ? 1.0 : 0.0) -
                lambda * gamma * kernel.p_back[static_cast<size_t>(nt[i]) * n + nt[j]];
    }
    auto x = solve_dense(std::move(a), std::move(b));
    ValueTable v = zero_table(Direction::backward, n, lambda, gamma);
    for (int i = 0; i < m; ++i) v.values[nt[i]] = x[i];
    return v;
}

BidirectionalOperator BidirectionalOperator::make(const TabularMdp& mdp, const Policy& pi,
                                                  const BackwardKernel& kernel, double lambda,
                                                  double gamma, BidirectionalForm form) {
    BidirectionalOperator op;
    op.mdp = &mdp;
    op.kernel = &kernel;
    op.lambda = lambda;
    op.gamma = gamma;
    op.fwd_kernel = mdp.state_kernel(pi);
    op.rpi = mdp.state_reward(pi);
    if (form == BidirectionalForm::episodic) {
        // Coupling terms restore the conditional cross-direction expectations
        // the kernel-averaged sweep loses on branching chains:
        //   gamma * [ lambda*gamma*(u(s)+r(s)) - (P u)(s) ]
        // + lambda*gamma * [ r_back(s) + gamma*v(s) - (P_back v)(s) ]
        // where v and u are the forward and backward solutions at this
        // operator's (lambda, gamma). They are constant in the sweep
        // argument, so the contraction rate matches the stationary form's.
        const auto v = solve_forward_gamma(mdp, pi, gamma);
        const auto u = solve_backward(mdp, pi, kernel, lambda, gamma);
        const int n = mdp.n_states;
        op.coupling.assign(n, 0.0);
        for (int s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            double pu = 0.0, bv = 0.0;
            for (int s2 = 0; s2 < n; ++s2) {
                pu += op.fwd_kernel[static_cast<size_t>(s) * n + s2] * u.values[s2];
                bv += kernel.p_back[static_cast<size_t>(s) * n + s2] * v.values[s2];
            }
            op.coupling[s] = gamma * (lambda * gamma * (u.values[s] + op.rpi[s]) - pu) +
                             lambda * gamma * (kernel.r_back[s] + gamma * v.values[s] - bv);
        }
    }
    return op;
}

ValueTable BidirectionalOperator::apply(const ValueTable& values) const {
    if (values.direction != Direction::bidirectional)
        throw std::invalid_argument("bidirectional operator: table direction must be bidirectional");
    const int n = mdp->n_states;
    if (static_cast<int>(values.values.size()) != n)
        throw std::invalid_argument("bidirectional operator: state-count mismatch");

    const double denom = 1.0 + gamma * gamma * lambda;
    ValueTable out = zero_table(Direction::bidirectional, n, lambda, gamma);
    for (int s = 0; s < n; ++s) {
        if (mdp->is_terminal(s)) continue;
        double pv = 0.0, bv = 0.0;
        for (int s2 = 0; s2 < n; ++s2) {
            pv += fwd_kernel[static_cast<size_t>(s) * n + s2] * values.values[s2];
            bv += kernel->p_back[static_cast<size_t>(s) * n + s2] * values.values[s2];
        }
        double src = coupling.empty() ? 0.0 : coupling[s];
        out.values[s] =
            (rpi[s] * (1.0 - gamma * gamma * lambda) + gamma * pv + lambda * gamma * bv + src) /
            denom;
    }
    return out;
}

ValueTable apply_bidirectional_operator(const ValueTable& values, const TabularMdp& mdp,
                                        const Policy& pi, const BackwardKernel& kernel,
                                        double lambda, double gamma, BidirectionalForm form) {
    return BidirectionalOperator::make(mdp, pi, kernel, lambda, gamma, form).apply(values);
}

std::pair<ValueTable, FixpointReport> iterate_fixpoint(
    const std::function<ValueTable(const ValueTable&)>& op, ValueTable initial, double tol,
    int max_iters, double theoretical_factor) {
    if (!(tol > 0.0)) throw std::invalid_argument("iterate_fixpoint: tol must be positive");

    FixpointReport report;
    report.theoretical_factor = theoretical_factor;

    // Residual ratios are only meaningful above the floating-point noise
    // floor; ratios measured below it are discarded.
    const double ratio_floor = std::max(tol * 100.0, 1e-13);
    std::vector<double> ratios;
    double prev_residual = -1.0;

    ValueTable current = std::move(initial);
    bool converged = false;
    for (int it = 1; it <= max_iters; ++it) {
        ValueTable next = op(current);
        double residual = max_abs_diff(next.values, current.values);
        current = std::move(next);
        report.iterations = it;
        report.final_residual = residual;
        if (prev_residual > ratio_floor) ratios.push_back(residual / prev_residual);
        prev_residual = residual;
        if (residual < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw std::runtime_error("iterate_fixpoint: no convergence within max_iters");

    const size_t window = std::min<size_t>(10, ratios.size());
    if (window > 0) {
        double log_sum = 0.0;
        for (size_t i = ratios.size() - window; i < ratios.size(); ++i)
            log_sum += std::log(std::max(ratios[i], 1e-300));
        report.empirical_factor = std::exp(log_sum / static_cast<double>(window));
    }
    return {std::move(current), report};
}

double bidirectional_consistency(const ValueTable& v_fwd, const ValueTable& v_back,
                                 const ValueTable& v_bi) {
    double m = 0.0;
    for (size_t s = 0; s < v_bi.values.size(); ++s)
        m = std::max(m, std::abs(v_bi.values[s] - v_fwd.values[s] - v_back.values[s]));
    return m;
}

namespace {

struct Prefix {
    std::vector<int> states;    // s_0..s_t
    std::vector<double> rews;   // expected reward of each observed step
    double prob;
};

void enumerate_prefixes(const TabularMdp& mdp, const std::vector<double>& kernel,
                        const std::vector<double>& step_reward, int target, int time,
                        std::vector<int>& states, std::vector<double>& rews, double prob,
                        std::vector<Prefix>& out, long& visited) {
    if (++visited > 10'000'000)
        throw std::runtime_error("lemma1_check: trajectory enumeration exceeds cap");
    int depth = static_cast<int>(states.size()) - 1;
    if (depth == time) {
        if (states.back() == target) out.push_back({states, rews, prob});
        return;
    }
    int s = states.back();
    const int n = mdp.n_states;
    for (int s2 = 0; s2 < n; ++s2) {
        if (mdp.is_terminal(s2)) continue;  // the conditioning event needs a live chain
        double pr = kernel[static_cast<size_t>(s) * n + s2];
        if (pr == 0.0) continue;
        states.push_back(s2);
        rews.push_back(step_reward[static_cast<size_t>(s) * n + s2]);
        enumerate_prefixes(mdp, kernel, step_reward, target, time, states, rews, prob * pr, out,
                           visited);
        states.pop_back();
        rews.pop_back();
    }
}

}  // namespace

Lemma1Result lemma1_check(const TabularMdp& mdp, const Policy& pi, int state, int time,
                          double lambda, int horizon) {
    if (state < 0 || state >= mdp.n_states || mdp.is_terminal(state))
        throw std::invalid_argument("lemma1_check: state must be a nonterminal index");
    if (time < 0) throw std::invalid_argument("lemma1_check: negative time");

    const int n = mdp.n_states;
    const double gamma = mdp.gamma;
    const double x = lambda * gamma;
    const auto kernel = mdp.state_kernel(pi);
    const auto rpi = mdp.state_reward(pi);

    // expected reward conditioned on an observed (s -> s2) move
    std::vector<double> step_reward(static_cast<size_t>(n) * n, 0.0);
    for (int s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) continue;
        for (int s2 = 0; s2 < n; ++s2) {
            double flow = 0.0, rflow = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double w = pi.prob(s, a) * mdp.p(s, a, s2);
                flow += w;
                rflow += w * mdp.r(s, a);
            }
            if (flow > 0.0) step_reward[static_cast<size_t>(s) * n + s2] = rflow / flow;
        }
    }

    std::vector<Prefix> prefixes;
    long visited = 0;
    for (int s0 = 0; s0 < n; ++s0) {
        if (mdp.start_dist[s0] == 0.0 || mdp.is_terminal(s0)) continue;
        std::vector<int> states{s0};
        std::vector<double> rews;
        enumerate_prefixes(mdp, kernel, step_reward, state, time, states, rews,
                           mdp.start_dist[s0], prefixes, visited);
    }
    double z = 0.0;
    for (const auto& p : prefixes) z += p.prob;
    if (z <= 0.0) throw std::domain_error("lemma1_check: conditioning event has zero probability");

    const auto vpi = solve_forward(mdp, pi);

    // E[G_t | S_t = state] by horizon-truncated backward induction; this is
    // the enumeration-side tail, independent of the linear solve.
    std::vector<double> vh(n, 0.0), vh_next(n, 0.0);
    for (int h = 0; h < horizon; ++h) {
        for (int s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) {
                vh_next[s] = 0.0;
                continue;
            }
            double acc = rpi[s];
            for (int s2 = 0; s2 < n; ++s2)
                acc += gamma * kernel[static_cast<size_t>(s) * n + s2] * vh[s2];
            vh_next[s] = acc;
        }
        vh.swap(vh_next);
    }
    const double e_future = vh[state];

    double lhs = 0.0, e_gback = 0.0, e_prefix_return = 0.0;
    for (const auto& p : prefixes) {
        // conditional return from step i along this prefix, tail closed at t
        for (int i = 0; i <= time; ++i) {
            double gi = 0.0;
            for (int k = i; k < time; ++k) gi += std::pow(gamma, k - i) * p.rews[k];
            gi += std::pow(gamma, time - i) * vpi.values[state];
            lhs += p.prob * std::pow(x, time - i) * gi;
        }
        double gb = 0.0;
        for (int i = 1; i <= time; ++i) gb += std::pow(x, i) * p.rews[time - i];
        e_gback += p.prob * gb;
        double a0 = 0.0;
        for (int k = 0; k < time; ++k) a0 += std::pow(gamma, k) * p.rews[k];
        e_prefix_return += p.prob * a0;
    }
    lhs /= z;
    e_gback /= z;
    e_prefix_return /= z;

    const double e_g0 = e_prefix_return + std::pow(gamma, time) * e_future;
    const double rhs = (e_future + e_gback - gamma * std::pow(x, time + 1) * e_g0) /
                       (1.0 - gamma * gamma * lambda);
    return {lhs, rhs, std::abs(lhs - rhs)};
}

}  // namespace bitd
