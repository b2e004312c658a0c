#include "bitd/learners.hpp"

#include <stdexcept>

#include "json.hpp"

namespace bitd {

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::TD0: return "TD0";
        case Algorithm::TDLambda: return "TDLambda";
        case Algorithm::RefreshedTDLambda: return "RefreshedTDLambda";
        case Algorithm::BackwardMC: return "BackwardMC";
        case Algorithm::BiTD: return "BiTD";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "TD0") return Algorithm::TD0;
    if (s == "TDLambda") return Algorithm::TDLambda;
    if (s == "RefreshedTDLambda") return Algorithm::RefreshedTDLambda;
    if (s == "BackwardMC") return Algorithm::BackwardMC;
    if (s == "BiTD") return Algorithm::BiTD;
    throw std::invalid_argument("unknown algorithm: " + s);
}

void LearnerConfig::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("learner: alpha must be positive");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("learner: lambda outside [0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("learner: gamma outside (0,1)");
    auto in = [](const std::string& v, std::initializer_list<const char*> set) {
        for (const char* s : set)
            if (v == s) return true;
        return false;
    };
    if (!in(targets.theta, {"td0", "bidir-minus-back", "bidir-minus-G"}))
        throw std::invalid_argument("learner: unknown theta target " + targets.theta);
    if (!in(targets.phi, {"mc", "td", "bidir-minus-fwd"}))
        throw std::invalid_argument("learner: unknown phi target " + targets.phi);
    if (!in(targets.psi, {"bellman", "back-plus-td", "back-plus-fwd"}))
        throw std::invalid_argument("learner: unknown psi target " + targets.psi);
}

std::string LearnerConfig::to_json() const {
    nlohmann::json j;
    j["algorithm"] = to_string(algorithm);
    j["parameterization"] = to_string(parameterization);
    j["alpha"] = alpha;
    j["lambda"] = lambda;
    j["gamma"] = gamma;
    j["targets"] = {{"theta", targets.theta}, {"phi", targets.phi}, {"psi", targets.psi}};
    return j.dump();
}

LearnerConfig LearnerConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    LearnerConfig c;
    c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    if (j.contains("parameterization"))
        c.parameterization = parameterization_from_string(j.at("parameterization").get<std::string>());
    c.alpha = j.at("alpha").get<double>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    c.gamma = j.at("gamma").get<double>();
    if (j.contains("targets")) {
        const auto& t = j.at("targets");
        if (t.contains("theta")) c.targets.theta = t.at("theta").get<std::string>();
        if (t.contains("phi")) c.targets.phi = t.at("phi").get<std::string>();
        if (t.contains("psi")) c.targets.psi = t.at("psi").get<std::string>();
    }
    c.validate();
    return c;
}

void LearnerState::reset(const MultiHeadNet& net) {
    trace.head = Head::forward;
    trace.g.assign(net.params.size(), 0.0);
    backward_return = 0.0;
    has_prev = false;
    prev_state = -1;
    prev_reward = 0.0;
    t = 0;
    episode_states.clear();
    episode_gradients.clear();
}

void advance_episode_state(LearnerState& st, int state, double reward) {
    st.episode_states.push_back(state);
    st.has_prev = true;
    st.prev_state = state;
    st.prev_reward = reward;
    ++st.t;
}

namespace {

double next_value(const MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                  Head head) {
    if (tr.next_terminal) return 0.0;
    return net.value(fm.encode(tr.next_state), head);
}

}  // namespace

double td0_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                const LearnerConfig& cfg) {
    const auto x = fm.encode(tr.state);
    const double v = net.value(x, Head::forward);
    const double delta = tr.reward + cfg.gamma * next_value(net, fm, tr, Head::forward) - v;
    net.sgd_step(net.gradient(x, Head::forward), cfg.alpha * delta);
    return delta;
}

double td_lambda_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                      LearnerState& st, const LearnerConfig& cfg) {
    const auto x = fm.encode(tr.state);
    GradientVector g = net.gradient(x, Head::forward);
    const double decay = cfg.gamma * cfg.lambda;
    for (size_t i = 0; i < st.trace.g.size(); ++i) st.trace.g[i] = decay * st.trace.g[i] + g.g[i];
    if (st.record_gradients) st.episode_gradients.push_back(g);

    const double v = net.value(x, Head::forward);
    const double delta = tr.reward + cfg.gamma * next_value(net, fm, tr, Head::forward) - v;
    net.sgd_step(st.trace, cfg.alpha * delta);
    return delta;
}

double refreshed_td_lambda_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr,
                                LearnerState& st, const LearnerConfig& cfg) {
    const auto x = fm.encode(tr.state);
    const double decay = cfg.gamma * cfg.lambda;

    // Horner accumulation over the visit sequence, every gradient taken at
    // the current weights; ordering matches the recursive trace bit for bit
    // when the gradients are weight-independent.
    GradientVector trace;
    trace.head = Head::forward;
    trace.g.assign(net.params.size(), 0.0);
    for (int s : st.episode_states) {
        GradientVector g = net.gradient(fm.encode(s), Head::forward);
        for (size_t i = 0; i < trace.g.size(); ++i) trace.g[i] = decay * trace.g[i] + g.g[i];
    }
    {
        GradientVector g = net.gradient(x, Head::forward);
        for (size_t i = 0; i < trace.g.size(); ++i) trace.g[i] = decay * trace.g[i] + g.g[i];
    }

    const double v = net.value(x, Head::forward);
    const double delta = tr.reward + cfg.gamma * next_value(net, fm, tr, Head::forward) - v;
    net.sgd_step(trace, cfg.alpha * delta);
    return delta;
}

std::optional<double> backward_mc_step(MultiHeadNet& net, const FeatureMap& fm, int state,
                                       LearnerState& st, const LearnerConfig& cfg) {
    if (st.t < 1) return std::nullopt;
    const double decay = cfg.gamma * cfg.lambda;
    st.backward_return = decay * (st.backward_return + st.prev_reward);
    const auto x = fm.encode(state);
    const double delta = st.backward_return - net.value(x, Head::backward);
    net.sgd_step(net.gradient(x, Head::backward), cfg.alpha * delta);
    return st.backward_return;
}

double appendix_f_target(const std::string& kind, const MultiHeadNet& snapshot,
                         const FeatureMap& fm, const TransitionView& tr, const LearnerState& st,
                         const LearnerConfig& cfg) {
    const auto x = fm.encode(tr.state);
    const auto v = snapshot.forward_all(x);
    const double g2l = cfg.gamma * cfg.gamma * cfg.lambda;
    auto prev_value = [&](Head h) {
        if (!st.has_prev)
            throw std::invalid_argument("appendix_f_target: '" + kind +
                                        "' needs a previous state (t >= 1)");
        return snapshot.value(fm.encode(st.prev_state), h);
    };

    if (kind == "td0")
        return tr.reward + cfg.gamma * next_value(snapshot, fm, tr, Head::forward);
    if (kind == "bidir-minus-back") return v.bidirectional - v.backward;
    if (kind == "bidir-minus-G") return v.bidirectional - st.backward_return;

    if (kind == "mc") return st.backward_return;
    if (kind == "td")
        return cfg.lambda * cfg.gamma * (st.prev_reward + prev_value(Head::backward));
    if (kind == "bidir-minus-fwd") return v.bidirectional - v.forward;

    if (kind == "bellman")
        return (tr.reward * (1.0 - g2l) +
                cfg.gamma * next_value(snapshot, fm, tr, Head::bidirectional) +
                cfg.gamma * cfg.lambda * prev_value(Head::bidirectional)) /
               (1.0 + g2l);
    if (kind == "back-plus-td")
        return v.backward + tr.reward + cfg.gamma * next_value(snapshot, fm, tr, Head::forward);
    if (kind == "back-plus-fwd") return v.backward + v.forward;

    throw std::invalid_argument("appendix_f_target: unknown kind " + kind);
}

void bitd_step(MultiHeadNet& net, const FeatureMap& fm, const TransitionView& tr, LearnerState& st,
               const LearnerConfig& cfg) {
    const MultiHeadNet snapshot = net;
    const auto x = fm.encode(tr.state);
    const auto v = snapshot.forward_all(x);

    if (st.t >= 1)
        st.backward_return = cfg.gamma * cfg.lambda * (st.backward_return + st.prev_reward);

    const double tau_theta = appendix_f_target(cfg.targets.theta, snapshot, fm, tr, st, cfg);
    net.sgd_step(snapshot.gradient(x, Head::forward), cfg.alpha * (tau_theta - v.forward));

    if (st.t >= 1) {
        const double tau_phi = appendix_f_target(cfg.targets.phi, snapshot, fm, tr, st, cfg);
        net.sgd_step(snapshot.gradient(x, Head::backward), cfg.alpha * (tau_phi - v.backward));
        const double tau_psi = appendix_f_target(cfg.targets.psi, snapshot, fm, tr, st, cfg);
        net.sgd_step(snapshot.gradient(x, Head::bidirectional),
                     cfg.alpha * (tau_psi - v.bidirectional));
    }
}

OnlineLearner::OnlineLearner(LearnerConfig cfg, MultiHeadNet net, FeatureMap fm)
    : cfg_(std::move(cfg)), net_(std::move(net)), fm_(std::move(fm)) {
    cfg_.validate();
    st_.reset(net_);
}

void OnlineLearner::begin_episode() { st_.reset(net_); }

void OnlineLearner::observe(int state, double reward, int next_state, bool next_terminal) {
    TransitionView tr{state, reward, next_state, next_terminal};
    switch (cfg_.algorithm) {
        case Algorithm::TD0: td0_step(net_, fm_, tr, cfg_); break;
        case Algorithm::TDLambda: td_lambda_step(net_, fm_, tr, st_, cfg_); break;
        case Algorithm::RefreshedTDLambda: refreshed_td_lambda_step(net_, fm_, tr, st_, cfg_); break;
        case Algorithm::BackwardMC: backward_mc_step(net_, fm_, state, st_, cfg_); break;
        case Algorithm::BiTD: bitd_step(net_, fm_, tr, st_, cfg_); break;
    }
    advance_episode_state(st_, state, reward);
}

}  // namespace bitd
