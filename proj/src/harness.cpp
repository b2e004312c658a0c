#include "bitd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "bitd/diagnostics.hpp"
#include "bitd/exact.hpp"
#include "bitd/parallel.hpp"

namespace bitd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

}  // namespace

TabularMdp EnvConfig::build() const { return make_preset(preset, chain_n, amplitude, gamma); }

FeatureMap EnvConfig::feature_map(const TabularMdp& mdp) const {
    const int nt = static_cast<int>(mdp.nonterminal_states().size());
    if (features == "one-hot") return FeatureMap::one_hot(nt);
    if (features == "triangular") {
        auto a = anchors;
        if (a.empty() || a.back() >= nt) {
            a.clear();
            for (int s = 0; s < nt; s += 2) a.push_back(s);
            if (a.back() != nt - 1) a.push_back(nt - 1);
        }
        return FeatureMap::triangular(nt, a);
    }
    throw std::invalid_argument("unknown feature kind: " + features);
}

void ExperimentConfig::validate() const {
    if (algorithms.empty() || alphas.empty() || lambdas.empty())
        throw std::invalid_argument("experiment: empty grid");
    if (steps <= 0) throw std::invalid_argument("experiment: steps must be positive");
    if (seeds < 1) throw std::invalid_argument("experiment: need at least one seed");
    if (eval_interval <= 0) throw std::invalid_argument("experiment: eval_interval must be positive");
    for (const auto& a : algorithms) parse_algorithm(a);
    for (double a : alphas)
        if (!(a >= 0.0)) throw std::invalid_argument("experiment: negative alpha");
    for (double l : lambdas)
        if (l < 0.0 || l > 1.0) throw std::invalid_argument("experiment: lambda outside [0,1]");
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["env"] = {{"preset", env.preset},       {"chain_n", env.chain_n},
                {"amplitude", env.amplitude}, {"gamma", env.gamma},
                {"features", env.features},   {"anchors", env.anchors},
                {"hidden", env.hidden},       {"max_episode_steps", env.max_episode_steps}};
    j["algorithms"] = algorithms;
    j["alphas"] = alphas;
    j["lambdas"] = lambdas;
    j["targets"] = {{"theta", targets.theta}, {"phi", targets.phi}, {"psi", targets.psi}};
    j["steps"] = steps;
    j["eval_interval"] = eval_interval;
    j["seeds"] = seeds;
    j["master_seed"] = master_seed;
    j["svg"] = svg;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig c;
    if (j.contains("env")) {
        const auto& e = j.at("env");
        if (e.contains("preset")) c.env.preset = e.at("preset").get<std::string>();
        if (e.contains("chain_n")) c.env.chain_n = e.at("chain_n").get<int>();
        if (e.contains("amplitude")) c.env.amplitude = e.at("amplitude").get<double>();
        if (e.contains("gamma")) c.env.gamma = e.at("gamma").get<double>();
        if (e.contains("features")) c.env.features = e.at("features").get<std::string>();
        if (e.contains("anchors")) c.env.anchors = e.at("anchors").get<std::vector<int>>();
        if (e.contains("hidden")) c.env.hidden = e.at("hidden").get<int>();
        if (e.contains("max_episode_steps"))
            c.env.max_episode_steps = e.at("max_episode_steps").get<int>();
    }
    if (j.contains("algorithms")) c.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("lambdas")) c.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("targets")) {
        const auto& t = j.at("targets");
        if (t.contains("theta")) c.targets.theta = t.at("theta").get<std::string>();
        if (t.contains("phi")) c.targets.phi = t.at("phi").get<std::string>();
        if (t.contains("psi")) c.targets.psi = t.at("psi").get<std::string>();
    }
    if (j.contains("steps")) c.steps = j.at("steps").get<long>();
    if (j.contains("eval_interval")) c.eval_interval = j.at("eval_interval").get<int>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<int>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("svg")) c.svg = j.at("svg").get<bool>();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::pair<Algorithm, Parameterization> parse_algorithm(const std::string& name) {
    if (name.rfind("BiTD", 0) == 0) {
        if (name == "BiTD" || name == "BiTD-FR") return {Algorithm::BiTD, Parameterization::FR};
        if (name == "BiTD-BiR") return {Algorithm::BiTD, Parameterization::BiR};
        if (name == "BiTD-FBi") return {Algorithm::BiTD, Parameterization::FBi};
        throw std::invalid_argument("unknown BiTD variant: " + name);
    }
    return {algorithm_from_string(name), Parameterization::FR};
}

std::uint64_t derive_seed(std::uint64_t master_seed, int seed_index) {
    return splitmix64(master_seed ^ splitmix64(0x51ed270b * 2654435761ull + seed_index));
}

double trapezoid_auc(const MetricSeries& s) {
    double auc = 0.0;
    for (size_t k = 1; k < s.steps.size(); ++k)
        auc += (s.steps[k] - s.steps[k - 1]) * 0.5 * (s.mstde[k] + s.mstde[k - 1]);
    return auc;
}

namespace {

struct EvalContext {
    TabularMdp mdp;
    Policy pi;
    FeatureMap fm;
    std::vector<double> visit;
    ValueTable exact;
};

EvalContext make_context(const ExperimentConfig& cfg) {
    EvalContext ctx{cfg.env.build(), {}, FeatureMap::one_hot(1), {}, {}};
    ctx.pi = uniform_policy(ctx.mdp);
    ctx.fm = cfg.env.feature_map(ctx.mdp);
    ctx.visit = visitation_distribution(ctx.mdp, ctx.pi);
    ctx.exact = solve_forward(ctx.mdp, ctx.pi);
    return ctx;
}

int sample_from(const std::vector<double>& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double u = u01(rng), acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

RunRecord run_single_in(const EvalContext& ctx, const ExperimentConfig& cfg,
                        const std::string& algorithm, double alpha, double lambda,
                        int seed_index) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.algorithm = algorithm;
    rec.alpha = alpha;
    rec.lambda = lambda;
    rec.seed_index = seed_index;
    rec.rng_seed = derive_seed(cfg.master_seed, seed_index);

    auto [alg, param] = parse_algorithm(algorithm);
    LearnerConfig lc;
    lc.algorithm = alg;
    lc.parameterization = param;
    lc.alpha = std::max(alpha, std::numeric_limits<double>::min());  // alpha=0 runs as a frozen net
    lc.lambda = lambda;
    lc.gamma = ctx.mdp.gamma;
    lc.targets = cfg.targets;

    std::mt19937_64 env_rng(splitmix64(rec.rng_seed ^ 0x8ad4ce0du));
    MultiHeadNet net =
        MultiHeadNet::make(param, ctx.fm.dim(), cfg.env.hidden, splitmix64(rec.rng_seed ^ 0x2c1b3c6du));

    OnlineLearner learner(lc, std::move(net), ctx.fm);
    const bool frozen = alpha == 0.0;

    auto evaluate = [&](long step) {
        const auto values = forward_values(learner.net(), ctx.fm, ctx.mdp);
        const double m = mstde(values, ctx.mdp, ctx.pi, ctx.visit);
        const double r = rmsve(values, ctx.exact, ctx.visit);
        if (!std::isfinite(m) || !std::isfinite(r) || !learner.net().finite()) return false;
        rec.series.steps.push_back(step);
        rec.series.mstde.push_back(m);
        rec.series.rmsve.push_back(r);
        return true;
    };

    evaluate(0);
    int state = sample_from(ctx.mdp.start_dist, env_rng);
    int episode_len = 0;
    learner.begin_episode();
    for (long step = 1; step <= cfg.steps; ++step) {
        const double* prow = &ctx.pi.probs[static_cast<size_t>(state) * ctx.mdp.n_actions];
        std::vector<double> pvec(prow, prow + ctx.mdp.n_actions);
        const int a = sample_from(pvec, env_rng);
        const double* trow = &ctx.mdp.transition[(static_cast<size_t>(state) * ctx.mdp.n_actions + a) *
                                                 ctx.mdp.n_states];
        std::vector<double> tvec(trow, trow + ctx.mdp.n_states);
        const int next = sample_from(tvec, env_rng);
        const double r = ctx.mdp.r(state, a);

        if (!frozen) learner.observe(state, r, next, ctx.mdp.is_terminal(next));

        ++episode_len;
        if (ctx.mdp.is_terminal(next) || episode_len >= cfg.env.max_episode_steps) {
            state = sample_from(ctx.mdp.start_dist, env_rng);
            episode_len = 0;
            learner.begin_episode();
        } else {
            state = next;
        }

        if (step % cfg.eval_interval == 0 && !evaluate(step)) {
            rec.diverged = true;
            break;
        }
    }

    rec.auc = rec.diverged ? kInf : trapezoid_auc(rec.series);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

struct Cell {
    std::string algorithm;
    double alpha;
    double lambda;
};

std::vector<Cell> expand_grid(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (const auto& alg : cfg.algorithms) {
        // one-step TD has no lambda; collapse its lambda axis
        const bool no_lambda = parse_algorithm(alg).first == Algorithm::TD0;
        std::vector<double> ls = no_lambda ? std::vector<double>{0.0} : cfg.lambdas;
        for (double a : cfg.alphas)
            for (double l : ls) cells.push_back({alg, a, l});
    }
    return cells;
}

}  // namespace

RunRecord run_single(const ExperimentConfig& cfg, const std::string& algorithm, double alpha,
                     double lambda, int seed_index) {
    cfg.validate();
    const EvalContext ctx = make_context(cfg);
    return run_single_in(ctx, cfg, algorithm, alpha, lambda, seed_index);
}

SweepResult run_sweep(const ExperimentConfig& cfg, bool parallel) {
    cfg.validate();
    const EvalContext ctx = make_context(cfg);
    const auto cells = expand_grid(cfg);
    const long total = static_cast<long>(cells.size()) * cfg.seeds;

    SweepResult out;
    out.records.resize(total);
    for (long s = 0; s <= cfg.steps; s += cfg.eval_interval) out.eval_steps.push_back(s);

    parallel_for(
        total,
        [&](long i) {
            const Cell& c = cells[i / cfg.seeds];
            const int seed_index = static_cast<int>(i % cfg.seeds);
            RunRecord& slot = out.records[i];
            try {
                slot = run_single_in(ctx, cfg, c.algorithm, c.alpha, c.lambda, seed_index);
            } catch (const std::exception& e) {
                slot.algorithm = c.algorithm;
                slot.alpha = c.alpha;
                slot.lambda = c.lambda;
                slot.seed_index = seed_index;
                slot.failed = true;
                slot.error = e.what();
                slot.auc = kInf;
            }
        },
        parallel);

    // reduce per cell, in grid order
    for (size_t ci = 0; ci < cells.size(); ++ci) {
        CellSummary cs;
        cs.algorithm = cells[ci].algorithm;
        cs.alpha = cells[ci].alpha;
        cs.lambda = cells[ci].lambda;
        cs.seeds = cfg.seeds;
        std::vector<double> aucs;
        bool clean = true;
        for (int s = 0; s < cfg.seeds; ++s) {
            const RunRecord& r = out.records[ci * cfg.seeds + s];
            if (r.failed) {
                ++cs.failed;
                clean = false;
                continue;
            }
            if (r.diverged) {
                ++cs.diverged;
                clean = false;
            }
            aucs.push_back(r.auc);
        }
        double sum = 0.0;
        for (double a : aucs) sum += a;
        cs.mean_auc = aucs.empty() ? kInf : sum / aucs.size();
        if (aucs.size() > 1 && std::isfinite(cs.mean_auc)) {
            double var = 0.0;
            for (double a : aucs) var += (a - cs.mean_auc) * (a - cs.mean_auc);
            cs.stderr_auc = std::sqrt(var / (aucs.size() - 1)) / std::sqrt(double(aucs.size()));
        } else {
            cs.stderr_auc = std::isfinite(cs.mean_auc) ? 0.0 : kInf;
        }
        if (clean) {
            cs.mean_mstde.assign(out.eval_steps.size(), 0.0);
            for (int s = 0; s < cfg.seeds; ++s) {
                const RunRecord& r = out.records[ci * cfg.seeds + s];
                for (size_t k = 0; k < out.eval_steps.size() && k < r.series.mstde.size(); ++k)
                    cs.mean_mstde[k] += r.series.mstde[k] / cfg.seeds;
            }
        }
        out.summary.push_back(std::move(cs));
    }

    // flag the best cell per algorithm by mean AUC
    for (const auto& alg : cfg.algorithms) {
        size_t best = out.summary.size();
        for (size_t i = 0; i < out.summary.size(); ++i) {
            if (out.summary[i].algorithm != alg) continue;
            if (best == out.summary.size() || out.summary[i].mean_auc < out.summary[best].mean_auc)
                best = i;
        }
        if (best < out.summary.size() && std::isfinite(out.summary[best].mean_auc))
            out.summary[best].best_for_algorithm = true;
    }
    return out;
}

namespace {

void write_svg(const SweepResult& result, const std::string& path) {
    const int width = 760, height = 480, ml = 60, mr = 20, mt = 20, mb = 40;
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::vector<const CellSummary*> best;
    for (const auto& cs : result.summary)
        if (cs.best_for_algorithm && !cs.mean_mstde.empty()) best.push_back(&cs);
    double ymax = 1e-9;
    long xmax = 1;
    for (const auto* cs : best)
        for (size_t k = 0; k < cs->mean_mstde.size(); ++k) ymax = std::max(ymax, cs->mean_mstde[k]);
    if (!result.eval_steps.empty()) xmax = std::max<long>(1, result.eval_steps.back());

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    out << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
        << height - mb << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
        << "' stroke='black'/>\n";
    out << "<text x='" << (width / 2) << "' y='" << height - 8
        << "' font-size='13' text-anchor='middle'>environment steps</text>\n";
    out << "<text x='14' y='" << (height / 2)
        << "' font-size='13' text-anchor='middle' transform='rotate(-90 14 " << (height / 2)
        << ")'>MSTDE (forward head)</text>\n";

    int ci = 0;
    for (const auto* cs : best) {
        out << "<polyline fill='none' stroke='" << palette[ci % 6] << "' stroke-width='1.5' points='";
        for (size_t k = 0; k < cs->mean_mstde.size(); ++k) {
            double x = ml + (double(result.eval_steps[k]) / xmax) * (width - ml - mr);
            double y = (height - mb) - (cs->mean_mstde[k] / ymax) * (height - mt - mb);
            out << fmt(x) << "," << fmt(y) << " ";
        }
        out << "'/>\n";
        out << "<text x='" << ml + 10 << "' y='" << mt + 16 + 16 * ci << "' font-size='12' fill='"
            << palette[ci % 6] << "'>" << cs->algorithm << " alpha=" << fmt(cs->alpha)
            << " lambda=" << fmt(cs->lambda) << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
}

}  // namespace

std::vector<std::string> emit_outputs(const SweepResult& result, const ExperimentConfig& cfg,
                                      const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<std::string> written;
    const std::string curves_path = (fs::path(out_dir) / "curves.csv").string();
    {
        std::ofstream out(curves_path);
        if (!out) throw std::runtime_error("cannot write " + curves_path);
        out << "step,algorithm,alpha,lambda,seed,mstde,rmsve\n";
        for (const auto& r : result.records) {
            if (r.failed) continue;
            for (size_t k = 0; k < r.series.steps.size(); ++k)
                out << r.series.steps[k] << "," << r.algorithm << "," << fmt(r.alpha) << ","
                    << fmt(r.lambda) << "," << r.seed_index << "," << fmt(r.series.mstde[k]) << ","
                    << fmt(r.series.rmsve[k]) << "\n";
        }
    }
    written.push_back(curves_path);

    const std::string summary_path = (fs::path(out_dir) / "summary.csv").string();
    {
        std::ofstream out(summary_path);
        if (!out) throw std::runtime_error("cannot write " + summary_path);
        out << "algorithm,alpha,lambda,seeds,diverged,failed,mean_auc,stderr_auc,best\n";
        for (const auto& c : result.summary)
            out << c.algorithm << "," << fmt(c.alpha) << "," << fmt(c.lambda) << "," << c.seeds << ","
                << c.diverged << "," << c.failed << "," << fmt(c.mean_auc) << ","
                << fmt(c.stderr_auc) << "," << (c.best_for_algorithm ? 1 : 0) << "\n";
    }
    written.push_back(summary_path);

    if (cfg.svg) {
        const std::string svg_path = (fs::path(out_dir) / "curves.svg").string();
        write_svg(result, svg_path);
        written.push_back(svg_path);
    }
    return written;
}

}  // namespace bitd
