#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "CLI11.hpp"

#include "bitd/diagnostics.hpp"
#include "bitd/exact.hpp"
#include "bitd/harness.hpp"
#include "bitd/parallel.hpp"

namespace {

using namespace bitd;

struct EnvFlags {
    std::string env = "chain";
    int chain_n = 9;
    double amplitude = 5.0;
    double gamma = 0.99;

    void attach(CLI::App* cmd) {
        cmd->add_option("--env", env, "chain | two-state | path to an MDP JSON file");
        cmd->add_option("--chain-n", chain_n, "nonterminal chain length");
        cmd->add_option("--amplitude", amplitude, "chain reward amplitude");
        cmd->add_option("--gamma", gamma, "discount factor for the chain preset");
    }
    TabularMdp build() const { return make_preset(env, chain_n, amplitude, gamma); }
};

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

int cmd_dp(const EnvFlags& env, const std::vector<double>& lambdas, const std::string& out_dir,
           double tol) {
    const TabularMdp mdp = env.build();
    const Policy pi = uniform_policy(mdp);
    const auto visit = visitation_distribution(mdp, pi);
    const auto kernel = backward_kernel(mdp, pi, visit);
    const ValueTable v_fwd = solve_forward(mdp, pi);
    const double gamma = mdp.gamma;

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream values(fs::path(out_dir) / "values.csv");
    std::ofstream contraction(fs::path(out_dir) / "contraction.csv");
    values << "lambda,state,v_forward,v_backward,v_bidirectional\n";
    contraction << "lambda,operator,theoretical_factor,empirical_factor,iterations,final_residual\n";

    for (double lambda : lambdas) {
        auto back_op = [&](const ValueTable& t) {
            return apply_backward_operator(t, kernel, lambda, gamma);
        };
        auto [v_back, back_report] =
            iterate_fixpoint(back_op, zero_table(Direction::backward, mdp.n_states, lambda, gamma),
                             tol, 2000000, backward_contraction_factor(lambda, gamma));
        const auto bidir = BidirectionalOperator::make(mdp, pi, kernel, lambda, gamma);
        auto [v_bi, bi_report] = iterate_fixpoint(
            [&](const ValueTable& t) { return bidir.apply(t); },
            zero_table(Direction::bidirectional, mdp.n_states, lambda, gamma), tol, 2000000,
            bidirectional_contraction_factor(lambda, gamma));

        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_terminal(s)) continue;
            values << fmt(lambda) << "," << s << "," << fmt(v_fwd.values[s]) << ","
                   << fmt(v_back.values[s]) << "," << fmt(v_bi.values[s]) << "\n";
        }
        contraction << fmt(lambda) << ",backward," << fmt(back_report.theoretical_factor) << ","
                    << fmt(back_report.empirical_factor) << "," << back_report.iterations << ","
                    << fmt(back_report.final_residual) << "\n";
        contraction << fmt(lambda) << ",bidirectional," << fmt(bi_report.theoretical_factor) << ","
                    << fmt(bi_report.empirical_factor) << "," << bi_report.iterations << ","
                    << fmt(bi_report.final_residual) << "\n";

        const double gap = bidirectional_consistency(v_fwd, v_back, v_bi);
        std::printf("lambda=%-5g  additivity gap %.3e  backward factor %.6f/%.6f  "
                    "bidirectional factor %.6f/%.6f\n",
                    lambda, gap, back_report.empirical_factor, back_report.theoretical_factor,
                    bi_report.empirical_factor, bi_report.theoretical_factor);
    }
    std::printf("wrote %s/values.csv and %s/contraction.csv\n", out_dir.c_str(), out_dir.c_str());
    return 0;
}

int cmd_lemma(const EnvFlags& env, double lambda, int max_t, int horizon, double warn_tol) {
    const TabularMdp mdp = env.build();
    const Policy pi = uniform_policy(mdp);
    const auto nt = mdp.nonterminal_states();

    struct Item {
        int s, t;
        Lemma1Result res;
        bool reachable;
    };
    std::vector<Item> items;
    for (int t = 0; t <= max_t; ++t)
        for (int s : nt) items.push_back({s, t, {}, true});

    parallel_for(static_cast<long>(items.size()), [&](long i) {
        try {
            items[i].res = lemma1_check(mdp, pi, items[i].s, items[i].t, lambda, horizon);
        } catch (const std::domain_error&) {
            items[i].reachable = false;
        }
    });

    double worst = 0.0;
    std::printf("%4s %4s %18s %18s %12s\n", "s", "t", "lhs", "rhs", "gap");
    for (const auto& it : items) {
        if (!it.reachable) {
            std::printf("%4d %4d %18s %18s %12s\n", it.s, it.t, "-", "-", "unreachable");
            continue;
        }
        std::printf("%4d %4d %18.12f %18.12f %12.3e\n", it.s, it.t, it.res.lhs, it.res.rhs,
                    it.res.gap);
        worst = std::max(worst, it.res.gap);
    }
    std::printf("worst gap: %.3e%s\n", worst, worst < warn_tol ? "" : "  (above tolerance!)");
    return 0;
}

int cmd_stale_demo(std::uint64_t seeds, double alpha, int hidden, double lambda,
                   const std::string& out_dir) {
    StaleDemoSettings settings;
    settings.alpha = alpha;
    settings.hidden = hidden;
    settings.lambda = lambda;
    auto demo = find_stale_demo(0, seeds, settings);
    if (!demo) {
        std::fprintf(stderr, "no exhibit found in seeds [0, %llu); widen the range\n",
                     static_cast<unsigned long long>(seeds));
        return 1;
    }
    std::printf("seed          %llu\n", static_cast<unsigned long long>(demo->seed));
    std::printf("delta_0       %+.8f\n", demo->delta0);
    std::printf("delta_1       %+.8f\n", demo->delta1);
    std::printf("dot(s0)       %+.8f   (cosine %+.6f, obtuse)\n", demo->record.dot,
                demo->record.cosine);
    std::printf("dv(s0) stale      %+.8f   (opposite sign of delta_1)\n", demo->dv_stale);
    std::printf("dv(s0) refreshed  %+.8f   (with sign of delta_1)\n", demo->dv_refreshed);
    std::printf("initial net   %s\n", demo->initial_net.to_json().c_str());

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "stale_demo.csv");
        csv << "quantity,value\n";
        csv << "seed," << demo->seed << "\n";
        csv << "alpha," << fmt(alpha) << "\n";
        csv << "hidden," << hidden << "\n";
        csv << "lambda," << fmt(lambda) << "\n";
        csv << "delta_0," << fmt(demo->delta0) << "\n";
        csv << "delta_1," << fmt(demo->delta1) << "\n";
        csv << "dot_s0," << fmt(demo->record.dot) << "\n";
        csv << "cosine_s0," << fmt(demo->record.cosine) << "\n";
        csv << "dv_s0_stale," << fmt(demo->dv_stale) << "\n";
        csv << "dv_s0_refreshed," << fmt(demo->dv_refreshed) << "\n";
        std::ofstream net(fs::path(out_dir) / "stale_net.json");
        net << demo->initial_net.to_json() << "\n";
        std::printf("wrote %s/stale_demo.csv and %s/stale_net.json\n", out_dir.c_str(),
                    out_dir.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"policy-evaluation lab: exact solvers, trace learners, experiment harness"};
    app.require_subcommand(1);

    // dp
    auto* dp = app.add_subcommand("dp", "exact value tables and contraction report");
    EnvFlags dp_env;
    dp_env.attach(dp);
    std::vector<double> dp_lambdas = {0.0, 0.4, 0.95};
    std::string dp_out = "out";
    double dp_tol = 1e-12;
    dp->add_option("--lambdas", dp_lambdas, "lambda values");
    dp->add_option("--out", dp_out, "output directory");
    dp->add_option("--tol", dp_tol, "fixpoint tolerance");

    // train
    auto* train = app.add_subcommand("train", "single training run");
    std::string train_config, train_out = "out";
    std::string train_algorithm = "TDLambda";
    double train_alpha = 0.1, train_lambda = 0.0;
    long train_steps = -1;
    int train_seed = 0;
    std::uint64_t train_master = 0;
    bool train_master_set = false;
    train->add_option("--config", train_config, "experiment config JSON");
    train->add_option("--algorithm", train_algorithm, "TD0|TDLambda|RefreshedTDLambda|BackwardMC|BiTD-FR|BiTD-BiR|BiTD-FBi");
    train->add_option("--alpha", train_alpha, "step size");
    train->add_option("--lambda", train_lambda, "trace decay");
    train->add_option("--steps", train_steps, "environment steps");
    train->add_option("--seed-index", train_seed, "seed index");
    train->add_option("--master-seed", train_master, "master seed")->each([&](const std::string&) {
        train_master_set = true;
    });
    train->add_option("--out", train_out, "output directory");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "hyperparameter sweep");
    std::string sweep_config, sweep_out = "out";
    int sweep_seeds = -1;
    long sweep_steps = -1;
    std::uint64_t sweep_master = 0;
    bool sweep_master_set = false, sweep_svg = false, sweep_serial = false;
    sweep->add_option("--config", sweep_config, "experiment config JSON");
    sweep->add_option("--out", sweep_out, "output directory");
    sweep->add_option("--seeds", sweep_seeds, "seeds per cell");
    sweep->add_option("--steps", sweep_steps, "environment steps per run");
    sweep->add_option("--master-seed", sweep_master, "master seed")->each([&](const std::string&) {
        sweep_master_set = true;
    });
    sweep->add_flag("--svg", sweep_svg, "also write curves.svg");
    sweep->add_flag("--serial", sweep_serial, "disable parallel execution");

    // stale-demo
    auto* stale = app.add_subcommand("stale-demo", "find and print the obtuse-trace exhibit");
    std::uint64_t stale_seeds = 10000;
    double stale_alpha = 0.5, stale_lambda = 0.95;
    int stale_hidden = 2;
    std::string stale_out;
    stale->add_option("--seeds", stale_seeds, "number of seeds to scan");
    stale->add_option("--alpha", stale_alpha, "step size of the demo updates");
    stale->add_option("--hidden", stale_hidden, "hidden width of the demo net");
    stale->add_option("--lambda", stale_lambda, "trace decay");
    stale->add_option("--out", stale_out, "output directory for the CSV trace");

    // lemma-check
    auto* lemma = app.add_subcommand("lemma-check", "enumeration check of the value-sum identity");
    EnvFlags lemma_env;
    lemma_env.chain_n = 5;
    lemma_env.gamma = 0.9;
    lemma_env.attach(lemma);
    double lemma_lambda = 0.5, lemma_tol = 1e-8;
    int lemma_max_t = 5, lemma_horizon = 400;
    lemma->add_option("--lambda", lemma_lambda, "trace decay");
    lemma->add_option("--max-t", lemma_max_t, "largest conditioning time");
    lemma->add_option("--horizon", lemma_horizon, "enumeration horizon for return tails");
    lemma->add_option("--tol", lemma_tol, "gap to flag");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dp->parsed()) return cmd_dp(dp_env, dp_lambdas, dp_out, dp_tol);
        if (lemma->parsed())
            return cmd_lemma(lemma_env, lemma_lambda, lemma_max_t, lemma_horizon, lemma_tol);
        if (stale->parsed())
            return cmd_stale_demo(stale_seeds, stale_alpha, stale_hidden, stale_lambda, stale_out);

        if (train->parsed()) {
            ExperimentConfig cfg = train_config.empty() ? ExperimentConfig{}
                                                        : ExperimentConfig::from_json_file(train_config);
            if (train_steps > 0) cfg.steps = train_steps;
            if (train_master_set) cfg.master_seed = train_master;
            RunRecord rec = run_single(cfg, train_algorithm, train_alpha, train_lambda, train_seed);
            SweepResult res;
            res.records.push_back(rec);
            for (long s = 0; s <= cfg.steps; s += cfg.eval_interval) res.eval_steps.push_back(s);
            auto files = emit_outputs(res, cfg, train_out);
            std::printf("%s alpha=%g lambda=%g seed=%d: auc=%g%s (%.2fs)\n", rec.algorithm.c_str(),
                        rec.alpha, rec.lambda, rec.seed_index, rec.auc,
                        rec.diverged ? " [diverged]" : "", rec.wall_seconds);
            for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
            return 0;
        }

        if (sweep->parsed()) {
            ExperimentConfig cfg = sweep_config.empty() ? ExperimentConfig{}
                                                        : ExperimentConfig::from_json_file(sweep_config);
            if (sweep_seeds > 0) cfg.seeds = sweep_seeds;
            if (sweep_steps > 0) cfg.steps = sweep_steps;
            if (sweep_master_set) cfg.master_seed = sweep_master;
            cfg.svg = cfg.svg || sweep_svg;
            SweepResult res = run_sweep(cfg, !sweep_serial);
            auto files = emit_outputs(res, cfg, sweep_out);
            for (const auto& c : res.summary)
                if (c.best_for_algorithm)
                    std::printf("best %-18s alpha=%-6g lambda=%-5g mean AUC %.4f (stderr %.4f)\n",
                                c.algorithm.c_str(), c.alpha, c.lambda, c.mean_auc, c.stderr_auc);
            for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
