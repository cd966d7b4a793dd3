#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "offnac/bounds.hpp"
#include "offnac/builtin.hpp"
#include "offnac/chain.hpp"
#include "offnac/csv.hpp"
#include "offnac/mdp_io.hpp"
#include "offnac/nac.hpp"
#include "offnac/svg.hpp"

namespace offnac {

/// Everything a CLI invocation needs, filled from a flat key=value config
/// file plus command-line overrides. Defaults reproduce the builtin
/// benchmark configuration.
struct ExperimentConfig {
    std::string mode;                 // nac | qtrace | exact-npg | sweep | reuse-demo | bounds | solve
    std::string mdp = "appendix-d";   // builtin name or file path
    std::string behavior = "uniform"; // uniform | policy file path
    std::string target = "optimal";   // qtrace/solve target: optimal | uniform | file path
    std::string initial_policy = "uniform";
    int n = 6;
    long critic_iterations = 1000;  // K
    long outer_iterations = 100;    // T
    double alpha = 0.05;
    double beta = 0.1;
    double rho_bar = 3.0;
    double c_bar = 1.0;
    bool warm_start = true;
    int start_state = 0;
    std::uint64_t seed = 1;
    int num_seeds = 4;
    std::string out_dir = "out";
    bool svg = false;
    bool csv = false;       // bounds mode: machine-readable output
    double epsilon = 0.1;   // bounds mode: sample-complexity probe accuracy
    int checkpoints = 100;  // qtrace mode: number of error checkpoints
    std::vector<std::pair<double, double>> sweep_settings = {{3.0, 1.0}, {2.5, 1.0}, {3.0, 1.5}};
};

namespace detail {

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("config: expected boolean, got '" + v + "'");
}

inline std::vector<std::pair<double, double>> parse_sweep(const std::string& v) {
    // "3:1,2.5:1,3:1.5"
    std::vector<std::pair<double, double>> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("config: sweep entries must look like rho:c");
        out.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    }
    if (out.empty()) throw std::invalid_argument("config: empty sweep list");
    return out;
}

} // namespace detail

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    if (key == "mode")
        cfg.mode = value;
    else if (key == "mdp")
        cfg.mdp = value;
    else if (key == "pi_b")
        cfg.behavior = value;
    else if (key == "target")
        cfg.target = value;
    else if (key == "pi0")
        cfg.initial_policy = value;
    else if (key == "n")
        cfg.n = std::stoi(value);
    else if (key == "K")
        cfg.critic_iterations = std::stol(value);
    else if (key == "T")
        cfg.outer_iterations = std::stol(value);
    else if (key == "alpha")
        cfg.alpha = std::stod(value);
    else if (key == "beta")
        cfg.beta = std::stod(value);
    else if (key == "rho_bar")
        cfg.rho_bar = std::stod(value);
    else if (key == "c_bar")
        cfg.c_bar = std::stod(value);
    else if (key == "warm_start")
        cfg.warm_start = detail::parse_bool(value);
    else if (key == "s0")
        cfg.start_state = std::stoi(value);
    else if (key == "seed")
        cfg.seed = std::stoull(value);
    else if (key == "seeds")
        cfg.num_seeds = std::stoi(value);
    else if (key == "out")
        cfg.out_dir = value;
    else if (key == "svg")
        cfg.svg = detail::parse_bool(value);
    else if (key == "csv")
        cfg.csv = detail::parse_bool(value);
    else if (key == "epsilon")
        cfg.epsilon = std::stod(value);
    else if (key == "checkpoints")
        cfg.checkpoints = std::stoi(value);
    else if (key == "sweep")
        cfg.sweep_settings = detail::parse_sweep(value);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Flat `key=value` lines; blank lines and `#` comments ignored.
inline void load_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

inline TabularMdp resolve_mdp(const ExperimentConfig& cfg) {
    if (cfg.mdp == "appendix-d") return builtin_mdp(cfg.mdp);
    return load_mdp(cfg.mdp);
}

inline Policy resolve_policy(const std::string& spec, const TabularMdp& mdp) {
    if (spec == "uniform") return Policy::uniform(mdp.num_states(), mdp.num_actions());
    if (spec == "optimal") return optimal_value(mdp).greedy;
    return load_policy(spec);
}

/// Worker-pool width: min(jobs, hardware threads), capped by the
/// QTRACE_NAC_THREADS environment variable when set.
inline int worker_count(int jobs) {
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (const char* env = std::getenv("QTRACE_NAC_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) workers = std::min(workers, cap);
    }
    return std::min(workers, std::max(jobs, 1));
}

/// Run fn(0..jobs-1) on the worker pool. Each job owns its RNG stream, so
/// results do not depend on scheduling.
inline void parallel_jobs(int jobs, const std::function<void(int)>& fn) {
    const int workers = worker_count(jobs);
    if (workers == 1) {
        for (int i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Assemble the scalar bound inputs of an instance: mixing time at
/// accuracy alpha, visitation minima, and the contraction factor.
inline BoundInputs gather_bound_inputs(const TabularMdp& mdp, const Policy& pi_b,
                                       const QTraceParams& critic, long outer_iterations,
                                       double beta) {
    const MixingReport mixing = mixing_time(mdp, pi_b, critic.alpha);
    const MinimaReport minima = minima_report(mdp, pi_b, critic.truncation.c_bar);
    BoundInputs in;
    in.gamma = mdp.gamma();
    in.gamma_c = 1.0 - minima.m_min * (1.0 - mdp.gamma()) *
                           geometric_sum(mdp.gamma() * minima.c_min, critic.n);
    in.alpha = critic.alpha;
    in.tau_alpha = mixing.tau;
    in.n = critic.n;
    in.critic_iterations = critic.iterations;
    in.actor_iterations = outer_iterations;
    in.beta = beta;
    in.rho_bar = critic.truncation.rho_bar;
    in.c_bar = critic.truncation.c_bar;
    in.num_states = mdp.num_states();
    in.num_actions = mdp.num_actions();
    in.pi_b_min = minima.pi_b_min;
    in.m_min = minima.m_min;
    return in;
}

namespace detail {

inline NacParams nac_params_from_config(const ExperimentConfig& cfg) {
    QTraceParams critic(cfg.n, cfg.critic_iterations, cfg.alpha,
                        TruncationLevels(cfg.rho_bar, cfg.c_bar));
    NacParams params(cfg.outer_iterations, critic, cfg.beta);
    params.warm_start = cfg.warm_start;
    params.start_state = cfg.start_state;
    return params;
}

inline std::vector<RunRecord> run_seeds(const TabularMdp& mdp, const Policy& pi_b,
                                        const Policy& pi0, NacParams params, int num_seeds,
                                        std::uint64_t master_seed) {
    std::vector<RunRecord> records(static_cast<std::size_t>(num_seeds));
    parallel_jobs(num_seeds, [&](int i) {
        NacParams local = params;
        local.seed = SplitRng::stream_seed(master_seed, static_cast<std::uint64_t>(i));
        records[static_cast<std::size_t>(i)] =
            nac_run(mdp, pi_b, local, pi0).record;
    });
    return records;
}

inline std::vector<std::pair<double, double>> column_points(const AggregateRecord& agg,
                                                            const std::vector<double>& col) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(agg.t.size());
    for (std::size_t i = 0; i < agg.t.size(); ++i)
        pts.emplace_back(static_cast<double>(agg.t[i]), col[i]);
    return pts;
}

inline void emit_run_outputs(const std::filesystem::path& dir, const std::string& stem,
                             const std::vector<RunRecord>& records, bool svg) {
    for (std::size_t i = 0; i < records.size(); ++i)
        write_run_csv((dir / (stem + "_seed" + std::to_string(i) + ".csv")).string(), records[i]);
    const AggregateRecord agg = aggregate_records(records);
    write_aggregate_csv((dir / (stem + "_aggregate.csv")).string(), agg);
    if (svg) {
        LineChart chart(stem + " (" + std::to_string(records.size()) + " seeds)", "iteration t",
                        "value");
        chart.add_series("optimality gap (mean)", column_points(agg, agg.gap_mean));
        chart.add_series("critic error (mean)", column_points(agg, agg.critic_err_mean));
        chart.add_series("fixed-point error (mean)", column_points(agg, agg.fp_err_mean));
        chart.save((dir / (stem + ".svg")).string());
    }
}

/// Q-trace on a fixed target policy with periodic error checkpoints; the
/// chunked calls are update-for-update identical to one continuous run.
inline RunRecord qtrace_error_trace(const TabularMdp& mdp, const Policy& pi_b, const Policy& target,
                                    const QTraceParams& critic, int checkpoints,
                                    std::uint64_t seed, int start_state) {
    SplitRng rng(seed);
    const long K = critic.iterations;
    const Trajectory trajectory =
        sample_trajectory(mdp, pi_b, static_cast<std::size_t>(K + critic.n), rng, start_state);
    const QTable q_exact = q_function_exact(mdp, target);
    const QTable q_limit = fixed_point(mdp, target, pi_b, critic.truncation.rho_bar);
    const Distribution mu = Distribution::uniform(mdp.num_states());
    const double v_star = mu.probs().dot(optimal_value(mdp).values);
    const double gap = v_star - v_function(mdp, target, mu, q_exact);

    RunRecord record;
    record.samples_consumed = K + critic.n;
    QTable q = QTable::Zero(mdp.num_states(), mdp.num_actions());
    long done = 0;
    const long points = std::max<long>(1, std::min<long>(checkpoints, K));
    for (long j = 1; j <= points; ++j) {
        const long upto = K * j / points;
        const long chunk = upto - done;
        if (chunk > 0) {
            const Trajectory slice(trajectory.begin() + done,
                                   trajectory.begin() + done + chunk + critic.n);
            q = qtrace_run(mdp, slice, target, pi_b, QTraceParams(critic.n, chunk, critic.alpha,
                                                                  critic.truncation),
                           q);
            done = upto;
        }
        IterationStats stats;
        stats.t = done;
        stats.gap = gap;
        stats.critic_err = (q - q_exact).cwiseAbs().maxCoeff();
        stats.fixed_point_err = (q - q_limit).cwiseAbs().maxCoeff();
        stats.policy_entropy = mean_policy_entropy(target);
        record.rows.push_back(stats);
    }
    return record;
}

} // namespace detail

/// Execute one configured experiment; writes per-seed CSVs, an aggregate
/// CSV and optional SVG charts under cfg.out_dir. Returns a process exit
/// status (0 on success). Configuration and ergodicity failures throw.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
    if (cfg.num_seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
    const TabularMdp mdp = resolve_mdp(cfg);
    const Policy pi_b = resolve_policy(cfg.behavior, mdp);
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    if (cfg.mode == "nac" || cfg.mode == "reuse-demo") {
        check_ergodicity(mdp, pi_b);
        NacParams params = detail::nac_params_from_config(cfg);
        params.reuse_first_segment = (cfg.mode == "reuse-demo");
        const Policy pi0 = resolve_policy(cfg.initial_policy, mdp);
        const auto records = detail::run_seeds(mdp, pi_b, pi0, params, cfg.num_seeds, cfg.seed);
        const std::string stem = (cfg.mode == "nac") ? "nac" : "reuse_demo";
        detail::emit_run_outputs(dir, stem, records, cfg.svg);
        const AggregateRecord agg = aggregate_records(records);
        const double initial = agg.gap_mean.front(), final_gap = agg.gap_mean.back();
        log << stem << ": mean gap " << initial << " -> " << final_gap << " over "
            << records[0].rows.size() << " iterations, " << records.size() << " seeds\n";
        if (cfg.mode == "reuse-demo") {
            const bool converged = final_gap <= 0.1 * initial;
            log << "reuse_demo: critic segment reused every iteration; status: "
                << (converged ? "converged" : "NON-CONVERGENT") << "\n";
            std::ofstream summary(dir / "reuse_demo_summary.csv", std::ios::binary);
            summary << kCsvSchemaLine << "\n"
                    << "initial_gap_mean,final_gap_mean,converged\n"
                    << detail::format_double(initial) << ',' << detail::format_double(final_gap)
                    << ',' << (converged ? 1 : 0) << "\n";
        }
        return 0;
    }

    if (cfg.mode == "qtrace") {
        check_ergodicity(mdp, pi_b);
        const Policy target = resolve_policy(cfg.target, mdp);
        QTraceParams critic(cfg.n, cfg.critic_iterations, cfg.alpha,
                            TruncationLevels(cfg.rho_bar, cfg.c_bar));
        std::vector<RunRecord> records(static_cast<std::size_t>(cfg.num_seeds));
        parallel_jobs(cfg.num_seeds, [&](int i) {
            records[static_cast<std::size_t>(i)] = detail::qtrace_error_trace(
                mdp, pi_b, target, critic, cfg.checkpoints,
                SplitRng::stream_seed(cfg.seed, static_cast<std::uint64_t>(i)), cfg.start_state);
        });
        detail::emit_run_outputs(dir, "qtrace", records, cfg.svg);
        const AggregateRecord agg = aggregate_records(records);
        log << "qtrace: mean ||Q_K - Q^{rho,pi}||_inf = " << agg.fp_err_mean.back() << " after "
            << cfg.critic_iterations << " iterations, " << cfg.num_seeds << " seeds\n";
        return 0;
    }

    if (cfg.mode == "exact-npg") {
        const Policy pi0 = resolve_policy(cfg.initial_policy, mdp);
        const Distribution mu = Distribution::uniform(mdp.num_states());
        const NacResult result = exact_npg_run(mdp, mu, cfg.beta, cfg.outer_iterations, pi0);
        write_run_csv((dir / "exact_npg.csv").string(), result.record);
        if (cfg.svg) {
            LineChart chart("exact critic NPG", "iteration t", "optimality gap", true);
            std::vector<std::pair<double, double>> pts;
            for (const auto& row : result.record.rows)
                pts.emplace_back(static_cast<double>(row.t), row.gap);
            chart.add_series("gap", std::move(pts));
            chart.save((dir / "exact_npg.svg").string());
        }
        log << "exact-npg: gap " << result.record.rows.front().gap << " -> "
            << result.record.final_gap() << " over " << cfg.outer_iterations << " iterations\n";
        return 0;
    }

    if (cfg.mode == "sweep") {
        check_ergodicity(mdp, pi_b);
        const Policy pi0 = resolve_policy(cfg.initial_policy, mdp);
        std::ofstream summary(dir / "sweep_summary.csv", std::ios::binary);
        summary << kCsvSchemaLine << "\n"
                << "rho_bar,c_bar,final_gap_mean,final_gap_std\n";
        double best_gap = std::numeric_limits<double>::infinity();
        std::pair<double, double> best_setting{0.0, 0.0};
        for (const auto& [rho, c] : cfg.sweep_settings) {
            ExperimentConfig sub = cfg;
            sub.rho_bar = rho;
            sub.c_bar = c;
            NacParams params = detail::nac_params_from_config(sub);
            const auto records = detail::run_seeds(mdp, pi_b, pi0, params, cfg.num_seeds, cfg.seed);
            std::ostringstream stem;
            stem << "sweep_rho" << rho << "_c" << c;
            detail::emit_run_outputs(dir, stem.str(), records, cfg.svg);
            const AggregateRecord agg = aggregate_records(records);
            const double final_mean = agg.gap_mean.back(), final_std = agg.gap_std.back();
            summary << detail::format_double(rho) << ',' << detail::format_double(c) << ','
                    << detail::format_double(final_mean) << ',' << detail::format_double(final_std)
                    << "\n";
            log << "sweep (rho=" << rho << ", c=" << c << "): final gap mean " << final_mean
                << " std " << final_std << "\n";
            if (final_mean < best_gap) {
                best_gap = final_mean;
                best_setting = {rho, c};
            }
        }
        log << "sweep: best setting rho=" << best_setting.first << " c=" << best_setting.second
            << " (final gap mean " << best_gap << ")\n";
        return 0;
    }

    if (cfg.mode == "bounds") {
        const QTraceParams critic(cfg.n, cfg.critic_iterations, cfg.alpha,
                                  TruncationLevels(cfg.rho_bar, cfg.c_bar));
        const BoundInputs in = gather_bound_inputs(mdp, pi_b, critic, cfg.outer_iterations, cfg.beta);
        const StepsizeCheck step = validate_stepsize(in);
        const CriticErrorTerms critic_terms =
            critic_error_terms(in, std::max<long>(in.critic_iterations, in.tau_alpha + in.n + 1));
        const OptimalityGapTerms gap_terms = optimality_gap_terms(in);
        const SampleComplexityEstimate complexity = sample_complexity_estimate(cfg.epsilon, in);
        if (cfg.csv) {
            log << kCsvSchemaLine << "\n";
            log << "tau_alpha,gamma_c,f_factor,stepsize_ok,stepsize_threshold,stepsize_lhs,"
                   "T1,T2,E1,E2,E3,E4,epsilon,T_req,K_req,total_samples\n";
            log << in.tau_alpha << ',' << detail::format_double(in.gamma_c) << ','
                << detail::format_double(f_factor(in.c_bar, in.gamma, in.n)) << ',' << step.ok << ','
                << detail::format_double(step.threshold) << ',' << detail::format_double(step.lhs)
                << ',' << detail::format_double(critic_terms.convergence_bias) << ','
                << detail::format_double(critic_terms.variance) << ','
                << detail::format_double(gap_terms.critic_bias) << ','
                << detail::format_double(gap_terms.critic_variance) << ','
                << detail::format_double(gap_terms.truncation_bias) << ','
                << detail::format_double(gap_terms.actor_error) << ','
                << detail::format_double(cfg.epsilon) << ','
                << detail::format_double(complexity.actor_iterations) << ','
                << detail::format_double(complexity.critic_iterations) << ','
                << detail::format_double(complexity.total_samples) << "\n";
        } else {
            log << "mixing time tau_alpha (alpha=" << cfg.alpha << "): " << in.tau_alpha << "\n";
            log << "contraction factor gamma_c: " << in.gamma_c << "\n";
            log << "f(c_bar, gamma): " << f_factor(in.c_bar, in.gamma, in.n) << "\n";
            log << "stepsize condition: " << (step.ok ? "satisfied" : "VIOLATED")
                << "  (alpha*(tau+n+1) = " << step.lhs << ", threshold = " << step.threshold
                << ")\n";
            log << "critic mean-square error bound at k=K: T1 = " << critic_terms.convergence_bias
                << ", T2 = " << critic_terms.variance << "\n";
            log << "optimality-gap terms: E1 = " << gap_terms.critic_bias
                << ", E2 = " << gap_terms.critic_variance << ", E3 = " << gap_terms.truncation_bias
                << ", E4 = " << gap_terms.actor_error << " (total " << gap_terms.total() << ")\n";
            log << "order-of-magnitude samples for epsilon=" << cfg.epsilon << ": T ~ "
                << complexity.actor_iterations << ", K ~ " << complexity.critic_iterations
                << ", total ~ " << complexity.total_samples << "\n";
        }
        return 0;
    }

    if (cfg.mode == "solve") {
        const Policy target = resolve_policy(cfg.target, mdp);
        const OptimalSolution optimal = optimal_value(mdp);
        const Distribution mu = Distribution::uniform(mdp.num_states());
        const QTable q = q_function_exact(mdp, target);
        log << "optimal value V*(s): " << optimal.values.transpose() << "\n";
        log << "greedy optimal action per state:";
        for (int s = 0; s < mdp.num_states(); ++s) {
            int a_star = 0;
            for (int a = 0; a < mdp.num_actions(); ++a)
                if (optimal.greedy.prob(s, a) > 0.5) a_star = a;
            log << ' ' << a_star;
        }
        log << "\n";
        log << "V^pi(uniform mu) for the target policy: " << v_function(mdp, target, mu, q) << "\n";
        const Distribution mu_b = stationary_distribution(mdp, pi_b);
        log << "behavior stationary distribution: " << mu_b.probs().transpose() << "\n";
        std::ofstream qf(dir / "q_exact.txt", std::ios::binary);
        write_qtable(qf, q);
        std::ofstream pf(dir / "pi_star.txt", std::ios::binary);
        write_policy(pf, optimal.greedy);
        return 0;
    }

    throw std::invalid_argument("unknown mode '" + cfg.mode + "'");
}

} // namespace offnac
