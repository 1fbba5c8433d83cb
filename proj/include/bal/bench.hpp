#pragma once

// Experiment harness: repeated runs over strategies, annotation modes, noise
// levels and class pairs, reduced to summary tables.

#include "bal/data.hpp"
#include "bal/loop.hpp"
#include "bal/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace bal {

/// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Where the data of repeat r comes from: a fixed dataset, or a fresh
/// synthetic draw per repeat.
struct DataSource {
    std::optional<EmbeddedDataset> fixed;
    SynthSpec synth{};

    EmbeddedDataset for_repeat(std::size_t repeat, std::uint64_t seed) const {
        if (fixed) return *fixed;
        SynthSpec s = synth;
        s.seed = derive_seed(seed, 1000 + repeat);
        return synth_two_gaussians(s);
    }
};

inline std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) { return derive_seed(seed, repeat); }

struct RunSummary {
    std::string dataset;
    std::string strategy;
    std::string mode;
    double sigma = 0.0;
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    int queries = 0;
    double lambda = 1.0;
    double resolution = 0.25;
    int init_per_class = 1;
    double aulc = 0.0;
    double mean_ap = 0.0;
    double final_accuracy = 0.0;
    bool stopped_early = false;
};

inline RunSummary summarize(const EmbeddedDataset& data, const ExperimentConfig& c, std::size_t repeat,
                            const ExperimentResult& r) {
    RunSummary s;
    s.dataset = data.name;
    s.strategy = strategy_name(c.strategy);
    s.mode = mode_name(c.mode);
    s.sigma = c.sigma;
    s.repeat = repeat;
    s.seed = c.seed;
    s.queries = static_cast<int>(r.curve.size()) - 1;
    s.lambda = c.lambda;
    s.resolution = c.resolution;
    s.init_per_class = c.init_per_class;
    s.aulc = aulc(r.curve);
    s.mean_ap = mean_ap(r.curve);
    s.final_accuracy = r.curve.accuracies.back();
    s.stopped_early = r.stopped_early;
    return s;
}

inline void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& rows) {
    out << "dataset,strategy,mode,sigma,repeat,seed,queries,lambda,resolution,init_per_class,aulc,mean_ap,"
           "final_accuracy,stopped_early\n";
    for (const auto& r : rows) {
        out << '"' << r.dataset << "\"," << r.strategy << ',' << r.mode << ',' << format_double(r.sigma) << ','
            << r.repeat << ',' << r.seed << ',' << r.queries << ',' << format_double(r.lambda) << ','
            << format_double(r.resolution) << ',' << r.init_per_class << ',' << format_double(r.aulc) << ','
            << format_double(r.mean_ap) << ',' << format_double(r.final_accuracy) << ','
            << (r.stopped_early ? 1 : 0) << '\n';
    }
}

/// One experiment cell: a configuration varied only by its label fields.
struct Cell {
    ExperimentConfig config;
    std::size_t repeat = 0;
};

/// Runs every cell; cells sharing a repeat share the dataset and oracle.
inline std::vector<RunSummary> run_cells(const DataSource& source, const std::vector<Cell>& cells,
                                         std::size_t repeats, std::uint64_t seed, int jobs) {
    std::vector<std::optional<EmbeddedDataset>> data(repeats);
    std::vector<LinearBoundary> oracles(repeats);
    const auto& c0 = cells.empty() ? ExperimentConfig{} : cells.front().config;
    parallel_for(repeats, jobs, [&](std::size_t r) {
        data[r] = source.for_repeat(r, seed);
        oracles[r] = train_oracle(*data[r], c0.lambda, c0.solver);
    });
    std::vector<RunSummary> out(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const auto& cell = cells[i];
        const auto result = run_experiment(*data[cell.repeat], oracles[cell.repeat], cell.config);
        out[i] = summarize(*data[cell.repeat], cell.config, cell.repeat, result);
    });
    return out;
}

struct BenchOptions {
    std::size_t repeats = 15;
    int queries = 50;
    std::uint64_t seed = 0;
    int jobs = 1;
    ExperimentConfig base{};
};

inline std::vector<double> select_aulc(const std::vector<RunSummary>& rows, const std::string& strategy,
                                       const std::string& mode, std::optional<double> sigma = std::nullopt) {
    std::vector<std::pair<std::size_t, double>> found;
    for (const auto& r : rows)
        if (r.strategy == strategy && r.mode == mode && (!sigma || r.sigma == *sigma)) found.emplace_back(r.repeat, r.aulc);
    std::sort(found.begin(), found.end());
    std::vector<double> out;
    for (auto& f : found) out.push_back(f.second);
    return out;
}

inline std::vector<double> select_map(const std::vector<RunSummary>& rows, const std::string& strategy,
                                      const std::string& mode, std::optional<double> sigma = std::nullopt) {
    std::vector<std::pair<std::size_t, double>> found;
    for (const auto& r : rows)
        if (r.strategy == strategy && r.mode == mode && (!sigma || r.sigma == *sigma))
            found.emplace_back(r.repeat, r.mean_ap);
    std::sort(found.begin(), found.end());
    std::vector<double> out;
    for (auto& f : found) out.push_back(f.second);
    return out;
}

// ---------------------------------------------------------------------------
// Strategies x {sample, boundary}

struct StrategyRow {
    std::string strategy;
    std::string mode;
    double aulc_mean = 0.0;
    double aulc_std = 0.0;
    double map_mean = 0.0;
    double map_std = 0.0;
    /// Paired t-test of boundary against sample for the same strategy.
    double p_value = 1.0;
};

struct StrategyBench {
    std::vector<RunSummary> runs;
    std::vector<StrategyRow> table;
};

inline const std::vector<std::string>& default_strategies() {
    static const std::vector<std::string> names = {"uncertainty", "uncertainty-dense", "cluster5", "random"};
    return names;
}

inline StrategyBench bench_strategies(const DataSource& source, const BenchOptions& opt,
                                      const std::vector<std::string>& strategies = default_strategies()) {
    std::vector<Cell> cells;
    for (const auto& name : strategies)
        for (auto mode : {AnnotationMode::sample, AnnotationMode::boundary})
            for (std::size_t r = 0; r < opt.repeats; ++r) {
                ExperimentConfig c = opt.base;
                c.strategy = parse_strategy(name);
                c.mode = mode;
                c.n_queries = opt.queries;
                c.oracle = OracleKind::svm;
                c.sigma = 0.0;
                c.seed = repeat_seed(opt.seed, r);
                cells.push_back({c, r});
            }
    StrategyBench bench;
    bench.runs = run_cells(source, cells, opt.repeats, opt.seed, opt.jobs);
    for (const auto& name : strategies) {
        const auto sample = select_aulc(bench.runs, name, "sample");
        const auto boundary = select_aulc(bench.runs, name, "boundary");
        const double p = opt.repeats >= 2 ? paired_t_test(boundary, sample) : 1.0;
        for (const auto* mode : {"sample", "boundary"}) {
            const auto a = select_aulc(bench.runs, name, mode);
            const auto m = select_map(bench.runs, name, mode);
            bench.table.push_back({name, mode, mean(a), stddev(a), mean(m), stddev(m), p});
        }
    }
    return bench;
}

inline void write_strategy_table(std::ostream& out, const StrategyBench& bench, std::size_t repeats, int queries) {
    out << "strategy,mode,repeats,queries,aulc_mean,aulc_std,mean_ap_mean,mean_ap_std,p_value,significant\n";
    for (const auto& r : bench.table) {
        out << r.strategy << ',' << r.mode << ',' << repeats << ',' << queries << ',' << format_double(r.aulc_mean)
            << ',' << format_double(r.aulc_std) << ',' << format_double(r.map_mean) << ','
            << format_double(r.map_std) << ',' << format_double(r.p_value) << ','
            << (r.p_value < 0.05 ? "*" : "") << '\n';
    }
}

// ---------------------------------------------------------------------------
// Noise sweep

struct NoiseRow {
    double sigma = 0.0;
    double boundary_mean = 0.0;
    double boundary_std = 0.0;
    double sample_mean = 0.0;
    double boundary_map = 0.0;
    /// Paired t-test of boundary at this sigma against the sample baseline.
    double p_value = 1.0;
};

struct NoiseBench {
    std::vector<RunSummary> runs;
    std::vector<NoiseRow> table;
    /// Spearman correlation between sigma and mean boundary AULC.
    double trend = 0.0;
};

inline NoiseBench bench_noise(const DataSource& source, const BenchOptions& opt,
                              const std::vector<double>& sigmas = {0, 1, 2, 3, 4, 5},
                              const std::string& strategy = "uncertainty") {
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < opt.repeats; ++r) {
        ExperimentConfig c = opt.base;
        c.strategy = parse_strategy(strategy);
        c.mode = AnnotationMode::sample;
        c.n_queries = opt.queries;
        c.oracle = OracleKind::svm;
        c.seed = repeat_seed(opt.seed, r);
        cells.push_back({c, r});
    }
    for (double sigma : sigmas)
        for (std::size_t r = 0; r < opt.repeats; ++r) {
            ExperimentConfig c = opt.base;
            c.strategy = parse_strategy(strategy);
            c.mode = AnnotationMode::boundary;
            c.n_queries = opt.queries;
            c.oracle = OracleKind::noisy;
            c.sigma = sigma;
            c.seed = repeat_seed(opt.seed, r);
            cells.push_back({c, r});
        }
    NoiseBench bench;
    bench.runs = run_cells(source, cells, opt.repeats, opt.seed, opt.jobs);
    const auto name = strategy_name(parse_strategy(strategy));
    const auto sample = select_aulc(bench.runs, name, "sample");
    std::vector<double> means;
    for (double sigma : sigmas) {
        const auto b = select_aulc(bench.runs, name, "boundary", sigma);
        NoiseRow row;
        row.sigma = sigma;
        row.boundary_mean = mean(b);
        row.boundary_std = stddev(b);
        row.sample_mean = mean(sample);
        row.boundary_map = mean(select_map(bench.runs, name, "boundary", sigma));
        row.p_value = opt.repeats >= 2 ? paired_t_test(b, sample) : 1.0;
        bench.table.push_back(row);
        means.push_back(row.boundary_mean);
    }
    bench.trend = sigmas.size() >= 2 ? spearman(sigmas, means) : 0.0;
    return bench;
}

inline void write_noise_table(std::ostream& out, const NoiseBench& bench, std::size_t repeats, int queries) {
    out << "sigma,repeats,queries,boundary_aulc_mean,boundary_aulc_std,sample_aulc_mean,boundary_mean_ap,p_value,"
           "significant\n";
    for (const auto& r : bench.table) {
        out << format_double(r.sigma) << ',' << repeats << ',' << queries << ',' << format_double(r.boundary_mean)
            << ',' << format_double(r.boundary_std) << ',' << format_double(r.sample_mean) << ','
            << format_double(r.boundary_map) << ',' << format_double(r.p_value) << ','
            << (r.p_value < 0.05 ? "*" : "") << '\n';
    }
}

// ---------------------------------------------------------------------------
// All class pairs of a multiclass embedding

struct PairRow {
    long first = 0;
    long second = 0;
    std::string mode;
    double aulc_mean = 0.0;
    double map_mean = 0.0;
};

struct PairBench {
    std::vector<PairRow> pairs;
    double boundary_aulc = 0.0;
    double sample_aulc = 0.0;
    double boundary_map = 0.0;
    double sample_map = 0.0;
};

inline PairBench bench_pairs(const MulticlassDataset& mc, const BenchOptions& opt, const std::string& strategy) {
    const auto classes = mc.classes();
    if (classes.size() < 2) throw DataError("need at least two classes");
    PairBench bench;
    std::vector<double> b_aulc, s_aulc, b_map, s_map;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            DataSource src;
            src.fixed = class_pair(mc, classes[i], classes[j]);
            const auto result = bench_strategies(src, opt, {strategy});
            for (const auto& row : result.table) {
                bench.pairs.push_back({classes[i], classes[j], row.mode, row.aulc_mean, row.map_mean});
                (row.mode == "boundary" ? b_aulc : s_aulc).push_back(row.aulc_mean);
                (row.mode == "boundary" ? b_map : s_map).push_back(row.map_mean);
            }
        }
    }
    bench.boundary_aulc = mean(b_aulc);
    bench.sample_aulc = mean(s_aulc);
    bench.boundary_map = mean(b_map);
    bench.sample_map = mean(s_map);
    return bench;
}

inline void write_pair_table(std::ostream& out, const PairBench& bench) {
    out << "first,second,mode,aulc_mean,mean_ap_mean\n";
    for (const auto& p : bench.pairs)
        out << p.first << ',' << p.second << ',' << p.mode << ',' << format_double(p.aulc_mean) << ','
            << format_double(p.map_mean) << '\n';
    out << "all,all,sample," << format_double(bench.sample_aulc) << ',' << format_double(bench.sample_map) << '\n';
    out << "all,all,boundary," << format_double(bench.boundary_aulc) << ',' << format_double(bench.boundary_map)
        << '\n';
}

}  // namespace bal
