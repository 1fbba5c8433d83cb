// Command-line front end: single runs, benchmark tables, the annotation
// server and a line-rendering debug dump.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 data error.

#include "bal/bal.hpp"
#include "bal/service.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

namespace fs = std::filesystem;

namespace {

struct DataArgs {
    std::string data = "synth";
    std::string test_data;
};

/// "synth" or "synth:k=16,sep=3,train=2000,test=1000".
bal::SynthSpec parse_synth(const std::string& spec) {
    bal::SynthSpec s;
    const auto colon = spec.find(':');
    if (colon == std::string::npos) return s;
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw bal::ConfigError("bad synth option '" + item + "'");
        const auto key = item.substr(0, eq);
        const auto value = item.substr(eq + 1);
        try {
            if (key == "k") s.dim = std::stol(value);
            else if (key == "sep") s.separation = std::stod(value);
            else if (key == "train") s.n_train = std::stoul(value);
            else if (key == "test") s.n_test = std::stoul(value);
            else if (key == "seed") s.seed = std::stoull(value);
            else throw bal::ConfigError("unknown synth option '" + key + "'");
        } catch (const std::logic_error&) {
            throw bal::ConfigError("bad synth value '" + item + "'");
        }
    }
    return s;
}

bool is_synth(const DataArgs& a) { return a.data == "synth" || a.data.rfind("synth:", 0) == 0; }

bal::DataSource make_source(const DataArgs& a) {
    bal::DataSource src;
    if (is_synth(a)) {
        src.synth = parse_synth(a.data);
    } else if (!a.test_data.empty()) {
        src.fixed = bal::load_embedding_files(a.data, a.test_data);
    } else {
        src.fixed = bal::load_embedding_file(a.data);
    }
    return src;
}

/// A single dataset: the file, or the synthetic draw for the given seed.
bal::EmbeddedDataset load_single(const DataArgs& a, std::uint64_t seed) {
    auto src = make_source(a);
    if (src.fixed) return *src.fixed;
    auto spec = src.synth;
    if (a.data.find("seed=") == std::string::npos) spec.seed = seed;
    return bal::synth_two_gaussians(spec);
}

void add_data_flags(CLI::App* cmd, DataArgs& a) {
    cmd->add_option("--data", a.data, "embedding file, or synth[:k=16,sep=3,train=2000,test=1000,seed=N]");
    cmd->add_option("--test-data", a.test_data, "separate test-split file when --data holds only train blocks");
}

fs::path prepare_out(const std::string& out) {
    fs::path p(out);
    fs::create_directories(p);
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw bal::Error("cannot write " + p.string());
    return f;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decision-boundary annotation for active learning"};
    app.require_subcommand(1);

    DataArgs data;
    std::string strategy = "uncertainty";
    std::string mode = "boundary";
    double sigma = 0.0;
    int queries = 150;
    std::size_t repeats = 15;
    std::uint64_t seed = 0;
    std::string out = "out";
    int jobs = 1;
    double resolution = 0.25;
    double lambda = 1.0;
    int init_per_class = 1;
    int solver_iterations = 5000;

    auto add_run_flags = [&](CLI::App* cmd) {
        add_data_flags(cmd, data);
        cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--resolution", resolution, "latent distance between line samples")->check(CLI::PositiveNumber);
        cmd->add_option("--lambda", lambda, "regularisation weight")->check(CLI::NonNegativeNumber);
        cmd->add_option("--init-per-class", init_per_class, "initial labels per class")->check(CLI::PositiveNumber);
        cmd->add_option("--solver-iterations", solver_iterations, "subgradient iterations per retrain")
            ->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "single experiment: transcript + summary row");
    add_run_flags(run);
    run->add_option("--strategy", strategy, "uncertainty | uncertainty-dense | cluster5 | random");
    run->add_option("--mode", mode, "sample | boundary");
    run->add_option("--sigma", sigma, "annotation noise in line samples")->check(CLI::NonNegativeNumber);
    run->add_option("--queries", queries, "number of queries")->check(CLI::PositiveNumber);

    auto* bench = app.add_subcommand("bench", "benchmark tables");
    bench->require_subcommand(1);
    auto add_bench_flags = [&](CLI::App* cmd) {
        add_run_flags(cmd);
        cmd->add_option("--queries", queries, "number of queries per run")->check(CLI::PositiveNumber);
        cmd->add_option("--repeats", repeats, "repetitions")->check(CLI::PositiveNumber);
        cmd->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
    };
    auto* bench_strat = bench->add_subcommand("strategies", "all strategies x {sample, boundary}");
    add_bench_flags(bench_strat);
    auto* bench_noise = bench->add_subcommand("noise", "annotation-noise sweep, sigma 0..5");
    add_bench_flags(bench_noise);
    bench_noise->add_option("--strategy", strategy, "query strategy");
    auto* bench_pairs = bench->add_subcommand("pairs", "every class pair of a multiclass embedding");
    add_bench_flags(bench_pairs);
    bench_pairs->add_option("--strategy", strategy, "query strategy");

    std::string bind = "127.0.0.1";
    int port = 8080;
    std::string state_dir;
    long ttl = 0;
    int blur = 0;
    auto* serve = app.add_subcommand("serve", "run the annotation service");
    add_data_flags(serve, data);
    serve->add_option("--bind", bind, "bind address")->envname("BAL_BIND");
    serve->add_option("--port", port, "port")->envname("BAL_PORT");
    serve->add_option("--state-dir", state_dir, "transcript directory for crash recovery")->envname("BAL_STATE_DIR");
    serve->add_option("--ttl", ttl, "idle session lifetime in seconds, 0 = forever")->envname("BAL_SESSION_TTL");
    serve->add_option("--blur", blur, "renderer blur radius in pixels");
    serve->add_option("--seed", seed, "seed for synthetic data");

    auto* render = app.add_subcommand("render-line", "dump the first line query's strip and t-values");
    add_run_flags(render);
    render->add_option("--strategy", strategy, "query strategy");
    render->add_option("--blur", blur, "renderer blur radius in pixels");

    std::string transcript_path;
    auto* replay = app.add_subcommand("replay", "replay a transcript and check it reproduces");
    add_data_flags(replay, data);
    replay->add_option("--transcript", transcript_path, "transcript .jsonl")->required();
    replay->add_option("--seed", seed, "seed for synthetic data (default: the run seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        bal::ExperimentConfig base;
        base.lambda = lambda;
        base.resolution = resolution;
        base.init_per_class = init_per_class;
        base.solver.max_iterations = solver_iterations;

        if (*run) {
            auto cfg = base;
            cfg.strategy = bal::parse_strategy(strategy);
            cfg.mode = bal::parse_mode(mode);
            cfg.sigma = sigma;
            cfg.oracle = sigma > 0.0 ? bal::OracleKind::noisy : bal::OracleKind::svm;
            cfg.n_queries = queries;
            cfg.seed = seed;
            cfg.validate();
            const auto dataset = load_single(data, seed);
            const auto result = bal::run_experiment(dataset, cfg);
            const auto dir = prepare_out(out);
            auto tf = open_out(dir / "transcript.jsonl");
            bal::write_transcript(tf, result.transcript);
            auto sf = open_out(dir / "summary.csv");
            bal::write_summary_csv(sf, {bal::summarize(dataset, cfg, 0, result)});
            std::cout << "aulc " << bal::aulc(result.curve) << " mean_ap " << bal::mean_ap(result.curve)
                      << " final_accuracy " << result.curve.accuracies.back() << "\n";
            if (result.stopped_early) std::cout << "stopped early: pool exhausted\n";
            return 0;
        }

        if (*bench) {
            bal::BenchOptions opt;
            opt.repeats = repeats;
            opt.queries = queries;
            opt.seed = seed;
            opt.jobs = jobs;
            opt.base = base;
            const auto dir = prepare_out(out);
            if (*bench_strat) {
                const auto result = bal::bench_strategies(make_source(data), opt);
                auto runs = open_out(dir / "runs.csv");
                bal::write_summary_csv(runs, result.runs);
                auto table = open_out(dir / "strategies.csv");
                bal::write_strategy_table(table, result, repeats, queries);
                bal::write_strategy_table(std::cout, result, repeats, queries);
            } else if (*bench_noise) {
                const auto result = bal::bench_noise(make_source(data), opt, {0, 1, 2, 3, 4, 5}, strategy);
                auto runs = open_out(dir / "runs.csv");
                bal::write_summary_csv(runs, result.runs);
                auto table = open_out(dir / "noise.csv");
                bal::write_noise_table(table, result, repeats, queries);
                bal::write_noise_table(std::cout, result, repeats, queries);
                std::cout << "trend: spearman(sigma, mean boundary aulc) = " << result.trend << " -> "
                          << (result.trend <= 0.0 ? "non-increasing" : "NOT non-increasing") << "\n";
            } else if (*bench_pairs) {
                if (is_synth(data)) throw bal::ConfigError("bench pairs needs a multiclass --data file");
                const auto mc = bal::load_multiclass_file(data.data);
                const auto result = bal::bench_pairs(mc, opt, strategy);
                auto table = open_out(dir / "pairs.csv");
                bal::write_pair_table(table, result);
                bal::write_pair_table(std::cout, result);
            }
            return 0;
        }

        if (*serve) {
            bal::ServiceOptions opts;
            opts.state_dir = state_dir;
            opts.session_ttl = std::chrono::seconds(ttl);
            opts.render.blur = blur;
            bal::AnnotationService service(load_single(data, seed), opts);
            const auto restored = service.recover();
            httplib::Server server;
            service.mount(server);
            std::cout << "listening on " << bind << ":" << port;
            if (restored > 0) std::cout << " (" << restored << " sessions restored)";
            std::cout << std::endl;
            if (!server.listen(bind, port)) throw bal::ConfigError("cannot bind " + bind + ":" + std::to_string(port));
            return 0;
        }

        if (*render) {
            auto cfg = base;
            cfg.strategy = bal::parse_strategy(strategy);
            cfg.seed = seed;
            const auto dataset = load_single(data, seed);
            bal::ActiveLearner learner(dataset, cfg);
            const auto query = learner.make_query(learner.select());
            if (!query.line) throw bal::Error("query sample lies on the boundary; no line to render");
            const auto samples = bal::sample_line(*query.line);
            bal::RenderOptions ropt;
            ropt.blur = blur;
            const auto strip = bal::render_strip(samples, ropt);
            const auto dir = prepare_out(out);
            auto png = open_out(dir / "strip.png");
            const auto bytes = bal::encode_png(strip.image);
            png.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
            auto ts = open_out(dir / "samples.csv");
            ts << "index,t,x_begin,x_end\n";
            for (std::size_t i = 0; i < samples.size(); ++i)
                ts << i << ',' << bal::format_double(samples[i].t) << ',' << strip.slots[i].x_begin << ','
                   << strip.slots[i].x_end << '\n';
            std::cout << "query " << query.train_index << ": " << samples.size() << " samples, t in ["
                      << query.line->t_lo << ", " << query.line->t_hi << "]\n";
            for (const auto& s : samples) std::cout << bal::format_double(s.t) << '\n';
            return 0;
        }

        if (*replay) {
            std::ifstream in(transcript_path);
            if (!in) throw bal::DataError("cannot open " + transcript_path);
            const auto transcript = bal::read_transcript(in);
            // synthetic data is drawn from the run seed unless --seed overrides it
            const auto dataset = load_single(data, replay->count("--seed") ? seed : transcript.config.seed);
            const auto result = bal::replay(dataset, transcript);
            bool same = result.transcript.iterations.size() == transcript.iterations.size();
            for (std::size_t i = 0; same && i < transcript.iterations.size(); ++i)
                same = result.transcript.iterations[i].accuracy == transcript.iterations[i].accuracy &&
                       result.transcript.iterations[i].average_precision == transcript.iterations[i].average_precision;
            std::cout << (same ? "replay matches" : "replay DIFFERS") << ": " << transcript.iterations.size()
                      << " iterations, final accuracy " << result.curve.accuracies.back() << "\n";
            return same ? 0 : 1;
        }
    } catch (const bal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const bal::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
