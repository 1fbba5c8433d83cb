#pragma once

// The active-learning loop: select a query sample, build its line query, ask
// the oracle, grow A (labels) and B (boundary points), retrain, evaluate.
//
// ActiveLearner holds the state of one run and is driven either by
// run_experiment (simulated oracles) or by the annotation service (humans).

#include "bal/common.hpp"
#include "bal/data.hpp"
#include "bal/geometry.hpp"
#include "bal/metrics.hpp"
#include "bal/model.hpp"
#include "bal/oracle.hpp"
#include "bal/random.hpp"
#include "bal/strategies.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace bal {

enum class AnnotationMode { boundary, sample };

inline std::string mode_name(AnnotationMode m) { return m == AnnotationMode::boundary ? "boundary" : "sample"; }

inline AnnotationMode parse_mode(const std::string& s) {
    if (s == "boundary") return AnnotationMode::boundary;
    if (s == "sample") return AnnotationMode::sample;
    throw ConfigError("mode must be 'boundary' or 'sample', got '" + s + "'");
}

struct ExperimentConfig {
    QueryStrategy strategy{};
    OracleKind oracle = OracleKind::svm;
    double sigma = 0.0;
    int n_queries = 150;
    double lambda = 1.0;
    double resolution = 0.25;
    int init_per_class = 1;
    std::uint64_t seed = 0;
    AnnotationMode mode = AnnotationMode::boundary;
    SolverConfig solver{};
    /// Ablation switch: annotate as in boundary mode but never grow B.
    bool force_empty_boundary = false;

    void validate() const {
        if (n_queries < 1) throw ConfigError("n_queries must be at least 1");
        if (!(resolution > 0.0)) throw ConfigError("resolution must be positive");
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
        if (init_per_class < 1) throw ConfigError("init_per_class must be at least 1");
        if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
        if (solver.max_iterations < 1) throw ConfigError("solver iterations must be at least 1");
    }
};

struct LearningCurve {
    std::vector<double> accuracies;
    std::vector<double> average_precisions;

    std::size_t size() const { return accuracies.size(); }
    bool operator==(const LearningCurve&) const = default;
};

inline double aulc(const LearningCurve& c) { return aulc(c.accuracies); }

/// Mean AP over the whole curve.
inline double mean_ap(const LearningCurve& c) { return mean(c.average_precisions); }

/// Oracle plane: the same model trained on every ground-truth training label.
inline LinearBoundary train_oracle(const EmbeddedDataset& data, double lambda = 1.0, const SolverConfig& solver = {}) {
    LabeledSet all;
    all.points = data.train.points;
    all.labels = data.train.labels;
    return train(all, BoundarySet{}, lambda, solver);
}

struct Query {
    std::uint64_t line_id = 0;
    std::size_t train_index = 0;
    /// Empty when the query sample sits exactly on the current boundary.
    std::optional<QueryLine> line;
};

class ActiveLearner {
public:
    ActiveLearner(const EmbeddedDataset& data, ExperimentConfig config)
        : ActiveLearner(data, config, pick_initial(data, config)) {}

    ActiveLearner(const EmbeddedDataset& data, ExperimentConfig config, std::vector<std::size_t> initial)
        : data_(&data),
          config_(std::move(config)),
          initial_(std::move(initial)),
          strategy_rng_(derive_seed(config_.seed, 12)),
          noise_rng_(derive_seed(config_.seed, 13)) {
        config_.validate();
        validate(data);
        sphere_ = fit_hypersphere(data.train.points);
        std::vector<bool> used(data.train.size(), false);
        for (auto i : initial_) {
            if (i >= data.train.size() || used[i]) throw Error("bad initial sample index");
            used[i] = true;
            labeled_.add(data.train.points[i], data.train.labels[i]);
        }
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            if (!used[i]) {
                pool_ids_.push_back(i);
                pool_points_.push_back(data.train.points[i]);
            }
        }
        boundary_ = train(labeled_, annotations_, config_.lambda, LinearBoundary::zero(data.dim), config_.solver);
        evaluate();
    }

    /// init_per_class random training samples of each class, from the run seed.
    static std::vector<std::size_t> pick_initial(const EmbeddedDataset& data, const ExperimentConfig& config) {
        Xoshiro256 rng(derive_seed(config.seed, 11));
        std::vector<std::size_t> out;
        for (Label cls : {-1, 1}) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < data.train.size(); ++i)
                if (data.train.labels[i] == cls) members.push_back(i);
            const std::size_t take = std::min<std::size_t>(members.size(), static_cast<std::size_t>(config.init_per_class));
            for (std::size_t j = 0; j < take; ++j) {
                const std::size_t k = j + static_cast<std::size_t>(rng.below(members.size() - j));
                std::swap(members[j], members[k]);
                out.push_back(members[j]);
            }
        }
        return out;
    }

    bool pool_empty() const { return pool_ids_.empty(); }

    /// Next query sample as a training-set index. Does not touch the pool.
    std::size_t select() {
        if (pool_ids_.empty()) throw Error("pool exhausted");
        const bool degenerate = !(boundary_.w.squaredNorm() > 0.0);
        const auto& s = config_.strategy;
        if (degenerate && s.kind != StrategyKind::random) return pool_ids_.front();
        switch (s.kind) {
            case StrategyKind::uncertainty: return pool_ids_[select_uncertainty(pool_points_, boundary_)];
            case StrategyKind::uncertainty_dense:
                return pool_ids_[select_uncertainty_dense(pool_points_, boundary_, s.beta)];
            case StrategyKind::random: return pool_ids_[select_random(pool_points_, strategy_rng_)];
            case StrategyKind::cluster_centroid: {
                // batch members already queried (or gone) are skipped
                while (!batch_.empty() && !in_pool(batch_.front())) batch_.pop_front();
                if (batch_.empty()) {
                    const std::size_t k = std::min(s.batch, pool_points_.size());
                    for (auto pos : select_cluster_centroids(pool_points_, boundary_, k, s.candidates, strategy_rng_))
                        batch_.push_back(pool_ids_[pos]);
                }
                return batch_.front();
            }
        }
        return pool_ids_.front();
    }

    Query make_query(std::size_t train_index) {
        Query q;
        q.line_id = next_line_id_++;
        q.train_index = train_index;
        const Vec& z = data_->train.points.at(train_index);
        if (boundary_.w.squaredNorm() > 0.0 && std::abs(decision_value(boundary_, z)) > 0.0) {
            try {
                q.line = build_query_line(z, boundary_, sphere_, config_.resolution);
            } catch (const Error&) {
                q.line.reset();
            }
        }
        return q;
    }

    /// Simulated oracle answer for a query, per the configured oracle kind.
    AnnotationRecord simulate(const Query& q, const LinearBoundary& oracle) {
        const Vec& z = data_->train.points.at(q.train_index);
        AnnotationRecord rec;
        if (config_.mode == AnnotationMode::sample || !q.line) {
            rec.query_label = predict(oracle, z);
            rec.source = config_.oracle;
            rec.sigma = config_.sigma;
        } else if (config_.oracle == OracleKind::noisy) {
            rec = noisy_oracle_annotate(*q.line, oracle, config_.sigma, noise_rng_);
        } else {
            rec = svm_oracle_annotate(*q.line, oracle);
        }
        rec.line_id = q.line_id;
        return rec;
    }

    /// Adds (z*, y) to A, the boundary point to B when the mode allows it,
    /// then retrains from the previous boundary and records test metrics.
    void apply(std::size_t train_index, const AnnotationRecord& rec) {
        const auto it = std::find(pool_ids_.begin(), pool_ids_.end(), train_index);
        if (it == pool_ids_.end()) throw Error("query sample is not in the pool");
        const auto pos = static_cast<std::size_t>(it - pool_ids_.begin());
        labeled_.add(pool_points_[pos], rec.query_label);
        pool_ids_.erase(it);
        pool_points_.erase(pool_points_.begin() + static_cast<std::ptrdiff_t>(pos));
        if (config_.mode == AnnotationMode::boundary && !config_.force_empty_boundary && rec.boundary_point)
            annotations_.add(*rec.boundary_point);
        boundary_ = train(labeled_, annotations_, config_.lambda, boundary_, config_.solver);
        next_line_id_ = std::max(next_line_id_, rec.line_id + 1);
        ++iteration_;
        evaluate();
    }

    const ExperimentConfig& config() const { return config_; }
    const EmbeddedDataset& data() const { return *data_; }
    const LinearBoundary& boundary() const { return boundary_; }
    const LabeledSet& labeled() const { return labeled_; }
    const BoundarySet& annotations() const { return annotations_; }
    const LearningCurve& curve() const { return curve_; }
    const Hypersphere& sphere() const { return sphere_; }
    const std::vector<std::size_t>& initial() const { return initial_; }
    std::size_t pool_size() const { return pool_ids_.size(); }
    int iteration() const { return iteration_; }

private:
    bool in_pool(std::size_t idx) const {
        return std::find(pool_ids_.begin(), pool_ids_.end(), idx) != pool_ids_.end();
    }

    void evaluate() {
        const auto scores = decision_values(boundary_, data_->test.points);
        curve_.accuracies.push_back(accuracy(scores, data_->test.labels));
        curve_.average_precisions.push_back(average_precision(scores, data_->test.labels));
    }

    const EmbeddedDataset* data_;
    ExperimentConfig config_;
    std::vector<std::size_t> initial_;
    Xoshiro256 strategy_rng_;
    Xoshiro256 noise_rng_;
    Hypersphere sphere_;
    LabeledSet labeled_;
    BoundarySet annotations_;
    LinearBoundary boundary_;
    LearningCurve curve_;
    std::vector<std::size_t> pool_ids_;
    std::vector<Vec> pool_points_;
    std::deque<std::size_t> batch_;
    std::uint64_t next_line_id_ = 0;
    int iteration_ = 0;
};

// ---------------------------------------------------------------------------
// Transcripts: one JSON object per line. A header, one record per iteration,
// and an optional stop record when the pool ran dry.

struct IterationRecord {
    int iteration = 0;
    std::size_t query_index = 0;
    std::optional<QueryLine> line;
    AnnotationRecord annotation;
    double accuracy = 0.0;
    double average_precision = 0.0;
};

struct Transcript {
    std::string dataset;
    ExperimentConfig config;
    std::vector<std::size_t> initial;
    double initial_accuracy = 0.0;
    double initial_average_precision = 0.0;
    std::vector<IterationRecord> iterations;
    std::optional<std::string> stop_reason;
};

inline constexpr int kSchemaVersion = 1;

inline nlohmann::json to_json(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vec vec_from_json(const nlohmann::json& j) {
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"strategy", strategy_name(c.strategy)},
            {"candidates", c.strategy.candidates},
            {"beta", c.strategy.beta},
            {"oracle", oracle_name(c.oracle)},
            {"sigma", c.sigma},
            {"n_queries", c.n_queries},
            {"lambda", c.lambda},
            {"resolution", c.resolution},
            {"init_per_class", c.init_per_class},
            {"seed", c.seed},
            {"mode", mode_name(c.mode)},
            {"solver_iterations", c.solver.max_iterations},
            {"solver_tolerance", c.solver.tolerance},
            {"solver_step_scale", c.solver.step_scale},
            {"class_weight", c.solver.weights.classification},
            {"regress_weight", c.solver.weights.regression},
            {"force_empty_boundary", c.force_empty_boundary}};
}

/// Missing keys keep their defaults, so partial configs are accepted.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
        c.strategy.candidates = j.value("candidates", c.strategy.candidates);
        c.strategy.beta = j.value("beta", c.strategy.beta);
        if (j.contains("oracle")) c.oracle = parse_oracle(j.at("oracle").get<std::string>());
        c.sigma = j.value("sigma", c.sigma);
        c.n_queries = j.value("n_queries", c.n_queries);
        c.lambda = j.value("lambda", c.lambda);
        c.resolution = j.value("resolution", c.resolution);
        c.init_per_class = j.value("init_per_class", c.init_per_class);
        c.seed = j.value("seed", c.seed);
        if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
        c.solver.max_iterations = j.value("solver_iterations", c.solver.max_iterations);
        c.solver.tolerance = j.value("solver_tolerance", c.solver.tolerance);
        c.solver.step_scale = j.value("solver_step_scale", c.solver.step_scale);
        c.solver.weights.classification = j.value("class_weight", c.solver.weights.classification);
        c.solver.weights.regression = j.value("regress_weight", c.solver.weights.regression);
        c.force_empty_boundary = j.value("force_empty_boundary", c.force_empty_boundary);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const QueryLine& line) {
    return {{"base", to_json(line.base)},
            {"direction", to_json(line.direction)},
            {"query", to_json(line.query)},
            {"t_lo", line.t_lo},
            {"t_hi", line.t_hi},
            {"resolution", line.resolution},
            {"samples", sample_count(line)},
            {"start", to_json(line.at(line.t_lo))},
            {"end", to_json(line.at(line.t_hi))}};
}

inline QueryLine line_from_json(const nlohmann::json& j) {
    QueryLine line;
    line.base = vec_from_json(j.at("base"));
    line.direction = vec_from_json(j.at("direction"));
    line.query = vec_from_json(j.at("query"));
    line.t_lo = j.at("t_lo").get<double>();
    line.t_hi = j.at("t_hi").get<double>();
    line.resolution = j.at("resolution").get<double>();
    return line;
}

inline nlohmann::json to_json(const AnnotationRecord& a) {
    nlohmann::json j = {{"line_id", a.line_id},
                        {"no_change", a.no_change()},
                        {"label", a.query_label},
                        {"source", oracle_name(a.source)},
                        {"sigma", a.sigma},
                        {"noise_offset", a.noise_offset}};
    j["boundary_point"] = a.boundary_point ? to_json(*a.boundary_point) : nlohmann::json(nullptr);
    j["t"] = a.t ? nlohmann::json(*a.t) : nlohmann::json(nullptr);
    return j;
}

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
    AnnotationRecord a;
    a.line_id = j.at("line_id").get<std::uint64_t>();
    a.query_label = j.at("label").get<int>();
    a.source = parse_oracle(j.at("source").get<std::string>());
    a.sigma = j.value("sigma", 0.0);
    a.noise_offset = j.value("noise_offset", 0L);
    if (!j.at("boundary_point").is_null()) a.boundary_point = vec_from_json(j.at("boundary_point"));
    if (j.contains("t") && !j.at("t").is_null()) a.t = j.at("t").get<double>();
    return a;
}

inline nlohmann::json header_json(const Transcript& t) {
    return {{"v", kSchemaVersion},
            {"type", "header"},
            {"dataset", t.dataset},
            {"config", to_json(t.config)},
            {"initial", t.initial},
            {"accuracy", t.initial_accuracy},
            {"ap", t.initial_average_precision}};
}

inline nlohmann::json iteration_json(const IterationRecord& r) {
    return {{"v", kSchemaVersion},
            {"type", "iteration"},
            {"iteration", r.iteration},
            {"query_index", r.query_index},
            {"line", r.line ? to_json(*r.line) : nlohmann::json(nullptr)},
            {"annotation", to_json(r.annotation)},
            {"accuracy", r.accuracy},
            {"ap", r.average_precision}};
}

inline nlohmann::json stop_json(const std::string& reason, int after) {
    return {{"v", kSchemaVersion}, {"type", "stopped"}, {"reason", reason}, {"after", after}};
}

inline void write_transcript(std::ostream& out, const Transcript& t) {
    out << header_json(t).dump() << '\n';
    for (const auto& r : t.iterations) out << iteration_json(r).dump() << '\n';
    if (t.stop_reason) out << stop_json(*t.stop_reason, static_cast<int>(t.iterations.size())).dump() << '\n';
}

inline Transcript read_transcript(std::istream& in) {
    Transcript t;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("transcript line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto type = j.value("type", std::string{});
        try {
            if (type == "header") {
                t.dataset = j.value("dataset", std::string{});
                t.config = config_from_json(j.at("config"));
                t.initial = j.at("initial").get<std::vector<std::size_t>>();
                t.initial_accuracy = j.value("accuracy", 0.0);
                t.initial_average_precision = j.value("ap", 0.0);
                have_header = true;
            } else if (type == "iteration") {
                IterationRecord r;
                r.iteration = j.at("iteration").get<int>();
                r.query_index = j.at("query_index").get<std::size_t>();
                if (!j.at("line").is_null()) r.line = line_from_json(j.at("line"));
                r.annotation = annotation_from_json(j.at("annotation"));
                r.accuracy = j.value("accuracy", 0.0);
                r.average_precision = j.value("ap", 0.0);
                t.iterations.push_back(std::move(r));
            } else if (type == "stopped") {
                t.stop_reason = j.value("reason", std::string{"stopped"});
            } else {
                throw DataError("unknown record type '" + type + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError("transcript line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw DataError("transcript has no header");
    return t;
}

// ---------------------------------------------------------------------------

struct ExperimentResult {
    LearningCurve curve;
    LinearBoundary boundary;
    Transcript transcript;
    bool stopped_early = false;
};

inline Transcript start_transcript(const ActiveLearner& learner) {
    Transcript t;
    t.dataset = learner.data().name;
    t.config = learner.config();
    t.initial = learner.initial();
    t.initial_accuracy = learner.curve().accuracies.front();
    t.initial_average_precision = learner.curve().average_precisions.front();
    return t;
}

inline IterationRecord record_iteration(const ActiveLearner& learner, const Query& q, const AnnotationRecord& rec) {
    IterationRecord r;
    r.iteration = learner.iteration();
    r.query_index = q.train_index;
    r.line = q.line;
    r.annotation = rec;
    r.accuracy = learner.curve().accuracies.back();
    r.average_precision = learner.curve().average_precisions.back();
    return r;
}

/// One full run against a simulated oracle whose plane is given.
inline ExperimentResult run_experiment(const EmbeddedDataset& data, const LinearBoundary& oracle,
                                       const ExperimentConfig& config) {
    if (config.oracle == OracleKind::human) throw ConfigError("run_experiment needs a simulated oracle");
    ActiveLearner learner(data, config);
    ExperimentResult result;
    result.transcript = start_transcript(learner);
    for (int q = 0; q < config.n_queries; ++q) {
        if (learner.pool_empty()) {
            result.stopped_early = true;
            result.transcript.stop_reason = "pool exhausted";
            break;
        }
        const Query query = learner.make_query(learner.select());
        const AnnotationRecord rec = learner.simulate(query, oracle);
        learner.apply(query.train_index, rec);
        result.transcript.iterations.push_back(record_iteration(learner, query, rec));
    }
    result.curve = learner.curve();
    result.boundary = learner.boundary();
    return result;
}

inline ExperimentResult run_experiment(const EmbeddedDataset& data, const ExperimentConfig& config) {
    return run_experiment(data, train_oracle(data, config.lambda, config.solver), config);
}

/// Re-applies the annotations of a transcript. The result matches the
/// original run bit for bit.
inline ExperimentResult replay(const EmbeddedDataset& data, const Transcript& transcript) {
    ActiveLearner learner(data, transcript.config, transcript.initial);
    ExperimentResult result;
    result.transcript = start_transcript(learner);
    for (const auto& r : transcript.iterations) {
        learner.apply(r.query_index, r.annotation);
        Query q;
        q.line_id = r.annotation.line_id;
        q.train_index = r.query_index;
        q.line = r.line;
        result.transcript.iterations.push_back(record_iteration(learner, q, r.annotation));
    }
    result.transcript.stop_reason = transcript.stop_reason;
    result.stopped_early = transcript.stop_reason.has_value();
    result.curve = learner.curve();
    result.boundary = learner.boundary();
    return result;
}

}  // namespace bal
