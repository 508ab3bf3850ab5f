#include "flycl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "flycl/checkpoint.hpp"
#include "flycl/error.hpp"
#include "flycl/philox.hpp"

namespace flycl {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
    if (!doc.contains(key)) return;
    try {
        out = doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::InvalidConfig, std::string("field \"") + key + "\": unexpected value " + doc.at(key).dump());
    }
}

void reject_unknown(const json& doc, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& item : doc.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
            throw Error(Errc::InvalidConfig, where + "unknown field \"" + item.key() + "\"");
        }
    }
}

std::vector<std::uint32_t> random_subset(std::uint32_t population, std::size_t count, std::uint64_t seed) {
    // Floyd's algorithm on a dedicated stream, sorted for stable output.
    count = std::min<std::size_t>(count, population);
    PhiloxStream rng(seed, 0x636f7272ull);
    std::set<std::uint32_t> chosen;
    for (std::uint32_t j = population - static_cast<std::uint32_t>(count); j < population; ++j) {
        const std::uint32_t t = rng.uniform_below(j + 1);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

RowMatrix stack_rows(const std::vector<TaskBatch>& batches, std::size_t upto, std::vector<std::uint32_t>& labels) {
    Eigen::Index rows = 0;
    for (std::size_t t = 0; t < upto; ++t) rows += batches[t].features.rows();
    RowMatrix out(rows, upto > 0 ? batches[0].features.cols() : 0);
    labels.clear();
    Eigen::Index at = 0;
    for (std::size_t t = 0; t < upto; ++t) {
        const auto& b = batches[t];
        out.middleRows(at, b.features.rows()) = b.features;
        at += b.features.rows();
        labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    }
    return out;
}

template <typename F>
double median_seconds(std::size_t repeats, F&& body) {
    body();  // warm-up
    std::vector<double> samples;
    for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
        const auto t0 = Clock::now();
        body();
        samples.push_back(seconds_since(t0));
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (k < 1) throw Error(Errc::InvalidK, "k=" + std::to_string(k) + " must be >= 1");
    if (kind == PipelineKind::Fly || kind == PipelineKind::NoRidge) {
        if (k > m) throw Error(Errc::InvalidK, "k=" + std::to_string(k) + " exceeds m=" + std::to_string(m));
    }
    if (p < 1) throw Error(Errc::InvalidConfig, "p=" + std::to_string(p) + " must be >= 1");
    if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min)) {
        throw Error(Errc::InvalidConfig, "lambda_min=" + fmt(lambda_min) + ", lambda_max=" + fmt(lambda_max) +
                                             ": need 0 < lambda_min <= lambda_max");
    }
    if (lambda_points < 1) throw Error(Errc::InvalidConfig, "lambda_points must be >= 1");
    if (fixed_lambda && !(*fixed_lambda > 0.0)) {
        throw Error(Errc::InvalidConfig, "fixed_lambda=" + fmt(*fixed_lambda) + " must be positive");
    }
    if (cv_folds < 2) throw Error(Errc::InvalidConfig, "cv_folds=" + std::to_string(cv_folds) + " must be >= 2");
    if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be >= 1");
    if (solve_every < 1) throw Error(Errc::InvalidConfig, "solve_every must be >= 1");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw Error(Errc::InvalidConfig, "holdout_fraction=" + fmt(holdout_fraction) + " must be in (0, 1)");
    }
    if (data.empty() && !synth) throw Error(Errc::InvalidConfig, "data: no dataset given (set data or synth)");
    if (synth) synth->validate();
}

void ExperimentConfig::validate_for_dim(std::size_t d) const {
    if (kind != PipelineKind::Fly && kind != PipelineKind::NoRidge) return;
    if (m <= d) throw Error(Errc::InvalidConfig, "m=" + std::to_string(m) + " must exceed feature dim d=" + std::to_string(d));
    if (p >= d) throw Error(Errc::InvalidConfig, "p=" + std::to_string(p) + " must be < feature dim d=" + std::to_string(d));
}

PipelineConfig ExperimentConfig::pipeline_config() const {
    PipelineConfig pc;
    pc.kind = kind;
    pc.vanilla = vanilla;
    pc.m = m;
    pc.p = p;
    pc.k = k;
    pc.seed = seed;
    pc.grid = log_grid(lambda_min, lambda_max, lambda_points);
    pc.fixed_lambda = fixed_lambda;
    pc.cv_folds = cv_folds;
    return pc;
}

json ExperimentConfig::to_json() const {
    json doc;
    doc["data"] = data;
    doc["test_data"] = test_data;
    doc["manifest"] = manifest;
    doc["classes_per_task"] = classes_per_task;
    if (synth) {
        doc["synth"] = {{"num_classes", synth->num_classes}, {"dim", synth->dim},
                        {"samples_per_class", synth->samples_per_class}, {"rho", synth->rho},
                        {"sigma", synth->sigma}, {"seed", synth->seed}};
    }
    doc["out"] = out;
    doc["checkpoint"] = checkpoint;
    doc["pipeline"] = to_string(kind);
    doc["vanilla"] = {{"dense_projection", vanilla.dense_projection}, {"explicit_cv", vanilla.explicit_cv},
                      {"lu_solve", vanilla.lu_solve}, {"dense_similarity", vanilla.dense_similarity}};
    doc["m"] = m;
    doc["p"] = p;
    doc["k"] = k;
    doc["seed"] = seed;
    doc["lambda_min"] = lambda_min;
    doc["lambda_max"] = lambda_max;
    doc["lambda_points"] = lambda_points;
    doc["fixed_lambda"] = fixed_lambda ? json(*fixed_lambda) : json(nullptr);
    doc["cv_folds"] = cv_folds;
    doc["online"] = online;
    doc["batch_size"] = batch_size;
    doc["solve_every"] = solve_every;
    doc["holdout_fraction"] = holdout_fraction;
    doc["correlation_classes"] = correlation_classes;
    doc["cv_budget_seconds"] = cv_budget_seconds;
    doc["bench_repeats"] = bench_repeats;
    return doc;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    if (!doc.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
    reject_unknown(doc,
                   {"data", "test_data", "manifest", "classes_per_task", "synth", "out", "checkpoint", "pipeline",
                    "vanilla", "m", "p", "k", "seed", "lambda_grid", "lambda_min", "lambda_max", "lambda_points",
                    "fixed_lambda", "cv_folds", "online", "batch_size", "solve_every", "holdout_fraction",
                    "correlation_classes", "cv_budget_seconds", "bench_repeats"},
                   "");
    ExperimentConfig c;
    read_field(doc, "data", c.data);
    read_field(doc, "test_data", c.test_data);
    read_field(doc, "manifest", c.manifest);
    read_field(doc, "classes_per_task", c.classes_per_task);
    read_field(doc, "out", c.out);
    read_field(doc, "checkpoint", c.checkpoint);
    if (doc.contains("pipeline")) {
        std::string name;
        read_field(doc, "pipeline", name);
        c.kind = parse_pipeline_kind(name);
    }
    if (doc.contains("vanilla")) {
        const json& v = doc.at("vanilla");
        if (!v.is_object()) throw Error(Errc::InvalidConfig, "field \"vanilla\": expected an object");
        reject_unknown(v, {"dense_projection", "explicit_cv", "lu_solve", "dense_similarity"}, "vanilla: ");
        read_field(v, "dense_projection", c.vanilla.dense_projection);
        read_field(v, "explicit_cv", c.vanilla.explicit_cv);
        read_field(v, "lu_solve", c.vanilla.lu_solve);
        read_field(v, "dense_similarity", c.vanilla.dense_similarity);
    }
    if (doc.contains("synth")) {
        const json& s = doc.at("synth");
        if (!s.is_object()) throw Error(Errc::InvalidConfig, "field \"synth\": expected an object");
        reject_unknown(s, {"num_classes", "dim", "samples_per_class", "rho", "sigma", "seed"}, "synth: ");
        SynthSpec spec;
        read_field(s, "num_classes", spec.num_classes);
        read_field(s, "dim", spec.dim);
        read_field(s, "samples_per_class", spec.samples_per_class);
        read_field(s, "rho", spec.rho);
        read_field(s, "sigma", spec.sigma);
        read_field(s, "seed", spec.seed);
        c.synth = spec;
    }
    read_field(doc, "m", c.m);
    read_field(doc, "p", c.p);
    read_field(doc, "k", c.k);
    read_field(doc, "seed", c.seed);
    if (doc.contains("lambda_grid")) {
        std::string preset;
        read_field(doc, "lambda_grid", preset);
        if (preset == "transformer") {
            c.lambda_min = 1e6, c.lambda_max = 1e9, c.lambda_points = 13;
        } else if (preset == "cnn") {
            c.lambda_min = 1e4, c.lambda_max = 1e9, c.lambda_points = 21;
        } else {
            throw Error(Errc::InvalidConfig, "field \"lambda_grid\": unknown preset \"" + preset + "\" (transformer, cnn)");
        }
    }
    read_field(doc, "lambda_min", c.lambda_min);
    read_field(doc, "lambda_max", c.lambda_max);
    read_field(doc, "lambda_points", c.lambda_points);
    if (doc.contains("fixed_lambda") && !doc.at("fixed_lambda").is_null()) {
        double v = 0.0;
        read_field(doc, "fixed_lambda", v);
        c.fixed_lambda = v;
    }
    read_field(doc, "cv_folds", c.cv_folds);
    read_field(doc, "online", c.online);
    read_field(doc, "batch_size", c.batch_size);
    read_field(doc, "solve_every", c.solve_every);
    read_field(doc, "holdout_fraction", c.holdout_fraction);
    read_field(doc, "correlation_classes", c.correlation_classes);
    read_field(doc, "cv_budget_seconds", c.cv_budget_seconds);
    read_field(doc, "bench_repeats", c.bench_repeats);
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    return from_json(doc);
}

// ---------------------------------------------------------------- inputs

ExperimentInputs load_inputs(const ExperimentConfig& config) {
    config.validate();
    ExperimentInputs in;
    EmbeddingDataset full;
    std::string name;
    if (!config.data.empty()) {
        full = read_embedding_file(config.data);
        name = std::filesystem::path(config.data).stem().string();
    } else {
        full = generate(*config.synth);
        name = "synth";
    }
    full.validate();
    config.validate_for_dim(full.dim());

    if (!config.test_data.empty()) {
        in.test = read_embedding_file(config.test_data);
        in.test.validate();
        if (in.test.dim() != full.dim()) {
            throw Error(Errc::DimensionMismatch, config.test_data + ": dim " + std::to_string(in.test.dim()) +
                                                     " vs training dim " + std::to_string(full.dim()));
        }
        in.train = std::move(full);
    } else {
        auto [train, test] = holdout_split(full, config.holdout_fraction, config.seed);
        in.train = std::move(train);
        in.test = std::move(test);
    }

    if (!config.manifest.empty()) {
        in.manifest = read_manifest(config.manifest);
    } else {
        const std::uint32_t nc = in.train.num_classes;
        std::uint32_t cpt = config.classes_per_task;
        if (cpt == 0) cpt = (nc >= 5 && nc % 5 == 0) ? nc / 5 : nc;
        in.manifest = sequential_manifest(nc, cpt, name);
    }
    in.manifest.validate(in.train.num_classes);
    if (in.test.num_classes < in.train.num_classes) in.test.num_classes = in.train.num_classes;

    std::vector<std::size_t> task_samples;
    for (const auto& task : in.manifest.tasks) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < in.train.size(); ++i) {
            n += std::count(task.begin(), task.end(), in.train.labels[i]) > 0 ? 1 : 0;
        }
        task_samples.push_back(n);
    }
    in.extraction.assign(in.manifest.tasks.size(), 0.0);
    if (!config.data.empty()) {
        const std::filesystem::path sidecar = config.data + ".timing.json";
        if (std::filesystem::exists(sidecar)) in.extraction = read_extraction_sidecar(sidecar, task_samples);
    }
    return in;
}

// ---------------------------------------------------------------- run

RunReport run_cil(const ExperimentConfig& config) { return run_cil(config, load_inputs(config)); }

RunReport run_cil(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    config.validate_for_dim(inputs.train.dim());
    const std::vector<TaskBatch> train = split_tasks(inputs.train, inputs.manifest);
    const std::vector<TaskBatch> test = split_tasks(inputs.test, inputs.manifest);

    std::vector<std::size_t> task_of_class;
    for (std::size_t t = 0; t < inputs.manifest.tasks.size(); ++t) {
        task_of_class.insert(task_of_class.end(), inputs.manifest.tasks[t].size(), t);
    }

    const PipelineConfig pc = config.pipeline_config();
    std::unique_ptr<ContinualLearner> learner = make_pipeline(pc, inputs.train.dim());
    auto* fly = dynamic_cast<FlyPipeline*>(learner.get());

    RunReport report;
    report.config = config.to_json();
    std::vector<double> averages;
    std::vector<std::uint32_t> test_labels;
    for (std::size_t t = 0; t < train.size(); ++t) {
        TaskRecord rec;
        rec.task = t;
        rec.classes_seen = train[t].classes_seen;
        rec.train_samples = train[t].labels.size();

        const auto t0 = Clock::now();
        if (config.online) {
            rec.train_timings = learner->learn_online(minibatches(train[t], config.batch_size), config.solve_every).timings;
        } else {
            rec.train_timings = learner->learn_task(train[t]).timings;
        }
        const double engine_seconds = seconds_since(t0);
        if (fly) rec.lambda = fly->state().lambda_history.back();

        const RowMatrix queries = stack_rows(test, t + 1, test_labels);
        rec.test_samples = test_labels.size();
        const std::vector<std::uint32_t> predictions = learner->predict(queries, &rec.eval_timings);
        rec.accuracy = stage_accuracy(predictions, test_labels, task_of_class, t + 1);
        rec.average = mean_accuracy(rec.accuracy);
        averages.push_back(rec.average);

        // The engine never sees extraction, so τ_train adds the extractor's time back.
        rec.extraction = inputs.extraction.at(t);
        rec.tau = timing_split(engine_seconds + rec.extraction, rec.extraction);
        report.tasks.push_back(std::move(rec));
    }
    report.overall = overall_accuracy(averages);
    if (fly) report.lambda_history = fly->state().lambda_history;

    const std::uint32_t classes = train.empty() ? 0 : train.back().classes_seen;
    if (config.correlation_classes >= 2 && classes >= 2) {
        const auto subset = random_subset(classes, config.correlation_classes, config.seed);
        std::vector<std::uint32_t> columns;
        const RowMatrix features = stack_rows(train, train.size(), columns);
        if (fly && fly->coder().mode() != SparseCoder::Mode::Identity) {
            report.correlations = stage_correlations(features, columns, *fly, subset);
        } else {
            PrototypeBank bank(features.cols());
            accumulate_prototypes(bank, features, columns);
            report.correlations.push_back(prototype_correlations(bank.means(), subset, PrototypeStage::Raw));
        }
    }

    if (!config.checkpoint.empty()) {
        if (!fly) throw Error(Errc::InvalidConfig, "checkpoint: only ridge pipelines keep a checkpointable state");
        Checkpoint cp;
        cp.seed = config.seed;
        cp.m = static_cast<std::uint32_t>(fly->coder().output_dim());
        cp.d = static_cast<std::uint32_t>(inputs.train.dim());
        cp.p = fly->coder().mode() == SparseCoder::Mode::Identity ? 0 : static_cast<std::uint32_t>(config.p);
        cp.k = fly->coder().mode() == SparseCoder::Mode::Identity ? cp.m : static_cast<std::uint32_t>(config.k);
        cp.class_ids = train.back().class_ids;
        cp.state = fly->state();
        write_checkpoint(cp, config.checkpoint);
    }
    if (!config.out.empty()) emit_report(report, config.out);
    return report;
}

// ---------------------------------------------------------------- sweep

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "m") return SweepAxis::M;
    if (name == "p") return SweepAxis::P;
    if (name == "k") return SweepAxis::K;
    if (name == "lambda") return SweepAxis::Lambda;
    throw Error(Errc::InvalidConfig, "axis: unknown value \"" + name + "\" (m, p, k, lambda)");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::M: return "m";
        case SweepAxis::P: return "p";
        case SweepAxis::K: return "k";
        case SweepAxis::Lambda: return "lambda";
    }
    return "k";
}

std::vector<double> parse_sweep_values(SweepAxis axis, const std::string& text) {
    std::vector<double> values;
    auto number = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw Error(Errc::InvalidConfig, "values: cannot parse \"" + s + "\"");
        }
    };
    if (text.find(':') != std::string::npos) {
        std::stringstream ss(text);
        std::string lo, hi, pts;
        std::getline(ss, lo, ':');
        std::getline(ss, hi, ':');
        std::getline(ss, pts);
        const double a = number(lo), b = number(hi), n = number(pts);
        if (n < 1 || n != std::floor(n)) throw Error(Errc::InvalidConfig, "values: point count must be a positive integer");
        if (axis == SweepAxis::Lambda) {
            values = log_grid(a, b, static_cast<std::size_t>(n));
        } else {
            for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
                const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
                values.push_back(std::round(a + f * (b - a)));
            }
        }
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(number(item));
    }
    if (values.empty()) throw Error(Errc::InvalidConfig, "values: empty sweep");
    std::set<double> seen;
    for (double v : values) {
        if (axis != SweepAxis::Lambda && (v < 1 || v != std::floor(v))) {
            throw Error(Errc::InvalidConfig, "values: " + to_string(axis) + "=" + fmt(v) + " must be a positive integer");
        }
        if (axis == SweepAxis::Lambda && !(v > 0.0)) throw Error(Errc::InvalidConfig, "values: lambda must be positive");
        if (!seen.insert(v).second) throw Error(Errc::InvalidConfig, "values: duplicate sweep value " + fmt(v));
    }
    return values;
}

SweepReport run_sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values) {
    std::set<double> seen;
    for (double v : values) {
        if (!seen.insert(v).second) throw Error(Errc::InvalidConfig, "values: duplicate sweep value " + fmt(v));
    }
    if (values.empty()) throw Error(Errc::InvalidConfig, "values: empty sweep");
    const ExperimentInputs inputs = load_inputs(config);

    SweepReport sweep;
    sweep.axis = axis;
    for (double v : values) {
        ExperimentConfig run = config;
        switch (axis) {
            case SweepAxis::M: run.m = static_cast<std::size_t>(v); break;
            case SweepAxis::P: run.p = static_cast<std::size_t>(v); break;
            case SweepAxis::K: run.k = static_cast<std::size_t>(v); break;
            case SweepAxis::Lambda: run.fixed_lambda = v; break;
        }
        run.checkpoint.clear();
        run.out = config.out.empty() ? "" : (std::filesystem::path(config.out) / (to_string(axis) + "_" + fmt(v))).string();
        run.validate();
        const RunReport report = run_cil(run, inputs);
        SweepRow row{v, report.final_average(), report.overall, 0.0};
        for (const TaskRecord& t : report.tasks) row.tau_post += t.tau.post;
        sweep.rows.push_back(row);
    }
    if (!config.out.empty()) {
        std::filesystem::create_directories(config.out);
        const auto path = std::filesystem::path(config.out) / "sweep.csv";
        std::ofstream out(path);
        if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
        out << "value,final_accuracy,overall_accuracy,tau_post\n";
        for (const SweepRow& r : sweep.rows) {
            out << fmt(r.value) << ',' << fmt(r.final_accuracy) << ',' << fmt(r.overall) << ',' << fmt(r.tau_post) << '\n';
        }
        if (!out) throw Error(Errc::IoError, "short write to " + path.string());
    }
    return sweep;
}

// ---------------------------------------------------------------- bench

const ComponentTiming& BenchReport::component(const std::string& name) const {
    for (const ComponentTiming& c : components) {
        if (c.component == name) return c;
    }
    throw Error(Errc::InvalidArgument, "no component named " + name);
}

BenchReport benchmark_components(const TaskBatch& train, const RowMatrix& queries, const PipelineConfig& config,
                                 std::size_t repeats, double cv_budget_seconds) {
    const std::size_t d = static_cast<std::size_t>(train.features.cols());
    PipelineConfig pc = config;
    pc.kind = PipelineKind::Fly;
    pc.vanilla = {};
    const SparseCoder coder = make_coder(pc, d);
    const RowMatrix dense_w = coder.projection().densify();

    BenchReport rep;
    rep.m = coder.output_dim();
    rep.d = d;
    rep.p = coder.projection().nnz_per_row();
    rep.n = train.labels.size();
    rep.classes = train.classes_seen;
    rep.test_samples = static_cast<std::size_t>(queries.rows());

    ComponentTiming projection{"projection"};
    RowMatrix H;
    projection.optimized = median_seconds(repeats, [&] { H = project_batch(coder.projection(), train.features); });
    RowMatrix H_dense;
    projection.vanilla = median_seconds(repeats, [&] { H_dense = project_batch_dense(dense_w, train.features); });
    top_k_rows(H, coder.k());

    const LabelMatrix Y{train.labels, train.classes_seen};
    ComponentTiming selection{"selection"};
    GcvReport gcv;
    selection.optimized = median_seconds(repeats, [&] { gcv = gcv_select(H, Y, pc.grid); });
    const double budget = cv_budget_seconds < 0.0 ? std::numeric_limits<double>::infinity() : cv_budget_seconds;
    const auto t0 = Clock::now();
    const CvReport cv = cv_select(H, Y, pc.grid, pc.cv_folds, SolveMethod::Cholesky, budget);
    selection.vanilla = seconds_since(t0);
    selection.vanilla_lower_bound = !cv.complete;
    rep.cv_solves_done = cv.solves_done;
    rep.cv_solves_total = cv.solves_total;
    rep.lambda = pc.fixed_lambda ? *pc.fixed_lambda : gcv.selected;

    RidgeState state(rep.m);
    update_stats(state, H, Y);
    ComponentTiming solve{"solve"};
    Matrix C_chol, C_lu;
    solve.optimized = median_seconds(repeats, [&] { C_chol = solve_ridge_system(state.G, state.S, rep.lambda, SolveMethod::Cholesky); });
    solve.vanilla = median_seconds(repeats, [&] { C_lu = solve_ridge_system(state.G, state.S, rep.lambda, SolveMethod::Lu); });

    // Similarity: the same codes scored sparsely and densely.
    const RowMatrix Q = project_batch(coder.projection(), queries);
    std::vector<SparseActivation> codes;
    for (Eigen::Index r = 0; r < Q.rows(); ++r) codes.push_back(top_k({Q.row(r).data(), rep.m}, coder.k()));
    std::vector<Vector> dense_codes;
    for (const SparseActivation& a : codes) dense_codes.push_back(a.densify());
    const RowMatrix C = C_chol;
    const RowMatrix C_lu_rows = C_lu;
    ComponentTiming similarity{"similarity"};
    std::vector<std::uint32_t> pred_sparse(codes.size()), pred_dense(codes.size());
    const PrototypeScorer scorer(C);
    similarity.optimized = median_seconds(repeats, [&] {
        for (std::size_t i = 0; i < codes.size(); ++i) pred_sparse[i] = scorer.argmax(codes[i]);
    });
    similarity.vanilla = median_seconds(repeats, [&] {
        for (std::size_t i = 0; i < codes.size(); ++i) pred_dense[i] = score_argmax_dense(C_lu_rows, dense_codes[i]);
    });

    // All-vanilla predictions through the dense projection and LU solution.
    RowMatrix Qd = project_batch_dense(dense_w, queries);
    top_k_rows(Qd, coder.k());
    rep.predictions_match = true;
    for (Eigen::Index r = 0; r < Qd.rows(); ++r) {
        const std::uint32_t vanilla = score_argmax_dense(C_lu_rows, Qd.row(r).transpose());
        if (vanilla != pred_sparse[static_cast<std::size_t>(r)]) rep.predictions_match = false;
    }

    rep.components = {projection, selection, solve, similarity};
    return rep;
}

BenchReport run_bench(const ExperimentConfig& config) {
    const ExperimentInputs inputs = load_inputs(config);
    const std::vector<TaskBatch> train = split_tasks(inputs.train, inputs.manifest);
    const std::vector<TaskBatch> test = split_tasks(inputs.test, inputs.manifest);
    std::vector<std::uint32_t> labels;
    const RowMatrix queries = stack_rows(test, 1, labels);
    const BenchReport rep =
        benchmark_components(train.front(), queries, config.pipeline_config(), config.bench_repeats, config.cv_budget_seconds);
    if (!config.out.empty()) {
        std::filesystem::create_directories(config.out);
        const auto dir = std::filesystem::path(config.out);
        std::ofstream js(dir / "bench.json");
        js << bench_to_json(rep).dump(2) << '\n';
        std::ofstream csv(dir / "bench.csv");
        csv << "component,optimized_seconds,vanilla_seconds,speedup,vanilla_lower_bound\n";
        for (const ComponentTiming& c : rep.components) {
            csv << c.component << ',' << fmt(c.optimized) << ',' << fmt(c.vanilla) << ',' << fmt(c.speedup()) << ','
                << (c.vanilla_lower_bound ? 1 : 0) << '\n';
        }
        if (!js || !csv) throw Error(Errc::IoError, "short write to " + dir.string());
    }
    return rep;
}

json bench_to_json(const BenchReport& r) {
    json comps = json::array();
    for (const ComponentTiming& c : r.components) {
        comps.push_back({{"component", c.component},
                         {"optimized_seconds", c.optimized},
                         {"vanilla_seconds", c.vanilla},
                         {"speedup", c.speedup()},
                         {"vanilla_lower_bound", c.vanilla_lower_bound}});
    }
    return {{"schema_version", kReportSchemaVersion},
            {"m", r.m}, {"d", r.d}, {"p", r.p}, {"n", r.n}, {"classes", r.classes},
            {"test_samples", r.test_samples}, {"lambda", r.lambda},
            {"cv_solves_done", r.cv_solves_done}, {"cv_solves_total", r.cv_solves_total},
            {"predictions_match", r.predictions_match}, {"components", comps}};
}

}  // namespace flycl
