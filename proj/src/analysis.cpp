#include "flycl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "flycl/error.hpp"

namespace flycl {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    return out;
}

void check_written(const std::ofstream& out, const std::filesystem::path& path) {
    if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

PrototypeStage parse_stage(const std::string& name) {
    for (PrototypeStage s : {PrototypeStage::Raw, PrototypeStage::Projected, PrototypeStage::Modulated,
                             PrototypeStage::ModulatedFull}) {
        if (to_string(s) == name) return s;
    }
    throw Error(Errc::InvalidArgument, "unknown prototype stage \"" + name + "\"");
}

}  // namespace

std::vector<double> stage_accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels,
                                   std::span<const std::size_t> task_of_class, std::size_t tasks_seen) {
    if (predictions.size() != labels.size()) {
        throw Error(Errc::DimensionMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                 std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw Error(Errc::EmptyTestSet, "no test samples");
    std::vector<std::size_t> correct(tasks_seen, 0), total(tasks_seen, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= task_of_class.size()) {
            throw Error(Errc::UnknownClass, "test label " + std::to_string(labels[i]) + " has no task");
        }
        const std::size_t t = task_of_class[labels[i]];
        if (t >= tasks_seen) {
            throw Error(Errc::UnknownClass, "test label " + std::to_string(labels[i]) + " belongs to unseen task " +
                                                std::to_string(t));
        }
        ++total[t];
        if (predictions[i] == labels[i]) ++correct[t];
    }
    std::vector<double> acc(tasks_seen);
    for (std::size_t t = 0; t < tasks_seen; ++t) {
        if (total[t] == 0) throw Error(Errc::EmptyTestSet, "task " + std::to_string(t) + " has no test samples");
        acc[t] = 100.0 * static_cast<double>(correct[t]) / static_cast<double>(total[t]);
    }
    return acc;
}

double mean_accuracy(std::span<const double> values) {
    if (values.empty()) throw Error(Errc::InvalidArgument, "mean of an empty accuracy list");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double overall_accuracy(std::span<const double> stage_averages) { return mean_accuracy(stage_averages); }

TimingSplit timing_split(double total, double extraction) {
    if (!(total >= 0.0) || !(extraction >= 0.0)) {
        throw Error(Errc::NegativeTime, "total=" + fmt(total) + ", extraction=" + fmt(extraction));
    }
    if (extraction > total) {
        throw Error(Errc::NegativeTime, "extraction " + fmt(extraction) + " s exceeds total " + fmt(total) + " s");
    }
    return {total, total - extraction};
}

std::string to_string(PrototypeStage stage) {
    switch (stage) {
        case PrototypeStage::Raw: return "raw";
        case PrototypeStage::Projected: return "projected";
        case PrototypeStage::Modulated: return "modulated";
        case PrototypeStage::ModulatedFull: return "modulated_full";
    }
    return "raw";
}

CorrelationMatrix prototype_correlations(const Matrix& vectors, const std::vector<std::uint32_t>& subset,
                                         PrototypeStage stage) {
    if (subset.size() < 2) throw Error(Errc::InvalidArgument, "need at least two vectors to correlate");
    if (vectors.rows() < 2) throw Error(Errc::ZeroVariance, "vectors have fewer than two components");
    const auto q = static_cast<Eigen::Index>(subset.size());
    Matrix Z(vectors.rows(), q);
    for (Eigen::Index j = 0; j < q; ++j) {
        if (subset[j] >= vectors.cols()) {
            throw Error(Errc::InvalidArgument, "vector index " + std::to_string(subset[j]) + " out of range");
        }
        Vector x = vectors.col(subset[j]);
        x.array() -= x.mean();
        const double norm = x.norm();
        if (!(norm > 0.0)) throw Error(Errc::ZeroVariance, "vector " + std::to_string(subset[j]) + " is constant");
        Z.col(j) = x / norm;
    }
    CorrelationMatrix out;
    out.classes = subset;
    out.stage = stage;
    out.matrix = Z.transpose() * Z;
    for (Eigen::Index i = 0; i < q; ++i) {
        out.matrix(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double r = std::clamp(0.5 * (out.matrix(i, j) + out.matrix(j, i)), -1.0, 1.0);
            out.matrix(i, j) = r;
            out.matrix(j, i) = r;
        }
    }
    return out;
}

double mean_abs_off_diagonal(const CorrelationMatrix& correlations) {
    const Eigen::Index q = correlations.matrix.rows();
    if (q < 2) throw Error(Errc::InvalidArgument, "correlation matrix has no off-diagonal entries");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) {
            if (i != j) sum += std::abs(correlations.matrix(i, j));
        }
    }
    return sum / static_cast<double>(q * (q - 1));
}

std::vector<CorrelationMatrix> stage_correlations(const RowMatrix& train_features,
                                                  std::span<const std::uint32_t> train_columns,
                                                  const FlyPipeline& pipeline,
                                                  const std::vector<std::uint32_t>& subset) {
    const RidgeState& state = pipeline.state();
    if (!state.solved) throw Error(Errc::Unsolved, "prototypes have not been solved");
    if (static_cast<std::size_t>(train_features.rows()) != train_columns.size()) {
        throw Error(Errc::DimensionMismatch, "feature rows and labels disagree");
    }
    const SparseCoder& coder = pipeline.coder();
    const auto c = static_cast<Eigen::Index>(state.classes_seen);
    for (std::uint32_t s : subset) {
        if (s >= state.classes_seen) throw Error(Errc::UnknownClass, "class column " + std::to_string(s) + " unseen");
    }

    Matrix raw = Matrix::Zero(train_features.cols(), c);
    Matrix projected = Matrix::Zero(static_cast<Eigen::Index>(coder.output_dim()), c);
    std::vector<double> counts(static_cast<std::size_t>(c), 0.0);
    constexpr Eigen::Index kChunk = 256;
    for (Eigen::Index start = 0; start < train_features.rows(); start += kChunk) {
        const Eigen::Index rows = std::min(kChunk, train_features.rows() - start);
        const RowMatrix H = coder.encode_batch(train_features.middleRows(start, rows));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const std::uint32_t col = train_columns[static_cast<std::size_t>(start + r)];
            if (col >= c) continue;
            raw.col(col) += train_features.row(start + r).transpose();
            projected.col(col) += H.row(r).transpose();
            counts[col] += 1.0;
        }
    }
    for (Eigen::Index j = 0; j < c; ++j) {
        if (counts[j] > 0) {
            raw.col(j) /= counts[j];
            projected.col(j) /= counts[j];
        }
    }

    std::vector<Eigen::Index> active;
    for (Eigen::Index u = 0; u < projected.rows(); ++u) {
        for (std::uint32_t s : subset) {
            if (projected(u, s) != 0.0) {
                active.push_back(u);
                break;
            }
        }
    }
    const Matrix C = state.C;
    Matrix restricted(static_cast<Eigen::Index>(active.size()), c);
    for (std::size_t a = 0; a < active.size(); ++a) restricted.row(static_cast<Eigen::Index>(a)) = C.row(active[a]);

    return {prototype_correlations(raw, subset, PrototypeStage::Raw),
            prototype_correlations(projected, subset, PrototypeStage::Projected),
            prototype_correlations(restricted, subset, PrototypeStage::Modulated),
            prototype_correlations(C, subset, PrototypeStage::ModulatedFull)};
}

json report_to_json(const RunReport& report) {
    json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["config"] = report.config;
    doc["overall_accuracy"] = report.overall;
    doc["final_accuracy"] = report.final_average();
    json tasks = json::array();
    json timing = json::array();
    for (const TaskRecord& t : report.tasks) {
        tasks.push_back({{"task", t.task},
                         {"classes_seen", t.classes_seen},
                         {"train_samples", t.train_samples},
                         {"test_samples", t.test_samples},
                         {"lambda", t.lambda},
                         {"accuracy", t.accuracy},
                         {"average", t.average}});
        timing.push_back({{"task", t.task},
                          {"projection", t.train_timings.projection},
                          {"statistics", t.train_timings.statistics},
                          {"selection", t.train_timings.selection},
                          {"solve", t.train_timings.solve},
                          {"eval_projection", t.eval_timings.projection},
                          {"similarity", t.eval_timings.similarity},
                          {"extraction", t.extraction},
                          {"tau_train", t.tau.train},
                          {"tau_post", t.tau.post}});
    }
    doc["tasks"] = std::move(tasks);
    doc["lambda_history"] = report.lambda_history;
    json corr = json::array();
    for (const CorrelationMatrix& cm : report.correlations) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < cm.matrix.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(cm.matrix.cols()));
            for (Eigen::Index j = 0; j < cm.matrix.cols(); ++j) row[static_cast<std::size_t>(j)] = cm.matrix(i, j);
            rows.push_back(row);
        }
        corr.push_back({{"stage", to_string(cm.stage)},
                        {"classes", cm.classes},
                        {"mean_abs_off_diagonal", mean_abs_off_diagonal(cm)},
                        {"matrix", rows}});
    }
    doc["correlations"] = std::move(corr);
    doc["timing"] = {{"tasks", std::move(timing)}};
    return doc;
}

RunReport report_from_json(const json& doc) {
    try {
        if (doc.at("schema_version").get<int>() != kReportSchemaVersion) {
            throw Error(Errc::VersionMismatch, "report schema_version " + doc.at("schema_version").dump());
        }
        RunReport r;
        r.config = doc.at("config");
        r.overall = doc.at("overall_accuracy").get<double>();
        r.lambda_history = doc.at("lambda_history").get<std::vector<double>>();
        const json& timing = doc.at("timing").at("tasks");
        for (std::size_t i = 0; i < doc.at("tasks").size(); ++i) {
            const json& t = doc.at("tasks")[i];
            TaskRecord rec;
            rec.task = t.at("task").get<std::size_t>();
            rec.classes_seen = t.at("classes_seen").get<std::uint32_t>();
            rec.train_samples = t.at("train_samples").get<std::size_t>();
            rec.test_samples = t.at("test_samples").get<std::size_t>();
            rec.lambda = t.at("lambda").get<double>();
            rec.accuracy = t.at("accuracy").get<std::vector<double>>();
            rec.average = t.at("average").get<double>();
            if (i < timing.size()) {
                const json& tm = timing[i];
                rec.train_timings.projection = tm.at("projection").get<double>();
                rec.train_timings.statistics = tm.at("statistics").get<double>();
                rec.train_timings.selection = tm.at("selection").get<double>();
                rec.train_timings.solve = tm.at("solve").get<double>();
                rec.eval_timings.projection = tm.at("eval_projection").get<double>();
                rec.eval_timings.similarity = tm.at("similarity").get<double>();
                rec.extraction = tm.at("extraction").get<double>();
                rec.tau = {tm.at("tau_train").get<double>(), tm.at("tau_post").get<double>()};
            }
            r.tasks.push_back(std::move(rec));
        }
        for (const json& c : doc.at("correlations")) {
            CorrelationMatrix cm;
            cm.stage = parse_stage(c.at("stage").get<std::string>());
            cm.classes = c.at("classes").get<std::vector<std::uint32_t>>();
            const json& rows = c.at("matrix");
            const auto q = static_cast<Eigen::Index>(rows.size());
            cm.matrix.resize(q, q);
            for (Eigen::Index i = 0; i < q; ++i) {
                for (Eigen::Index j = 0; j < q; ++j) cm.matrix(i, j) = rows[i].at(j).get<double>();
            }
            r.correlations.push_back(std::move(cm));
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("malformed report: ") + e.what());
    }
}

void emit_report(const RunReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

    {
        const auto path = out_dir / "report.json";
        auto out = open_out(path);
        out << report_to_json(report).dump(2) << '\n';
        check_written(out, path);
    }
    {
        const auto path = out_dir / "accuracy_curve.csv";
        auto out = open_out(path);
        out << "stage,classes_seen,average_accuracy\n";
        for (const TaskRecord& t : report.tasks) out << t.task + 1 << ',' << t.classes_seen << ',' << fmt(t.average) << '\n';
        check_written(out, path);
    }
    {
        const auto path = out_dir / "accuracy_matrix.csv";
        auto out = open_out(path);
        out << "stage,task,accuracy\n";
        for (const TaskRecord& t : report.tasks) {
            for (std::size_t i = 0; i < t.accuracy.size(); ++i) {
                out << t.task + 1 << ',' << i + 1 << ',' << fmt(t.accuracy[i]) << '\n';
            }
        }
        check_written(out, path);
    }
    {
        const auto path = out_dir / "timing.csv";
        auto out = open_out(path);
        out << "stage,projection,statistics,selection,solve,eval_projection,similarity,extraction,tau_train,tau_post,"
               "lambda\n";
        for (const TaskRecord& t : report.tasks) {
            out << t.task + 1 << ',' << fmt(t.train_timings.projection) << ',' << fmt(t.train_timings.statistics) << ','
                << fmt(t.train_timings.selection) << ',' << fmt(t.train_timings.solve) << ','
                << fmt(t.eval_timings.projection) << ',' << fmt(t.eval_timings.similarity) << ','
                << fmt(t.extraction) << ',' << fmt(t.tau.train) << ',' << fmt(t.tau.post) << ',' << fmt(t.lambda)
                << '\n';
        }
        check_written(out, path);
    }
    {
        const auto path = out_dir / "correlations.csv";
        auto out = open_out(path);
        out << "stage,row_class,col_class,pearson\n";
        for (const CorrelationMatrix& cm : report.correlations) {
            for (Eigen::Index i = 0; i < cm.matrix.rows(); ++i) {
                for (Eigen::Index j = 0; j < cm.matrix.cols(); ++j) {
                    out << to_string(cm.stage) << ',' << cm.classes[i] << ',' << cm.classes[j] << ','
                        << fmt(cm.matrix(i, j)) << '\n';
                }
            }
        }
        check_written(out, path);
    }
}

std::vector<double> read_extraction_sidecar(const std::filesystem::path& path,
                                            const std::vector<std::size_t>& task_samples) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    std::vector<double> out(task_samples.size(), 0.0);
    try {
        if (doc.contains("per_task_seconds") && doc["per_task_seconds"].size() == task_samples.size()) {
            out = doc["per_task_seconds"].get<std::vector<double>>();
        } else {
            const double total = doc.at("total_seconds").get<double>();
            const std::size_t seen = std::accumulate(task_samples.begin(), task_samples.end(), std::size_t{0});
            const std::size_t n = doc.contains("num_samples") ? doc["num_samples"].get<std::size_t>() : seen;
            if (n == 0) throw Error(Errc::InvalidConfig, path.string() + ": num_samples is 0");
            for (std::size_t t = 0; t < task_samples.size(); ++t) {
                out[t] = total * static_cast<double>(task_samples[t]) / static_cast<double>(n);
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    for (std::size_t t = 0; t < out.size(); ++t) {
        if (!(out[t] >= 0.0)) {
            throw Error(Errc::NegativeTime, path.string() + ": extraction time of task " + std::to_string(t));
        }
    }
    return out;
}

}  // namespace flycl
