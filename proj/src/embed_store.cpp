#include "flycl/embed_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include <json.hpp>

#include "flycl/error.hpp"
#include "flycl/philox.hpp"

namespace flycl {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'Y', 'E'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8 + 4 + 4;

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
        : bytes_(bytes), path_(path) {}

    std::size_t offset() const noexcept { return pos_; }

    void require(std::size_t count, const char* what) const {
        if (bytes_.size() - pos_ < count) {
            throw Error(Errc::TruncatedFile, path_.string() + ": need " + std::to_string(count) + " bytes for " +
                                                 what + " at offset " + std::to_string(pos_) + ", file has " +
                                                 std::to_string(bytes_.size()));
        }
    }

    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string str(std::size_t len) {
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }

private:
    const std::vector<unsigned char>& bytes_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        out_.insert(out_.end(), p, p + len);
    }
    void reserve(std::size_t n) { out_.reserve(n); }
    const std::vector<unsigned char>& bytes() const noexcept { return out_; }

private:
    std::vector<unsigned char> out_;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EmbeddingDataset subset_rows(const EmbeddingDataset& dataset, const std::vector<std::size_t>& rows) {
    EmbeddingDataset out;
    out.num_classes = dataset.num_classes;
    out.class_names = dataset.class_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = dataset.features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(dataset.labels[rows[i]]);
    }
    return out;
}

}  // namespace

void EmbeddingDataset::validate() const {
    if (labels.empty()) throw Error(Errc::EmptyDataset, "dataset has no samples");
    if (features.cols() <= 0) throw Error(Errc::InvalidShape, "feature_dim must be positive");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw Error(Errc::DimensionMismatch, "features have " + std::to_string(features.rows()) + " rows but " +
                                                 std::to_string(labels.size()) + " labels");
    }
    if (!class_names.empty() && class_names.size() != num_classes) {
        throw Error(Errc::InvalidShape, "class_names has " + std::to_string(class_names.size()) +
                                            " entries, num_classes is " + std::to_string(num_classes));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw Error(Errc::UnknownClass, "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                                                " >= num_classes " + std::to_string(num_classes));
        }
    }
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            if (!std::isfinite(features(r, c))) {
                throw Error(Errc::NonFiniteValue,
                            "row " + std::to_string(r) + ", column " + std::to_string(c));
            }
        }
    }
}

EmbeddingDataset read_embedding_file(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = slurp(path);
    ByteReader in(bytes, path);

    in.require(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(Errc::BadMagic, path.string() + ": expected \"FLYE\" at offset 0");
    }
    in.str(4);
    in.require(kHeaderBytes - 4, "header");
    const std::uint32_t version = in.u32();
    if (version != kFlyeVersion) {
        throw Error(Errc::VersionMismatch, path.string() + ": version " + std::to_string(version) +
                                               " at offset 4, supported " + std::to_string(kFlyeVersion));
    }
    const std::uint32_t flags = in.u32();
    const std::uint64_t n = in.u64();
    const std::uint32_t d = in.u32();
    const std::uint32_t num_classes = in.u32();
    if (n == 0) throw Error(Errc::EmptyDataset, path.string() + ": n = 0 at offset 12");
    if (d == 0) throw Error(Errc::InvalidShape, path.string() + ": d = 0 at offset 20");

    EmbeddingDataset ds;
    ds.num_classes = num_classes;
    const std::size_t feature_offset = in.offset();
    if (n > (bytes.size() / 4) / d) {
        throw Error(Errc::TruncatedFile, path.string() + ": header claims " + std::to_string(n) + "x" +
                                             std::to_string(d) + " features but file has " +
                                             std::to_string(bytes.size()) + " bytes");
    }
    in.require(static_cast<std::size_t>(n) * d * 4, "features");
    ds.features.resize(static_cast<Eigen::Index>(n), d);
    for (std::uint64_t r = 0; r < n; ++r) {
        for (std::uint32_t c = 0; c < d; ++c) {
            const float v = in.f32();
            if (!std::isfinite(v)) {
                throw Error(Errc::NonFiniteValue,
                            path.string() + ": row " + std::to_string(r) + ", column " + std::to_string(c) +
                                " (offset " + std::to_string(feature_offset + (r * d + c) * 4) + ")");
            }
            ds.features(static_cast<Eigen::Index>(r), c) = static_cast<double>(v);
        }
    }
    in.require(static_cast<std::size_t>(n) * 4, "labels");
    ds.labels.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t at = in.offset();
        ds.labels[i] = in.u32();
        if (ds.labels[i] >= num_classes) {
            throw Error(Errc::UnknownClass, path.string() + ": label " + std::to_string(ds.labels[i]) + " at row " +
                                                std::to_string(i) + " (offset " + std::to_string(at) +
                                                ") >= num_classes " + std::to_string(num_classes));
        }
    }
    if (flags & kFlyeFlagClassNames) {
        ds.class_names.reserve(num_classes);
        for (std::uint32_t c = 0; c < num_classes; ++c) {
            in.require(4, "class name length");
            const std::uint32_t len = in.u32();
            in.require(len, "class name");
            ds.class_names.push_back(in.str(len));
        }
    }
    return ds;
}

void write_embedding_file(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    const auto n = static_cast<std::uint64_t>(dataset.size());
    const auto d = static_cast<std::uint32_t>(dataset.dim());

    ByteWriter out;
    out.reserve(kHeaderBytes + n * d * 4 + n * 4);
    out.raw(kMagic, 4);
    out.u32(kFlyeVersion);
    out.u32(dataset.class_names.empty() ? 0u : kFlyeFlagClassNames);
    out.u64(n);
    out.u32(d);
    out.u32(dataset.num_classes);
    for (Eigen::Index r = 0; r < dataset.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < dataset.features.cols(); ++c) out.f32(static_cast<float>(dataset.features(r, c)));
    }
    for (std::uint32_t label : dataset.labels) out.u32(label);
    for (const std::string& name : dataset.class_names) {
        out.u32(static_cast<std::uint32_t>(name.size()));
        out.raw(name.data(), name.size());
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    file.write(reinterpret_cast<const char*>(out.bytes().data()), static_cast<std::streamsize>(out.bytes().size()));
    if (!file) throw Error(Errc::IoError, "short write to " + path.string());
}

void TaskManifest::validate(std::uint32_t num_classes) const {
    if (tasks.empty()) throw Error(Errc::InvalidConfig, "manifest has no tasks");
    std::vector<int> owner(num_classes, -1);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].empty()) throw Error(Errc::InvalidConfig, "manifest task " + std::to_string(t) + " is empty");
        for (std::uint32_t c : tasks[t]) {
            if (c >= num_classes) {
                throw Error(Errc::UnknownClass, "manifest task " + std::to_string(t) + " lists class " +
                                                    std::to_string(c) + ", dataset has " +
                                                    std::to_string(num_classes) + " classes");
            }
            if (owner[c] >= 0) {
                throw Error(Errc::OverlappingTasks, "class " + std::to_string(c) + " appears in task " +
                                                        std::to_string(owner[c]) + " and task " + std::to_string(t));
            }
            owner[c] = static_cast<int>(t);
        }
    }
}

std::size_t TaskManifest::total_classes() const noexcept {
    std::size_t total = 0;
    for (const auto& task : tasks) total += task.size();
    return total;
}

TaskManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open manifest " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    TaskManifest m;
    try {
        m.dataset = doc.value("dataset", std::string{});
        m.seed = doc.value("seed", std::uint64_t{0});
        m.classes_per_task = doc.value("classes_per_task", std::uint32_t{0});
        if (!doc.contains("tasks")) throw Error(Errc::InvalidConfig, path.string() + ": missing field \"tasks\"");
        m.tasks = doc.at("tasks").get<std::vector<std::vector<std::uint32_t>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    return m;
}

void write_manifest(const TaskManifest& manifest, const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    doc["dataset"] = manifest.dataset;
    doc["seed"] = manifest.seed;
    doc["classes_per_task"] = manifest.classes_per_task;
    doc["tasks"] = manifest.tasks;
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

TaskManifest sequential_manifest(std::uint32_t num_classes, std::uint32_t classes_per_task, std::string dataset_name) {
    if (classes_per_task == 0 || num_classes % classes_per_task != 0) {
        throw Error(Errc::InvalidConfig, "classes_per_task " + std::to_string(classes_per_task) +
                                             " does not divide num_classes " + std::to_string(num_classes));
    }
    TaskManifest m;
    m.dataset = std::move(dataset_name);
    m.classes_per_task = classes_per_task;
    for (std::uint32_t start = 0; start < num_classes; start += classes_per_task) {
        std::vector<std::uint32_t> task(classes_per_task);
        std::iota(task.begin(), task.end(), start);
        m.tasks.push_back(std::move(task));
    }
    return m;
}

std::vector<TaskBatch> split_tasks(const EmbeddingDataset& dataset, const TaskManifest& manifest) {
    manifest.validate(dataset.num_classes);

    // Stream column of each dataset class, in manifest order.
    std::vector<std::int64_t> column(dataset.num_classes, -1);
    std::vector<std::size_t> task_of(dataset.num_classes, 0);
    std::vector<std::uint32_t> class_ids;
    for (std::size_t t = 0; t < manifest.tasks.size(); ++t) {
        for (std::uint32_t c : manifest.tasks[t]) {
            column[c] = static_cast<std::int64_t>(class_ids.size());
            task_of[c] = t;
            class_ids.push_back(c);
        }
    }

    std::vector<std::vector<std::size_t>> rows(manifest.tasks.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::uint32_t label = dataset.labels[i];
        if (column[label] >= 0) rows[task_of[label]].push_back(i);
    }

    std::vector<TaskBatch> batches;
    batches.reserve(manifest.tasks.size());
    std::uint32_t seen = 0;
    for (std::size_t t = 0; t < manifest.tasks.size(); ++t) {
        seen += static_cast<std::uint32_t>(manifest.tasks[t].size());
        TaskBatch batch;
        batch.task_index = t;
        batch.classes_seen = seen;
        batch.class_ids.assign(class_ids.begin(), class_ids.begin() + seen);
        batch.features.resize(static_cast<Eigen::Index>(rows[t].size()), dataset.features.cols());
        batch.labels.reserve(rows[t].size());
        batch.source_labels.reserve(rows[t].size());
        for (std::size_t i = 0; i < rows[t].size(); ++i) {
            const std::size_t r = rows[t][i];
            batch.features.row(static_cast<Eigen::Index>(i)) = dataset.features.row(static_cast<Eigen::Index>(r));
            batch.labels.push_back(static_cast<std::uint32_t>(column[dataset.labels[r]]));
            batch.source_labels.push_back(dataset.labels[r]);
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

std::vector<TaskBatch> minibatches(const TaskBatch& batch, std::size_t batch_size) {
    if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
    std::vector<TaskBatch> out;
    const std::size_t n = batch.labels.size();
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t rows = std::min(batch_size, n - start);
        TaskBatch part;
        part.task_index = batch.task_index;
        part.classes_seen = batch.classes_seen;
        part.class_ids = batch.class_ids;
        part.features = batch.features.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(rows));
        part.labels.assign(batch.labels.begin() + start, batch.labels.begin() + start + rows);
        if (!batch.source_labels.empty()) {
            part.source_labels.assign(batch.source_labels.begin() + start, batch.source_labels.begin() + start + rows);
        }
        out.push_back(std::move(part));
    }
    return out;
}

std::pair<EmbeddingDataset, EmbeddingDataset> holdout_split(const EmbeddingDataset& dataset, double fraction,
                                                            std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(Errc::InvalidArgument, "holdout fraction must be in (0, 1), got " + std::to_string(fraction));
    }
    std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
    for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);

    std::vector<std::size_t> train_rows, test_rows;
    for (std::uint32_t c = 0; c < dataset.num_classes; ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < 2) {
            throw Error(Errc::ClassTooSmall, "class " + std::to_string(c) + " has " +
                                                 std::to_string(members.size()) + " sample(s), need >= 2");
        }
        PhiloxStream rng(seed, c);
        for (std::size_t i = members.size() - 1; i > 0; --i) {
            std::swap(members[i], members[rng.uniform_below(static_cast<std::uint32_t>(i + 1))]);
        }
        auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        train_rows.insert(train_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_rows.insert(test_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {subset_rows(dataset, train_rows), subset_rows(dataset, test_rows)};
}

EmbeddingDataset select_classes(const EmbeddingDataset& dataset, const std::vector<std::uint32_t>& classes) {
    std::vector<char> keep(dataset.num_classes, 0);
    for (std::uint32_t c : classes) {
        if (c < dataset.num_classes) keep[c] = 1;
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (keep[dataset.labels[i]]) rows.push_back(i);
    }
    return subset_rows(dataset, rows);
}

}  // namespace flycl
