#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flycl/embed_store.hpp"
#include "flycl/error.hpp"
#include "flycl/experiment.hpp"
#include "flycl/projector.hpp"
#include "flycl/ridge.hpp"
#include "flycl/synthgen.hpp"

namespace py = pybind11;

namespace {

flycl::EmbeddingDataset make_dataset(const flycl::RowMatrix& features, std::vector<std::uint32_t> labels,
                                     std::uint32_t num_classes) {
    flycl::EmbeddingDataset ds;
    ds.features = features;
    ds.labels = std::move(labels);
    ds.num_classes = num_classes;
    ds.validate();
    return ds;
}

py::tuple dataset_tuple(const flycl::EmbeddingDataset& ds) {
    return py::make_tuple(ds.features, ds.labels, ds.num_classes);
}

}  // namespace

PYBIND11_MODULE(_flycl, m) {
    m.doc() = "Sparse random projection with streaming ridge classification";

    py::register_exception<flycl::Error>(m, "FlyclError", PyExc_ValueError);

    m.def(
        "synth",
        [](std::uint32_t classes, std::uint32_t dim, std::uint32_t samples, double rho, double sigma,
           std::uint64_t seed) {
            flycl::SynthSpec spec{classes, dim, samples, rho, sigma, seed};
            return dataset_tuple(flycl::generate(spec));
        },
        py::arg("classes") = 10, py::arg("dim") = 64, py::arg("samples") = 100, py::arg("rho") = 0.5,
        py::arg("sigma") = 0.1, py::arg("seed") = 0, "(features, labels, num_classes) of a synthetic stream");

    m.def(
        "read_embeddings", [](const std::filesystem::path& path) { return dataset_tuple(flycl::read_embedding_file(path)); },
        py::arg("path"));
    m.def(
        "write_embeddings",
        [](const std::filesystem::path& path, const flycl::RowMatrix& features, std::vector<std::uint32_t> labels,
           std::uint32_t num_classes) {
            flycl::write_embedding_file(make_dataset(features, std::move(labels), num_classes), path);
        },
        py::arg("path"), py::arg("features"), py::arg("labels"), py::arg("num_classes"));

    m.def(
        "projection_matrix",
        [](std::uint64_t seed, std::size_t m_, std::size_t d, std::size_t p) {
            return flycl::build_projection(seed, m_, d, p).densify();
        },
        py::arg("seed"), py::arg("m"), py::arg("d"), py::arg("p"), "dense m x d copy of the seeded sparse projection");
    m.def(
        "encode",
        [](const flycl::RowMatrix& V, std::uint64_t seed, std::size_t m_, std::size_t p, std::size_t k) {
            const flycl::SparseCoder coder(flycl::build_projection(seed, m_, static_cast<std::size_t>(V.cols()), p), k);
            return coder.encode_batch(V);
        },
        py::arg("features"), py::arg("seed"), py::arg("m"), py::arg("p"), py::arg("k"),
        "top-k(W v) for every row, as a dense n x m matrix");
    m.def(
        "top_k",
        [](const flycl::Vector& h, std::size_t k) {
            const auto a = flycl::top_k({h.data(), static_cast<std::size_t>(h.size())}, k);
            return py::make_tuple(a.indices, a.values);
        },
        py::arg("h"), py::arg("k"));

    m.def(
        "gcv_select",
        [](const flycl::RowMatrix& H, std::vector<std::uint32_t> labels, std::uint32_t num_classes,
           std::vector<double> grid) {
            const auto r = flycl::gcv_select(H, {std::move(labels), num_classes}, grid);
            py::dict out;
            out["grid"] = r.grid;
            out["df"] = r.df;
            out["gcv"] = r.gcv;
            out["selected"] = r.selected;
            out["selected_index"] = r.selected_index;
            return out;
        },
        py::arg("H"), py::arg("labels"), py::arg("num_classes"), py::arg("grid"));
    m.def(
        "solve_ridge",
        [](const flycl::Matrix& G, const flycl::Matrix& S, double lambda, bool lu) {
            return flycl::solve_ridge_system(G, S, lambda, lu ? flycl::SolveMethod::Lu : flycl::SolveMethod::Cholesky);
        },
        py::arg("G"), py::arg("S"), py::arg("lam"), py::arg("lu") = false);

    m.def(
        "run_json",
        [](const std::string& config) {
            const auto c = flycl::ExperimentConfig::from_json(nlohmann::json::parse(config));
            py::gil_scoped_release release;
            return flycl::report_to_json(flycl::run_cil(c)).dump();
        },
        py::arg("config"), "class-incremental run; config and report are JSON text");
}
