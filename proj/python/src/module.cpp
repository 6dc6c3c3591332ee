#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "headline_forge/checkpoint.hpp"
#include "headline_forge/error.hpp"
#include "headline_forge/experiment.hpp"
#include "headline_forge/ingest.hpp"
#include "headline_forge/labeler.hpp"
#include "headline_forge/metrics.hpp"
#include "headline_forge/scoring.hpp"
#include "headline_forge/synth.hpp"
#include "headline_forge/textprep.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

hf::Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != cols) throw hf::Error(hf::ErrorCode::shape, "ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return hf::Tensor({rows.size(), cols}, std::move(flat));
}

py::dict label_dict(const hf::LabeledExample& l) {
  py::dict d;
  d["article_id"] = l.article_id;
  d["c_norm"] = l.engagement.c_norm;
  d["d_norm"] = l.engagement.d_norm;
  d["p"] = l.target.p;
  d["hard_label"] = l.hard_label;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  // Module-lifetime reference; the translator below only borrows it.
  static PyObject* error_type = py::exception<hf::Error>(m, "HeadlineForgeError").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const hf::Error& e) {
      // Raise an instance carrying the typed code as an attribute.
      py::object instance = py::handle(error_type)(e.what());
      instance.attr("code") = std::string(hf::to_string(e.code()));
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  m.def("indicator_distribution", [](double c, double d) { return hf::indicator_distribution(c, d).p; },
        py::arg("c_norm"), py::arg("d_norm"));
  m.def("normalize", &hf::normalize, py::arg("values"), py::arg("clip_percentile") = 99.0);
  m.def("tokenize", &hf::tokenize, py::arg("text"));

  m.def(
      "mae", [](const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& t) {
        return hf::mae(rows_to_tensor(p), rows_to_tensor(t));
      },
      py::arg("preds"), py::arg("truths"));
  m.def(
      "rae", [](const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& t) {
        return hf::rae(rows_to_tensor(p), rows_to_tensor(t));
      },
      py::arg("preds"), py::arg("truths"));

  m.def(
      "ingest",
      [](const std::vector<fs::path>& logs, double cap, double floor, std::size_t partitions) {
        std::vector<hf::PageViewEvent> events;
        std::size_t rejected = 0;
        {
          py::gil_scoped_release release;
          for (const auto& path : logs) {
            hf::ParseResult r = hf::parse_log_file(path);
            rejected += r.rejects.size();
            events.insert(events.end(), r.events.begin(), r.events.end());
          }
          events = hf::filter_noise(std::move(events), hf::NoiseFilter{cap, floor});
        }
        const hf::AggregateMap agg = hf::aggregate_partitioned(events, partitions);
        py::dict out;
        for (const auto& [id, a] : agg) out[py::str(id)] = py::make_tuple(a.click_count, a.total_dwell_seconds);
        return py::make_tuple(out, rejected);
      },
      py::arg("logs"), py::arg("cap") = 600.0, py::arg("floor") = 1.0, py::arg("partitions") = 4,
      "Returns ({article_id: (clicks, total_dwell)}, rejected_line_count).");

  m.def(
      "label",
      [](const std::map<std::string, std::pair<std::uint64_t, double>>& aggregates, double clip) {
        hf::AggregateMap agg;
        for (const auto& [id, v] : aggregates) agg.emplace(id, hf::EngagementAggregate{id, v.first, v.second});
        py::list out;
        for (const auto& l : hf::label_corpus(agg, clip)) out.append(label_dict(l));
        return out;
      },
      py::arg("aggregates"), py::arg("clip_percentile") = 99.0);

  m.def(
      "write_synthetic",
      [](std::size_t n, double events, std::uint64_t seed, const fs::path& dir) {
        py::gil_scoped_release release;
        hf::write_synthetic(hf::generate_synthetic(n, events, seed), dir);
      },
      py::arg("n"), py::arg("events_per_article"), py::arg("seed"), py::arg("out_dir"));

  m.def(
      "train",
      [](const fs::path& corpus, const fs::path& labels, const fs::path& out, const std::string& arch,
         const std::string& loss, std::uint64_t seed, std::size_t epochs, std::size_t patience) {
        hf::ExperimentConfig config;
        config.corpus = corpus;
        config.labels = labels;
        config.seed = seed;
        config.train.epochs = epochs;
        config.train.patience = patience;
        hf::ReportRow row;
        {
          py::gil_scoped_release release;
          hf::PreparedData data = hf::prepare_data(hf::load_labeled_corpus(config), config);
          std::unique_ptr<hf::Model> model;
          row = hf::run_architecture(data, hf::parse_architecture(arch), hf::parse_loss(loss), config, &model);
          hf::TrainedModel trained;
          trained.model = std::move(model);
          trained.features = std::move(data.features);
          trained.info = {{"seed", seed}, {"loss", loss}, {"test_mae", row.mae}, {"test_rae", row.rae}};
          hf::save_checkpoint(trained, out);
        }
        py::dict d;
        d["architecture"] = row.architecture;
        d["test_mae"] = row.mae;
        d["test_rae"] = row.rae;
        d["epochs"] = row.epochs_run;
        return d;
      },
      py::arg("corpus"), py::arg("labels"), py::arg("out"), py::arg("arch") = "proposed",
      py::arg("loss") = "mse_soft", py::arg("seed") = 7, py::arg("epochs") = 100, py::arg("patience") = 5);

  py::class_<hf::TrainedModel, std::shared_ptr<hf::TrainedModel>>(m, "Scorer")
      .def_static(
          "load", [](const fs::path& path) { return std::make_shared<hf::TrainedModel>(hf::load_checkpoint(path)); },
          py::arg("path"))
      .def_property_readonly("architecture",
                             [](const hf::TrainedModel& t) { return std::string(hf::to_string(t.model->architecture())); })
      .def_property_readonly("info", [](const hf::TrainedModel& t) { return json_to_py(t.info); })
      .def(
          "score",
          [](const hf::TrainedModel& t, const std::string& body, const std::vector<std::string>& candidates) {
            hf::ScoreResponse r;
            {
              py::gil_scoped_release release;
              r = hf::score(t, body, candidates);
            }
            return json_to_py(hf::to_json(r));
          },
          py::arg("body"), py::arg("candidates"));
}
