#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "stressnp/config.hpp"
#include "stressnp/dsp.hpp"
#include "stressnp/errors.hpp"
#include "stressnp/eval.hpp"
#include "stressnp/features.hpp"
#include "stressnp/synthgen.hpp"

namespace py = pybind11;
using namespace stressnp;

namespace {

Dataset dataset_arg(const std::string& s) {
  if (auto d = parse_dataset(s)) return *d;
  throw ParameterError("unknown dataset shape: " + s);
}

py::dict metric_dict(const MetricRow& m) {
  py::dict d;
  d["model"] = m.model;
  d["strategy"] = m.strategy;
  d["scope"] = m.scope;
  d["participant_id"] = m.participant_id;
  d["auc"] = m.auc;
  d["average_precision"] = m.average_precision;
  d["log_loss"] = m.log_loss;
  d["accuracy"] = m.accuracy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Personalised stress classification from ECG and GSR";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<LoadError>(m, "LoadError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  m.attr("feature_names") = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());

  m.def("roc_auc", [](std::vector<int> y, std::vector<double> s) { return roc_auc(y, s); });
  m.def("average_precision",
        [](std::vector<int> y, std::vector<double> s) { return average_precision(y, s); });
  m.def("log_loss", [](std::vector<int> y, std::vector<double> p) { return log_loss(y, p); });

  m.def(
      "lowpass",
      [](std::vector<double> x, double cutoff_hz, double fs, int order) {
        return butterworth_filter(x, FilterSpec::lowpass(cutoff_hz, fs, order));
      },
      py::arg("x"), py::arg("cutoff_hz"), py::arg("fs"), py::arg("order") = 5);
  m.def(
      "decompose_gsr",
      [](std::vector<double> gsr, double fs) {
        auto c = decompose_gsr(gsr, fs);
        return py::make_tuple(c.tonic, c.phasic);
      },
      py::arg("gsr"), py::arg("fs"), "Returns (tonic, phasic).");
  m.def(
      "detect_r_peaks",
      [](std::vector<double> ecg, double fs) { return detect_r_peaks(ecg, fs).peak_times_s; },
      py::arg("ecg"), py::arg("fs"), "R-peak times in seconds.");

  m.def("hrv_time", [](std::vector<double> rr) {
    auto t = hrv_time(rr);
    return py::dict(py::arg("sdnn") = t.sdnn, py::arg("rmssd") = t.rmssd);
  });
  m.def("csi", [](std::vector<double> rr) { return csi(rr).value; });
  m.def(
      "sample_entropy", [](std::vector<double> rr, int m) { return sample_entropy(rr, m).value; },
      py::arg("rr_ms"), py::arg("m") = 2);
  m.def("rqa", [](std::vector<double> rr) {
    auto q = rqa(rr);
    return py::dict(py::arg("det") = q.det, py::arg("len_entropy") = q.len_entropy);
  });

  m.def(
      "synth",
      [](int n, const std::string& shape, std::uint64_t seed, const std::filesystem::path& out) {
        std::vector<std::string> ids;
        for (const auto& s : gen_cohort(n, dataset_arg(shape), seed)) {
          write_recording(s.recording, out / s.recording.participant_id);
          ids.push_back(s.recording.participant_id);
        }
        return ids;
      },
      py::arg("n"), py::arg("shape"), py::arg("seed"), py::arg("out"),
      "Writes a synthetic cohort and returns the participant ids.");
  m.def(
      "extract",
      [](const std::filesystem::path& root, const std::filesystem::path& out) {
        FeatureMatrix fm;
        for (const auto& dir : find_recording_dirs(root)) {
          const auto rec = load_recording(dir);
          auto ex = extract_features(rec, WindowSpec{}, BinaryLabelMap::defaults(rec.dataset));
          fm.rows.insert(fm.rows.end(), ex.matrix.rows.begin(), ex.matrix.rows.end());
        }
        sort_rows(fm);
        write_feature_csv(fm, out);
        return fm.size();
      },
      py::arg("recordings"), py::arg("out"),
      "Extracts features from every recording under a folder into a CSV; returns the row count.");
  m.def(
      "run",
      [](const std::filesystem::path& config) {
        const auto cfg = load_run_config(config);
        Report r;
        {
          py::gil_scoped_release release;
          r = run_experiment(read_feature_csv(cfg.features), cfg.experiment);
        }
        py::list rows;
        for (const auto& row : r.metrics) rows.append(metric_dict(row));
        return rows;
      },
      py::arg("config"), "Runs a configured experiment and returns its metric rows.");
}
