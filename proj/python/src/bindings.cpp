#include "sticker/cli.hpp"
#include "sticker/data.hpp"
#include "sticker/lor.hpp"
#include "sticker/metrics.hpp"
#include "sticker/model.hpp"
#include "sticker/objective.hpp"
#include "sticker/synth.hpp"
#include "sticker/tagset.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace sticker;

namespace {

using Labels = std::vector<std::vector<int>>;

py::dict values_dict(const metrics::MetricValues& v) {
  py::dict d;
  d["CP"] = v.cp;
  d["CR"] = v.cr;
  d["CF1"] = v.cf1;
  d["OP"] = v.op;
  d["OR"] = v.orc;
  d["OF1"] = v.of1;
  return d;
}

py::dict metrics_report(const Eigen::MatrixXd& probs, const Labels& truths, const std::vector<int>& ks,
                        double threshold) {
  const auto r = metrics::report(probs, truths, ks, threshold);
  py::dict topk;
  for (const auto& [k, v] : r.per_k) topk[py::int_(k)] = values_dict(v);
  py::dict out;
  out["n_eval"] = r.n_eval;
  out["topk"] = topk;
  out["threshold"] = values_dict(r.threshold_mode);
  return out;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"sticker"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

Image image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw std::invalid_argument("image must be a (channels, height, width) array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

objective::PenaltyMode mode_of(const std::string& s) { return objective::parse_penalty_mode(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sticker multi-tag recognition core";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<lor::LorError>(m, "LorError", PyExc_ValueError);
  py::register_exception<tagset::TagsetError>(m, "TagsetError", PyExc_ValueError);
  py::register_exception<metrics::MetricsError>(m, "MetricsError", PyExc_ValueError);
  py::register_exception<objective::LossError>(m, "LossError", PyExc_ValueError);

  m.def("run_cli", &run_cli, py::arg("args"), "Runs the command-line tool in-process; returns (code, stdout, stderr).");

  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out, int n, int num_tags, int height, int width, double noise,
         std::uint64_t seed) {
        GeneratorConfig g;
        g.n = n;
        g.num_tags = num_tags;
        g.height = height;
        g.width = width;
        g.noise = noise;
        const auto ds = generate_synthetic(g, seed);
        write_manifest(ds, out);
        return ds.vocabulary.tags();
      },
      py::arg("out"), py::arg("n") = 2000, py::arg("num_tags") = 12, py::arg("height") = 64, py::arg("width") = 64,
      py::arg("noise") = 0.03, py::arg("seed") = 0, "Writes a synthetic corpus and returns its vocabulary.");

  m.def("select_topk", &metrics::select_topk, py::arg("probs"), py::arg("k"));
  m.def("select_threshold", &metrics::select_threshold, py::arg("probs"), py::arg("threshold"));
  m.def("metrics_report", &metrics_report, py::arg("probs"), py::arg("truths"),
        py::arg("ks") = std::vector<int>{1, 3, 5}, py::arg("threshold") = 0.5,
        "CP/CR/CF1/OP/OR/OF1 percentages for each k and for the threshold rule.");

  m.def(
      "main_loss",
      [](const Eigen::MatrixXd& logits, const Labels& labels) { return objective::main_loss_value(logits, labels); },
      py::arg("logits"), py::arg("labels"));
  m.def(
      "penalty",
      [](const Eigen::MatrixXd& pr, const Eigen::MatrixXd& po, const Labels& labels, const std::string& mode) {
        return objective::penalty_value(pr, po, labels, mode_of(mode));
      },
      py::arg("probs_reconstructed"), py::arg("probs_original"), py::arg("labels"), py::arg("mode") = "signed");
  m.def(
      "total_loss",
      [](const Eigen::MatrixXd& lr, const Eigen::MatrixXd& lo, const Labels& labels, const std::string& mode,
         bool no_penalty) {
        const auto b = objective::total_value(lr, lo, labels, {mode_of(mode), no_penalty});
        return py::make_tuple(b.main, b.penalty, b.total);
      },
      py::arg("logits_reconstructed"), py::arg("logits_original"), py::arg("labels"), py::arg("mode") = "signed",
      py::arg("no_penalty") = false, "Returns (main, penalty, total).");

  m.def(
      "patchify",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image, int patch) {
        return Eigen::MatrixXf(lor::patchify(image_from_array(image), patch).patches);
      },
      py::arg("image"), py::arg("patch"), "(C, H, W) image to an (N, P*P*C) patch matrix.");
  m.def(
      "sample_mask_rounds",
      [](int patches, double ratio, std::uint64_t seed) { return lor::sample_mask_rounds(patches, ratio, seed).rounds; },
      py::arg("patches"), py::arg("mask_ratio"), py::arg("seed"));
  m.def(
      "patch_similarity",
      [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return lor::patch_similarity(a, b); },
      py::arg("predicted"), py::arg("original"));
  m.def(
      "renewed_attention",
      [](int patches, const Labels& rounds, const std::vector<std::vector<double>>& per_round) {
        lor::MaskPlan plan;
        plan.patches = patches;
        plan.masked_per_round = rounds.empty() ? 0 : static_cast<int>(rounds.front().size());
        plan.rounds = rounds;
        return lor::renewed_attention(plan, per_round).weights;
      },
      py::arg("patches"), py::arg("rounds"), py::arg("similarities"));
  m.def(
      "topc_select",
      [](const std::vector<double>& probs, int c) {
        const auto p = topc_select(probs, c);
        return py::make_tuple(p.topc, p.probs);
      },
      py::arg("probs"), py::arg("c"));

  m.def(
      "elbow_search",
      [](const Eigen::MatrixXd& features, int k_min, int k_max, int coarse_step, std::uint64_t seed) {
        const auto r = tagset::elbow_search(features, k_min, k_max, coarse_step, seed);
        py::dict d;
        d["selected_k"] = r.selected_k;
        d["coarse_k"] = r.coarse_k;
        d["fine_bracket"] = py::make_tuple(r.fine_lo, r.fine_hi);
        d["no_knee"] = r.no_knee;
        return d;
      },
      py::arg("features"), py::arg("k_min"), py::arg("k_max"), py::arg("coarse_step") = 1, py::arg("seed") = 0);
  m.def(
      "majority_tag",
      [](const std::set<std::string>& a, const std::set<std::string>& b, const std::set<std::string>& c) {
        return tagset::majority_tag({a, b, c}).tags;
      },
      py::arg("a"), py::arg("b"), py::arg("c"));
}
