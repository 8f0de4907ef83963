#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sure/corpus.hpp"
#include "sure/error.hpp"
#include "sure/evaluate.hpp"
#include "sure/perturb.hpp"
#include "sure/pipeline.hpp"
#include "sure/retrieval.hpp"
#include "sure/stats.hpp"

namespace py = pybind11;

namespace {

sure::AnswerMatchPolicy policy_of(bool case_fold, bool whitespace_collapse) {
  return sure::AnswerMatchPolicy{case_fold, whitespace_collapse};
}

py::dict metrics_dict(const sure::MetricsSummary& m) {
  py::dict d;
  d["n"] = m.n;
  d["lr"] = m.lr;
  d["rr"] = m.rr;
  d["wr"] = m.wr;
  d["org"] = m.org;
  d["acc"] = m.acc;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sure, m) {
  m.doc() = "Spurious-feature robustness evaluation for RAG readers";
  m.attr("__version__") = std::string(sure::kToolVersion);

  static py::exception<sure::Error> error(m, "SureError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sure::Error& e) {
      py::set_error(error, (e.kind() + ": " + e.what()).c_str());
    }
  });

  m.def("contains_answer",
        [](const std::string& text, const std::vector<std::string>& answers, bool case_fold,
           bool whitespace_collapse) {
          return sure::contains_answer(text, answers, policy_of(case_fold, whitespace_collapse));
        },
        py::arg("text"), py::arg("answers"), py::arg("case_fold") = true,
        py::arg("whitespace_collapse") = true);
  m.def("chunk_text", &sure::chunk_text, py::arg("text"), py::arg("words_per_chunk"));

  m.def("similarity", [](const std::vector<double>& q, const std::vector<double>& d) {
    return sure::similarity(q, d);
  });
  m.def("top_k",
        [](const std::vector<double>& query, const std::map<std::string, std::vector<double>>& docs,
           std::size_t k) {
          sure::EmbeddingStore store(query.size());
          for (const auto& [id, v] : docs) store.add(id, v);
          std::vector<std::pair<std::string, double>> out;
          for (const auto& s : sure::top_k(query, store, sure::RetrievalConfig{k})) {
            out.emplace_back(s.doc_id, s.score);
          }
          return out;
        },
        py::arg("query"), py::arg("docs"), py::arg("k"));

  m.def("split_sentences", &sure::split_sentences);
  m.def("logic_perturb",
        [](const std::string& variant, const std::vector<std::string>& sentences,
           std::optional<std::uint64_t> seed) {
          sure::LogicOptions o;
          o.seed = seed;
          return sure::logic_perturb(sure::parse_variant(variant), sentences, o).sentences;
        },
        py::arg("variant"), py::arg("sentences"), py::arg("seed") = py::none());
  m.def("parse_rank_indices", &sure::parse_rank_indices);
  m.def("render_format", [](const std::string& variant, const std::string& title,
                            const std::string& text) {
    return sure::render_format(sure::parse_variant(variant), title, text);
  });
  m.def("render_metadata", [](const std::string& variant, const std::string& title,
                              const std::string& text) {
    return sure::render_metadata(sure::parse_variant(variant), title, text, sure::MetadataConfig{});
  });
  m.def("extract_plain_text", [](const std::string& variant, const std::string& rendered) {
    const auto t = sure::extract_plain_text(sure::parse_variant(variant), rendered);
    return std::make_pair(t.title, t.text);
  });

  m.def("build_reader_prompt", &sure::build_reader_prompt);
  m.def("compare", &sure::compare);
  m.def("partition", [](int known, bool golden) {
    return std::string(sure::subset_name(sure::partition(known, golden)));
  });
  m.def("compute_metrics", [](const std::vector<std::pair<int, int>>& labels) {
    std::vector<sure::ComparisonRecord> recs;
    for (const auto& [y, y_hat] : labels) {
      sure::ComparisonRecord r;
      r.y = y;
      r.y_hat = y_hat;
      r.c = sure::compare(y, y_hat);
      recs.push_back(r);
    }
    return metrics_dict(sure::compute_metrics(recs));
  });

  m.def("ks_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = sure::ks_test(a, b);
    return std::make_pair(r.statistic, r.p_value);
  });
  m.def("ks_exact_pvalue", [](const std::vector<double>& a, const std::vector<double>& b) {
    return sure::ks_exact_pvalue(a, b);
  });
  m.def("flesch_reading_ease", &sure::flesch_reading_ease);
  m.def("distinct1", &sure::distinct1);

  m.def("run_stage",
        [](const std::string& stage, const std::filesystem::path& config,
           std::optional<std::filesystem::path> workdir) {
          auto cfg = sure::load_config(config);
          if (workdir) cfg.workdir = std::filesystem::absolute(*workdir);
          py::gil_scoped_release release;
          sure::Pipeline p(std::move(cfg));
          const auto so = p.run(sure::parse_stage(stage));
          std::vector<std::string> files;
          for (const auto& f : so.files) files.push_back(f.string());
          return std::make_pair(files, so.stats.network_calls);
        },
        py::arg("stage"), py::arg("config"), py::arg("workdir") = py::none());
}
