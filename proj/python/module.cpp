#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>

#include "rfimp/ampute.hpp"
#include "rfimp/csv.hpp"
#include "rfimp/error_distribution.hpp"
#include "rfimp/forest.hpp"
#include "rfimp/mice.hpp"
#include "rfimp/regression.hpp"
#include "rfimp/simstudy.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace rfimp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> v) {
  // Explicit shape and strides; copies the data.
  return Array({static_cast<py::ssize_t>(v.size())}, {static_cast<py::ssize_t>(sizeof(double))}, v.data());
}

// dict of name -> 1-d array (NaN = missing); specs default to continuous.
Dataset dataset_from_dict(const py::dict& data, const std::vector<ColumnSpec>& specs) {
  Dataset ds;
  for (const auto& [key, value] : data) {
    const auto name = key.cast<std::string>();
    const auto arr = value.cast<Array>();
    if (arr.ndim() != 1) throw std::invalid_argument("column \"" + name + "\" must be 1-d");
    std::vector<double> v(arr.data(), arr.data() + arr.size());
    std::vector<std::uint8_t> m(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = std::isnan(v[i]);
    ColumnSpec spec = ColumnSpec::continuous(name);
    for (const auto& s : specs)
      if (s.name == name) spec = s;
    ds.add_column(Column(spec, std::move(v), std::move(m)));
  }
  return ds;
}

py::dict dataset_to_dict(const Dataset& ds) {
  py::dict out;
  for (const auto& c : ds.columns()) out[py::str(c.name())] = to_array(c.values());
  return out;
}

FeatureMatrix matrix_from_array(const Array& x, const std::vector<FeatureInfo>& info) {
  if (x.ndim() != 2) throw std::invalid_argument("feature matrix must be 2-d (rows x features)");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto p = static_cast<std::size_t>(x.shape(1));
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  const double* d = x.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t f = 0; f < p; ++f) cols[f][r] = d[r * p + f];
  std::vector<FeatureInfo> fi = info.empty() ? std::vector<FeatureInfo>(p) : info;
  return FeatureMatrix(std::move(cols), std::move(fi));
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiple imputation by chained random forests with out-of-bag error draws";

  py::register_exception<rfimp::Error>(m, "Error", PyExc_RuntimeError);

  py::enum_<ColumnKind>(m, "ColumnKind")
      .value("Continuous", ColumnKind::Continuous)
      .value("Categorical", ColumnKind::Categorical);
  py::enum_<Method>(m, "Method")
      .value("EmpiricalRF", Method::EmpiricalRF)
      .value("NormalRF", Method::NormalRF)
      .value("PMM", Method::PMM)
      .value("RandomSample", Method::RandomSample);
  py::enum_<Mechanism>(m, "Mechanism").value("MCAR", Mechanism::MCAR).value("MAR_right", Mechanism::MAR_right);
  py::enum_<Task>(m, "Task").value("Regression", Task::Regression).value("Classification", Task::Classification);
  py::enum_<PatternDesign>(m, "PatternDesign")
      .value("Joint", PatternDesign::Joint)
      .value("Mixed", PatternDesign::Mixed);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next", [](Rng& r) { return r(); });
  m.def("derive_seed", [](std::uint64_t master, std::vector<std::uint64_t> path) {
    std::uint64_t s = master;
    // Same folding as derive_seed's initializer_list form.
    s = mix64(s);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
  });

  py::class_<ColumnSpec>(m, "ColumnSpec")
      .def_static("continuous", &ColumnSpec::continuous)
      .def_static("categorical", &ColumnSpec::categorical)
      .def_readonly("name", &ColumnSpec::name)
      .def_readonly("kind", &ColumnSpec::kind)
      .def_readonly("levels", &ColumnSpec::levels)
      .def("__repr__", [](const ColumnSpec& s) {
        return "ColumnSpec(" + s.name + (s.is_categorical() ? ", categorical)" : ", continuous)");
      });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_dict), py::arg("data"), py::arg("specs") = std::vector<ColumnSpec>{},
           "Build from a dict of 1-d arrays; NaN marks a missing cell.")
      .def_property_readonly("n_rows", &Dataset::n_rows)
      .def_property_readonly("names", &Dataset::names)
      .def_property_readonly("specs", &Dataset::specs)
      .def("n_missing", &Dataset::n_missing)
      .def("is_complete", &Dataset::complete)
      .def("missing_mask",
           [](const Dataset& ds, const std::string& name) {
             const auto mask = ds.column(name).missing_mask();
             return std::vector<bool>(mask.begin(), mask.end());
           })
      .def("column", [](const Dataset& ds, const std::string& name) { return to_array(ds.column(name).values()); })
      .def("to_dict", &dataset_to_dict)
      .def(py::self == py::self);

  m.def("read_csv",
        [](const std::filesystem::path& path, const std::vector<ColumnSpec>& specs, bool infer,
           const std::string& missing_token) {
          if (infer) return read_csv_inferred(path, specs, missing_token);
          return read_csv(path, specs, missing_token);
        },
        py::arg("path"), py::arg("specs") = std::vector<ColumnSpec>{}, py::arg("infer") = true,
        py::arg("missing_token") = "NA");
  m.def("write_csv",
        py::overload_cast<const Dataset&, const std::filesystem::path&, std::string_view>(&write_csv),
        py::arg("ds"), py::arg("path"), py::arg("missing_token") = "NA");
  m.def("add_product_column", &add_product_column);

  py::class_<FeatureInfo>(m, "FeatureInfo")
      .def(py::init([](ColumnKind k, std::size_t levels) { return FeatureInfo{k, levels}; }),
           py::arg("kind") = ColumnKind::Continuous, py::arg("n_levels") = 0);

  py::class_<ForestParams>(m, "ForestParams")
      .def(py::init<>())
      .def_readwrite("n_trees", &ForestParams::n_trees)
      .def_readwrite("mtry", &ForestParams::mtry)
      .def_readwrite("min_node_size", &ForestParams::min_node_size)
      .def_readwrite("max_depth", &ForestParams::max_depth)
      .def_readwrite("rng_seed", &ForestParams::rng_seed);

  py::class_<Forest>(m, "Forest")
      .def_static(
          "fit",
          [](const Array& x, const Array& y, Task task, const ForestParams& params, std::size_t n_classes,
             const std::vector<FeatureInfo>& info) {
            const auto fm = matrix_from_array(x, info);
            const auto yv = to_vector(y);
            return Forest::fit(fm, yv, task, params, n_classes);
          },
          py::arg("x"), py::arg("y"), py::arg("task") = Task::Regression, py::arg("params") = ForestParams{},
          py::arg("n_classes") = 0, py::arg("feature_info") = std::vector<FeatureInfo>{})
      .def_property_readonly("n_trees", &Forest::n_trees)
      .def_property_readonly("mtry", &Forest::mtry)
      .def("inbag_counts",
           [](const Forest& f, std::size_t t) {
             const auto c = f.inbag_counts(t);
             return std::vector<std::uint32_t>(c.begin(), c.end());
           })
      .def("predict", [](const Forest& f, const Array& x) {
        const auto v = f.predict(matrix_from_array(x, {}));
        return to_array(v);
      })
      .def("predict_proba",
           [](const Forest& f, const Array& x) {
             const auto fm = matrix_from_array(x, {});
             const auto v = f.predict_proba(fm);
             const auto k = static_cast<py::ssize_t>(f.n_classes());
             const auto d = static_cast<py::ssize_t>(sizeof(double));
             return Array({static_cast<py::ssize_t>(fm.n_rows()), k}, {k * d, d}, v.data());
           })
      .def("oob_predict", [](const Forest& f, const Array& x, std::size_t row) {
        return f.oob_predict(matrix_from_array(x, {}), row);
      });

  py::class_<ErrorDistribution>(m, "ErrorDistribution")
      .def_static("build",
                  [](const Forest& f, const Array& x, const Array& y) {
                    const auto yv = to_vector(y);
                    return ErrorDistribution::build(f, matrix_from_array(x, {}), yv);
                  })
      .def_property_readonly("errors", [](const ErrorDistribution& d) { return to_array(d.errors()); })
      .def_property_readonly("n_excluded", &ErrorDistribution::n_excluded)
      .def_property_readonly("oob_mse", &ErrorDistribution::oob_mse)
      .def("sample", &ErrorDistribution::sample)
      .def("sample_normal", &ErrorDistribution::sample_normal);

  py::class_<ImputationConfig>(m, "ImputationConfig")
      .def(py::init<>())
      .def_static("uniform", &ImputationConfig::uniform)
      .def_readwrite("n_imputations", &ImputationConfig::n_imputations)
      .def_readwrite("n_iterations", &ImputationConfig::n_iterations)
      .def_readwrite("methods", &ImputationConfig::methods)
      .def_readwrite("forest", &ImputationConfig::forest)
      .def_readwrite("pmm_donors", &ImputationConfig::pmm_donors)
      .def_readwrite("visit_sequence", &ImputationConfig::visit_sequence)
      .def_readwrite("rng_seed", &ImputationConfig::rng_seed)
      .def_readwrite("threads", &ImputationConfig::threads);

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("imputation", &StepRecord::imputation)
      .def_readonly("iteration", &StepRecord::iteration)
      .def_readonly("column", &StepRecord::column)
      .def_readonly("n_train", &StepRecord::n_train)
      .def_readonly("n_excluded", &StepRecord::n_excluded)
      .def_readonly("normal_fallback", &StepRecord::normal_fallback);

  py::class_<ImputationResult>(m, "ImputationResult")
      .def_readonly("completed", &ImputationResult::completed)
      .def_readonly("steps", &ImputationResult::steps)
      .def_property_readonly("chain_means", [](const ImputationResult& r) {
        py::list out;
        for (const auto& t : r.chain_means) out.append(py::make_tuple(t.imputation, t.iteration, t.column, t.mean));
        return out;
      });

  py::class_<ColumnDraw>(m, "ColumnDraw")
      .def_readonly("rows", &ColumnDraw::rows)
      .def_readonly("values", &ColumnDraw::values)
      .def_readonly("n_train", &ColumnDraw::n_train)
      .def_readonly("n_excluded", &ColumnDraw::n_excluded);

  m.def("initialize_chain", &initialize_chain);
  m.def("impute_column_rf", &impute_column_rf, py::arg("ds"), py::arg("target"), py::arg("method"),
        py::arg("params"), py::arg("rng"));
  m.def("impute_column_pmm", &impute_column_pmm, py::arg("ds"), py::arg("target"), py::arg("donors"),
        py::arg("rng"));
  m.def("impute", &rfimp::run, py::arg("ds"), py::arg("config"), py::call_guard<py::gil_scoped_release>());

  py::class_<AmputeConfig>(m, "AmputeConfig")
      .def(py::init<>())
      .def_readwrite("pattern_columns", &AmputeConfig::pattern_columns)
      .def_readwrite("patterns", &AmputeConfig::patterns)
      .def_readwrite("prop", &AmputeConfig::prop)
      .def_readwrite("mechanism", &AmputeConfig::mechanism)
      .def_readwrite("weight_column", &AmputeConfig::weight_column)
      .def_readwrite("rng_seed", &AmputeConfig::rng_seed);
  m.def("ampute", py::overload_cast<const Dataset&, const AmputeConfig&>(&ampute));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("names", &FitResult::names)
      .def_readonly("estimates", &FitResult::estimates)
      .def_readonly("standard_errors", &FitResult::standard_errors)
      .def_readonly("residual_df", &FitResult::residual_df);
  m.def("fit_ols", &fit_ols, py::arg("ds"), py::arg("response"), py::arg("predictors"));
  m.def("fit_interaction_model", &fit_interaction_model);

  py::class_<PooledCoefficient>(m, "PooledCoefficient")
      .def_readonly("name", &PooledCoefficient::name)
      .def_readonly("estimate", &PooledCoefficient::estimate)
      .def_readonly("within", &PooledCoefficient::within)
      .def_readonly("between", &PooledCoefficient::between)
      .def_readonly("total", &PooledCoefficient::total)
      .def_readonly("df", &PooledCoefficient::df)
      .def_property_readonly("ci", [](const PooledCoefficient& c) { return py::make_tuple(c.ci.low, c.ci.high); });
  py::class_<PooledFit>(m, "PooledFit")
      .def_readonly("m", &PooledFit::m)
      .def_readonly("coefficients", &PooledFit::coefficients)
      .def("coefficient", &PooledFit::coefficient, py::return_value_policy::reference_internal);
  m.def("pool", [](const std::vector<FitResult>& fits) { return pool(fits); });

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("n_obs", &ScenarioConfig::n_obs)
      .def_readwrite("n_reps", &ScenarioConfig::n_reps)
      .def_readwrite("noise_sd", &ScenarioConfig::noise_sd)
      .def_readwrite("mechanism", &ScenarioConfig::mechanism)
      .def_readwrite("prop", &ScenarioConfig::prop)
      .def_readwrite("patterns", &ScenarioConfig::patterns)
      .def_readwrite("methods", &ScenarioConfig::methods)
      .def_readwrite("n_imputations", &ScenarioConfig::n_imputations)
      .def_readwrite("n_iterations", &ScenarioConfig::n_iterations)
      .def_readwrite("n_trees", &ScenarioConfig::n_trees)
      .def_readwrite("rng_seed", &ScenarioConfig::rng_seed)
      .def_readwrite("threads", &ScenarioConfig::threads);
  m.def("generate", &generate);

  py::class_<SummaryRow>(m, "SummaryRow")
      .def_readonly("method", &SummaryRow::arm)
      .def_readonly("coefficient", &SummaryRow::coefficient)
      .def_readonly("median_relative_bias", &SummaryRow::median_relative_bias)
      .def_readonly("median_ci_width", &SummaryRow::median_ci_width)
      .def_readonly("coverage", &SummaryRow::coverage)
      .def_readonly("n_reps", &SummaryRow::n_reps);
  py::class_<OobExclusionStats>(m, "OobExclusionStats")
      .def_readonly("steps", &OobExclusionStats::steps)
      .def_readonly("max_fraction", &OobExclusionStats::max_fraction)
      .def_readonly("mean_fraction", &OobExclusionStats::mean_fraction);
  py::class_<StudyResult>(m, "StudyResult")
      .def_readonly("summary", &StudyResult::summary)
      .def_readonly("n_failed", &StudyResult::n_failed)
      .def_readonly("oob", &StudyResult::oob)
      .def("row", &StudyResult::row, py::return_value_policy::reference_internal)
      .def("write_report", [](const StudyResult& r, const std::filesystem::path& dir) { write_report(r, dir); });
  m.def("run_study", [](const ScenarioConfig& cfg) { return run_study(cfg); },
        py::call_guard<py::gil_scoped_release>());

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
