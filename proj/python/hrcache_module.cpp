// Python bindings for the simulation core. Reports cross the boundary as
// parsed JSON so python sees the exact structures the cli emits.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrcache/engine.hpp"
#include "hrcache/errors.hpp"
#include "hrcache/hazard.hpp"
#include "hrcache/model.hpp"
#include "hrcache/oracle.hpp"
#include "hrcache/trace.hpp"

namespace py = pybind11;
using namespace hrcache;

namespace {

py::object to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

WindowConfig make_window(double multiplier, uint64_t op_budget, int batch_size,
                         double decay, bool look_back,
                         const std::string& hazard_mode, double bandwidth_scale,
                         uint64_t min_labels, uint64_t seed) {
    WindowConfig w;
    w.multiplier = multiplier;
    w.op_budget = op_budget;
    w.batch_size = batch_size;
    w.decay = decay;
    w.look_back = look_back;
    if (hazard_mode == "poisson")
        w.hazard_mode = HazardMode::poisson;
    else if (hazard_mode == "kernel")
        w.hazard_mode = HazardMode::kernel;
    else
        throw UsageError("hazard_mode must be 'kernel' or 'poisson'");
    w.bandwidth_scale = bandwidth_scale;
    w.min_labels = min_labels;
    w.seed = seed;
    return w;
}

FeatureVector to_features(const std::vector<double>& raw) {
    if (raw.size() != kFeatureCount)
        throw UsageError("feature vectors need exactly " +
                         std::to_string(kFeatureCount) + " values");
    FeatureVector x;
    std::copy(raw.begin(), raw.end(), x.begin());
    return x;
}

}  // namespace

PYBIND11_MODULE(_hrcache, m) {
    m.doc() = "trace-driven cache simulation with hazard-rate-trained eviction";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    py::class_<Request>(m, "Request")
        .def(py::init<>())
        .def(py::init([](double time, uint64_t key, uint64_t size) {
                 return Request{time, key, size};
             }),
             py::arg("time"), py::arg("key"), py::arg("size"))
        .def_readwrite("time", &Request::time)
        .def_readwrite("key", &Request::key)
        .def_readwrite("size", &Request::size)
        .def("__repr__", [](const Request& r) {
            std::ostringstream s;
            s << "Request(time=" << r.time << ", key=" << r.key
              << ", size=" << r.size << ")";
            return s.str();
        });

    py::class_<Trace>(m, "Trace")
        .def(py::init<>())
        .def("append",
             [](Trace& t, double time, uint64_t key, uint64_t size) {
                 t.requests.push_back({time, key, size});
             },
             py::arg("time"), py::arg("key"), py::arg("size"))
        .def("__len__", [](const Trace& t) { return t.requests.size(); })
        .def("__getitem__",
             [](const Trace& t, size_t i) {
                 if (i >= t.requests.size()) throw py::index_error();
                 return t.requests[i];
             })
        .def("stats", [](const Trace& t) {
            TraceStats s = trace_stats(t);
            py::dict d;
            d["total_requests"] = s.total_requests;
            d["unique_objects"] = s.unique_objects;
            d["total_bytes"] = s.total_bytes;
            d["unique_bytes"] = s.unique_bytes;
            d["mean_size"] = s.mean_size;
            d["max_size"] = s.max_size;
            return d;
        });

    py::class_<SyntheticConfig>(m, "SyntheticConfig")
        .def(py::init([](uint64_t n_objects, uint64_t n_requests, double alpha,
                         uint64_t seed) {
                 SyntheticConfig c;
                 c.n_objects = n_objects;
                 c.n_requests = n_requests;
                 c.popularity_alpha = alpha;
                 c.seed = seed;
                 return c;
             }),
             py::arg("n_objects"), py::arg("n_requests"),
             py::arg("alpha") = 1.0, py::arg("seed") = 1)
        .def_readwrite("n_objects", &SyntheticConfig::n_objects)
        .def_readwrite("n_requests", &SyntheticConfig::n_requests)
        .def_readwrite("alpha", &SyntheticConfig::popularity_alpha)
        .def_readwrite("seed", &SyntheticConfig::seed)
        .def("poisson",
             [](SyntheticConfig& c, double rate) {
                 c.interarrival = PoissonArrivals{rate};
             },
             py::arg("rate") = 1.0)
        .def("gpareto",
             [](SyntheticConfig& c, double sigma, double xi) {
                 c.interarrival = GParetoArrivals{sigma, xi};
             },
             py::arg("sigma"), py::arg("xi"))
        .def("constant_size",
             [](SyntheticConfig& c, uint64_t bytes) {
                 c.size_model = ConstantSize{bytes};
             },
             py::arg("bytes") = 1)
        .def("lognormal_size",
             [](SyntheticConfig& c, double mu, double sigma) {
                 c.size_model = LognormalSize{mu, sigma};
             },
             py::arg("mu"), py::arg("sigma"));

    m.def("generate", &generate_synthetic, py::arg("config"));
    m.def("load_trace",
          [](const std::string& path, bool lenient) {
              ParseOptions opts;
              opts.strict_sizes = !lenient;
              return load_trace(path, opts);
          },
          py::arg("path"), py::arg("lenient") = false);
    m.def("write_trace",
          [](const Trace& t, const std::string& path) {
              std::ofstream f(path);
              if (!f) throw DataError("cannot open " + path + " for writing");
              write_trace(t, f);
          },
          py::arg("trace"), py::arg("path"));
    m.def("offset_keys", &offset_keys, py::arg("trace"), py::arg("offset"));
    m.def("merge_traces", &merge_traces, py::arg("a"), py::arg("b"));

    m.def("simulate",
          [](const Trace& trace, const std::string& policy, uint64_t capacity,
             int64_t warmup, bool timing, double multiplier, uint64_t op_budget,
             int batch_size, double decay, bool look_back,
             const std::string& hazard_mode, double bandwidth_scale,
             uint64_t min_labels, uint64_t seed) {
              SimOptions opts;
              if (warmup >= 0) opts.warmup = static_cast<uint64_t>(warmup);
              opts.timing = timing;
              opts.window =
                  make_window(multiplier, op_budget, batch_size, decay,
                              look_back, hazard_mode, bandwidth_scale,
                              min_labels, seed);
              return to_py(report_to_json(run_sim(trace, policy, capacity, opts)));
          },
          py::arg("trace"), py::arg("policy"), py::arg("capacity"),
          py::arg("warmup") = -1, py::arg("timing") = false,
          py::arg("multiplier") = 3.0, py::arg("op_budget") = 5'000'000,
          py::arg("batch_size") = 128, py::arg("decay") = 0.9,
          py::arg("look_back") = true, py::arg("hazard_mode") = "kernel",
          py::arg("bandwidth_scale") = 1.0, py::arg("min_labels") = 200,
          py::arg("seed") = 1);

    m.def("compare",
          [](const Trace& trace, const std::vector<std::string>& policies,
             const std::vector<uint64_t>& capacities, int64_t warmup,
             bool timing, double multiplier, uint64_t op_budget, int batch_size,
             double decay, bool look_back, const std::string& hazard_mode,
             double bandwidth_scale, uint64_t min_labels, uint64_t seed) {
              SimOptions opts;
              if (warmup >= 0) opts.warmup = static_cast<uint64_t>(warmup);
              opts.timing = timing;
              opts.window =
                  make_window(multiplier, op_budget, batch_size, decay,
                              look_back, hazard_mode, bandwidth_scale,
                              min_labels, seed);
              return to_py(
                  comparison_to_json(compare(trace, policies, capacities, opts)));
          },
          py::arg("trace"), py::arg("policies"), py::arg("capacities"),
          py::arg("warmup") = -1, py::arg("timing") = false,
          py::arg("multiplier") = 3.0, py::arg("op_budget") = 5'000'000,
          py::arg("batch_size") = 128, py::arg("decay") = 0.9,
          py::arg("look_back") = true, py::arg("hazard_mode") = "kernel",
          py::arg("bandwidth_scale") = 1.0, py::arg("min_labels") = 200,
          py::arg("seed") = 1);

    m.def("bound",
          [](const Trace& trace, double capacity, const std::string& mode,
             const std::string& hazard_mode, double bandwidth_scale) {
              if (trace.empty()) throw DataError("bound: empty trace");
              std::span<const Request> window(trace.requests);
              SamplePlan plan = full_sample(window);
              HazardEstimationConfig hcfg;
              hcfg.mode = hazard_mode == "poisson" ? HazardMode::poisson
                                                   : HazardMode::kernel;
              hcfg.bandwidth_scale = bandwidth_scale;
              auto hazards =
                  estimate_window_hazards(window, plan.sampled_keys, hcfg);
              HroBound b = hro_upper_bound(
                  trace, capacity, *hazards,
                  mode == "hre" ? HroMode::hr_e : HroMode::hr_fc);
              py::dict d;
              d["hit_probability"] = b.hit_probability;
              d["byte_hit_probability"] = b.byte_hit_probability;
              return d;
          },
          py::arg("trace"), py::arg("capacity"), py::arg("mode") = "hrfc",
          py::arg("hazard_mode") = "kernel", py::arg("bandwidth_scale") = 1.0);

    m.def("nelson_aalen",
          [](const std::vector<double>& durations) {
              HazardIncrements inc = nelson_aalen(durations);
              std::vector<std::pair<double, double>> out;
              out.reserve(inc.events.size());
              for (const auto& e : inc.events) out.emplace_back(e.t, e.delta_h);
              return out;
          },
          py::arg("durations"));

    m.def("kernel_hazard",
          [](const std::vector<double>& durations, const std::vector<double>& at,
             double bandwidth_scale) {
              KernelHazardEstimator est(
                  nelson_aalen(durations),
                  select_bandwidth(durations, bandwidth_scale));
              std::vector<double> out;
              out.reserve(at.size());
              for (double t : at) out.push_back(est(t));
              return out;
          },
          py::arg("durations"), py::arg("at"),
          py::arg("bandwidth_scale") = 1.0);

    m.def("train",
          [](const std::string& csv_path, double learning_rate, int max_depth,
             int n_trees, int max_bins, int min_samples_leaf,
             double l2_leaf_reg) {
              std::ifstream f(csv_path);
              if (!f) throw DataError("cannot open " + csv_path);
              std::vector<TrainingRow> rows = read_training_csv(f);
              GbdtParams p;
              p.learning_rate = learning_rate;
              p.max_depth = max_depth;
              p.n_trees = n_trees;
              p.max_bins = max_bins;
              p.min_samples_leaf = min_samples_leaf;
              p.l2_leaf_reg = l2_leaf_reg;
              return train_gbdt(rows, p).to_json().dump();
          },
          py::arg("csv_path"), py::arg("learning_rate") = 0.1,
          py::arg("max_depth") = 50, py::arg("n_trees") = 100,
          py::arg("max_bins") = 255, py::arg("min_samples_leaf") = 20,
          py::arg("l2_leaf_reg") = 1.0);

    m.def("predict",
          [](const std::string& model_json,
             const std::vector<std::vector<double>>& rows) {
              GbdtModel model =
                  GbdtModel::from_json(nlohmann::json::parse(model_json));
              std::vector<FeatureVector> xs;
              xs.reserve(rows.size());
              for (const auto& r : rows) xs.push_back(to_features(r));
              return model.predict_batch(xs);
          },
          py::arg("model_json"), py::arg("rows"));

    m.attr("FEATURE_COUNT") = static_cast<int>(kFeatureCount);
    m.attr("MISSING_DELTA") = kMissingDelta;
    m.attr("POLICIES") =
        std::vector<std::string>{"lru",   "lruk",   "s4lru",
                                 "lfuda", "belady", "hrcache"};
}
