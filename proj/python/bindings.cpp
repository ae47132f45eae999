#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "vpi/cli.hpp"
#include "vpi/error.hpp"
#include "vpi/estimators.hpp"
#include "vpi/guide_opt.hpp"
#include "vpi/models.hpp"
#include "vpi/oracle.hpp"
#include "vpi/registry.hpp"

namespace py = pybind11;
using namespace vpi;

namespace {

Value to_value(py::handle h) {
  if (py::isinstance<py::bool_>(h)) return Value(h.cast<bool>());
  if (py::isinstance<py::int_>(h)) return Value(h.cast<std::int64_t>());
  if (py::isinstance<py::str>(h)) return Value::symbol(h.cast<std::string>());
  throw py::type_error("values must be int, bool or str");
}

py::object from_value(const Value& v) {
  if (v.is_int()) return py::int_(v.as_int());
  if (v.is_bool()) return py::bool_(v.as_bool());
  return py::str(std::string(v.as_symbol().name()));
}

py::list values_list(std::span<const Value> vs) {
  py::list out;
  for (const auto& v : vs) out.append(from_value(v));
  return out;
}

// Python callables are held behind a shared_ptr so that copying the
// std::function wrappers (which may happen with the GIL released) never
// touches a Python reference count.
struct PyCallable {
  py::object fn;
  explicit PyCallable(py::object f) : fn(std::move(f)) {}
  ~PyCallable() {
    py::gil_scoped_acquire gil;
    fn = py::object();
  }
};

// A RunStop raised inside ctx.choose/evidence while Python code is on the
// stack is parked here and re-thrown once control is back in C++.
thread_local std::optional<detail::RunStop> pending_stop;

struct PyRunStopped {};

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (detail::RunStop& stop) {
    pending_stop = std::move(stop);
    throw PyRunStopped{};
  }
}

void rethrow_parked(py::error_already_set& e) {
  if (pending_stop) {
    detail::RunStop stop = std::move(*pending_stop);
    pending_stop.reset();
    throw stop;
  }
  throw std::runtime_error(e.what());
}

struct Model {
  ModelProgram program;
};

Model model_from_callable(py::function fn) {
  auto holder = std::make_shared<PyCallable>(std::move(fn));
  return Model{[holder](Context& ctx) {
    py::gil_scoped_acquire gil;
    try {
      holder->fn(py::cast(&ctx, py::return_value_policy::reference));
    } catch (py::error_already_set& e) {
      rethrow_parked(e);
    }
  }};
}

struct Site {
  std::size_t index;
  std::optional<std::string> label;
  Dist prior;
  py::list history;
  py::list extras;
};

GuideProgram guide_from_callable(py::object fn, std::optional<double> ceiling) {
  GuideProgram g;
  g.ceiling = ceiling;
  if (fn.is_none()) return g;
  auto holder = std::make_shared<PyCallable>(std::move(fn));
  g.propose = [holder](const ChoiceSite& site, GuideContext& gctx) -> std::optional<Dist> {
    py::gil_scoped_acquire gil;
    Site s{site.index,
           site.label ? std::optional<std::string>(std::string(site.label->name())) : std::nullopt,
           site.prior, values_list(site.history), values_list(site.extras)};
    try {
      py::object r = holder->fn(s, py::cast(&gctx, py::return_value_policy::reference));
      if (r.is_none()) return std::nullopt;
      return r.cast<Dist>();
    } catch (py::error_already_set& e) {
      rethrow_parked(e);
    }
    return std::nullopt;
  };
  return g;
}

ExtraConditional conditional_from_callable(py::function fn) {
  auto holder = std::make_shared<PyCallable>(std::move(fn));
  return [holder](const Trace& t, std::span<const Value> earlier) {
    py::gil_scoped_acquire gil;
    return holder->fn(py::cast(t), values_list(earlier)).cast<Dist>();
  };
}

TraceFunction trace_fn(py::object f) {
  if (f.is_none()) return [](const Trace& t) { return std::exp(t.log_evidence); };
  auto holder = std::make_shared<PyCallable>(std::move(f));
  return [holder](const Trace& t) {
    py::gil_scoped_acquire gil;
    return holder->fn(py::cast(t)).cast<double>();
  };
}

SamplingOptions sampling(std::size_t workers) {
  SamplingOptions s;
  s.workers = workers;
  return s;
}

ModelOptions model_options(int depth_cap, int alphabet, int length, const std::string& pattern) {
  return ModelOptions{depth_cap, alphabet, length, pattern};
}

py::dict params_dict(const GuideParams& p) {
  py::dict d;
  for (const auto& [k, v] : p) d[py::str(k)] = v;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Guided sampling, free-energy estimation and importance-sampling bounds";

  // Owned by the module for the life of the interpreter.
  static PyObject* vpi_error = PyErr_NewException("vpi._core.VpiError", PyExc_RuntimeError, nullptr);
  static PyObject* run_stopped = PyErr_NewException("vpi._core.RunStopped", PyExc_Exception, nullptr);
  m.attr("VpiError") = py::handle(vpi_error);
  m.attr("RunStopped") = py::handle(run_stopped);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const PyRunStopped&) {
      PyErr_SetString(run_stopped, "run ended early");
    } catch (const Error& e) {
      py::object exc = py::handle(vpi_error)(std::string(e.kind()) + ": " + e.what());
      exc.attr("kind") = e.kind();
      PyErr_SetObject(vpi_error, exc.ptr());
    }
  });

  py::class_<Dist>(m, "Dist")
      .def_static(
          "from_weights",
          [](py::iterable pairs) {
            std::vector<std::pair<Value, double>> ps;
            for (auto item : pairs) {
              auto t = item.cast<py::tuple>();
              ps.emplace_back(to_value(t[0]), t[1].cast<double>());
            }
            return Dist::from_weights(ps);
          },
          py::arg("pairs"))
      .def_static("point", [](py::handle v) { return Dist::point(to_value(v)); })
      .def("atoms",
           [](const Dist& d) {
             py::list out;
             for (const auto& a : d.atoms()) out.append(py::make_tuple(from_value(a.value), a.mass));
             return out;
           })
      .def("prob", [](const Dist& d, py::handle v) { return d.prob(to_value(v)); })
      .def("log_prob", [](const Dist& d, py::handle v) { return d.log_prob(to_value(v)); })
      .def("__len__", &Dist::size)
      .def("__eq__", &Dist::operator==)
      .def("__repr__", [](const Dist& d) { return "Dist" + d.to_string(); });
  m.def("uniform_range", &uniform_range, py::arg("lo"), py::arg("hi"));
  m.def("mix", &mix, py::arg("a"), py::arg("b"), py::arg("w"));

  py::class_<Context>(m, "Context")
      .def(
          "choose",
          [](Context& ctx, const Dist& prior, std::optional<std::string> label) {
            return guarded([&] {
              Value v = label ? ctx.choose(prior, std::string_view(*label)) : ctx.choose(prior);
              return from_value(v);
            });
          },
          py::arg("prior"), py::arg("label") = py::none())
      .def("evidence",
           [](Context& ctx, py::handle p) {
             guarded([&] {
               if (py::isinstance<py::bool_>(p)) {
                 ctx.evidence(p.cast<bool>());
               } else {
                 ctx.evidence(p.cast<double>());
               }
               return 0;
             });
           })
      .def("set_hypothesis",
           [](Context& ctx, double v) {
             guarded([&] {
               ctx.set_hypothesis(v);
               return 0;
             });
           })
      .def("print", [](Context& ctx, py::handle v) { ctx.print(to_value(v)); });

  py::class_<Site>(m, "Site")
      .def_readonly("index", &Site::index)
      .def_readonly("label", &Site::label)
      .def_readonly("prior", &Site::prior)
      .def_readonly("history", &Site::history)
      .def_readonly("extras", &Site::extras);

  py::class_<GuideContext>(m, "GuideContext")
      .def("extra_choice", [](GuideContext& g, const Dist& d, py::function conditional) {
        return guarded([&] { return from_value(g.extra_choice(d, conditional_from_callable(conditional))); });
      });

  py::class_<Model>(m, "Model")
      .def(py::init(&model_from_callable), py::arg("fn"));
  py::implicitly_convertible<py::function, Model>();

  py::class_<GuideProgram>(m, "Guide")
      .def(py::init([](py::object fn, std::optional<double> ceiling) {
             return guide_from_callable(std::move(fn), ceiling);
           }),
           py::arg("propose") = py::none(), py::arg("ceiling") = py::none())
      .def_readwrite("ceiling", &GuideProgram::ceiling);

  py::class_<Trace>(m, "Trace")
      .def_property_readonly("status", [](const Trace& t) { return std::string(to_string(t.status)); })
      .def_property_readonly("crash_cause",
                             [](const Trace& t) { return std::string(to_string(t.crash_cause)); })
      .def_readonly("failure", &Trace::failure)
      .def_readonly("seed", &Trace::seed)
      .def_readonly("log_evidence", &Trace::log_evidence)
      .def_readonly("hypothesis", &Trace::hypothesis)
      .def_readonly("events", &Trace::events)
      .def_property_readonly("completed", &Trace::completed)
      .def_property_readonly("log_prior", &Trace::log_prior)
      .def_property_readonly("log_guide", &Trace::log_guide)
      .def_property_readonly("values", [](const Trace& t) { return values_list(t.chosen_values()); })
      .def_property_readonly("extra_values", [](const Trace& t) { return values_list(t.extra_values()); })
      .def_property_readonly("labels",
                             [](const Trace& t) {
                               py::list out;
                               for (const auto& c : t.choices) {
                                 if (c.label) {
                                   out.append(std::string(c.label->name()));
                                 } else {
                                   out.append(py::none());
                                 }
                               }
                               return out;
                             })
      .def_property_readonly("outputs", [](const Trace& t) { return values_list(t.outputs); })
      .def_property_readonly("per_event_fe", [](const Trace& t) {
        py::list out;
        for (const auto& e : t.per_event_fe) {
          out.append(py::make_tuple(e.kind == EventKind::Choose ? "choose" : "evidence", e.ordinal,
                                    e.contribution));
        }
        return out;
      });

  m.def(
      "run_trace",
      [](const Model& model, const GuideProgram& guide, std::uint64_t seed) {
        return run_trace(model.program, guide, seed);
      },
      py::arg("model"), py::arg("guide") = GuideProgram{}, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>());

  py::class_<FreeEnergyEstimate>(m, "FreeEnergyEstimate")
      .def_readonly("mean_fe", &FreeEnergyEstimate::mean_fe)
      .def_readonly("std_error", &FreeEnergyEstimate::std_error)
      .def_readonly("n_total", &FreeEnergyEstimate::n_total)
      .def_readonly("n_accepted", &FreeEnergyEstimate::n_accepted)
      .def_readonly("acceptance_rate", &FreeEnergyEstimate::acceptance_rate)
      .def_readonly("adjusted_fe", &FreeEnergyEstimate::adjusted_fe)
      .def_readonly("total_events", &FreeEnergyEstimate::total_events);

  py::class_<LowerBoundResult>(m, "LowerBoundResult")
      .def_readonly("bound", &LowerBoundResult::bound)
      .def_readonly("confidence", &LowerBoundResult::confidence)
      .def_readonly("n", &LowerBoundResult::n)
      .def_readonly("sample_mean", &LowerBoundResult::sample_mean);

  py::class_<HypothesisEstimate>(m, "HypothesisEstimate")
      .def_readonly("numerator", &HypothesisEstimate::numerator)
      .def_readonly("denominator", &HypothesisEstimate::denominator)
      .def_readonly("ratio_of_bounds", &HypothesisEstimate::ratio_of_bounds)
      .def_readonly("self_normalized", &HypothesisEstimate::self_normalized)
      .def_readonly("self_normalized_std_error", &HypothesisEstimate::self_normalized_std_error);

  m.def("one_run_free_energy", &one_run_free_energy, py::arg("trace"));
  m.def(
      "estimate_free_energy",
      [](const Model& model, const GuideProgram& guide, std::size_t n, std::uint64_t seed,
         std::size_t workers) {
        return estimate_free_energy(model.program, guide, n, seed, sampling(workers));
      },
      py::arg("model"), py::arg("guide"), py::arg("n"), py::arg("seed") = 0,
      py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
  m.def(
      "importance_weight",
      [](const Trace& t, py::object f) { return importance_weight(t, trace_fn(std::move(f))).weight; },
      py::arg("trace"), py::arg("f") = py::none());
  py::enum_<BoundMethod>(m, "BoundMethod")
      .value("DKW", BoundMethod::Dkw)
      .value("DKW_OR_MINIMUM", BoundMethod::DkwOrMinimum);
  m.def(
      "lower_confidence_bound",
      [](const std::vector<double>& xs, double delta, BoundMethod method) {
        return lower_confidence_bound(xs, delta, method);
      },
      py::arg("samples"), py::arg("delta"), py::arg("method") = BoundMethod::Dkw);
  m.def(
      "evidence_lower_bound",
      [](const Model& model, const GuideProgram& guide, std::size_t n, double delta,
         std::uint64_t seed, std::size_t workers, BoundMethod method) {
        return evidence_lower_bound(model.program, guide, n, delta, seed, sampling(workers),
                                    method);
      },
      py::arg("model"), py::arg("guide"), py::arg("n"), py::arg("delta") = 0.05,
      py::arg("seed") = 0, py::arg("workers") = 1, py::arg("method") = BoundMethod::DkwOrMinimum,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "hypothesis_estimate",
      [](const Model& model, const GuideProgram& guide_num, const GuideProgram& guide_den,
         std::size_t n, double delta, std::uint64_t seed, std::size_t workers,
         BoundMethod method) {
        try {
          return hypothesis_estimate(model.program, guide_num, guide_den, n, delta, seed,
                                     sampling(workers), method);
        } catch (const UndefinedRatioError& e) {
          // The partial result is still informative; the missing ratio says why.
          return e.partial();
        }
      },
      py::arg("model"), py::arg("guide_num"), py::arg("guide_den"), py::arg("n"),
      py::arg("delta") = 0.05, py::arg("seed") = 0, py::arg("workers") = 1,
      py::arg("method") = BoundMethod::DkwOrMinimum, py::call_guard<py::gil_scoped_release>());

  py::class_<PathEnumeration>(m, "PathEnumeration")
      .def("__len__", [](const PathEnumeration& pe) { return pe.entries.size(); })
      .def_property_readonly("paths", [](const PathEnumeration& pe) {
        py::list out;
        for (const auto& e : pe.entries) {
          out.append(py::make_tuple(values_list(e.choices), e.log_prior, e.log_evidence, e.hypothesis));
        }
        return out;
      });
  py::class_<ExactFreeEnergy>(m, "ExactFreeEnergy")
      .def_readonly("free_energy", &ExactFreeEnergy::free_energy)
      .def_readonly("kl", &ExactFreeEnergy::kl)
      .def_readonly("evidence", &ExactFreeEnergy::evidence)
      .def_readonly("acceptance_rate", &ExactFreeEnergy::acceptance_rate)
      .def_readonly("expected_events", &ExactFreeEnergy::expected_events);

  m.def(
      "enumerate_paths",
      [](const Model& model, std::size_t max_paths, std::size_t max_events) {
        return enumerate_paths(model.program, max_paths, max_events);
      },
      py::arg("model"), py::arg("max_paths") = 1'000'000, py::arg("max_events") = 10'000,
      py::call_guard<py::gil_scoped_release>());
  m.def("exact_evidence", &exact_evidence, py::arg("paths"));
  m.def("exact_conditional_expectation", &exact_conditional_expectation, py::arg("paths"));
  m.def("exact_free_energy", &exact_free_energy, py::arg("paths"), py::arg("guide"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<GuideFamily>(m, "GuideFamily")
      .def("initial_params", [](const GuideFamily& f) { return params_dict(f.initial_params()); })
      .def("instantiate", &GuideFamily::instantiate, py::arg("params"))
      .def_property_readonly("cells", [](const GuideFamily& f) {
        py::list out;
        for (const auto& c : f.cells) out.append(py::make_tuple(c.key, c.arity));
        return out;
      });

  py::class_<SearchReport>(m, "SearchReport")
      .def_property_readonly("best_params",
                             [](const SearchReport& r) { return params_dict(r.best_params); })
      .def_readonly("best_utility", &SearchReport::best_utility)
      .def_readonly("best_std_error", &SearchReport::best_std_error)
      .def_readonly("best_score", &SearchReport::best_score)
      .def_readonly("utility_trace", &SearchReport::utility_trace)
      .def_readonly("evaluations", &SearchReport::evaluations)
      .def_readonly("restarts", &SearchReport::restarts)
      .def_readonly("cell_credit", &SearchReport::cell_credit);

  m.def(
      "guide_utility",
      [](const Model& model, const GuideProgram& guide, double k, std::size_t n,
         std::uint64_t seed) {
        return guide_program_utility(model.program, guide, UtilityConfig{k}, n, seed);
      },
      py::arg("model"), py::arg("guide"), py::arg("k") = 0.0, py::arg("n") = 1000,
      py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>());
  m.def(
      "exact_guide_utility",
      [](const PathEnumeration& pe, const GuideProgram& guide, double k) {
        return exact_guide_utility(pe, guide, UtilityConfig{k});
      },
      py::arg("paths"), py::arg("guide"), py::arg("k") = 0.0,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "optimize_guide",
      [](const Model& model, const GuideFamily& family, double k, std::size_t budget,
         std::uint64_t seed, std::size_t n_per_eval, double sigma, std::size_t workers) {
        SearchOptions so;
        so.n_per_eval = n_per_eval;
        so.sigma = sigma;
        so.sampling = sampling(workers);
        return optimize_guide(model.program, family, UtilityConfig{k}, budget, seed, so);
      },
      py::arg("model"), py::arg("family"), py::arg("k") = 0.0, py::arg("budget") = 2000,
      py::arg("seed") = 0, py::arg("n_per_eval") = SearchOptions{}.n_per_eval,
      py::arg("sigma") = 1.0, py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

  m.def("model_names", &model_names);
  m.def("guide_names", &guide_names, py::arg("model"));
  m.def(
      "make_model",
      [](const std::string& name, int depth_cap, int alphabet, int length,
         const std::string& pattern) {
        return Model{make_model(name, model_options(depth_cap, alphabet, length, pattern))};
      },
      py::arg("name"), py::arg("depth_cap") = 3, py::arg("alphabet") = 2, py::arg("length") = 12,
      py::arg("pattern") = "aba");
  m.def(
      "make_guide",
      [](const std::string& model, const std::string& guide, std::optional<double> ceiling,
         std::optional<GuideParams> params, int depth_cap, int alphabet, int length,
         const std::string& pattern) {
        return make_guide(model, guide, model_options(depth_cap, alphabet, length, pattern),
                          ceiling, params ? &*params : nullptr);
      },
      py::arg("model"), py::arg("guide"), py::arg("ceiling") = py::none(),
      py::arg("params") = py::none(), py::arg("depth_cap") = 3, py::arg("alphabet") = 2,
      py::arg("length") = 12, py::arg("pattern") = "aba");
  m.def(
      "make_family",
      [](const std::string& model, const std::string& family, std::optional<double> ceiling,
         int depth_cap, int alphabet, int length, const std::string& pattern) {
        return make_family(model, family, model_options(depth_cap, alphabet, length, pattern),
                           ceiling);
      },
      py::arg("model"), py::arg("family") = "tabular", py::arg("ceiling") = py::none(),
      py::arg("depth_cap") = 3, py::arg("alphabet") = 2, py::arg("length") = 12,
      py::arg("pattern") = "aba");
  m.def(
      "monkey_exact_evidence",
      [](int alphabet, int length, const std::string& pattern) {
        return models::monkey_exact_evidence(
            monkey_config(model_options(3, alphabet, length, pattern)));
      },
      py::arg("alphabet") = 2, py::arg("length") = 12, py::arg("pattern") = "aba");

  m.def(
      "cli_main",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli_main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
