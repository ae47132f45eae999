#include "vpi/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "vpi/detail/parallel.hpp"
#include "vpi/error.hpp"
#include "vpi/estimators.hpp"
#include "vpi/guide_opt.hpp"
#include "vpi/json_out.hpp"
#include "vpi/oracle.hpp"
#include "vpi/registry.hpp"

namespace vpi {
namespace {

constexpr std::size_t kOracleMaxPaths = 2'000'000;
constexpr std::size_t kOracleMaxEvents = 10'000;

struct ExperimentConfig {
  std::string command;
  std::string model = "three_dice";
  std::string guide = "prior";
  bool guide_given = false;
  std::string guide_num;
  std::size_t n = 1000;
  bool n_given = false;
  double delta = 0.05;
  std::uint64_t seed = 0;
  std::optional<double> ceiling;
  double k = 0.0;
  std::size_t workers = 1;
  ModelOptions model_opts;
  std::string output;
  std::string params_path;
  std::string params_out;
  std::size_t budget = 2000;
  double sigma = 1.0;
  std::size_t epoch_length = 0;
  bool histogram = false;
  std::string bound_method = "dkw_min";
};

Json value_json(const Value& v) {
  if (v.is_int()) return v.as_int();
  if (v.is_bool()) return v.as_bool();
  return std::string(v.as_symbol().name());
}

Json dist_json(const Dist& d) {
  Json arr = Json::array();
  for (const auto& a : d.atoms()) arr.push_back(Json::array({value_json(a.value), a.mass}));
  return arr;
}

Json optional_number(const std::optional<double>& x) {
  return x ? Json(*x) : Json(nullptr);
}

Json params_json(const GuideParams& p) {
  Json j = Json::object();
  for (const auto& [key, logits] : p) j[key] = logits;
  return j;
}

GuideParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgumentError("cannot open guide parameter file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError("malformed guide parameter file " + path + ": " + e.what());
  }
  GuideParams p;
  if (!j.is_object()) throw InvalidArgumentError("guide parameter file must hold a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array()) {
      throw InvalidArgumentError("cell '" + it.key() + "' must map to an array of logits");
    }
    std::vector<double> logits;
    for (const auto& x : it.value()) {
      if (!x.is_number()) throw InvalidArgumentError("cell '" + it.key() + "' has a non-number");
      logits.push_back(x.get<double>());
    }
    p[it.key()] = std::move(logits);
  }
  return p;
}

Json config_json(const ExperimentConfig& c) {
  Json j;
  j["model"] = c.model;
  j["guide"] = c.guide;
  if (!c.guide_num.empty()) j["guide_num"] = c.guide_num;
  j["n"] = c.n;
  j["delta"] = c.delta;
  j["seed"] = c.seed;
  j["ceiling"] = optional_number(c.ceiling);
  j["k"] = c.k;
  j["workers"] = c.workers;
  if (c.model == "expr_induction") j["depth_cap"] = c.model_opts.depth_cap;
  if (c.model == "monkey") {
    j["alphabet"] = c.model_opts.alphabet;
    j["length"] = c.model_opts.length;
    j["pattern"] = c.model_opts.pattern;
  }
  if (c.command == "optimize") {
    j["budget"] = c.budget;
    j["sigma"] = c.sigma;
    j["epoch_length"] = c.epoch_length;
  }
  if (c.command == "bound") j["bound_method"] = c.bound_method;
  if (!c.params_path.empty()) j["params"] = c.params_path;
  return j;
}

Json bound_json(const LowerBoundResult& r) {
  Json j;
  j["bound"] = r.bound;
  j["confidence"] = r.confidence;
  j["n"] = r.n;
  j["sample_mean"] = r.sample_mean;
  return j;
}

Json estimate_json(const FreeEnergyEstimate& e) {
  Json j;
  j["mean_fe"] = e.mean_fe;
  j["std_error"] = e.std_error;
  j["n_total"] = e.n_total;
  j["n_accepted"] = e.n_accepted;
  j["acceptance_rate"] = e.acceptance_rate;
  j["adjusted_fe"] = e.adjusted_fe;
  j["total_events"] = e.total_events;
  return j;
}

Json hypothesis_json(const HypothesisEstimate& h) {
  Json j;
  j["numerator"] = bound_json(h.numerator);
  j["denominator"] = bound_json(h.denominator);
  j["ratio_of_bounds_estimate"] = optional_number(h.ratio_of_bounds);
  j["self_normalized"] = optional_number(h.self_normalized);
  j["self_normalized_std_error"] = optional_number(h.self_normalized_std_error);
  return j;
}

Json error_json(const Error& e) {
  Json j;
  j["type"] = e.kind();
  j["message"] = e.what();
  return j;
}

std::string event_id(const Trace& t, const FeEvent& ev) {
  if (ev.kind == EventKind::Evidence) return "evidence:" + std::to_string(ev.ordinal);
  std::string id = "choose:" + std::to_string(ev.ordinal);
  const auto& label = t.choices[ev.ordinal].label;
  if (label) id += ":" + std::string(label->name());
  return id;
}

struct Session {
  const ExperimentConfig& cfg;
  Json results = Json::object();
  Json notes = Json::array();

  GuideProgram guide(const std::string& name) const {
    std::optional<GuideParams> params;
    if (!cfg.params_path.empty()) params = load_params(cfg.params_path);
    return make_guide(cfg.model, name, cfg.model_opts, cfg.ceiling, params ? &*params : nullptr);
  }

  SamplingOptions sampling() const {
    SamplingOptions s;
    s.workers = cfg.workers;
    return s;
  }

  void run() {
    const ModelProgram model = make_model(cfg.model, cfg.model_opts);
    const GuideProgram g = guide(cfg.guide);
    results = estimate_json(estimate_free_energy(model, g, cfg.n, cfg.seed, sampling()));
    if (cfg.histogram) {
      struct Row {
        bool accepted = false;
        double h = 0.0;
        double w = 0.0;
        std::string printed;
      };
      const TraceFunction evidence = [](const Trace& t) { return std::exp(t.log_evidence); };
      auto rows = detail::parallel_map(cfg.n, cfg.workers, [&](std::size_t i) {
        Trace t = run_trace(model, g, derive_seed(cfg.seed, i));
        Row r{t.completed(), t.hypothesis, importance_weight(t, evidence).weight, {}};
        for (std::size_t j = 0; j < t.outputs.size(); ++j) {
          if (j) r.printed += ",";
          r.printed += t.outputs[j].to_string();
        }
        return r;
      });
      std::map<double, std::size_t> hyp;
      std::map<std::string, std::size_t> printed;
      std::map<double, double> hyp_w;
      std::map<std::string, double> printed_w;
      double total_w = 0.0;
      for (const auto& r : rows) {
        if (!r.accepted) continue;
        ++hyp[r.h];
        hyp_w[r.h] += r.w;
        total_w += r.w;
        if (!r.printed.empty()) {
          ++printed[r.printed];
          printed_w[r.printed] += r.w;
        }
      }
      Json hj = Json::array();
      for (const auto& [v, c] : hyp) hj.push_back(Json::array({v, c}));
      Json pj = Json::object();
      for (const auto& [v, c] : printed) pj[v] = c;
      results["hypothesis_histogram"] = hj;
      results["printed_histogram"] = pj;
      // Self-normalized importance weights: posterior mass given the evidence.
      Json hpost = Json::array();
      Json ppost = Json::object();
      if (total_w > 0.0) {
        for (const auto& [v, w] : hyp_w) hpost.push_back(Json::array({v, w / total_w}));
        for (const auto& [v, w] : printed_w) ppost[v] = w / total_w;
      }
      results["hypothesis_posterior"] = hpost;
      results["printed_posterior"] = ppost;
      notes.push_back(
          "histograms count accepted guide draws; posteriors are self-normalized importance "
          "weights");
    }
  }

  void oracle() {
    if (cfg.model == "monkey") {
      const auto mc = monkey_config(cfg.model_opts);
      results["evidence"] = models::monkey_exact_evidence(mc);
      if (auto count = models::monkey_count_with_pattern(mc)) {
        results["strings_with_pattern"] = *count;
        results["strings_total"] = std::pow(static_cast<double>(mc.alphabet), mc.length);
      }
      notes.push_back("monkey evidence from the pattern-automaton dynamic program");
      return;
    }
    const ModelProgram model = make_model(cfg.model, cfg.model_opts);
    const auto pe = enumerate_paths(model, kOracleMaxPaths, kOracleMaxEvents);
    results["n_paths"] = pe.entries.size();
    const double ev = exact_evidence(pe);
    results["evidence"] = ev;
    if (ev > 0.0) {
      results["conditional_h"] = exact_conditional_expectation(pe);
    } else {
      results["conditional_h"] = nullptr;
      notes.push_back("evidence has probability zero; E(h|e) undefined");
    }
    if (cfg.guide_given) {
      const auto ex = exact_free_energy(pe, guide(cfg.guide));
      Json g;
      g["free_energy"] = ex.free_energy;
      g["kl"] = ex.kl;
      g["acceptance_rate"] = ex.acceptance_rate;
      g["expected_events"] = ex.expected_events;
      g["utility"] = exact_guide_utility(pe, guide(cfg.guide), UtilityConfig{cfg.k});
      results["guide"] = g;
    }
  }

  void bound() {
    const ModelProgram model = make_model(cfg.model, cfg.model_opts);
    const GuideProgram den = guide(cfg.guide);
    const GuideProgram num = cfg.guide_num.empty() ? den : guide(cfg.guide_num);
    const BoundMethod method =
        cfg.bound_method == "dkw" ? BoundMethod::Dkw : BoundMethod::DkwOrMinimum;
    results["evidence"] = bound_json(
        evidence_lower_bound(model, den, cfg.n, cfg.delta, cfg.seed, sampling(), method));
    notes.push_back("ratio_of_bounds_estimate is an estimate of E(h|e), not a bound");
    try {
      results["hypothesis"] = hypothesis_json(
          hypothesis_estimate(model, num, den, cfg.n, cfg.delta, cfg.seed, sampling(), method));
    } catch (const UndefinedRatioError& e) {
      results["hypothesis"] = hypothesis_json(e.partial());
      throw;
    }
  }

  void optimize() {
    const ModelProgram model = make_model(cfg.model, cfg.model_opts);
    const GuideFamily family = make_family(cfg.model, cfg.guide, cfg.model_opts, cfg.ceiling);
    SearchOptions so;
    so.n_per_eval = cfg.n_given ? cfg.n : SearchOptions{}.n_per_eval;
    so.sigma = cfg.sigma;
    so.epoch_length = cfg.epoch_length;
    so.sampling = sampling();
    const UtilityConfig ucfg{cfg.k};
    const auto report = optimize_guide(model, family, ucfg, cfg.budget, cfg.seed, so);

    results["best_utility"] = report.best_utility;
    results["best_std_error"] = report.best_std_error;
    results["best_score"] = report.best_score;
    results["evaluations"] = report.evaluations;
    results["restarts"] = report.restarts;
    Json trace = Json::array();
    double last = kInf;
    bool first = true;
    for (const auto& [it, u] : report.utility_trace) {
      if (first || u < last) trace.push_back(Json::array({it, u}));
      first = false;
      last = u;
    }
    results["utility_trace"] = trace;
    results["best_params"] = params_json(report.best_params);
    Json credit = Json::object();
    for (const auto& [key, v] : report.cell_credit) credit[key] = v;
    results["cell_credit"] = credit;
    if (cfg.model == "three_dice") {
      const auto pe = enumerate_paths(model, kOracleMaxPaths, kOracleMaxEvents);
      results["exact_utility"] =
          exact_guide_utility(pe, family.instantiate(report.best_params), ucfg);
    }
    notes.push_back("utility_trace lists the evaluations at which best_score improved");
    if (!cfg.params_out.empty()) {
      std::ofstream f(cfg.params_out);
      if (!f) throw InvalidArgumentError("cannot write " + cfg.params_out);
      f << dump_json(params_json(report.best_params)) << "\n";
    }
  }

  void trace() {
    const ModelProgram model = make_model(cfg.model, cfg.model_opts);
    const Trace t = run_trace(model, guide(cfg.guide), cfg.seed);
    results["status"] = std::string(to_string(t.status));
    if (t.status == RunStatus::RejectedCrash) {
      results["crash_cause"] = std::string(to_string(t.crash_cause));
      results["failure"] = t.failure;
    }
    results["seed"] = t.seed;
    Json choices = Json::array();
    for (const auto& c : t.choices) {
      Json j;
      j["index"] = c.index;
      j["label"] = c.label ? Json(std::string(c.label->name())) : Json(nullptr);
      j["prior"] = dist_json(c.prior);
      j["guide"] = dist_json(c.guide);
      j["chosen"] = value_json(c.chosen);
      j["log_prior"] = c.log_prior;
      j["log_guide"] = c.log_guide;
      choices.push_back(j);
    }
    results["choices"] = choices;
    Json extras = Json::array();
    for (const auto& e : t.extras) {
      Json j;
      j["index"] = e.index;
      j["after_choice"] = e.after_choice;
      j["guide"] = dist_json(e.guide_dist);
      j["chosen"] = value_json(e.chosen);
      j["log_guide"] = e.log_guide;
      j["log_model_conditional"] = optional_number(e.log_model_conditional);
      extras.push_back(j);
    }
    results["extras"] = extras;
    results["log_prior"] = t.log_prior();
    results["log_guide"] = t.log_guide();
    results["log_evidence"] = t.log_evidence;
    results["hypothesis"] = t.hypothesis;
    Json outputs = Json::array();
    for (const auto& v : t.outputs) outputs.push_back(value_json(v));
    results["outputs"] = outputs;
    results["events"] = t.events;
    Json fe = Json::array();
    for (const auto& ev : t.per_event_fe) {
      fe.push_back(Json::array({event_id(t, ev), ev.contribution}));
    }
    results["per_event_fe"] = fe;
    if (t.completed()) {
      results["one_run_free_energy"] = one_run_free_energy(t);
      results["importance_weight"] =
          importance_weight(t, [](const Trace& tr) { return std::exp(tr.log_evidence); }).weight;
    }
  }
};

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  CLI::App app{"Guided sampling, free-energy estimation and importance-sampling bounds", "vpi"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model, "three_dice | monkey | expr_induction");
    sub->add_option_function<std::string>(
        "--guide",
        [&](const std::string& g) {
          cfg.guide = g;
          cfg.guide_given = true;
        },
        "guide name (or family name for optimize)");
    sub->add_option_function<std::size_t>(
        "--n",
        [&](std::size_t n) {
          cfg.n = n;
          cfg.n_given = true;
        },
        "number of runs (runs per evaluation for optimize)");
    sub->add_option("--delta", cfg.delta, "confidence parameter for lower bounds");
    sub->add_option("--seed", cfg.seed, "root seed");
    sub->add_option_function<double>(
        "--ceiling", [&](double c) { cfg.ceiling = c; }, "free-energy ceiling in nats");
    sub->add_option("--k", cfg.k, "impatience constant (per runtime event)");
    sub->add_option("--workers", cfg.workers, "sampling threads");
    sub->add_option("--depth-cap", cfg.model_opts.depth_cap, "expression depth cap");
    sub->add_option("--alphabet", cfg.model_opts.alphabet, "monkey alphabet size");
    sub->add_option("--length", cfg.model_opts.length, "monkey string length");
    sub->add_option("--pattern", cfg.model_opts.pattern, "monkey pattern, letters a, b, ...");
    sub->add_option("--output", cfg.output, "write the JSON document here instead of stdout");
    sub->add_option("--params", cfg.params_path, "guide parameter file (JSON)");
  };

  auto* run = app.add_subcommand("run", "estimate the free energy of a guide");
  add_common(run);
  run->add_flag("--report-hypothesis-histogram", cfg.histogram,
                "add histograms of *h* and printed values over accepted runs");
  auto* oracle = app.add_subcommand("oracle", "exact quantities by enumeration");
  add_common(oracle);
  auto* bound = app.add_subcommand("bound", "lower bounds on evidence and hypothesis sums");
  add_common(bound);
  bound->add_option("--guide-num", cfg.guide_num, "guide for the numerator sum");
  bound->add_option("--bound-method", cfg.bound_method, "dkw or dkw_min (default)")
      ->check(CLI::IsMember({"dkw", "dkw_min"}));
  auto* optimize = app.add_subcommand("optimize", "search a guide family");
  add_common(optimize);
  optimize->add_option("--budget", cfg.budget, "utility evaluations");
  optimize->add_option("--sigma", cfg.sigma, "perturbation scale");
  optimize->add_option("--epoch-length", cfg.epoch_length, "evaluations per common seed set");
  optimize->add_option("--params-out", cfg.params_out, "write the best parameters here");
  auto* trace = app.add_subcommand("trace", "dump one trace");
  add_common(trace);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "vpi: " << e.what() << "\n";
    return 2;
  }
  for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
  if (cfg.command == "optimize" && !cfg.guide_given) cfg.guide = "tabular";

  Session session{cfg};
  int code = 0;
  try {
    if (cfg.n == 0) throw InvalidArgumentError("--n must be >= 1");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw InvalidArgumentError("--delta must lie in (0, 1)");
    if (cfg.command == "run") session.run();
    if (cfg.command == "oracle") session.oracle();
    if (cfg.command == "bound") session.bound();
    if (cfg.command == "optimize") session.optimize();
    if (cfg.command == "trace") session.trace();
  } catch (const UnknownNameError& e) {
    err << "vpi: " << e.what() << "\n";
    session.results["error"] = error_json(e);
    code = 2;
  } catch (const Error& e) {
    session.results["error"] = error_json(e);
    code = 1;
  }

  Json doc;
  doc["command"] = cfg.command;
  doc["config"] = config_json(cfg);
  doc["results"] = session.results;
  doc["stderr_notes"] = session.notes;
  const std::string text = dump_json(doc) + "\n";
  if (cfg.output.empty()) {
    out << text;
  } else {
    std::ofstream f(cfg.output);
    if (!f) {
      err << "vpi: cannot write " << cfg.output << "\n";
      return 1;
    }
    f << text;
  }
  return code;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace vpi
