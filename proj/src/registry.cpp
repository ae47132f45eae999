#include "vpi/registry.hpp"

#include <algorithm>

#include "vpi/error.hpp"

namespace vpi {
namespace {

[[noreturn]] void unknown(const std::string& what, const std::string& name,
                          const std::vector<std::string>& known) {
  std::string msg = "unknown " + what + " '" + name + "'; expected one of:";
  for (const auto& k : known) msg += " " + k;
  throw UnknownNameError(msg);
}

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

std::vector<std::string> model_names() { return {"three_dice", "monkey", "expr_induction"}; }

std::vector<std::string> guide_names(const std::string& model) {
  if (model == "three_dice") {
    return {"prior", "prior_reject", "paper_perfect", "h_perfect", "tabular", "point_mass"};
  }
  if (model == "monkey") return {"prior", "prior_reject", "extra_position", "tabular"};
  if (model == "expr_induction") return {"prior", "prior_reject", "tabular"};
  unknown("model", model, model_names());
}

models::MonkeyConfig monkey_config(const ModelOptions& opts) {
  models::MonkeyConfig cfg;
  if (opts.length < 1) throw InvalidArgumentError("length must be >= 1");
  cfg.alphabet = opts.alphabet;
  cfg.length = opts.length;
  cfg.pattern = models::parse_pattern(opts.pattern, opts.alphabet);
  return cfg;
}

ModelProgram make_model(const std::string& model, const ModelOptions& opts) {
  if (model == "three_dice") return models::three_dice;
  if (model == "monkey") return models::monkey_model(monkey_config(opts));
  if (model == "expr_induction") return models::expr_induction_model(opts.depth_cap);
  unknown("model", model, model_names());
}

bool model_is_enumerable(const std::string& model) {
  return model == "three_dice" || model == "expr_induction";
}

GuideFamily make_family(const std::string& model, const std::string& family,
                        const ModelOptions& opts, std::optional<double> ceiling) {
  const auto names = guide_names(model);
  if (family != "tabular" && family != "point_mass") {
    unknown("guide family", family, {"tabular", "point_mass"});
  }
  if (!contains(names, family)) unknown("guide", family, names);
  const double c = ceiling.value_or(500.0);
  if (model == "three_dice") {
    return models::dice_family(
        family == "point_mass" ? FamilyKind::PointMass : FamilyKind::Softmax, 0.01, c);
  }
  if (model == "monkey") return models::monkey_family(monkey_config(opts), 0.01, c);
  return models::expr_family(opts.depth_cap, 0.01, c);
}

GuideProgram make_guide(const std::string& model, const std::string& guide,
                        const ModelOptions& opts, std::optional<double> ceiling,
                        const GuideParams* params) {
  const auto names = guide_names(model);
  if (!contains(names, guide)) unknown("guide", guide, names);

  GuideProgram g;
  if (guide == "prior") {
    g = GuideProgram::prior();
  } else if (guide == "prior_reject") {
    g = GuideProgram::prior(500.0);
  } else if (guide == "paper_perfect") {
    g = models::dice_perfect_guide();
  } else if (guide == "h_perfect") {
    g = models::dice_hypothesis_guide();
  } else if (guide == "extra_position") {
    g = models::monkey_position_guide(monkey_config(opts));
  } else {
    const GuideFamily family = make_family(model, guide, opts, ceiling);
    g = family.instantiate(params ? *params : family.initial_params());
  }
  if (ceiling) g.ceiling = ceiling;
  return g;
}

}  // namespace vpi
