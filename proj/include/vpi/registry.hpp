#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vpi/guide_opt.hpp"
#include "vpi/models.hpp"
#include "vpi/trace.hpp"

namespace vpi {

/// Model parameters settable from the command line.
struct ModelOptions {
  int depth_cap = 3;
  int alphabet = 2;
  int length = 12;
  std::string pattern = "aba";
};

std::vector<std::string> model_names();
std::vector<std::string> guide_names(const std::string& model);

/// Throws UnknownNameError.
ModelProgram make_model(const std::string& model, const ModelOptions& opts);

/// True for models the enumeration oracle can handle.
bool model_is_enumerable(const std::string& model);

/// Named guide for a model. `ceiling` overrides the guide's own ceiling;
/// `params` feeds the tabular/point_mass families (defaults: initial params).
/// Throws UnknownNameError.
GuideProgram make_guide(const std::string& model, const std::string& guide,
                        const ModelOptions& opts, std::optional<double> ceiling = std::nullopt,
                        const GuideParams* params = nullptr);

/// Searchable family ("tabular" or "point_mass"). Throws UnknownNameError.
GuideFamily make_family(const std::string& model, const std::string& family,
                        const ModelOptions& opts, std::optional<double> ceiling = std::nullopt);

models::MonkeyConfig monkey_config(const ModelOptions& opts);

}  // namespace vpi
