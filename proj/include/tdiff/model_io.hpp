#pragma once

#include <string>

#include <json.hpp>

#include "tdiff/models.hpp"

namespace tdiff {

using json = nlohmann::json;

json to_json(const Vec& v);
json to_json(const Mat& m);
Vec vec_from_json(const json& j);
/// Accepts a nested array, or a scalar for the 1x1 case.
Mat mat_from_json(const json& j);

/// Process-parametrization record with keys family, mu, A, Sigma, alpha, psi, sigma, M, weights.
json model_to_json(const DiffusionModel& model);
/// For p = 1 the shorthands "alpha": a (A = [[a]]) and "sigma": s (Sigma = [[s^2]]) are accepted.
DiffusionModel model_from_json(const json& j);
DiffusionModel load_model(const std::string& path);

/// Stationary-law record; concentrations are stored under "K".
json law_to_json(const StationaryLaw& law);
StationaryLaw law_from_json(const json& j);

}  // namespace tdiff
