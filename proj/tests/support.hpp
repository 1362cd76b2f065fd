#pragma once

#include "rgbsde/config.hpp"

namespace testing_support {

/// Everything a solver call needs, built from a config document.
struct Problem {
  rgbsde::RunConfig cfg;
  rgbsde::ForwardBundle forward;
  rgbsde::DriverSpec driver;
  rgbsde::ObstacleData data;
};

inline Problem make_problem(const nlohmann::json& doc) {
  auto cfg = rgbsde::parse_config(doc);
  auto forward = rgbsde::simulate(cfg);
  auto driver = rgbsde::build_driver(cfg);
  auto data = rgbsde::materialize(rgbsde::build_obstacle(cfg), forward);
  return {std::move(cfg), std::move(forward), std::move(driver), std::move(data)};
}

inline Problem catalog_problem(const std::string& name) {
  return make_problem(nlohmann::json{{"problem", name}});
}

}  // namespace testing_support
