#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include <json.hpp>

#include "ciftree/censoring.hpp"
#include "ciftree/data.hpp"
#include "ciftree/forest.hpp"
#include "ciftree/nuisance.hpp"
#include "ciftree/simulation.hpp"
#include "ciftree/tree.hpp"

namespace ciftree {

using json = nlohmann::json;

json to_json(const TimeGrid& grid);
TimeGrid time_grid_from_json(const json& j);

json to_json(const TreeModel& tree);
TreeModel tree_from_json(const json& j);

json to_json(const ForestModel& forest);
ForestModel forest_from_json(const json& j);

/// Marginal and tree censoring models.
json to_json(const CensoringModel& model);
std::unique_ptr<CensoringModel> censoring_from_json(const json& j);

json to_json(const FineGrayParams& params);
/// Missing keys keep their defaults.
FineGrayParams fg_params_from_json(const json& j);

json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const json& j);

/// Parse errors become ParseError, structural problems SchemaError.
json read_json(std::istream& in);
json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

/// Long format: row,cause,time,value.
void write_curves_csv(std::ostream& out, const Matrix& values, const TimeGrid& grid, int cause,
                      const std::string& value_column);

struct CurveTable {
  std::vector<double> times;
  Matrix values;  // rows x times
};

/// Reads a long-format curve CSV for one cause; rows must be complete.
CurveTable read_curves_csv(std::istream& in, int cause, const std::string& value_column);

}  // namespace ciftree
