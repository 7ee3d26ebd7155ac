#pragma once

// JSON and CSV formats. Files use 1-based subsystem ids.

#include <string>

#include <json.hpp>

#include "declqr/bounds.hpp"
#include "declqr/controllers.hpp"
#include "declqr/sysid.hpp"

namespace declqr {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Matrix& m);
// Throws ValidationError on ragged or non-numeric input.
Matrix matrix_from_json(const Json& j);

Json graph_to_json(const DirectedDelayGraph& g);
DirectedDelayGraph graph_from_json(const Json& j);

Json infograph_to_json(const InfoGraph& ig, const DelayMatrix& d);

// {"graph", "partition": {"state_dims", "input_dims"}, "A", "B", "Q", "R", "sigma_w"}
Json system_to_json(const SystemModel& model, const DirectedDelayGraph& g);
struct LoadedSystem {
  SystemModel model;
  DirectedDelayGraph graph;
};
LoadedSystem system_from_json(const Json& j);

Json gains_to_json(const GainSet& gains, const InfoGraph& ig);
Json estimate_to_json(const Estimate& est);

Json bound_report_to_json(const BoundReport& rep);
BoundReport bound_report_from_json(const Json& j);

// Header comment line, then t, x_1..x_n, u_1..u_m, w_1..w_n. The final row
// carries x(T) with empty u and w.
std::string trajectory_csv(const Trajectory& traj);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace declqr
