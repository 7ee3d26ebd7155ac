#include "declqr/serialization.hpp"

#include <fstream>
#include <sstream>

#include "declqr/errors.hpp"

namespace declqr {

namespace {

Json node_to_json(const NodeSet& s) {
  Json out = Json::array();
  for (int i : s) out.push_back(i + 1);
  return out;
}

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad field '") + key + "': " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ValidationError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) {
      const Json& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw ValidationError("matrix entries must be numbers");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

Json graph_to_json(const DirectedDelayGraph& g) {
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back({{"from", e.from + 1}, {"to", e.to + 1}, {"delay", e.delay}});
  return {{"p", g.size()}, {"edges", edges}};
}

DirectedDelayGraph graph_from_json(const Json& j) {
  const int p = get_field<int>(j, "p");
  std::vector<DelayEdge> edges;
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw ValidationError("'edges' must be an array");
    for (const auto& e : j["edges"]) {
      edges.push_back({get_field<int>(e, "from") - 1, get_field<int>(e, "to") - 1, get_field<int>(e, "delay")});
    }
  }
  return DirectedDelayGraph(p, std::move(edges));
}

Json infograph_to_json(const InfoGraph& ig, const DelayMatrix& d) {
  Json nodes = Json::array();
  for (std::size_t r = 0; r < ig.size(); ++r) {
    const int ri = static_cast<int>(r);
    Json node = {{"set", node_to_json(ig.node(ri))},
                 {"parent", node_to_json(ig.node(ig.parent(ri)))},
                 {"root", ig.is_root(ri)},
                 {"leaf", ig.is_leaf(ri)}};
    if (ig.is_leaf(ri)) node["noise_source"] = ig.leaf_source(ri) + 1;
    nodes.push_back(std::move(node));
  }
  Json delays = Json::array();
  for (int i = 0; i < d.size(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < d.size(); ++k) {
      if (d.reachable(i, k)) {
        row.push_back(d(i, k));
      } else {
        row.push_back(nullptr);
      }
    }
    delays.push_back(std::move(row));
  }
  return {{"p", d.size()}, {"d_max", max_delay(d)}, {"delays", delays}, {"nodes", nodes}};
}

Json system_to_json(const SystemModel& model, const DirectedDelayGraph& g) {
  return {{"graph", graph_to_json(g)},
          {"partition", {{"state_dims", model.partition.state.dims()}, {"input_dims", model.partition.input.dims()}}},
          {"A", matrix_to_json(model.A)},
          {"B", matrix_to_json(model.B)},
          {"Q", matrix_to_json(model.Q)},
          {"R", matrix_to_json(model.R)},
          {"sigma_w", model.sigma_w}};
}

LoadedSystem system_from_json(const Json& j) {
  LoadedSystem out;
  if (!j.contains("graph")) throw ValidationError("system file lacks 'graph'");
  out.graph = graph_from_json(j["graph"]);
  if (!j.contains("partition")) throw ValidationError("system file lacks 'partition'");
  out.model.partition = Partition(get_field<std::vector<int>>(j["partition"], "state_dims"),
                                  get_field<std::vector<int>>(j["partition"], "input_dims"));
  for (const char* key : {"A", "B", "Q", "R"}) {
    if (!j.contains(key)) throw ValidationError(std::string("system file lacks '") + key + "'");
  }
  out.model.A = matrix_from_json(j["A"]);
  out.model.B = matrix_from_json(j["B"]);
  out.model.Q = matrix_from_json(j["Q"]);
  out.model.R = matrix_from_json(j["R"]);
  out.model.sigma_w = get_field<double>(j, "sigma_w");
  if (out.model.partition.p() != out.graph.size()) throw ShapeMismatch("partition and graph disagree on p");
  out.model.check_shapes();
  return out;
}

Json gains_to_json(const GainSet& gains, const InfoGraph& ig) {
  Json nodes = Json::array();
  for (std::size_t r = 0; r < ig.size(); ++r) {
    nodes.push_back({{"set", node_to_json(ig.node(static_cast<int>(r)))},
                     {"K", matrix_to_json(gains.nodes[r].K)},
                     {"P", matrix_to_json(gains.nodes[r].P)}});
  }
  return {{"kind", to_string(gains.kind)}, {"nodes", nodes}};
}

Json estimate_to_json(const Estimate& est) {
  return {{"lambda", est.lambda}, {"A_hat", matrix_to_json(est.A_hat)}, {"B_hat", matrix_to_json(est.B_hat)}};
}

Json bound_report_to_json(const BoundReport& rep) {
  Json entries = Json::object();
  for (const auto& e : rep.entries) {
    Json item = {{"rhs", e.rhs}};
    item["measured"] = e.measured ? Json(*e.measured) : Json(nullptr);
    item["stderr"] = e.stderr_ ? Json(*e.stderr_) : Json(nullptr);
    item["holds"] = to_string(e.holds);
    entries[e.name] = std::move(item);
  }
  return {{"eps", rep.eps}, {"bounds", entries}};
}

BoundReport bound_report_from_json(const Json& j) {
  BoundReport rep;
  rep.eps = get_field<double>(j, "eps");
  if (!j.contains("bounds") || !j["bounds"].is_object()) throw ValidationError("bound report lacks 'bounds'");
  for (const auto& [name, item] : j["bounds"].items()) {
    BoundEntry e;
    e.name = name;
    e.rhs = get_field<double>(item, "rhs");
    if (item.contains("measured") && !item["measured"].is_null()) e.measured = item["measured"].get<double>();
    if (item.contains("stderr") && !item["stderr"].is_null()) e.stderr_ = item["stderr"].get<double>();
    const auto verdict = get_field<std::string>(item, "holds");
    bool known = false;
    for (auto v : {Verdict::kHolds, Verdict::kViolated, Verdict::kNotApplicable, Verdict::kUnmeasured}) {
      if (to_string(v) == verdict) {
        e.holds = v;
        known = true;
      }
    }
    if (!known) throw ValidationError("unknown verdict '" + verdict + "'");
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

std::string trajectory_csv(const Trajectory& traj) {
  const auto n = traj.x.rows();
  const auto m = traj.u.rows();
  const int horizon = traj.horizon();
  std::ostringstream os;
  os << "# declqr trajectory v1\n";
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",u_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",w_" << i;
  os << "\n";
  for (int t = 0; t <= horizon; ++t) {
    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << "," << fmt(traj.x(i, t));
    for (Eigen::Index i = 0; i < m; ++i) os << "," << (t < horizon ? fmt(traj.u(i, t)) : "");
    for (Eigen::Index i = 0; i < n; ++i) os << "," << (t < horizon ? fmt(traj.w(i, t)) : "");
    os << "\n";
  }
  return os.str();
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

}  // namespace declqr
