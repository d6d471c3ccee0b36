#include "bflow/network_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "bflow/error.hpp"
#include "json_io.hpp"

namespace bflow {

namespace detail {

namespace {

json samples_to_json(const std::vector<std::array<double, 2>>& s) {
  json out = json::array();
  for (const auto& [v, p] : s) out.push_back({v, p});
  return out;
}

std::vector<std::array<double, 2>> samples_from_json(const json& j, const char* key) {
  const auto raw = field<std::vector<std::vector<double>>>(j, key);
  std::vector<std::array<double, 2>> out;
  for (const auto& row : raw) {
    if (row.size() != 2) {
      throw Error(ErrorCode::schema, std::string("law table '") + key + "' rows must be [v, p]");
    }
    out.push_back({row[0], row[1]});
  }
  return out;
}

}  // namespace

json law_to_json(const BistableLaw& law) {
  json j;
  if (const auto* t = std::get_if<TrilinearParams>(&law.spec())) {
    j["type"] = "trilinear";
    j["v_max"] = t->v_max;
    j["p_max"] = t->p_max;
    j["v_min"] = t->v_min;
    j["p_min"] = t->p_min;
    j["slope0"] = t->slope0;
    j["slope1"] = t->slope1;
  } else {
    const auto& table = std::get<LawTable>(law.spec());
    j["type"] = "table";
    j["branch0"] = samples_to_json(table.branch0);
    j["spinodal"] = samples_to_json(table.spinodal);
    j["branch1"] = samples_to_json(table.branch1);
  }
  return j;
}

BistableLaw law_from_json(const json& j) {
  const auto type = field<std::string>(j, "type");
  if (type == "trilinear") {
    TrilinearParams q;
    q.v_max = field_or(j, "v_max", q.v_max);
    q.p_max = field_or(j, "p_max", q.p_max);
    q.v_min = field_or(j, "v_min", q.v_min);
    q.p_min = field_or(j, "p_min", q.p_min);
    q.slope0 = field_or(j, "slope0", q.slope0);
    q.slope1 = field_or(j, "slope1", q.slope1);
    return BistableLaw::trilinear(q);
  }
  if (type == "table") {
    LawTable t;
    t.branch0 = samples_from_json(j, "branch0");
    t.spinodal = samples_from_json(j, "spinodal");
    t.branch1 = samples_from_json(j, "branch1");
    return BistableLaw::tabulated(std::move(t));
  }
  throw Error(ErrorCode::schema, "unknown law type '" + type + "'");
}

json network_to_json(const FlowNetwork& net, const BistableLaw& law) {
  json j;
  j["n"] = net.size();
  json nodes = json::array();
  for (int i = 0; i < net.size(); ++i) {
    json node;
    node["id"] = i;
    node["role"] = std::string(to_string(net.role(i)));
    if (net.has_positions()) {
      node["x"] = net.positions()[i].x;
      node["y"] = net.positions()[i].y;
    }
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);
  json tubes = json::array();
  for (const Tube& t : net.tubes()) {
    json tube;
    tube["i"] = t.i;
    tube["j"] = t.j;
    tube["conductance"] = t.conductance;
    tubes.push_back(std::move(tube));
  }
  j["tubes"] = std::move(tubes);
  j["law"] = law_to_json(law);
  return j;
}

FlowNetwork network_from_json(const json& j) {
  const int n = field<int>(j, "n");
  if (n < 1) throw Error(ErrorCode::schema, "'n' must be positive");
  std::vector<NodeRole> roles(n, NodeRole::hidden);
  std::vector<Point2> positions;
  if (j.contains("nodes")) {
    const json& nodes = j.at("nodes");
    if (!nodes.is_array()) throw Error(ErrorCode::schema, "'nodes' must be an array");
    bool any_position = false;
    std::vector<Point2> pos(n);
    std::vector<bool> seen(n, false);
    for (const json& node : nodes) {
      const int id = field<int>(node, "id");
      if (id < 0 || id >= n) throw Error(ErrorCode::schema, "node id out of range");
      if (seen[id]) throw Error(ErrorCode::schema, "duplicate node id " + std::to_string(id));
      seen[id] = true;
      roles[id] = node_role_from_string(field_or<std::string>(node, "role", "hidden"));
      if (node.contains("x") || node.contains("y")) {
        any_position = true;
        pos[id] = {field<double>(node, "x"), field<double>(node, "y")};
      }
    }
    if (any_position) positions = std::move(pos);
  }
  if (!j.contains("tubes") || !j.at("tubes").is_array()) {
    throw Error(ErrorCode::schema, "missing array 'tubes'");
  }
  // Merge both directions of an edge; a mismatch is an asymmetric document.
  std::map<std::pair<int, int>, std::pair<double, bool>> edges;
  for (const json& t : j.at("tubes")) {
    const int a = field<int>(t, "i");
    const int b = field<int>(t, "j");
    const double c = field<double>(t, "conductance");
    if (a < 0 || b < 0 || a >= n || b >= n) throw Error(ErrorCode::schema, "tube endpoint out of range");
    if (c < 0.0) {
      throw Error(ErrorCode::negative_conductance,
                  "tube " + std::to_string(a) + "-" + std::to_string(b));
    }
    const bool forward = a < b;
    const auto key = forward ? std::pair{a, b} : std::pair{b, a};
    auto [it, inserted] = edges.try_emplace(key, c, forward);
    if (!inserted) {
      if (it->second.second == forward) {
        throw Error(ErrorCode::validation, "parallel tubes between " + std::to_string(key.first) +
                                               " and " + std::to_string(key.second));
      }
      if (it->second.first != c) {
        throw Error(ErrorCode::asymmetric, "C_" + std::to_string(a) + std::to_string(b) +
                                               " differs from C_" + std::to_string(b) +
                                               std::to_string(a));
      }
    }
  }
  std::vector<Tube> tubes;
  for (const auto& [key, value] : edges) tubes.push_back({key.first, key.second, value.first});
  return FlowNetwork(n, std::move(tubes), std::move(roles), std::move(positions));
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::schema, std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace detail

std::string serialize_network(const FlowNetwork& net, const BistableLaw& law) {
  return detail::network_to_json(net, law).dump(2) + "\n";
}

NetworkDocument deserialize_network(std::string_view text) {
  const auto j = detail::parse_json(text, "network document");
  FlowNetwork net = detail::network_from_json(j);
  BistableLaw law = j.contains("law") ? detail::law_from_json(j.at("law")) : BistableLaw{};
  return {std::move(net), std::move(law)};
}

std::string serialize_law(const BistableLaw& law) { return detail::law_to_json(law).dump(2) + "\n"; }

BistableLaw deserialize_law(std::string_view text) {
  const auto j = detail::parse_json(text, "law document");
  return detail::law_from_json(j.contains("law") ? j.at("law") : j);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

NetworkDocument load_network(const std::filesystem::path& path) {
  return deserialize_network(read_text_file(path));
}

void save_network(const std::filesystem::path& path, const FlowNetwork& net,
                  const BistableLaw& law) {
  write_text_file(path, serialize_network(net, law));
}

BistableLaw load_law(const std::filesystem::path& path) { return deserialize_law(read_text_file(path)); }

}  // namespace bflow
