#include "unitele/bridge/protocol.hpp"

#include <json.hpp>

namespace unitele::bridge {

using nlohmann::json;

ErrorMessage DecodeError::reply() const {
  ErrorMessage e;
  switch (kind_) {
    case Kind::Malformed: e.code = "malformed"; break;
    case Kind::Version: e.code = "version"; break;
    case Kind::Schema: e.code = "schema"; break;
  }
  e.message = what();
  e.offset = offset_;
  return e;
}

namespace {

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json wrench_json(const Wrench6& w) { return json{{"force", vec(w.force)}, {"torque", vec(w.torque)}}; }

json header(const char* type) { return json{{"type", type}, {"schema_version", kProtocolVersion}}; }

// Field access that reports schema errors by name.
const json& at(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DecodeError(DecodeError::Kind::Schema, 0, std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return at(j, key).get<T>();
  } catch (const json::exception&) {
    throw DecodeError(DecodeError::Kind::Schema, 0, std::string("field '") + key + "' has the wrong type");
  }
}

template <int N>
Eigen::Matrix<double, N, 1> get_vec(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  if (v.size() != N)
    throw DecodeError(DecodeError::Kind::Schema, 0,
                      std::string("field '") + key + "' needs " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

Wrench6 get_wrench(const json& j) {
  Wrench6 w;
  w.force = get_vec<3>(j, "force");
  w.torque = get_vec<3>(j, "torque");
  return w;
}

json parse_frame(std::string_view frame, std::string& type) {
  json j;
  try {
    j = json::parse(frame.begin(), frame.end());
  } catch (const json::parse_error& e) {
    const std::uint64_t offset = e.byte > 0 ? std::min<std::uint64_t>(e.byte - 1, frame.size()) : 0;
    throw DecodeError(DecodeError::Kind::Malformed, offset,
                      "malformed frame at byte " + std::to_string(offset) + ": " + e.what());
  }
  if (!j.is_object()) throw DecodeError(DecodeError::Kind::Schema, 0, "frame is not an object");
  const int version = get<int>(j, "schema_version");
  if (version != kProtocolVersion)
    throw DecodeError(DecodeError::Kind::Version, 0,
                      "schema_version " + std::to_string(version) + " is not supported, expected " +
                          std::to_string(kProtocolVersion));
  type = get<std::string>(j, "type");
  return j;
}

Heartbeat heartbeat_from(const json& j) { return Heartbeat{get<double>(j, "time")}; }

InputMessage input_from(const json& j) {
  InputMessage m;
  m.seq = get<std::uint64_t>(j, "seq");
  if (j.contains("wrench")) m.wrench = get_wrench(at(j, "wrench"));
  if (j.contains("displacement")) m.displacement = get_vec<6>(j, "displacement");
  if (m.wrench && m.displacement)
    throw DecodeError(DecodeError::Kind::Schema, 0, "input carries both a wrench and a displacement");
  const json& k = at(j, "keys");
  m.keys.grasp = get<bool>(k, "grasp");
  m.keys.drop = get<bool>(k, "drop");
  m.keys.override_mode = get<bool>(k, "override");
  return m;
}

StateMessage state_from(const json& j) {
  StateMessage m;
  m.tick = get<std::uint64_t>(j, "tick");
  m.time = get<double>(j, "time");
  m.mode = get<std::string>(j, "mode");
  m.phi = get<int>(j, "phi");
  m.leader_phase = get<std::string>(j, "leader_phase");
  m.outcome = get<std::string>(j, "outcome");
  const auto b = get_vec<3>(j, "base");
  m.base = Pose2D{b[0], b[1], b[2]};
  const json& l = at(j, "leader");
  m.leader_position = get_vec<3>(l, "position");
  m.leader_rpy = get_vec<3>(l, "rpy");
  m.displacement = get<double>(l, "d");
  m.boundary = get<std::string>(l, "boundary");
  const auto q = get_vec<7>(j, "q_fra");
  for (int i = 0; i < 7; ++i) m.q_fra[i] = q[i];
  m.cue = get_wrench(at(j, "cue"));
  if (j.contains("object") && !j["object"].is_null()) m.object = get_vec<3>(j, "object");
  const json& g = at(j, "grid");
  m.grid.full = get<bool>(g, "full");
  if (m.grid.full) {
    m.grid.width = get<int>(g, "width");
    m.grid.height = get<int>(g, "height");
    m.grid.resolution = get<double>(g, "resolution");
    const auto o = get_vec<2>(g, "origin");
    m.grid.origin_x = o[0];
    m.grid.origin_y = o[1];
  }
  for (const auto& c : at(g, "cells")) {
    if (!c.is_array() || c.size() != 3 || !c[2].is_string() || c[2].get<std::string>().size() != 1)
      throw DecodeError(DecodeError::Kind::Schema, 0, "grid cells are [col, row, class]");
    m.grid.cells.push_back(GridCell{c[0].get<int>(), c[1].get<int>(), c[2].get<std::string>()[0]});
  }
  m.notifications = get<std::vector<std::string>>(j, "notifications");
  const json& in = at(j, "input");
  m.input.seq = get<std::uint64_t>(in, "seq");
  m.input.received_tick = get<std::uint64_t>(in, "received_tick");
  m.input.applied_tick = get<std::uint64_t>(in, "applied_tick");
  m.dropped_inputs = get<std::uint64_t>(j, "dropped_inputs");
  m.observer = get<bool>(j, "observer");
  return m;
}

ErrorMessage error_from(const json& j) {
  ErrorMessage e;
  e.code = get<std::string>(j, "code");
  e.message = get<std::string>(j, "message");
  e.offset = get<std::uint64_t>(j, "offset");
  e.supported_version = get<int>(j, "supported_version");
  return e;
}

}  // namespace

std::string encode(const StateMessage& m) {
  json j = header("state");
  j["tick"] = m.tick;
  j["time"] = m.time;
  j["mode"] = m.mode;
  j["phi"] = m.phi;
  j["leader_phase"] = m.leader_phase;
  j["outcome"] = m.outcome;
  j["base"] = {m.base.x, m.base.y, m.base.gamma};
  j["leader"] = {{"position", vec(m.leader_position)},
                 {"rpy", vec(m.leader_rpy)},
                 {"d", m.displacement},
                 {"boundary", m.boundary}};
  j["q_fra"] = m.q_fra;
  j["cue"] = wrench_json(m.cue);
  j["object"] = m.object ? vec(*m.object) : json(nullptr);
  json g{{"full", m.grid.full}};
  if (m.grid.full) {
    g["width"] = m.grid.width;
    g["height"] = m.grid.height;
    g["resolution"] = m.grid.resolution;
    g["origin"] = {m.grid.origin_x, m.grid.origin_y};
  }
  json cells = json::array();
  for (const auto& c : m.grid.cells) cells.push_back({c.col, c.row, std::string(1, c.cls)});
  g["cells"] = std::move(cells);
  j["grid"] = std::move(g);
  j["notifications"] = m.notifications;
  j["input"] = {{"seq", m.input.seq}, {"received_tick", m.input.received_tick}, {"applied_tick", m.input.applied_tick}};
  j["dropped_inputs"] = m.dropped_inputs;
  j["observer"] = m.observer;
  return j.dump();
}

std::string encode(const InputMessage& m) {
  json j = header("input");
  j["seq"] = m.seq;
  if (m.wrench) j["wrench"] = wrench_json(*m.wrench);
  if (m.displacement) j["displacement"] = vec(*m.displacement);
  j["keys"] = {{"grasp", m.keys.grasp}, {"drop", m.keys.drop}, {"override", m.keys.override_mode}};
  return j.dump();
}

std::string encode(const Heartbeat& m) {
  json j = header("heartbeat");
  j["time"] = m.time;
  return j.dump();
}

std::string encode(const ErrorMessage& m) {
  json j = header("error");
  j["code"] = m.code;
  j["message"] = m.message;
  j["offset"] = m.offset;
  j["supported_version"] = m.supported_version;
  return j.dump();
}

std::string encode(const ClientMessage& m) {
  return std::visit([](const auto& x) { return encode(x); }, m);
}

std::string encode(const ServerMessage& m) {
  return std::visit([](const auto& x) { return encode(x); }, m);
}

ClientMessage decode_client(std::string_view frame) {
  std::string type;
  const json j = parse_frame(frame, type);
  if (type == "input") return input_from(j);
  if (type == "heartbeat") return heartbeat_from(j);
  throw DecodeError(DecodeError::Kind::Schema, 0, "unexpected client message type '" + type + "'");
}

ServerMessage decode_server(std::string_view frame) {
  std::string type;
  const json j = parse_frame(frame, type);
  if (type == "state") return state_from(j);
  if (type == "heartbeat") return heartbeat_from(j);
  if (type == "error") return error_from(j);
  throw DecodeError(DecodeError::Kind::Schema, 0, "unexpected server message type '" + type + "'");
}

}  // namespace unitele::bridge
