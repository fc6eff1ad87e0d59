#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "unitele/core/types.hpp"

namespace unitele::bridge {

inline constexpr int kProtocolVersion = 1;

struct GridCell {
  int col = 0;
  int row = 0;
  char cls = '#';
  bool operator==(const GridCell&) const = default;
};

/// Visible obstacles. The first frame a client gets is full; later frames carry only new cells.
struct GridUpdate {
  bool full = false;
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<GridCell> cells;
  bool operator==(const GridUpdate&) const = default;
};

/// Last operator input the simulation applied.
struct InputAck {
  std::uint64_t seq = 0;
  std::uint64_t received_tick = 0;
  std::uint64_t applied_tick = 0;
  bool operator==(const InputAck&) const = default;
};

struct StateMessage {
  std::uint64_t tick = 0;
  double time = 0.0;
  std::string mode;
  int phi = 0;
  std::string leader_phase;
  std::string outcome;
  Pose2D base;
  Vector3 leader_position = Vector3::Zero();
  Vector3 leader_rpy = Vector3::Zero();
  double displacement = 0.0;  // leader x offset from home, d
  std::string boundary;       // deadzone, active or beyond
  std::array<double, 7> q_fra{};
  Wrench6 cue;
  std::optional<Vector3> object;  // world frame, only while the marker is visible
  GridUpdate grid;
  std::vector<std::string> notifications;
  InputAck input;
  std::uint64_t dropped_inputs = 0;
  bool observer = false;  // this connection is read-only
  bool operator==(const StateMessage&) const = default;
};

struct Keys {
  bool grasp = false;
  bool drop = false;  // [o]
  bool override_mode = false;
  bool operator==(const Keys&) const = default;
};

/// Leader command from a client: a wrench, or a pose displacement the server turns into one.
struct InputMessage {
  std::uint64_t seq = 0;
  std::optional<Wrench6> wrench;
  std::optional<Vector6> displacement;  // x y z roll pitch yaw, from the leader home pose
  Keys keys;
  bool operator==(const InputMessage&) const = default;
};

struct Heartbeat {
  double time = 0.0;
  bool operator==(const Heartbeat&) const = default;
};

struct ErrorMessage {
  std::string code;  // malformed, version, schema
  std::string message;
  std::uint64_t offset = 0;
  int supported_version = kProtocolVersion;
  bool operator==(const ErrorMessage&) const = default;
};

using ClientMessage = std::variant<InputMessage, Heartbeat>;
using ServerMessage = std::variant<StateMessage, Heartbeat, ErrorMessage>;

class DecodeError : public std::runtime_error {
 public:
  enum class Kind { Malformed, Version, Schema };
  DecodeError(Kind kind, std::uint64_t offset, const std::string& what)
      : std::runtime_error(what), kind_(kind), offset_(offset) {}
  Kind kind() const { return kind_; }
  /// Byte offset into the frame where decoding failed; 0 for version and schema errors.
  std::uint64_t offset() const { return offset_; }
  ErrorMessage reply() const;

 private:
  Kind kind_;
  std::uint64_t offset_;
};

std::string encode(const StateMessage& m);
std::string encode(const InputMessage& m);
std::string encode(const Heartbeat& m);
std::string encode(const ErrorMessage& m);
std::string encode(const ClientMessage& m);
std::string encode(const ServerMessage& m);

/// Throws DecodeError.
ClientMessage decode_client(std::string_view frame);
ServerMessage decode_server(std::string_view frame);

}  // namespace unitele::bridge
