#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "unitele/bridge/protocol.hpp"
#include "unitele/core/scenario.hpp"
#include "unitele/harness/trial.hpp"

namespace unitele::bridge {

struct BridgeOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8793;  // 0 picks a free port
  double state_rate_hz = 60.0;
  double heartbeat_period_s = 1.0;
  double heartbeat_timeout_s = 5.0;  // a client silent this long is closed
  double realtime_factor = 1.0;      // 0 runs as fast as possible
  /// Consume exactly one operator input per tick, waiting for it. The trial ends when the
  /// operator disconnects with nothing left in the queue. Used to replay recorded sessions.
  bool lockstep = false;
  double disconnect_decay_s = 0.25;
  std::optional<double> pause_after_disconnect_s;
  double displacement_stiffness_n_per_m = 300.0;
  double displacement_stiffness_nm_per_rad = 20.0;
  std::size_t input_queue_limit = 1024;
  /// The scripted operator drives whenever no client holds the operator seat.
  bool autopilot = false;
  int send_buffer_bytes = 0;  // SO_SNDBUF on accepted sockets, 0 keeps the system default
  bool keep_rows = false;
};

struct BridgeStats {
  std::uint64_t ticks = 0;
  std::uint64_t inputs_applied = 0;
  std::uint64_t stale_inputs = 0;
  std::uint64_t malformed_frames = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_dropped = 0;  // state frames skipped while a write was pending
  std::uint64_t connections = 0;
  // wall-clock tick period while paced
  double tick_period_mean_s = 0.0;
  double tick_period_std_s = 0.0;
  double tick_period_max_s = 0.0;
  double tick_period_p99_s = 0.0;  // over the last 60 000 ticks
  /// Robust spread of the tick period, 1.4826 * MAD / nominal period, over the same window.
  double tick_jitter = 0.0;
  bool operator_connected = false;
  bool paused = false;
  bool finished = false;
};

/// Runs one trial on a simulation thread and serves it over WebSocket.
/// The first client to connect holds the operator seat; later clients observe.
class BridgeServer {
 public:
  BridgeServer(const ScenarioConfig& cfg, int condition, std::uint64_t seed, harness::OperatorKind kind,
               BridgeOptions opt = {});
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  /// Binds the listening socket and starts the network and simulation threads.
  void start();
  unsigned short port() const;
  /// Blocks until the trial ends.
  void wait();
  void stop();
  BridgeStats stats() const;
  /// Available once the trial has ended or the server was stopped.
  std::optional<harness::TrialRecord> record() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Blocking WebSocket client for tests and scripted sessions.
class BridgeClient {
 public:
  /// `receive_buffer_bytes` sets SO_RCVBUF before connecting; 0 keeps the default.
  BridgeClient(const std::string& host, unsigned short port, int receive_buffer_bytes = 0);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  void send(const ClientMessage& m);
  void send_raw(std::string_view frame);
  ServerMessage read();
  std::string read_raw();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace unitele::bridge
