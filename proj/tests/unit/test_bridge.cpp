#include <doctest.h>

#include <chrono>
#include <random>
#include <thread>

#include "unitele/bridge/protocol.hpp"
#include "unitele/bridge/server.hpp"
#include "unitele/harness/trial.hpp"

using namespace unitele;
using namespace unitele::bridge;
using namespace std::chrono_literals;

namespace {

ScenarioConfig default_scenario() { return load_scenario(std::string(UNITELE_DATA_DIR) + "/scenarios/default.json"); }

BridgeOptions local_options() {
  BridgeOptions o;
  o.port = 0;
  return o;
}

template <class Pred>
bool eventually(Pred p, std::chrono::milliseconds timeout = 5000ms) {
  const auto end = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < end) {
    if (p()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return p();
}

// Reads frames until a state message arrives.
StateMessage next_state(BridgeClient& c) {
  for (;;) {
    ServerMessage m = c.read();
    if (auto* s = std::get_if<StateMessage>(&m)) return *s;
  }
}

ErrorMessage next_error(BridgeClient& c) {
  for (;;) {
    ServerMessage m = c.read();
    if (auto* e = std::get_if<ErrorMessage>(&m)) return *e;
  }
}

InputMessage wrench_input(std::uint64_t seq, double fx) {
  InputMessage m;
  m.seq = seq;
  Wrench6 w;
  w.force.x() = fx;
  m.wrench = w;
  return m;
}

class RandomMessages {
 public:
  explicit RandomMessages(std::uint64_t seed) : rng_(seed) {}

  double num() {
    switch (pick(4)) {
      case 0: return 0.0;
      case 1: return std::uniform_real_distribution<double>(-1, 1)(rng_);
      case 2: return std::normal_distribution<double>(0, 1e6)(rng_);
      default: return std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng_), pick(200) - 100);
    }
  }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool coin() { return pick(2) == 1; }
  std::string text() {
    static const std::string alphabet = "abcXYZ _:-\"\\/\n\t09\xc3\xa9";
    std::string s;
    for (int i = pick(12); i > 0; --i) s += alphabet[static_cast<std::size_t>(pick(static_cast<int>(alphabet.size()) - 2))];
    if (coin()) s += "\xc3\xa9";
    return s;
  }
  Vector3 v3() { return Vector3(num(), num(), num()); }
  Wrench6 wrench() { return Wrench6{v3(), v3()}; }
  std::uint64_t u64() { return std::uniform_int_distribution<std::uint64_t>()(rng_); }

  StateMessage state() {
    StateMessage m;
    m.tick = u64();
    m.time = num();
    m.mode = text();
    m.phi = pick(2);
    m.leader_phase = text();
    m.outcome = text();
    m.base = Pose2D{num(), num(), num()};
    m.leader_position = v3();
    m.leader_rpy = v3();
    m.displacement = num();
    m.boundary = text();
    for (auto& q : m.q_fra) q = num();
    m.cue = wrench();
    if (coin()) m.object = v3();
    m.grid.full = coin();
    if (m.grid.full) {
      m.grid.width = pick(500);
      m.grid.height = pick(500);
      m.grid.resolution = num();
      m.grid.origin_x = num();
      m.grid.origin_y = num();
    }
    for (int i = pick(20); i > 0; --i) m.grid.cells.push_back(GridCell{pick(500), pick(500), "#su"[pick(3)]});
    for (int i = pick(4); i > 0; --i) m.notifications.push_back(text());
    m.input = InputAck{u64(), u64(), u64()};
    m.dropped_inputs = u64();
    m.observer = coin();
    return m;
  }

  InputMessage input() {
    InputMessage m;
    m.seq = u64();
    switch (pick(3)) {
      case 0: m.wrench = wrench(); break;
      case 1: m.displacement = (Vector6() << num(), num(), num(), num(), num(), num()).finished(); break;
      default: break;
    }
    m.keys = Keys{coin(), coin(), coin()};
    return m;
  }

  ErrorMessage error() { return ErrorMessage{text(), text(), u64(), pick(5)}; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

TEST_CASE("codec: round trip of 1000 random messages") {
  RandomMessages gen(7);
  for (int i = 0; i < 1000; ++i) {
    switch (i % 4) {
      case 0: {
        const ServerMessage m = gen.state();
        CHECK(decode_server(encode(m)) == m);
        break;
      }
      case 1: {
        const ClientMessage m = gen.input();
        CHECK(decode_client(encode(m)) == m);
        break;
      }
      case 2: {
        const Heartbeat h{gen.num()};
        CHECK(decode_client(encode(ClientMessage{h})) == ClientMessage{h});
        CHECK(decode_server(encode(ServerMessage{h})) == ServerMessage{h});
        break;
      }
      default: {
        const ServerMessage m = gen.error();
        CHECK(decode_server(encode(m)) == m);
      }
    }
  }
}

TEST_CASE("codec: encoding is canonical") {
  RandomMessages gen(3);
  const StateMessage s = gen.state();
  const std::string a = encode(s);
  CHECK(encode(std::get<StateMessage>(decode_server(a))) == a);
  CHECK(a.find("\"schema_version\":1") != std::string::npos);
}

TEST_CASE("codec: truncated frame reports the byte offset") {
  const std::string full = encode(wrench_input(42, 3.5));
  for (std::size_t cut : {std::size_t{1}, full.size() / 3, full.size() / 2, full.size() - 1}) {
    try {
      decode_client(std::string_view(full).substr(0, cut));
      FAIL("decode accepted a truncated frame");
    } catch (const DecodeError& e) {
      CHECK(e.kind() == DecodeError::Kind::Malformed);
      CHECK(e.offset() <= cut);
      CHECK(e.offset() + 1 >= cut);
      CHECK(e.reply().code == "malformed");
      CHECK(e.reply().offset == e.offset());
    }
  }
}

TEST_CASE("codec: garbage points at the offending byte") {
  try {
    decode_client(R"({"type": ?})");
    FAIL("decode accepted garbage");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == DecodeError::Kind::Malformed);
    CHECK(e.offset() == 9);
  }
}

TEST_CASE("codec: version mismatch is rejected with an explicit reply") {
  std::string frame = encode(wrench_input(1, 0.0));
  const auto pos = frame.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  frame.replace(pos, 18, "\"schema_version\":2");
  try {
    decode_client(frame);
    FAIL("decode accepted schema_version 2");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == DecodeError::Kind::Version);
    const ErrorMessage r = e.reply();
    CHECK(r.code == "version");
    CHECK(r.supported_version == kProtocolVersion);
  }
}

TEST_CASE("codec: schema errors name the field") {
  CHECK_THROWS_WITH_AS(decode_client(R"({"schema_version":1,"type":"input","keys":{}})"), doctest::Contains("seq"),
                       DecodeError);
  CHECK_THROWS_WITH_AS(decode_client(R"({"schema_version":1,"type":"state"})"), doctest::Contains("state"),
                       DecodeError);
  CHECK_THROWS_AS(decode_client(R"([1,2])"), DecodeError);
  InputMessage both = wrench_input(1, 1.0);
  both.displacement = Vector6::Zero();
  CHECK_THROWS_AS(decode_client(encode(both)), DecodeError);
}

TEST_CASE("server: advances with no client connected") {
  BridgeServer srv(default_scenario(), 2, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  CHECK(eventually([&] { return srv.stats().ticks > 50; }));
  const auto a = srv.stats().ticks;
  CHECK(eventually([&] { return srv.stats().ticks > a + 50; }));
  srv.stop();
  const auto rec = srv.record();
  REQUIRE(rec);
  CHECK(rec->summary.outcome == harness::Outcome::Running);
  for (const auto& in : rec->inputs) CHECK(in.wrench.is_zero());
}

TEST_CASE("server: first frame carries the full grid, later frames deltas") {
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  BridgeClient c("127.0.0.1", srv.port());
  const StateMessage first = next_state(c);
  CHECK(first.grid.full);
  CHECK(first.grid.width > 0);
  CHECK_FALSE(first.grid.cells.empty());
  CHECK_FALSE(first.observer);
  CHECK(first.mode == "navigation");
  const StateMessage second = next_state(c);
  CHECK_FALSE(second.grid.full);
  CHECK(second.grid.cells.size() < first.grid.cells.size());
  CHECK(second.tick >= first.tick);
  c.close();
  srv.stop();
}

TEST_CASE("server: stale sequence numbers are dropped and counted") {
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  BridgeClient c("127.0.0.1", srv.port());
  c.send(wrench_input(5, 1.0));
  c.send(wrench_input(3, 2.0));
  c.send(wrench_input(5, 3.0));
  c.send(wrench_input(6, 4.0));
  CHECK(eventually([&] { return srv.stats().inputs_applied == 2; }));
  CHECK(srv.stats().stale_inputs == 2);
  StateMessage s = next_state(c);
  while (s.input.seq != 6) s = next_state(c);
  CHECK(s.dropped_inputs == 2);
  c.close();
  srv.stop();
  const auto rec = srv.record();
  REQUIRE(rec);
  bool saw3 = false;
  for (const auto& in : rec->inputs) saw3 |= in.wrench.force.x() == 2.0 || in.wrench.force.x() == 3.0;
  CHECK_FALSE(saw3);
}

TEST_CASE("server: input at tick t is applied by tick t + 2") {
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  BridgeClient c("127.0.0.1", srv.port());
  next_state(c);
  for (std::uint64_t seq = 1; seq <= 20; ++seq) {
    c.send(wrench_input(seq, static_cast<double>(seq)));
    StateMessage s = next_state(c);
    while (s.input.seq != seq) s = next_state(c);
    CHECK(s.input.applied_tick > s.input.received_tick);
    CHECK(s.input.applied_tick <= s.input.received_tick + 2);
    CHECK(s.tick >= s.input.applied_tick);
  }
  c.close();
  srv.stop();
  const auto rec = srv.record();
  REQUIRE(rec);
  bool applied = false;
  for (const auto& in : rec->inputs) applied |= in.wrench.force.x() == 20.0;
  CHECK(applied);
}

TEST_CASE("server: additional connections are read-only observers") {
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  BridgeClient op("127.0.0.1", srv.port());
  CHECK_FALSE(next_state(op).observer);
  BridgeClient obs("127.0.0.1", srv.port());
  CHECK(next_state(obs).observer);
  obs.send(wrench_input(1, 9.0));
  CHECK(next_error(obs).code == "read_only");
  CHECK(srv.stats().inputs_applied == 0);
  CHECK(srv.stats().connections == 2);
  obs.close();
  op.close();
  srv.stop();
}

TEST_CASE("server: malformed and version-mismatched frames get a connection-scoped reply") {
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  BridgeClient c("127.0.0.1", srv.port());
  const std::string full = encode(wrench_input(1, 1.0));
  c.send_raw(std::string_view(full).substr(0, 20));
  const ErrorMessage e = next_error(c);
  CHECK(e.code == "malformed");
  CHECK(e.offset <= 20);
  CHECK(e.offset >= 19);

  std::string v2 = full;
  v2.replace(v2.find("\"schema_version\":1"), 18, "\"schema_version\":7");
  c.send_raw(v2);
  const ErrorMessage ev = next_error(c);
  CHECK(ev.code == "version");
  CHECK(ev.supported_version == kProtocolVersion);

  c.send(wrench_input(2, 1.0));
  StateMessage s = next_state(c);
  while (s.input.seq != 2) s = next_state(c);
  CHECK(srv.stats().malformed_frames == 2);
  c.close();
  srv.stop();
}

TEST_CASE("server: heartbeats flow to the client") {
  BridgeOptions o = local_options();
  o.heartbeat_period_s = 0.05;
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, o);
  srv.start();
  BridgeClient c("127.0.0.1", srv.port());
  c.send(Heartbeat{0.0});
  bool got = false;
  for (int i = 0; i < 200 && !got; ++i) got = std::holds_alternative<Heartbeat>(c.read());
  CHECK(got);
  c.close();
  srv.stop();
}

TEST_CASE("server: operator disconnect decays the wrench to zero, then pauses") {
  BridgeOptions o = local_options();
  o.pause_after_disconnect_s = 0.5;
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, o);
  srv.start();
  {
    BridgeClient c("127.0.0.1", srv.port());
    c.send(wrench_input(1, 8.0));
    StateMessage s = next_state(c);
    while (s.input.seq != 1) s = next_state(c);
    std::this_thread::sleep_for(100ms);
    c.close();
  }
  CHECK(eventually([&] { return srv.stats().paused; }, 3000ms));
  const auto t = srv.stats().ticks;
  std::this_thread::sleep_for(100ms);
  CHECK(srv.stats().ticks == t);
  srv.stop();

  const auto rec = srv.record();
  REQUIRE(rec);
  const auto& in = rec->inputs;
  std::size_t last_full = 0;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i].wrench.force.x() == 8.0) last_full = i;
  REQUIRE(last_full > 0);
  std::size_t zero_at = in.size();
  for (std::size_t i = last_full + 1; i < in.size(); ++i) {
    CHECK(in[i].wrench.force.x() <= in[i - 1].wrench.force.x());
    if (in[i].wrench.is_zero()) {
      zero_at = i;
      break;
    }
  }
  REQUIRE(zero_at < in.size());
  const std::size_t decay_ticks = zero_at - last_full;
  CHECK(decay_ticks >= 240);
  CHECK(decay_ticks <= 252);
  const double mid = in[last_full + decay_ticks / 2].wrench.force.x();
  CHECK(mid == doctest::Approx(4.0).epsilon(0.05));
  for (std::size_t i = zero_at; i < in.size(); ++i) CHECK(in[i].wrench.is_zero());
  // paused about 0.5 s of sim time after the disconnect
  CHECK(in.size() - last_full < 700);
}

TEST_CASE("server: displacement commands become a spring wrench") {
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, local_options());
  srv.start();
  BridgeClient c("127.0.0.1", srv.port());
  InputMessage m;
  m.seq = 1;
  m.displacement = (Vector6() << 0.1, 0, 0, 0, 0, 0).finished();
  c.send(m);
  StateMessage s = next_state(c);
  while (s.input.seq != 1) s = next_state(c);
  c.close();
  srv.stop();
  const auto rec = srv.record();
  REQUIRE(rec);
  bool pushed = false;
  for (const auto& in : rec->inputs) pushed |= in.wrench.force.x() > 5.0;
  CHECK(pushed);
}

TEST_CASE("server: a scripted client replay matches direct injection bit for bit") {
  const ScenarioConfig cfg = default_scenario();
  harness::TrialOptions to;
  to.keep_inputs = true;
  const auto direct = harness::run_trial(cfg, 1, 4, to);
  std::vector<harness::OperatorInput> inputs(direct.inputs.begin(),
                                             direct.inputs.begin() + std::min<std::size_t>(direct.inputs.size(), 20000));
  const auto reference = harness::replay_trial(cfg, 1, 4, harness::OperatorKind::Compliant, inputs);

  BridgeOptions o = local_options();
  o.lockstep = true;
  o.realtime_factor = 0.0;
  BridgeServer srv(cfg, 1, 4, harness::OperatorKind::Compliant, o);
  srv.start();
  {
    BridgeClient c("127.0.0.1", srv.port());
    std::uint64_t seq = 0;
    for (const auto& in : inputs) {
      InputMessage m;
      m.seq = ++seq;
      m.wrench = in.wrench;
      m.keys = Keys{in.grasp_key, in.drop_key, in.override_key};
      c.send(m);
    }
    c.close();
  }
  srv.wait();
  const auto rec = srv.record();
  REQUIRE(rec);
  CHECK(rec->summary.ticks == reference.summary.ticks);
  CHECK(rec->inputs == inputs);
  CHECK(rec->summary.record_hash == reference.summary.record_hash);
}

namespace {

BridgeStats paced_run(bool slow_client) {
  BridgeOptions o = local_options();
  o.send_buffer_bytes = 4096;
  BridgeServer srv(default_scenario(), 1, 1, harness::OperatorKind::Compliant, o);
  srv.start();
  std::unique_ptr<BridgeClient> slow;
  if (slow_client) slow = std::make_unique<BridgeClient>("127.0.0.1", srv.port(), 4096);
  std::this_thread::sleep_for(2500ms);
  const BridgeStats st = srv.stats();
  srv.stop();
  MESSAGE(std::string(slow_client ? "slow client" : "no client") << ": tick period mean " << st.tick_period_mean_s
                                                      << " s, std " << st.tick_period_std_s << " s, p99 "
                                                      << st.tick_period_p99_s << " s, jitter " << st.tick_jitter
                                                      << ", frames sent " << st.frames_sent << ", dropped "
                                                      << st.frames_dropped);
  return st;
}

}  // namespace

TEST_CASE("server: a slow client does not disturb the tick rate") {
  const double dt = 0.001;
  paced_run(false);  // baseline for the log
  const BridgeStats slow = paced_run(true);
  CHECK(slow.frames_dropped > 0);
  CHECK(slow.tick_period_mean_s == doctest::Approx(dt).epsilon(0.02));
  CHECK(slow.tick_jitter < 0.1);
}
