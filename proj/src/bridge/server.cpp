#include "unitele/bridge/server.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <sys/prctl.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "unitele/core/angles.hpp"

namespace unitele::bridge {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;
using harness::OperatorInput;

namespace {

class Session;

struct QueuedInput {
  InputMessage msg;
  std::uint64_t received_tick = 0;
};

struct Welford {
  std::uint64_t n = 0;
  double mean = 0.0, m2 = 0.0, max = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
    max = std::max(max, x);
  }
  double std() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

// Recent wall-clock tick periods for quantiles.
class PeriodWindow {
 public:
  void add(double x) {
    if (v_.size() < kCap) v_.push_back(x);
    else v_[next_++ % kCap] = x;
  }
  double quantile(double q) const {
    if (v_.empty()) return 0.0;
    std::vector<double> s = v_;
    const auto k = static_cast<std::ptrdiff_t>(q * static_cast<double>(s.size() - 1));
    std::nth_element(s.begin(), s.begin() + k, s.end());
    return s[static_cast<std::size_t>(k)];
  }
  double mad() const {
    if (v_.empty()) return 0.0;
    const double med = quantile(0.5);
    std::vector<double> d;
    d.reserve(v_.size());
    for (double x : v_) d.push_back(std::abs(x - med));
    const auto k = static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), d.begin() + k, d.end());
    return d[static_cast<std::size_t>(k)];
  }

 private:
  static constexpr std::size_t kCap = 60000;
  std::vector<double> v_;
  std::size_t next_ = 0;
};

std::chrono::nanoseconds seconds(double s) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(s));
}

}  // namespace

struct BridgeServer::Impl {
  Impl(const ScenarioConfig& cfg, int condition, std::uint64_t seed, harness::OperatorKind kind, BridgeOptions o)
      : opt(std::move(o)),
        scenario(harness::prepare_scenario(cfg, seed)),
        sim(harness::Simulation::from_scenario(scenario, condition)),
        recorder(sim, kind, opt.keep_rows),
        acceptor(ioc) {
    if (opt.autopilot)
      autopilot.emplace(kind, scenario.operator_model, harness::operator_context(scenario), seed,
                        scenario.sim.timeout_s);
    const OccupancyGrid& g = sim.world().state().grid;
    grid_header.full = true;
    grid_header.width = g.width();
    grid_header.height = g.height();
    grid_header.resolution = g.resolution();
    grid_header.origin_x = g.origin().x;
    grid_header.origin_y = g.origin().y;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.cell_class(i) == CellClass::Known) {
        const CellIndex c = g.unflat(i);
        grid_header.cells.push_back(GridCell{c.col, c.row, cell_class_char(CellClass::Known)});
      }
    publish(InputAck{});
  }

  // ---- options and simulation (the simulation is touched only by the sim thread once started)
  BridgeOptions opt;
  ScenarioConfig scenario;
  harness::Simulation sim;
  harness::TrialRecorder recorder;
  std::optional<harness::OperatorModel> autopilot;

  // ---- shared with the network thread
  mutable std::mutex slot_m;
  StateMessage slot;
  Welford period;
  PeriodWindow recent_periods;
  double nominal_period_s = 0.0;

  mutable std::mutex log_m;
  GridUpdate grid_header;
  std::vector<GridCell> grid_log;
  std::vector<std::string> notes;

  mutable std::mutex q_m;
  std::condition_variable q_cv;
  std::deque<QueuedInput> queue;
  bool operator_present = false;
  bool ever_connected = false;

  std::atomic<bool> stopping{false};
  std::atomic<std::uint64_t> tick{0};
  std::atomic<std::uint64_t> inputs_applied{0}, stale{0}, malformed{0}, frames_sent{0}, frames_dropped{0},
      connections{0};
  std::atomic<bool> paused{false};

  mutable std::mutex done_m;
  std::condition_variable done_cv;
  bool done = false;
  std::optional<harness::TrialRecord> record;
  std::exception_ptr error;

  // ---- network
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
  unsigned short bound_port = 0;
  std::thread io_thread, sim_thread;
  bool started = false;
  std::vector<std::weak_ptr<Session>> sessions;  // network thread only

  bool claim_seat() {
    std::lock_guard lk(q_m);
    ever_connected = true;
    if (operator_present) return false;
    operator_present = true;
    q_cv.notify_all();
    return true;
  }
  void release_seat() {
    std::lock_guard lk(q_m);
    operator_present = false;
    q_cv.notify_all();
  }
  bool push_input(const InputMessage& m) {
    std::lock_guard lk(q_m);
    if (queue.size() >= opt.input_queue_limit) return false;
    queue.push_back(QueuedInput{m, tick.load()});
    q_cv.notify_all();
    return true;
  }

  StateMessage snapshot() const {
    std::lock_guard lk(slot_m);
    return slot;
  }

  void publish(const InputAck& ack) {
    const harness::TickRow& row = sim.last_row();
    StateMessage m;
    m.tick = row.tick;
    m.time = row.time;
    m.mode = modes::mode_name(row.mode);
    m.phi = row.phi;
    m.leader_phase = control::leader_phase_name(row.leader_phase);
    m.outcome = harness::outcome_name(sim.outcome());
    m.base = row.base;
    m.leader_position = row.leader_pose.position;
    m.leader_rpy = row.leader_pose.rpy;
    m.displacement = row.leader_pose.x() - sim.leader_home_pose().x();
    m.boundary = control::boundary_zone_name(row.zone);
    for (int i = 0; i < 7; ++i) m.q_fra[i] = row.q_fra[i];
    m.cue = row.cue;
    if (const auto p = sim.marker()) m.object = (sim.world().arm_base_in_world() * p->homogeneous()).head<3>();
    m.input = ack;
    std::lock_guard lk(slot_m);
    slot = std::move(m);
  }

  Wrench6 displacement_wrench(const Vector6& d) const {
    const Pose6& pose = sim.last_row().leader_pose;
    const Pose6& home = sim.leader_home_pose();
    Wrench6 w;
    w.force = opt.displacement_stiffness_n_per_m * (home.position + d.head<3>() - pose.position);
    for (int i = 0; i < 3; ++i)
      w.torque[i] = opt.displacement_stiffness_nm_per_rad * angle_diff(home.rpy[i] + d[3 + i], pose.rpy[i]);
    return w;
  }

  void sim_loop();
  void run_sim_thread() {
    try {
      sim_loop();
    } catch (...) {
      error = std::current_exception();
    }
    auto rec = recorder.finish();
    {
      std::lock_guard lk(slot_m);
      slot.outcome = harness::outcome_name(sim.outcome());
    }
    std::lock_guard lk(done_m);
    record = std::move(rec);
    done = true;
    done_cv.notify_all();
  }

  void do_accept();
  void close_all();
};

void BridgeServer::Impl::sim_loop() {
  ::prctl(PR_SET_TIMERSLACK, 1UL, 0UL, 0UL, 0UL);  // the default 50 us slack is 5% of a tick
  const double dt = scenario.sim.dt_s;
  const bool paced = opt.realtime_factor > 0.0;
  const auto step_period = paced ? seconds(dt / opt.realtime_factor) : std::chrono::nanoseconds(0);
  nominal_period_s = paced ? dt / opt.realtime_factor : 0.0;
  auto next = Clock::now();
  Clock::time_point last_wall{};

  Wrench6 held;
  std::optional<Vector6> held_displacement;
  Wrench6 applied;
  Wrench6 decay_from;
  double vacated_at = -1.0;
  bool was_present = false;
  InputAck ack;
  std::size_t events_seen = 0;
  std::vector<QueuedInput> batch;

  while (!stopping && !sim.finished()) {
    if (paced) {
      std::this_thread::sleep_until(next);
      const auto now = Clock::now();
      next += step_period;
      if (now > next + 50 * step_period) next = now;  // resync after a pause instead of bursting
      if (last_wall != Clock::time_point{}) {
        std::lock_guard lk(slot_m);
        const double p = std::chrono::duration<double>(now - last_wall).count();
        period.add(p);
        recent_periods.add(p);
      }
      last_wall = now;
    }

    const double t = sim.last_row().time;
    batch.clear();
    bool present;
    {
      std::unique_lock lk(q_m);
      if (opt.lockstep) {
        q_cv.wait(lk, [&] { return stopping || !queue.empty() || (ever_connected && !operator_present); });
        if (stopping || queue.empty()) break;
        batch.push_back(queue.front());
        queue.pop_front();
      } else {
        if (opt.pause_after_disconnect_s && !operator_present && vacated_at >= 0.0 &&
            t - vacated_at >= *opt.pause_after_disconnect_s) {
          paused = true;
          q_cv.wait(lk, [&] { return stopping || operator_present; });
          paused = false;
          if (stopping) break;
          next = Clock::now();
          last_wall = {};
        }
        batch.assign(queue.begin(), queue.end());
        queue.clear();
      }
      present = operator_present || !batch.empty();
    }

    if (present && !was_present) {
      vacated_at = -1.0;
      held = Wrench6{};
      held_displacement.reset();
    } else if (!present && was_present) {
      vacated_at = t;
      decay_from = applied;
    }
    was_present = present;

    OperatorInput in;
    const std::uint64_t this_tick = sim.last_row().tick + 1;
    for (const auto& q : batch) {
      held = q.msg.wrench.value_or(Wrench6{});
      held_displacement = q.msg.displacement;
      in.grasp_key |= q.msg.keys.grasp;
      in.drop_key |= q.msg.keys.drop;
      in.override_key |= q.msg.keys.override_mode;
      ack = InputAck{q.msg.seq, q.received_tick, this_tick};
      ++inputs_applied;
    }

    const bool decaying = vacated_at >= 0.0 && t - vacated_at < opt.disconnect_decay_s;
    if (present)
      in.wrench = held_displacement ? displacement_wrench(*held_displacement) : held;
    else if (decaying)
      in.wrench = decay_from * (1.0 - (t - vacated_at) / opt.disconnect_decay_s);
    if (autopilot) {
      const OperatorInput a = autopilot->step(sim.observe(), dt);
      if (!present && !decaying) in = a;
    }
    applied = in.wrench;

    const harness::TickRow& row = sim.step(in);
    recorder.add(row, in);
    tick = row.tick;

    const auto& events = sim.events();
    const auto& discovered = sim.last_discovered();
    if (events.size() > events_seen || !discovered.empty()) {
      const OccupancyGrid& g = sim.world().state().grid;
      std::lock_guard lk(log_m);
      for (; events_seen < events.size(); ++events_seen) {
        const auto& e = events[events_seen];
        notes.push_back(e.detail.empty() ? e.kind : e.kind + ": " + e.detail);
      }
      for (const CellIndex& c : discovered) {
        const CellClass cls = g.cell_class(c);
        if (cls != CellClass::Free && cls != CellClass::Known)
          grid_log.push_back(GridCell{c.col, c.row, cell_class_char(cls)});
      }
    }
    publish(ack);
  }
}

// ---- sessions

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, BridgeServer::Impl& srv)
      : ws_(std::move(socket)),
        srv_(srv),
        state_timer_(ws_.get_executor()),
        heartbeat_timer_(ws_.get_executor()),
        retry_timer_(ws_.get_executor()) {}

  void run() {
    srv_.sessions.push_back(weak_from_this());
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Session::on_accept, shared_from_this()));
  }

  void shutdown() {
    if (closed_) return;
    closed_ = true;
    state_timer_.cancel();
    heartbeat_timer_.cancel();
    retry_timer_.cancel();
    if (operator_) srv_.release_seat();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).close();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    operator_ = srv_.claim_seat();
    ++srv_.connections;
    last_rx_ = Clock::now();
    do_read();
    arm_state_timer();
    arm_heartbeat_timer();
  }

  void do_read() { ws_.async_read(rbuf_, beast::bind_front_handler(&Session::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return shutdown();
    last_rx_ = Clock::now();
    const std::string frame = beast::buffers_to_string(rbuf_.data());
    rbuf_.consume(rbuf_.size());
    handle(frame);
    if (pending_) retry_push();
    else do_read();
  }

  void handle(const std::string& frame) {
    ClientMessage m;
    try {
      m = decode_client(frame);
    } catch (const DecodeError& e) {
      ++srv_.malformed;
      send_control(encode(e.reply()));
      return;
    }
    auto* in = std::get_if<InputMessage>(&m);
    if (!in) return;
    if (!operator_) {
      send_control(encode(ErrorMessage{"read_only", "observer connections cannot send input", 0}));
      return;
    }
    if (have_seq_ && in->seq <= last_seq_) {
      ++srv_.stale;
      return;
    }
    have_seq_ = true;
    last_seq_ = in->seq;
    if (!srv_.push_input(*in)) pending_ = *in;
  }

  // The queue is full: hold this input and stop reading until it fits.
  void retry_push() {
    retry_timer_.expires_after(std::chrono::milliseconds(1));
    retry_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      if (self->srv_.push_input(*self->pending_)) {
        self->pending_.reset();
        self->do_read();
      } else {
        self->retry_push();
      }
    });
  }

  void arm_state_timer() {
    state_timer_.expires_after(seconds(1.0 / srv_.opt.state_rate_hz));
    state_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      if (self->writing_) ++self->srv_.frames_dropped;
      else self->send_state();
      self->arm_state_timer();
    });
  }

  void arm_heartbeat_timer() {
    heartbeat_timer_.expires_after(seconds(srv_.opt.heartbeat_period_s));
    heartbeat_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      const double silent = std::chrono::duration<double>(Clock::now() - self->last_rx_).count();
      if (silent > self->srv_.opt.heartbeat_timeout_s) return self->shutdown();
      self->send_control(encode(Heartbeat{self->srv_.snapshot().time}));
      self->arm_heartbeat_timer();
    });
  }

  void send_state() {
    StateMessage m = srv_.snapshot();
    {
      std::lock_guard lk(srv_.log_m);
      if (!sent_full_) {
        m.grid = srv_.grid_header;
        sent_full_ = true;
      }
      m.grid.cells.insert(m.grid.cells.end(), srv_.grid_log.begin() + static_cast<std::ptrdiff_t>(grid_seen_),
                          srv_.grid_log.end());
      grid_seen_ = srv_.grid_log.size();
      m.notifications.assign(srv_.notes.begin() + static_cast<std::ptrdiff_t>(notes_seen_), srv_.notes.end());
      notes_seen_ = srv_.notes.size();
    }
    m.dropped_inputs = srv_.stale;
    m.observer = !operator_;
    write(encode(m));
  }

  void send_control(std::string frame) {
    if (control_.size() < 16) control_.push_back(std::move(frame));
    if (!writing_) flush();
  }

  void flush() {
    if (control_.empty()) return;
    std::string f = std::move(control_.front());
    control_.pop_front();
    write(std::move(f));
  }

  void write(std::string frame) {
    writing_ = true;
    out_ = std::move(frame);
    ws_.async_write(net::buffer(out_), beast::bind_front_handler(&Session::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) return shutdown();
    ++srv_.frames_sent;
    flush();
  }


  websocket::stream<beast::tcp_stream> ws_;
  BridgeServer::Impl& srv_;
  net::steady_timer state_timer_, heartbeat_timer_, retry_timer_;
  beast::flat_buffer rbuf_;
  std::deque<std::string> control_;
  std::string out_;
  bool writing_ = false;
  bool closed_ = false;
  bool operator_ = false;
  bool have_seq_ = false;
  std::uint64_t last_seq_ = 0;
  std::optional<InputMessage> pending_;
  bool sent_full_ = false;
  std::size_t grid_seen_ = 0;
  std::size_t notes_seen_ = 0;
  Clock::time_point last_rx_;
};

}  // namespace

void BridgeServer::Impl::close_all() {
  beast::error_code ignored;
  acceptor.close(ignored);
  for (auto& w : sessions)
    if (auto s = w.lock()) s->shutdown();
  sessions.clear();
}

void BridgeServer::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    if (opt.send_buffer_bytes > 0) socket.set_option(net::socket_base::send_buffer_size(opt.send_buffer_bytes), ec);
    std::make_shared<Session>(std::move(socket), *this)->run();
    do_accept();
  });
}

// ---- server

BridgeServer::BridgeServer(const ScenarioConfig& cfg, int condition, std::uint64_t seed,
                           harness::OperatorKind kind, BridgeOptions opt)
    : impl_(std::make_unique<Impl>(cfg, condition, seed, kind, std::move(opt))) {
  if (impl_->opt.state_rate_hz <= 0.0) throw std::invalid_argument("state_rate_hz must be positive");
  if (impl_->opt.heartbeat_period_s <= 0.0) throw std::invalid_argument("heartbeat_period_s must be positive");
  if (impl_->opt.realtime_factor < 0.0) throw std::invalid_argument("realtime_factor must be non-negative");
  if (impl_->opt.input_queue_limit == 0) throw std::invalid_argument("input_queue_limit must be positive");
}

BridgeServer::~BridgeServer() { stop(); }

void BridgeServer::start() {
  Impl& s = *impl_;
  if (s.started) return;
  const tcp::endpoint ep(net::ip::make_address(s.opt.address), s.opt.port);
  s.acceptor.open(ep.protocol());
  s.acceptor.set_option(net::socket_base::reuse_address(true));
  s.acceptor.bind(ep);
  s.acceptor.listen();
  s.bound_port = s.acceptor.local_endpoint().port();
  s.work.emplace(s.ioc.get_executor());
  s.do_accept();
  s.started = true;
  s.io_thread = std::thread([&s] { s.ioc.run(); });
  s.sim_thread = std::thread([&s] { s.run_sim_thread(); });
}

unsigned short BridgeServer::port() const { return impl_->bound_port; }

void BridgeServer::wait() {
  Impl& s = *impl_;
  std::unique_lock lk(s.done_m);
  s.done_cv.wait(lk, [&] { return s.done; });
  if (s.error) std::rethrow_exception(s.error);
}

void BridgeServer::stop() {
  Impl& s = *impl_;
  if (!s.started) return;
  {
    std::lock_guard lk(s.q_m);
    s.stopping = true;
    s.q_cv.notify_all();
  }
  if (s.sim_thread.joinable()) s.sim_thread.join();
  net::post(s.ioc, [&s] { s.close_all(); });
  s.work.reset();
  if (s.io_thread.joinable()) s.io_thread.join();
  s.started = false;
}

BridgeStats BridgeServer::stats() const {
  const Impl& s = *impl_;
  BridgeStats st;
  st.ticks = s.tick;
  st.inputs_applied = s.inputs_applied;
  st.stale_inputs = s.stale;
  st.malformed_frames = s.malformed;
  st.frames_sent = s.frames_sent;
  st.frames_dropped = s.frames_dropped;
  st.connections = s.connections;
  st.paused = s.paused;
  {
    std::lock_guard lk(s.slot_m);
    st.tick_period_mean_s = s.period.mean;
    st.tick_period_std_s = s.period.std();
    st.tick_period_max_s = s.period.max;
    st.tick_period_p99_s = s.recent_periods.quantile(0.99);
    if (s.nominal_period_s > 0.0) st.tick_jitter = 1.4826 * s.recent_periods.mad() / s.nominal_period_s;
  }
  {
    std::lock_guard lk(s.q_m);
    st.operator_connected = s.operator_present;
  }
  {
    std::lock_guard lk(s.done_m);
    st.finished = s.done;
  }
  return st;
}

std::optional<harness::TrialRecord> BridgeServer::record() const {
  std::lock_guard lk(impl_->done_m);
  return impl_->record;
}

// ---- client

struct BridgeClient::Impl {
  net::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};
  beast::flat_buffer buf;
};

BridgeClient::BridgeClient(const std::string& host, unsigned short port, int receive_buffer_bytes)
    : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->ioc);
  const auto results = resolver.resolve(host, std::to_string(port));
  auto& sock = impl_->ws.next_layer();
  const tcp::endpoint ep = *results.begin();
  sock.open(ep.protocol());
  if (receive_buffer_bytes > 0) sock.set_option(net::socket_base::receive_buffer_size(receive_buffer_bytes));
  sock.connect(ep);
  impl_->ws.handshake(host + ":" + std::to_string(port), "/");
  impl_->ws.text(true);
}

BridgeClient::~BridgeClient() {
  try {
    close();
  } catch (...) {
  }
}

void BridgeClient::send(const ClientMessage& m) { send_raw(encode(m)); }

void BridgeClient::send_raw(std::string_view frame) { impl_->ws.write(net::buffer(frame.data(), frame.size())); }

std::string BridgeClient::read_raw() {
  impl_->buf.consume(impl_->buf.size());
  impl_->ws.read(impl_->buf);
  return beast::buffers_to_string(impl_->buf.data());
}

ServerMessage BridgeClient::read() { return decode_server(read_raw()); }

void BridgeClient::close() {
  if (!impl_->ws.is_open()) return;
  beast::error_code ec;
  impl_->ws.close(websocket::close_code::normal, ec);
  // drain until the server acknowledges the close
  while (!ec) {
    impl_->buf.consume(impl_->buf.size());
    impl_->ws.read(impl_->buf, ec);
  }
}

}  // namespace unitele::bridge
