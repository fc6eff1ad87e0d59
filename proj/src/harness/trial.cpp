#include "unitele/harness/trial.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "unitele/core/hash.hpp"

namespace unitele::harness {

using nlohmann::json;
using modes::Mode;

OperatorKind default_operator(int condition) {
  return condition == 3 ? OperatorKind::Distracted : OperatorKind::Compliant;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void hash_vec(Fnv1a& h, const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) h.value(v[i]);
}

void hash_row(Fnv1a& h, const TickRow& r) {
  h.value(r.tick);
  h.value(r.time);
  h.value(static_cast<int>(r.mode));
  h.value(r.phi);
  h.value(static_cast<int>(r.leader_phase));
  h.value(static_cast<int>(r.zone));
  hash_vec(h, r.leader_pose.position);
  hash_vec(h, r.leader_pose.rpy);
  h.value(r.base.x);
  h.value(r.base.y);
  h.value(r.base.gamma);
  h.value(r.base_cmd.v_x);
  h.value(r.base_cmd.v_gamma);
  hash_vec(h, r.q_lra);
  hash_vec(h, r.q_fra);
  hash_vec(h, r.cue.as_vector());
  hash_vec(h, r.operator_wrench.as_vector());
  h.value(r.lookahead.x);
  h.value(r.lookahead.y);
  h.value(r.lookahead.gamma);
  h.value(static_cast<int>(r.attached));
  h.value(static_cast<int>(r.in_collision));
  h.value(r.event_count);
}

void init_record(TrialRecord& rec, const ScenarioConfig& c, int condition, OperatorKind kind) {
  rec.scenario_text = serialize_scenario(c);
  rec.summary.scenario_hash = scenario_fingerprint(c);
  rec.summary.condition = condition;
  rec.summary.seed = c.seed;
  rec.summary.operator_kind = kind;
}

}  // namespace

OperatorContext operator_context(const ScenarioConfig& c) {
  OperatorContext ctx;
  ctx.kv_free = c.controller.kv_free;
  ctx.kv_obstacle = c.controller.kv_obstacle;
  ctx.kr = c.controller.kr;
  ctx.vb_i_m = c.controller.vb_i_m;
  ctx.vb_e_m = c.controller.vb_e_m;
  ctx.standoff_m = c.arm_mount.x_m + 0.5 * (c.sim.graspable.x_min_m + c.sim.graspable.x_max_m);
  return ctx;
}

ScenarioConfig prepare_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  ScenarioConfig c = cfg;
  c.seed = seed;
  c.map.path = std::filesystem::absolute(c.map.path).lexically_normal().string();
  if (!c.chain_path.empty()) c.chain_path = std::filesystem::absolute(c.chain_path).lexically_normal().string();
  return c;
}

TrialRecorder::TrialRecorder(const Simulation& sim, OperatorKind kind, bool keep_rows)
    : sim_(sim), keep_rows_(keep_rows) {
  init_record(rec_, sim.config(), sim.condition(), kind);
}

void TrialRecorder::add(const TickRow& r, const OperatorInput& input) {
  rec_.inputs.push_back(input);
  hash_row(h_, r);
  if (keep_rows_) rec_.rows.push_back(r);
  auto& s = rec_.summary;
  if (r.mode != Mode::Navigation && !r.base_cmd.is_zero()) ++s.unsafe_base_ticks;
  if (!r.cue.is_zero()) ++s.cue_ticks;

  if (r.mode == Mode::SwitchingToManipulation && prev_.mode != Mode::SwitchingToManipulation) homed_ = false;
  if (r.mode == Mode::SwitchingToManipulation && prev_.leader_phase == control::LeaderPhase::Home &&
      r.leader_phase == control::LeaderPhase::Free)
    homed_ = true;
  if (r.mode == Mode::Manipulation && prev_.mode == Mode::SwitchingToManipulation) {
    const double align = (prev_.q_lra - prev_.q_fra).cwiseAbs().maxCoeff();
    if (!homed_ || !(align < sim_.config().fsm.align_eps_rad)) s.handshake_ok = false;
  }
  if (r.mode != Mode::Navigation) left_navigation_ = true;

  const Point2 p(r.base.x, r.base.y);
  if (have_prev_) s.path_length_m += (p - Point2(prev_.base.x, prev_.base.y)).norm();
  if (r.tick % 10 == 0) {
    rec_.base_trace.push_back(p);
    if (!left_navigation_ && !sim_.plans().empty()) {
      const std::size_t epoch = sim_.plans().size() - 1;
      if (samples_.size() <= epoch) samples_.resize(epoch + 1);
      samples_[epoch].push_back(p);
    }
  }
  prev_ = r;
  have_prev_ = true;
}

TrialRecord TrialRecorder::finish() {
  auto& s = rec_.summary;
  rec_.events = sim_.events();
  rec_.plans = sim_.plans();
  for (const auto& e : rec_.events) {
    h_.value(e.tick);
    h_.text(e.kind);
    h_.text(e.detail);
  }
  s.record_hash = hex64(h_.digest());
  s.outcome = sim_.outcome();
  s.ticks = sim_.world().state().tick;
  s.total_time_s = sim_.world().state().time;
  s.nav_time_s = sim_.time_in(Mode::Navigation);
  s.manip_time_s = sim_.time_in(Mode::Manipulation) + sim_.time_in(Mode::PostGraspAuto);
  s.switch_time_s = sim_.time_in(Mode::SwitchingToManipulation) + sim_.time_in(Mode::SwitchingToNavigation);
  s.collisions = sim_.world().state().collisions.size();
  s.replans = sim_.plans().size() - 1;
  std::vector<Point2> offsets;
  for (std::size_t e = 0; e < samples_.size(); ++e) {
    if (samples_[e].empty()) continue;
    const auto o = path_frame_offsets(samples_[e], rec_.plans[e].waypoints);
    offsets.insert(offsets.end(), o.begin(), o.end());
  }
  s.deviation = mae_of(offsets);
  return std::move(rec_);
}

std::string scenario_fingerprint(const ScenarioConfig& cfg) {
  Fnv1a h;
  h.text(serialize_scenario(cfg));
  h.text(read_file(cfg.map.path));
  if (!cfg.chain_path.empty()) h.text(read_file(cfg.chain_path));
  return hex64(h.digest());
}

TrialRecord run_trial(const ScenarioConfig& cfg, int condition, std::uint64_t seed, const TrialOptions& opt) {
  const ScenarioConfig c = prepare_scenario(cfg, seed);
  const OperatorKind kind = opt.operator_kind.value_or(default_operator(condition));
  Simulation sim = Simulation::from_scenario(c, condition);
  OperatorModel op(kind, c.operator_model, operator_context(c), seed, c.sim.timeout_s);
  TrialRecorder recorder(sim, kind, opt.keep_rows);
  const double dt = c.sim.dt_s;
  while (!sim.finished()) {
    const OperatorInput in = op.step(sim.observe(), dt);
    recorder.add(sim.step(in), in);
  }
  TrialRecord rec = recorder.finish();
  if (!opt.keep_inputs) rec.inputs.clear();
  return rec;
}

TrialRecord replay_trial(const ScenarioConfig& cfg, int condition, std::uint64_t seed, OperatorKind kind,
                         const std::vector<OperatorInput>& inputs, bool keep_rows) {
  const ScenarioConfig c = prepare_scenario(cfg, seed);
  Simulation sim = Simulation::from_scenario(c, condition);
  TrialRecorder recorder(sim, kind, keep_rows);
  for (const auto& in : inputs) {
    if (sim.finished()) break;
    recorder.add(sim.step(in), in);
  }
  return recorder.finish();
}

// ---- files

namespace {

class CsvLine {
 public:
  CsvLine& num(double v) {
    sep();
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    s_.append(buf, r.ptr);
    return *this;
  }
  CsvLine& num(std::uint64_t v) {
    sep();
    s_ += std::to_string(v);
    return *this;
  }
  CsvLine& num(int v) {
    sep();
    s_ += std::to_string(v);
    return *this;
  }
  CsvLine& str(const std::string& v) {
    sep();
    s_ += '"';
    for (char ch : v) {
      if (ch == '"') s_ += '"';
      s_ += ch;
    }
    s_ += '"';
    return *this;
  }
  std::string done() {
    s_ += '\n';
    std::string out = std::move(s_);
    s_.clear();
    first_ = true;
    return out;
  }

 private:
  void sep() {
    if (!first_) s_ += ',';
    first_ = false;
  }
  std::string s_;
  bool first_ = true;
};

json summary_to_json(const TrialSummary& s) {
  return json{{"scenario_hash", s.scenario_hash},
              {"record_hash", s.record_hash},
              {"condition", s.condition},
              {"seed", s.seed},
              {"operator", operator_kind_name(s.operator_kind)},
              {"outcome", outcome_name(s.outcome)},
              {"ticks", s.ticks},
              {"mae_x_m", s.deviation.mae_x},
              {"mae_y_m", s.deviation.mae_y},
              {"deviation_samples", s.deviation.samples},
              {"nav_time_s", s.nav_time_s},
              {"manip_time_s", s.manip_time_s},
              {"switch_time_s", s.switch_time_s},
              {"total_time_s", s.total_time_s},
              {"path_length_m", s.path_length_m},
              {"collisions", s.collisions},
              {"replans", s.replans},
              {"unsafe_base_ticks", s.unsafe_base_ticks},
              {"handshake_ok", s.handshake_ok},
              {"cue_ticks", s.cue_ticks}};
}

Outcome parse_outcome(const std::string& s) {
  for (auto o : {Outcome::Running, Outcome::Completed, Outcome::Timeout, Outcome::CollisionAbort, Outcome::Fault})
    if (s == outcome_name(o)) return o;
  throw std::runtime_error("unknown outcome '" + s + "'");
}

TrialSummary summary_from_json(const json& j) {
  TrialSummary s;
  s.scenario_hash = j.at("scenario_hash").get<std::string>();
  s.record_hash = j.at("record_hash").get<std::string>();
  s.condition = j.at("condition").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.operator_kind = parse_operator_kind(j.at("operator").get<std::string>());
  s.outcome = parse_outcome(j.at("outcome").get<std::string>());
  s.ticks = j.at("ticks").get<std::uint64_t>();
  s.deviation.mae_x = j.at("mae_x_m").get<double>();
  s.deviation.mae_y = j.at("mae_y_m").get<double>();
  s.deviation.samples = j.at("deviation_samples").get<std::size_t>();
  s.nav_time_s = j.at("nav_time_s").get<double>();
  s.manip_time_s = j.at("manip_time_s").get<double>();
  s.switch_time_s = j.at("switch_time_s").get<double>();
  s.total_time_s = j.at("total_time_s").get<double>();
  s.path_length_m = j.at("path_length_m").get<double>();
  s.collisions = j.at("collisions").get<std::size_t>();
  s.replans = j.at("replans").get<std::size_t>();
  s.unsafe_base_ticks = j.at("unsafe_base_ticks").get<std::uint64_t>();
  s.handshake_ok = j.at("handshake_ok").get<bool>();
  s.cue_ticks = j.at("cue_ticks").get<std::uint64_t>();
  return s;
}

}  // namespace

std::string summary_json(const TrialRecord& rec) {
  json j = summary_to_json(rec.summary);
  j["scenario"] = json::parse(rec.scenario_text);
  json plans = json::array();
  for (const auto& p : rec.plans) {
    json pts = json::array();
    for (const auto& w : p.waypoints) pts.push_back({w.x(), w.y()});
    plans.push_back({{"from_tick", p.from_tick}, {"waypoints", pts}});
  }
  j["plans"] = plans;
  return j.dump(2) + "\n";
}

void write_record(const std::filesystem::path& dir, const TrialRecord& rec, int row_stride) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "summary.json");
    f << summary_json(rec);
  }
  {
    std::ofstream f(dir / "ticks.csv");
    f << "# scenario_hash " << rec.summary.scenario_hash << "\n";
    f << "tick,time,mode,phi,leader_phase,zone,lx,ly,lz,lroll,lpitch,lyaw,base_x,base_y,base_gamma,cmd_vx,cmd_vgamma,"
         "q1,q2,q3,q4,q5,q6,q7,cue_fx,cue_fy,cue_fz,cue_tx,cue_ty,cue_tz,op_fx,op_fy,op_fz,op_tx,op_ty,op_tz,"
         "look_x,look_y,look_gamma,attached,in_collision,events\n";
    CsvLine line;
    for (const auto& r : rec.rows) {
      if (row_stride > 1 && r.tick % static_cast<std::uint64_t>(row_stride) != 0 && r.event_count == 0) continue;
      line.num(r.tick).num(r.time).str(modes::mode_name(r.mode)).num(r.phi);
      line.str(control::leader_phase_name(r.leader_phase)).str(control::boundary_zone_name(r.zone));
      for (int i = 0; i < 3; ++i) line.num(r.leader_pose.position[i]);
      for (int i = 0; i < 3; ++i) line.num(r.leader_pose.rpy[i]);
      line.num(r.base.x).num(r.base.y).num(r.base.gamma).num(r.base_cmd.v_x).num(r.base_cmd.v_gamma);
      for (int i = 0; i < 7; ++i) line.num(r.q_fra[i]);
      const Vector6 cue = r.cue.as_vector(), op = r.operator_wrench.as_vector();
      for (int i = 0; i < 6; ++i) line.num(cue[i]);
      for (int i = 0; i < 6; ++i) line.num(op[i]);
      line.num(r.lookahead.x).num(r.lookahead.y).num(r.lookahead.gamma);
      line.num(int(r.attached)).num(int(r.in_collision)).num(int(r.event_count));
      f << line.done();
    }
  }
  {
    std::ofstream f(dir / "inputs.csv");
    f << "fx,fy,fz,tx,ty,tz,grasp,drop,override\n";
    CsvLine line;
    for (const auto& in : rec.inputs) {
      const Vector6 w = in.wrench.as_vector();
      for (int i = 0; i < 6; ++i) line.num(w[i]);
      line.num(int(in.grasp_key)).num(int(in.drop_key)).num(int(in.override_key));
      f << line.done();
    }
  }
  {
    std::ofstream f(dir / "trace.csv");
    f << "x,y\n";
    CsvLine line;
    for (const auto& p : rec.base_trace) f << line.num(p.x()).num(p.y()).done();
  }
  {
    std::ofstream f(dir / "events.csv");
    f << "tick,time,kind,detail\n";
    CsvLine line;
    for (const auto& e : rec.events) f << line.num(e.tick).num(e.time).str(e.kind).str(e.detail).done();
  }
}

LoadedRecord load_record(const std::filesystem::path& dir) {
  LoadedRecord out;
  const json j = json::parse(read_file(dir / "summary.json"));
  out.summary = summary_from_json(j);
  out.scenario = parse_scenario(j.at("scenario").dump());

  std::istringstream in(read_file(dir / "inputs.csv"));
  std::string line;
  std::getline(in, line);  // header
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double v[9];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 9; ++i) {
      auto r = std::from_chars(p, end, v[i]);
      if (r.ec != std::errc()) throw std::runtime_error("inputs.csv line " + std::to_string(lineno) + ": bad number");
      p = r.ptr;
      if (i < 8) {
        if (p == end || *p != ',') throw std::runtime_error("inputs.csv line " + std::to_string(lineno) + ": short row");
        ++p;
      }
    }
    OperatorInput oi;
    Vector6 w;
    for (int i = 0; i < 6; ++i) w[i] = v[i];
    oi.wrench = Wrench6::from_vector(w);
    oi.grasp_key = v[6] != 0;
    oi.drop_key = v[7] != 0;
    oi.override_key = v[8] != 0;
    out.inputs.push_back(oi);
  }
  return out;
}

}  // namespace unitele::harness
