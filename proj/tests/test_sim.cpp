#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "smores/sim.hpp"
#include "support/oracles.hpp"

using namespace smores;

namespace {

constexpr double w = kModuleWidth;
constexpr double pi = std::numbers::pi;

Scenario task(int k) { return load_scenario(std::string(SMORES_SCENARIO_DIR) + "/task" + std::to_string(k) + ".json"); }

// Task runs are reused across test cases.
const RunResult& run(int k) {
  static std::map<int, RunResult> cache;
  auto it = cache.find(k);
  if (it == cache.end()) it = cache.emplace(k, run_scenario(task(k))).first;
  return it->second;
}

AssemblyAction dock(ModuleId m, Face mf, ModuleId t, Face tf) { return {ActionKind::kDock, m, mf, t, tf, std::nullopt}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

// Every target edge appears as an attachment with the same faces, and nothing else does.
bool goal_isomorphic(const RunResult& r, const ConfigGraph& target) {
  if (r.final_world.attachments.size() != target.edges().size()) return false;
  for (const Edge& e : target.edges()) {
    const ModuleId a = r.mapping(e.a), b = r.mapping(e.b);
    bool found = false;
    for (const Attachment& at : r.final_world.attachments) {
      if (at.a == a && at.b == b) found = found || (at.fa == e.from_a.face && at.fb == e.from_b.face);
      if (at.a == b && at.b == a) found = found || (at.fa == e.from_b.face && at.fb == e.from_a.face);
    }
    if (!found) return false;
  }
  return true;
}

// Largest deviation of an attached pair from the hand-derived mating pose.
double worst_snap_error(const WorldState& world) {
  double worst = 0.0;
  for (const Attachment& at : world.attachments) {
    const Pose2d rel = world.pose.at(at.b).between(world.pose.at(at.a));
    const Pose2d want = oracle::hand_relative_pose(at.fb, at.fa);
    worst = std::max({worst, (rel.translation() - want.translation()).norm(), std::abs(angle_diff(rel.theta(), want.theta()))});
  }
  return worst;
}

}  // namespace

TEST_CASE("zero commands only advance the clock") {
  WorldState s;
  s.pose[0] = Pose2d(0.1, 0.2, 0.3);
  const WorldState n = step_world(s, {}, 0.025);
  CHECK(n.clock == 0.025);
  CHECK(n.pose.at(0).vector() == s.pose.at(0).vector());
}

TEST_CASE("carried module translates with its helper") {
  WorldState s;
  s.pose[8] = Pose2d(0, 0, 0);
  s.pose[3] = Pose2d(w, 0, pi / 2);
  s.attachments.push_back({8, Face::kTop, 3, Face::kRight});
  s.carried_by[3] = 8;
  WorldState n = s;
  for (int k = 0; k < 40; ++k) n = step_world(n, {{8, {0.1, 0}}}, 0.025);
  CHECK(n.pose.at(8).x() == doctest::Approx(0.1));
  CHECK((n.pose.at(3).translation() - s.pose.at(3).translation() - Vector2d(0.1, 0)).norm() < 1e-12);
  CHECK(n.pose.at(3).theta() == doctest::Approx(pi / 2));
  CHECK_THROWS_AS(step_world(n, {{8, {0.1, 0}}, {3, {0.1, 0}}}, 0.025), SimError);
}

TEST_CASE("attached child orbits a rotating parent") {
  WorldState s;
  s.pose[0] = Pose2d(0, 0, 0);
  s.pose[1] = Pose2d(w, 0, 0);
  s.attachments.push_back({1, Face::kBottom, 0, Face::kTop});
  WorldState n = s;
  for (int k = 0; k < 100; ++k) n = step_world(n, {{0, {0, pi / 2}}}, 0.01);
  CHECK(n.pose.at(0).theta() == doctest::Approx(pi / 2));
  CHECK(n.pose.at(1).x() == doctest::Approx(0).scale(1));
  CHECK(n.pose.at(1).y() == doctest::Approx(w));
  const Pose2d rel = n.pose.at(0).between(n.pose.at(1));
  CHECK((rel.vector() - Pose2d(w, 0, 0).vector()).norm() < 1e-12);
  s.anchored.insert(0);
  CHECK_THROWS_AS(step_world(s, {{1, {0.1, 0}}}, 0.025), SimError);
  CHECK_THROWS_AS(step_world(s, {{7, {0.1, 0}}}, 0.025), SimError);
}

TEST_CASE("area of acceptance") {
  // Target at the origin; mover BOTTOM to target TOP, mating pose (w, 0, 0).
  auto world = [](double gap, double offset, double angle) {
    WorldState s;
    s.pose[0] = Pose2d();
    s.pose[1] = Pose2d(w + gap, offset, angle);
    return s;
  };
  const SimConfig cfg;
  const AssemblyAction a = dock(1, Face::kBottom, 0, Face::kTop);

  WorldState ok = world(3e-3, 5e-3, 0);
  const DockOutcome d = try_dock(ok, a, cfg);
  CHECK(d.geometry.gap == doctest::Approx(3e-3));
  CHECK(d.geometry.lateral == doctest::Approx(5e-3));
  CHECK(d.docked);
  CHECK((ok.pose.at(1).vector() - Pose2d(w, 0, 0).vector()).norm() < 1e-15);
  CHECK(ok.attached(0, 1));
  CHECK_THROWS_AS(try_dock(ok, a, cfg), SimError);  // faces now in use

  WorldState far = world(10e-3, 0, 0);
  CHECK_FALSE(try_dock(far, a, cfg).docked);
  CHECK(far.attachments.empty());
  CHECK(far.pose.at(1).x() == w + 10e-3);

  WorldState edge = world(4e-3, 7e-3, 0);
  CHECK(try_dock(edge, a, cfg).docked);
  WorldState past = world(4e-3, 7.01e-3, 0);
  CHECK_FALSE(try_dock(past, a, cfg).docked);
  WorldState tilted = world(2e-3, 0, 0.11);
  CHECK_FALSE(try_dock(tilted, a, cfg).docked);
  WorldState pressed = world(-3e-3, 0, 0.05);
  CHECK(try_dock(pressed, a, cfg).docked);

  // BOTTOM-BOTTOM snaps to orientation 0.
  WorldState bb;
  bb.pose[0] = Pose2d();
  bb.pose[1] = Pose2d(-w - 1e-3, 0, pi);
  CHECK(try_dock(bb, dock(1, Face::kBottom, 0, Face::kBottom), cfg).docked);
  CHECK((bb.pose.at(1).vector() - Pose2d(-w, 0, pi).vector()).norm() < 1e-12);
}

TEST_CASE("collision detection") {
  WorldState s;
  s.pose[0] = Pose2d();
  s.pose[1] = Pose2d(1, 0, 0);
  CHECK(detect_collisions(s).empty());
  s.pose[1] = Pose2d(0.05, 0, 0);
  REQUIRE(detect_collisions(s).size() == 1);
  CHECK(detect_collisions(s).front() == ModulePair{0, 1});
  CHECK(detect_collisions(s, {{0, 1}}).empty());
  CHECK(square_penetration(s.pose.at(0), s.pose.at(1)) == doctest::Approx(w - 0.05));
  s.pose[1] = Pose2d(w - 5e-4, 0, 0);  // contact within tolerance
  CHECK(detect_collisions(s).empty());
  // Corner of a 45-degree square pushed 2 mm into a face.
  s.pose[1] = Pose2d(w / 2 + w / std::sqrt(2.0) - 2e-3, 0, pi / 4);
  CHECK(square_penetration(s.pose.at(0), s.pose.at(1)) == doctest::Approx(2e-3));
  s.attachments.push_back({1, Face::kBottom, 0, Face::kTop});
  s.pose[1] = Pose2d(0.05, 0, 0);
  CHECK(detect_collisions(s).empty());  // same rigid body
}

TEST_CASE("one module and a trivial target") {
  Scenario s;
  s.name = "single";
  s.modules.pose[3] = Pose2d(0.2, -0.1, 0.4);
  s.target.add_module(0);
  const RunResult r = run_scenario(s);
  CHECK(r.success);
  CHECK(r.schedule.waves.empty());
  CHECK(r.metrics.makespan == 0.0);

  const std::string svg = run_to_svg(r);
  CHECK(svg.find("id=\"start\"") != std::string::npos);
  CHECK(svg.find("id=\"final\"") == std::string::npos);
  CHECK(count(svg, "<polygon") == 1);
}

TEST_CASE("invalid scenario ends the run without throwing") {
  Scenario s;
  s.modules.pose[0] = Pose2d();
  s.modules.pose[1] = Pose2d(0.05, 0, 0);
  s.target.add_module(0);
  const RunResult r = run_scenario(s);
  CHECK_FALSE(r.success);
  CHECK(r.failure.find("spacing") != std::string::npos);
  CHECK(r.failure.find("modules: 2 modules but target has 1") != std::string::npos);
}

TEST_CASE("task 1 end to end") {
  const RunResult& r = run(1);
  REQUIRE(r.success);
  CHECK(r.root == 1);
  CHECK(r.metrics.collisions == 0);
  CHECK(r.schedule.waves.size() == 4);
  std::size_t docks = 0;
  std::vector<std::size_t> per_wave;
  for (const SimEvent& e : r.events) {
    if (e.event == "wave_start") per_wave.push_back(0);
    if (e.event == "dock") {
      ++docks;
      ++per_wave.back();
    }
  }
  CHECK(docks == 6);
  CHECK(per_wave == std::vector<std::size_t>{2, 2, 1, 1});
  CHECK(goal_isomorphic(r, task(1).target));
  CHECK(worst_snap_error(r.final_world) < 1e-12);
  CHECK(matches_target(r.final_world, task(1).target, r.layout, r.mapping, r.root));
}

TEST_CASE("task 3 helper sequence") {
  const RunResult& r = run(3);
  REQUIRE(r.success);
  CHECK(goal_isomorphic(r, task(3).target));
  // For each side-face action: helper docks to the mover, lifts, places, the
  // mover docks to the root, the helper lets go and backs off.
  for (ModuleId mover : {3, 1}) {
    CAPTURE(mover);
    std::vector<std::string> seen;
    for (const SimEvent& e : r.events) {
      const auto& d = e.detail;
      const bool helper_grip = e.event == "dock" && d["action"]["mover"] == 8 && d["action"]["target"] == mover;
      const bool about_mover = d.contains("action") && d["action"]["mover"] == mover;
      const bool placed = e.event == "place" && d["module"] == mover;
      if (helper_grip || placed || (about_mover && (e.event == "lift" || e.event == "dock" || e.event == "undock")))
        seen.push_back(e.event);
    }
    CHECK(seen == std::vector<std::string>{"dock", "lift", "place", "dock", "undock"});
  }
  double first_undock = -1, second_grip = -1;
  for (const SimEvent& e : r.events) {
    if (e.event == "undock" && first_undock < 0) first_undock = e.t;
    if (e.event == "dock" && e.detail["action"]["mover"] == 8 && e.detail["action"]["target"] == 1) second_grip = e.t;
  }
  CHECK(first_undock < second_grip);  // one helper: module 3 first, then module 1
}

TEST_CASE("no free module jumps between ticks") {
  const MotionConfig cfg;
  const double bound = cfg.v_max * cfg.dt() + w * cfg.omega_max * cfg.dt() + 1e-12;
  for (int k : {1, 2, 3}) {
    CAPTURE(k);
    const RunResult& r = run(k);
    // Snaps are instantaneous by design; skip the tick that closes a dock.
    std::set<long> snap_ticks;
    for (const SimEvent& e : r.events)
      if (e.event == "dock") snap_ticks.insert(std::lround(e.t / cfg.dt()));
    std::map<ModuleId, TrajectorySample> last;
    int worst_violations = 0;
    for (const TrajectorySample& s : r.trajectory) {
      auto it = last.find(s.id);
      if (it != last.end() && !snap_ticks.count(std::lround(s.t / cfg.dt()))) {
        const double step = (s.pose.translation() - it->second.pose.translation()).norm();
        if (step > bound) ++worst_violations;
      }
      last[s.id] = s;
    }
    CHECK(worst_violations == 0);
  }
}

TEST_CASE("docked pairs stay rigid for the rest of the run") {
  for (int k : {1, 2, 3}) {
    CAPTURE(k);
    const RunResult& r = run(k);
    std::map<double, std::map<ModuleId, Pose2d>> by_time;
    for (const TrajectorySample& s : r.trajectory) by_time[s.t][s.id] = s.pose;
    for (const Attachment& at : r.final_world.attachments) {
      std::optional<Pose2d> first;
      double worst = 0.0;
      for (const auto& [t, poses] : by_time) {
        const Pose2d rel = poses.at(at.b).between(poses.at(at.a));
        const Pose2d want = oracle::hand_relative_pose(at.fb, at.fa);
        const bool mated = (rel.translation() - want.translation()).norm() < 1e-9 &&
                           std::abs(angle_diff(rel.theta(), want.theta())) < 1e-9;
        if (!first && mated) first = rel;
        if (first) worst = std::max(worst, (rel.vector() - first->vector()).norm());
      }
      CHECK(first.has_value());
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("emitted files") {
  const RunResult& r = run(1);
  const auto dir = std::filesystem::temp_directory_path() / "smores_emit_test";
  std::filesystem::remove_all(dir);
  emit_outputs(r, dir);
  for (const char* f : {"schedule.json", "trajectory.csv", "events.jsonl", "metrics.json", "paths.svg"})
    CHECK(std::filesystem::exists(dir / f));

  const nlohmann::json metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  double last = 0.0;
  std::istringstream lines(slurp(dir / "events.jsonl"));
  for (std::string line; std::getline(lines, line);) last = std::max(last, nlohmann::json::parse(line).at("t").get<double>());
  CHECK(metrics.at("makespan_s").get<double>() == last);
  CHECK(metrics.at("collisions") == 0);

  const std::string csv = slurp(dir / "trajectory.csv");
  CHECK(csv.rfind("time_s,module_id,x_m,y_m,theta_rad\n", 0) == 0);
  CHECK(count(csv, "\n") == r.trajectory.size() + 1);

  const std::string svg = slurp(dir / "paths.svg");
  CHECK(count(svg, "<polyline") == 7);
  CHECK(svg.find("id=\"final\"") != std::string::npos);
  const nlohmann::json sched = nlohmann::json::parse(slurp(dir / "schedule.json"));
  CHECK(sched.at("waves").size() == 4);
  CHECK(sched.at("root") == 1);

  CHECK_THROWS(emit_outputs(r, "/proc/forbidden/out"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario loading and validation") {
  const Scenario t1 = task(1);
  CHECK(t1.modules.size() == 7);
  CHECK(t1.name == "task1");
  CHECK(validate_scenario(t1).empty());

  nlohmann::json j = scenario_to_json(t1);
  const Scenario back = scenario_from_json(j);
  CHECK(back.target == t1.target);
  CHECK(scenario_to_json(back) == j);

  nlohmann::json missing = j;
  missing["modules"].erase(missing["modules"].begin());
  try {
    scenario_from_json(missing);
    FAIL("expected a scenario error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("6 modules but target has 7") != std::string::npos);
  }

  Scenario crowded = t1;
  crowded.modules.pose[1] = Pose2d(crowded.modules.pose[0].x() + 0.05, crowded.modules.pose[0].y(), 0);
  bool spacing = false;
  for (const auto& p : validate_scenario(crowded)) spacing = spacing || p.find("spacing") != std::string::npos;
  CHECK(spacing);

  Scenario tuned = t1;
  apply_config_overrides(nlohmann::json{{"motion", {{"v_max", 0.05}}}, {"sim", {{"dock_gap", 0.002}}}}, tuned);
  CHECK(tuned.motion.v_max == 0.05);
  CHECK(tuned.sim.dock_gap == 0.002);
  CHECK_THROWS(apply_config_overrides(nlohmann::json{{"motoin", nlohmann::json::object()}}, tuned));
  CHECK_THROWS(load_scenario(std::string(SMORES_SCENARIO_DIR) + "/does_not_exist.json"));
}
