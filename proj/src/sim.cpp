#include "smores/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <tuple>

namespace smores {

// ---------------------------------------------------------------------------
// World

std::vector<ModuleId> WorldState::component(ModuleId m) const {
  std::set<ModuleId> seen{m};
  std::deque<ModuleId> queue{m};
  auto visit = [&](ModuleId n) {
    if (seen.insert(n).second) queue.push_back(n);
  };
  while (!queue.empty()) {
    const ModuleId v = queue.front();
    queue.pop_front();
    for (const Attachment& a : attachments) {
      if (a.a == v) visit(a.b);
      if (a.b == v) visit(a.a);
    }
    for (const auto& [carried, helper] : carried_by) {
      if (carried == v) visit(helper);
      if (helper == v) visit(carried);
    }
  }
  return {seen.begin(), seen.end()};
}

bool WorldState::face_in_use(ModuleId m, Face f) const {
  return std::any_of(attachments.begin(), attachments.end(),
                     [&](const Attachment& a) { return (a.a == m && a.fa == f) || (a.b == m && a.fb == f); });
}

bool WorldState::attached(ModuleId a, ModuleId b) const {
  return std::any_of(attachments.begin(), attachments.end(), [&](const Attachment& x) {
    return (x.a == a && x.b == b) || (x.a == b && x.b == a);
  });
}

void WorldState::detach(ModuleId a, ModuleId b) {
  std::erase_if(attachments, [&](const Attachment& x) { return (x.a == a && x.b == b) || (x.a == b && x.b == a); });
}

ConfigGraph WorldState::attachment_graph(const std::vector<ModuleId>& modules) const {
  ConfigGraph g;
  for (ModuleId m : modules) g.add_module(m);
  for (const Attachment& a : attachments)
    if (g.contains(a.a) && g.contains(a.b)) g.connect(a.a, a.fa, a.b, a.fb);
  return g;
}

WorldState step_world(const WorldState& world, const Commands& commands, double dt) {
  WorldState next = world;
  std::set<ModuleId> moved;
  for (const auto& [driver, cmd] : commands) {
    if (!world.pose.count(driver)) throw SimError("command for unknown module " + std::to_string(driver));
    const std::vector<ModuleId> comp = world.component(driver);
    for (ModuleId m : comp) {
      if (world.anchored.count(m))
        throw SimError("module " + std::to_string(driver) + " is docked to the anchored assembly and cannot drive");
      if (!moved.insert(m).second)
        throw SimError("module " + std::to_string(driver) + " shares a rigid body with another commanded module");
    }
    const Pose2d& before = world.pose.at(driver);
    const Pose2d after = diff_drive_step(before, cmd, dt);
    const Pose2d delta = after * before.inverse();
    for (ModuleId m : comp) next.pose[m] = m == driver ? after : delta * world.pose.at(m);
  }
  next.clock = world.clock + dt;
  return next;
}

// ---------------------------------------------------------------------------
// Docking

DockGeometry dock_geometry(const WorldState& world, const AssemblyAction& action) {
  const Pose2d& mover = world.pose.at(action.mover);
  const Pose2d& target = world.pose.at(action.target);
  const double half = kModuleWidth / 2;
  const Vector2d n_t = target.rotation() * face_normal(action.target_face);
  const Vector2d n_m = mover.rotation() * face_normal(action.mover_face);
  const Vector2d d = (mover.translation() + half * n_m) - (target.translation() + half * n_t);
  const Vector2d along(-n_t.y(), n_t.x());
  DockGeometry g;
  g.gap = d.dot(n_t);
  g.lateral = std::abs(d.dot(along));
  const Vector2d facing = -n_t;
  g.angle = std::abs(std::atan2(n_m.x() * facing.y() - n_m.y() * facing.x(), n_m.dot(facing)));
  return g;
}

DockOutcome try_dock(WorldState& world, const AssemblyAction& action, const SimConfig& cfg) {
  if (world.face_in_use(action.mover, action.mover_face))
    throw SimError("face " + std::string(to_string(action.mover_face)) + " of module " +
                   std::to_string(action.mover) + " is already in use");
  if (world.face_in_use(action.target, action.target_face))
    throw SimError("face " + std::string(to_string(action.target_face)) + " of module " +
                   std::to_string(action.target) + " is already in use");

  DockOutcome out;
  out.geometry = dock_geometry(world, action);
  // Closed bounds; the slack only absorbs rounding in the geometry.
  constexpr double slack = 1e-12;
  const DockGeometry& g = out.geometry;
  if (std::abs(g.gap) > cfg.dock_gap + slack || g.lateral > cfg.dock_lateral + slack ||
      g.angle > cfg.dock_angle + slack)
    return out;

  const std::vector<ModuleId> comp = world.component(action.mover);
  if (std::find(comp.begin(), comp.end(), action.target) != comp.end())
    throw SimError("dock would close a loop between " + std::to_string(action.mover) + " and " +
                   std::to_string(action.target));
  for (ModuleId m : comp)
    if (world.anchored.count(m)) throw SimError("cannot snap the anchored assembly onto module " + std::to_string(action.target));

  Connection conn{action.target_face, action.mover_face, std::nullopt};
  if (action.target_face == Face::kBottom && action.mover_face == Face::kBottom) conn.orientation = 0;
  const Pose2d snapped = world.pose.at(action.target) * relative_pose(conn);
  const Pose2d delta = snapped * world.pose.at(action.mover).inverse();
  for (ModuleId m : comp) world.pose[m] = m == action.mover ? snapped : delta * world.pose.at(m);
  world.attachments.push_back({action.mover, action.mover_face, action.target, action.target_face});
  out.docked = true;
  return out;
}

// ---------------------------------------------------------------------------
// Collisions

double square_penetration(const Pose2d& a, const Pose2d& b, double side) {
  const double half = side / 2;
  const Eigen::Matrix2d ra = a.rotation();
  const Eigen::Matrix2d rb = b.rotation();
  const Vector2d d = b.translation() - a.translation();
  double depth = std::numeric_limits<double>::infinity();
  for (const Eigen::Matrix2d* r : {&ra, &rb})
    for (int k = 0; k < 2; ++k) {
      const Vector2d axis = r->col(k);
      const double ra_ext = half * (std::abs(ra.col(0).dot(axis)) + std::abs(ra.col(1).dot(axis)));
      const double rb_ext = half * (std::abs(rb.col(0).dot(axis)) + std::abs(rb.col(1).dot(axis)));
      depth = std::min(depth, ra_ext + rb_ext - std::abs(d.dot(axis)));
    }
  return depth;
}

std::vector<ModulePair> detect_collisions(const WorldState& world, const std::set<ModulePair>& exempt,
                                          double tolerance) {
  // Component label per module so rigidly joined modules are skipped.
  std::map<ModuleId, ModuleId> label;
  for (const auto& [id, p] : world.pose)
    if (!label.count(id))
      for (ModuleId m : world.component(id)) label[m] = id;

  std::vector<ModulePair> out;
  for (auto a = world.pose.begin(); a != world.pose.end(); ++a)
    for (auto b = std::next(a); b != world.pose.end(); ++b) {
      if (label[a->first] == label[b->first]) continue;
      if (exempt.count(ordered_pair(a->first, b->first))) continue;
      if (distance(a->second, b->second) > kModuleWidth * std::numbers::sqrt2) continue;
      if (square_penetration(a->second, b->second) > tolerance) out.push_back({a->first, b->first});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Target check

bool matches_target(const WorldState& world, const ConfigGraph& target, const UnfoldedLayout& layout,
                    const Mapping& mapping, ModuleId root, double tolerance, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  using Key = std::tuple<ModuleId, Face, ModuleId, Face>;
  auto key = [](ModuleId a, Face fa, ModuleId b, Face fb) { return a < b ? Key{a, fa, b, fb} : Key{b, fb, a, fa}; };

  std::set<Key> expected;
  for (const Edge& e : target.edges())
    expected.insert(key(mapping(e.a), e.from_a.face, mapping(e.b), e.from_a.face2con));
  std::set<Key> actual;
  for (const Attachment& a : world.attachments) actual.insert(key(a.a, a.fa, a.b, a.fb));
  if (expected != actual) return fail("attachment graph differs from the target");

  const Pose2d& root_pose = world.pose.at(root);
  for (const auto& [vertex, rel] : layout.pose) {
    const ModuleId m = mapping(vertex);
    const Pose2d want = root_pose * rel;
    const Pose2d& got = world.pose.at(m);
    if ((want.translation() - got.translation()).norm() > tolerance ||
        std::abs(angle_diff(want.theta(), got.theta())) > tolerance)
      return fail("module " + std::to_string(m) + " is off its snapped pose");
  }
  return true;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

/// One closed-loop docking: the driver brings `dock.mover`'s face onto the
/// target, pushing the carried module when a helper drives.
struct DockTask {
  ModuleId driver = 0;
  std::optional<ModuleId> carried;
  AssemblyAction dock;
  int direction = 1;  ///< +1 driver TOP leads, -1 BOTTOM leads
  Pose2d goal;        ///< driver pose at the moment of docking
  bool place = false;  ///< set the carried module down before the approach
};

nlohmann::json action_json(const AssemblyAction& a) { return action_to_json(a); }

class Runner {
 public:
  Runner(const Scenario& sc, RunResult& r) : sc_(sc), mc_(sc.motion), cfg_(sc.sim), r_(r), dt_(sc.motion.dt()) {}

  void run() {
    for (const auto& [id, p] : sc_.modules.pose) world_.pose[id] = p;
    for (const auto& [id, p] : sc_.helpers.pose) world_.pose[id] = p;

    const ModuleSet in_root = to_root_frame(sc_.modules, r_.root);
    r_.layout = unfold(sc_.target);
    r_.mapping = assign(r_.layout, in_root, {r_.layout.root, r_.root});
    r_.schedule = plan_assembly(sc_.target, r_.mapping);
    std::vector<ModuleId> helpers;
    for (const auto& [id, p] : sc_.helpers.pose) helpers.push_back(id);
    ModuleSet everyone = sc_.modules;
    for (const auto& [id, p] : sc_.helpers.pose) everyone.pose[id] = p;
    r_.schedule = insert_helper_actions(r_.schedule, helpers, &everyone);

    root_pose_ = world_.pose.at(r_.root);
    world_.anchored.insert(r_.root);
    r_.initial = world_;
    for (const auto& [id, p] : world_.pose) last_[id] = p;
    record();

    for (std::size_t w = 0; w < r_.schedule.waves.size(); ++w) run_wave(w, r_.schedule.waves[w]);

    std::string why;
    if (!matches_target(world_, sc_.target, r_.layout, r_.mapping, r_.root, 1e-9, &why)) throw SimError(why);
  }

  void fail(const std::string& msg) {
    r_.failure = msg;
    emit("failure", {{"message", msg}});
  }

  void finish() {
    r_.final_world = world_;
    r_.metrics.makespan = r_.events.empty() ? 0.0 : r_.events.back().t;
    r_.metrics.total_distance = 0.0;
    for (const auto& [id, d] : r_.metrics.distance) r_.metrics.total_distance += d;
  }

  void emit(const std::string& name, nlohmann::json detail) {
    r_.events.push_back({world_.clock, name, std::move(detail)});
  }

 private:
  // -- bookkeeping ----------------------------------------------------------

  void record() {
    prev_ = last_;
    for (const auto& [id, p] : world_.pose) {
      r_.trajectory.push_back({world_.clock, id, p});
      r_.metrics.distance[id] += (p.translation() - last_.at(id).translation()).norm();
      last_[id] = p;
    }
    const std::vector<ModulePair> hits = detect_collisions(world_, exempt_, cfg_.contact_tolerance);
    std::set<ModulePair> now(hits.begin(), hits.end());
    for (const ModulePair& p : now)
      if (!colliding_.count(p)) {
        ++r_.metrics.collisions;
        emit("collision", {{"a", p.first}, {"b", p.second}});
      }
    colliding_ = std::move(now);
  }

  // A dock snapped poses after this tick was recorded: rewrite its samples.
  void resample() {
    std::size_t k = r_.trajectory.size() - world_.pose.size();
    for (const auto& [id, p] : world_.pose) {
      r_.trajectory[k++].pose = p;
      r_.metrics.distance[id] += (p.translation() - prev_.at(id).translation()).norm() -
                                 (last_.at(id).translation() - prev_.at(id).translation()).norm();
      last_[id] = p;
    }
  }

  void advance(const Commands& cmds) {
    world_ = step_world(world_, cmds, dt_);
    ++tick_;
    world_.clock = static_cast<double>(tick_) * dt_;
    record();
    if (world_.clock > wave_deadline_) throw SimError("wave timeout");
  }

  void pause(double duration) {
    const long ticks = std::lround(duration / dt_);
    for (long k = 0; k < ticks; ++k) advance({});
  }

  // -- waves ----------------------------------------------------------------

  void run_wave(std::size_t index, const Wave& wave) {
    WaveTiming timing{index, world_.clock, world_.clock, wave.size()};
    nlohmann::json actions = nlohmann::json::array();
    for (const AssemblyAction& a : wave) actions.push_back(action_json(a));
    emit("wave_start", {{"wave", index}, {"actions", actions}});
    wave_deadline_ = world_.clock + cfg_.wave_timeout;

    std::vector<AssemblyAction> direct;
    std::map<ModuleId, std::vector<AssemblyAction>> per_helper;
    std::vector<ModuleId> helper_order;
    for (const AssemblyAction& a : wave) {
      if (a.kind != ActionKind::kDock) throw SimError("only dock actions can be executed");
      if (!a.helper) {
        direct.push_back(a);
        continue;
      }
      if (!per_helper.count(*a.helper)) helper_order.push_back(*a.helper);
      per_helper[*a.helper].push_back(a);
    }

    if (!direct.empty()) run_direct(direct);
    for (std::size_t round = 0;; ++round) {
      std::vector<AssemblyAction> jobs;
      for (ModuleId h : helper_order)
        if (round < per_helper[h].size()) jobs.push_back(per_helper[h][round]);
      if (jobs.empty()) break;
      run_helper_round(jobs);
    }

    emit("wave_end", {{"wave", index}});
    timing.end = world_.clock;
    r_.metrics.waves.push_back(timing);
  }

  Pose2d docking_pose(const AssemblyAction& a) const {
    Connection conn{a.target_face, a.mover_face, std::nullopt};
    if (a.target_face == Face::kBottom && a.mover_face == Face::kBottom) conn.orientation = 0;
    return world_.pose.at(a.target) * relative_pose(conn);
  }

  void run_direct(const std::vector<AssemblyAction>& actions) {
    std::vector<DockTask> tasks;
    for (const AssemblyAction& a : actions) {
      if (is_side_face(a.mover_face)) throw SimError("side-face dock without a helper");
      DockTask t;
      t.driver = a.mover;
      t.dock = a;
      t.direction = a.mover_face == Face::kTop ? 1 : -1;
      t.goal = docking_pose(a);
      tasks.push_back(t);
    }
    navigate(tasks);
    dock(tasks);
  }

  void run_helper_round(const std::vector<AssemblyAction>& jobs) {
    const std::size_t steps = helper_sequence(jobs.front()).size();
    std::vector<std::vector<HelperStep>> seqs;
    for (const AssemblyAction& a : jobs) seqs.push_back(helper_sequence(a));

    for (std::size_t k = 0; k < steps; ++k) {
      const HelperStep::Kind kind = seqs.front()[k].kind;
      std::vector<DockTask> tasks;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        const AssemblyAction& a = jobs[j];
        const HelperStep& step = seqs[j][k];
        const ModuleId h = *a.helper;
        nlohmann::json detail = {{"helper", h}, {"action", action_json(a)}};
        switch (kind) {
          case HelperStep::Kind::kDock: {
            DockTask t;
            t.driver = h;
            t.dock = step.action;
            t.goal = docking_pose(step.action);
            tasks.push_back(t);
            break;
          }
          case HelperStep::Kind::kLift:
            world_.carried_by[a.mover] = h;
            emit("lift", detail);
            break;
          case HelperStep::Kind::kDeliver: {
            // The helper's pose once the mover sits docked on the target.
            Connection grip{opposite(a.mover_face), Face::kTop, std::nullopt};
            DockTask t;
            t.driver = h;
            t.carried = a.mover;
            t.dock = a;
            t.goal = docking_pose(a) * relative_pose(grip);
            t.place = true;
            tasks.push_back(t);
            break;
          }
          case HelperStep::Kind::kPlace:
          case HelperStep::Kind::kPush:
            break;  // part of the deliver docking loop
          case HelperStep::Kind::kUndock:
            world_.detach(h, a.mover);
            emit("undock", detail);
            break;
          case HelperStep::Kind::kRetreat:
            break;
        }
      }
      switch (kind) {
        case HelperStep::Kind::kDock:
          navigate(tasks);
          dock(tasks);
          break;
        case HelperStep::Kind::kLift:
          pause(cfg_.lift_duration);
          break;
        case HelperStep::Kind::kDeliver:
          navigate(tasks);
          dock(tasks);
          break;
        case HelperStep::Kind::kUndock:
          pause(cfg_.undock_duration);
          break;
        case HelperStep::Kind::kRetreat: {
          std::vector<ModuleId> drivers;
          for (const AssemblyAction& a : jobs) drivers.push_back(*a.helper);
          retreat(drivers);
          break;
        }
        default:
          break;
      }
    }
  }

  // -- navigation -----------------------------------------------------------

  /// Distance from the standoff point that keeps the driver's turning disk
  /// clear of parked modules; shrinks from the configured standoff when a
  /// module sits too close.
  Pose2d standoff_pose(const DockTask& t, const std::set<ModuleId>& moving) const {
    const double half_diag = kModuleWidth / std::numbers::sqrt2;
    const double sweep = (t.carried ? kModuleWidth : 0.0) + half_diag;
    const double need = sweep + half_diag + 5e-3;
    const double min_standoff = need - (t.carried ? 2 : 1) * kModuleWidth;
    Pose2d best;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (double s = mc_.standoff; s >= min_standoff - 1e-9; s -= 0.01) {
      const Pose2d p = t.goal * Pose2d(-t.direction * s, 0.0, 0.0);
      double margin = std::numeric_limits<double>::infinity();
      for (const auto& [id, q] : world_.pose) {
        if (moving.count(id) || id == t.dock.target) continue;
        margin = std::min(margin, distance(p, q) - need);
      }
      if (margin >= 0) return p;
      if (margin > best_margin) {
        best_margin = margin;
        best = p;
      }
    }
    return best;
  }

  static Cell nearest_free(const GridMap& grid, const Vector2d& p, const std::set<Cell>& taken) {
    std::optional<Cell> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = grid.min_i(); i <= grid.max_i(); ++i)
      for (int j = grid.min_j(); j <= grid.max_j(); ++j) {
        const Cell c{i, j};
        if (grid.blocked(c) || taken.count(c)) continue;
        const double d = (grid.center(c) - p).norm();
        if (d < best_d - 1e-12) {
          best_d = d;
          best = c;
        }
      }
    if (!best) throw SimError("no free grid cell left");
    return *best;
  }

  void navigate(std::vector<DockTask>& tasks) {
    if (tasks.empty()) return;
    std::set<ModuleId> moving;
    bool carrying = false;
    for (const DockTask& t : tasks) {
      for (ModuleId m : world_.component(t.driver)) moving.insert(m);
      carrying = carrying || t.carried.has_value();
    }

    std::vector<Pose2d> standoff;
    for (const DockTask& t : tasks) standoff.push_back(standoff_pose(t, moving));

    const Pose2d to_root = root_pose_.inverse();
    std::vector<Vector2d> points;
    for (const auto& [id, p] : world_.pose) points.push_back(to_root.transform(p.translation()));
    for (const Pose2d& p : standoff) points.push_back(to_root.transform(p.translation()));
    GridMap grid = GridMap::covering(points, cfg_.grid_cell, cfg_.grid_padding);
    const double clearance = carrying ? cfg_.carried_clearance : cfg_.clearance;
    for (const auto& [id, p] : world_.pose)
      if (!moving.count(id)) grid.block_disk(to_root.transform(p.translation()), clearance);

    std::vector<Cell> starts, goals;
    std::set<Cell> taken_start, taken_goal;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      starts.push_back(nearest_free(grid, to_root.transform(world_.pose.at(tasks[k].driver).translation()), taken_start));
      taken_start.insert(starts.back());
      goals.push_back(nearest_free(grid, to_root.transform(standoff[k].translation()), taken_goal));
      taken_goal.insert(goals.back());
    }
    std::vector<std::size_t> order(tasks.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

    std::vector<GridPath> paths;
    try {
      paths = plan_paths(grid, starts, goals, order, nullptr, 1);
    } catch (const PlanningError&) {
      try {
        paths = plan_paths(grid, starts, goals, order, nullptr, 0);
      } catch (const PlanningError& e) {
        throw SimError("planning failed for module " + std::to_string(tasks[e.agent()].driver) + ": " + e.what());
      }
    }

    nlohmann::json detail = nlohmann::json::array();
    int horizon = 0;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      horizon = std::max(horizon, paths[k].arrival());
      nlohmann::json cells = nlohmann::json::array();
      for (const Cell& c : paths[k].cells) cells.push_back({c.i, c.j});
      detail.push_back({{"module", tasks[k].driver}, {"cells", cells}});
    }
    emit("navigate", {{"paths", detail}});

    // Lock-step over grid steps, then the final leg to the exact standoff.
    for (int step = 0; step <= horizon + 1; ++step) {
      std::vector<Vector2d> target(tasks.size());
      for (std::size_t k = 0; k < tasks.size(); ++k)
        target[k] = step <= horizon ? root_pose_.transform(grid.center(paths[k].at(step))) : standoff[k].translation();
      const double capture = step <= horizon ? mc_.capture_radius : mc_.final_capture_radius;
      std::vector<bool> done(tasks.size(), false);
      const double started = world_.clock;
      while (true) {
        Commands cmds;
        bool all = true;
        for (std::size_t k = 0; k < tasks.size(); ++k) {
          if (done[k]) continue;
          std::size_t next = 0;
          const FollowOutput out =
              follow_path_command(world_.pose.at(tasks[k].driver), {target[k]}, next, mc_, capture);
          if (out.complete) {
            done[k] = true;
          } else {
            cmds[tasks[k].driver] = out.cmd;
            all = false;
          }
        }
        if (all) break;
        if (world_.clock - started > cfg_.phase_timeout) throw SimError("navigation step timed out");
        advance(cmds);
      }
    }
  }

  // -- pose adjustment and approach -----------------------------------------

  void dock(std::vector<DockTask>& tasks) {
    enum class Phase { kAdjust, kPlace, kApproach, kDone };
    struct State {
      Phase phase = Phase::kAdjust;
      double since = 0.0;
      int attempts = 0;
      bool placed = false;
    };
    std::vector<State> st(tasks.size());
    for (State& s : st) s.since = world_.clock;
    for (const DockTask& t : tasks) emit("adjust", {{"module", t.driver}, {"action", action_json(t.dock)}});

    while (true) {
      Commands cmds;
      bool all = true;
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        DockTask& t = tasks[k];
        State& s = st[k];
        const GoalFramePose gp = GoalFramePose::from(world_.pose.at(t.driver), t.goal);
        if (s.phase == Phase::kAdjust) {
          const PoseAdjustOutput out = pose_adjust_command(gp, FaceClass::kLateral, mc_);
          if (out.aligned) {
            if (t.place && !s.placed) {
              s.phase = Phase::kPlace;
              s.since = world_.clock;
              s.placed = true;
              if (t.carried) world_.carried_by.erase(*t.carried);
              emit("place", {{"module", t.carried.value_or(t.dock.mover)}, {"helper", t.driver}});
            } else {
              begin_approach(t, s.attempts);
              s.phase = Phase::kApproach;
              s.since = world_.clock;
            }
          } else {
            if (world_.clock - s.since > cfg_.adjust_timeout) throw SimError("pose adjustment timed out");
            cmds[t.driver] = out.cmd;
          }
        }
        if (s.phase == Phase::kPlace && world_.clock - s.since >= cfg_.place_duration - 1e-9) {
          begin_approach(t, s.attempts);
          s.phase = Phase::kApproach;
          s.since = world_.clock;
        }
        if (s.phase == Phase::kApproach) {
          const ApproachOutput out = approach_command(gp, t.direction, mc_);
          if (out.abort) {
            exempt_.erase(ordered_pair(t.dock.mover, t.dock.target));
            emit("abort", {{"action", action_json(t.dock)}, {"attempt", s.attempts}, {"lateral_m", gp.y}});
            if (s.attempts >= cfg_.max_dock_attempts) throw SimError("docking retries exhausted");
            s.phase = Phase::kAdjust;
            s.since = world_.clock;
          } else {
            if (world_.clock - s.since > cfg_.phase_timeout) throw SimError("approach timed out");
            cmds[t.driver] = out.cmd;
          }
        }
        all = all && s.phase == Phase::kDone;
      }
      if (all) break;
      advance(cmds);
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        if (st[k].phase != Phase::kApproach) continue;
        const DockOutcome outcome = try_dock(world_, tasks[k].dock, cfg_);
        if (!outcome.docked) continue;
        st[k].phase = Phase::kDone;
        resample();
        exempt_.erase(ordered_pair(tasks[k].dock.mover, tasks[k].dock.target));
        emit("dock", {{"action", action_json(tasks[k].dock)},
                      {"gap_m", outcome.geometry.gap},
                      {"lateral_m", outcome.geometry.lateral},
                      {"angle_rad", outcome.geometry.angle}});
      }
    }
  }

  void begin_approach(const DockTask& t, int& attempts) {
    ++attempts;
    ++r_.metrics.dock_attempts;
    exempt_.insert(ordered_pair(t.dock.mover, t.dock.target));
    emit("approach", {{"module", t.driver}, {"action", action_json(t.dock)}, {"attempt", attempts}});
  }

  void retreat(const std::vector<ModuleId>& drivers) {
    std::map<ModuleId, Pose2d> start;
    for (ModuleId d : drivers) start[d] = world_.pose.at(d);
    const double started = world_.clock;
    while (true) {
      Commands cmds;
      for (ModuleId d : drivers)
        if (distance(world_.pose.at(d), start.at(d)) < mc_.standoff) cmds[d] = {-0.5 * mc_.v_max, 0.0};
      if (cmds.empty()) break;
      if (world_.clock - started > cfg_.phase_timeout) throw SimError("retreat timed out");
      advance(cmds);
    }
    for (ModuleId d : drivers) emit("retreat", {{"helper", d}});
  }

  const Scenario& sc_;
  const MotionConfig& mc_;
  const SimConfig& cfg_;
  RunResult& r_;
  const double dt_;
  WorldState world_;
  Pose2d root_pose_;
  long tick_ = 0;
  double wave_deadline_ = std::numeric_limits<double>::infinity();
  std::set<ModulePair> exempt_;
  std::set<ModulePair> colliding_;
  std::map<ModuleId, Pose2d> last_, prev_;
};

}  // namespace

RunResult run_scenario(const Scenario& scenario) {
  RunResult r;
  const std::vector<std::string> problems = validate_scenario(scenario);
  if (!problems.empty()) {
    r.failure = "invalid scenario:";
    for (const std::string& p : problems) r.failure += "\n  " + p;
    return r;
  }
  r.root = select_root_module(scenario.modules);
  Runner runner(scenario, r);
  try {
    runner.run();
    r.success = r.metrics.collisions == 0;
    if (!r.success) r.failure = std::to_string(r.metrics.collisions) + " collision(s)";
    runner.emit("finish", {{"success", r.success}});
  } catch (const std::exception& e) {
    runner.fail(e.what());
  }
  runner.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Outputs

std::string trajectory_csv(const RunResult& r) {
  std::string out = "time_s,module_id,x_m,y_m,theta_rad\n";
  out.reserve(out.size() + r.trajectory.size() * 48);
  char buf[128];
  for (const TrajectorySample& s : r.trajectory) {
    std::snprintf(buf, sizeof buf, "%.3f,%d,%.9f,%.9f,%.9f\n", s.t, s.id, s.pose.x(), s.pose.y(), s.pose.theta());
    out += buf;
  }
  return out;
}

std::string events_jsonl(const RunResult& r) {
  std::string out;
  for (const SimEvent& e : r.events) {
    nlohmann::json j = {{"t", e.t}, {"event", e.event}, {"detail", e.detail}};
    out += j.dump() + "\n";
  }
  return out;
}

nlohmann::json metrics_to_json(const RunResult& r) {
  nlohmann::json dist = nlohmann::json::object();
  for (const auto& [id, d] : r.metrics.distance) dist[std::to_string(id)] = d;
  nlohmann::json waves = nlohmann::json::array();
  for (const WaveTiming& w : r.metrics.waves)
    waves.push_back({{"wave", w.index}, {"start_s", w.start}, {"end_s", w.end}, {"actions", w.actions}});
  return {{"success", r.success},
          {"failure", r.failure},
          {"makespan_s", r.metrics.makespan},
          {"distance_m", dist},
          {"total_distance_m", r.metrics.total_distance},
          {"collisions", r.metrics.collisions},
          {"dock_attempts", r.metrics.dock_attempts},
          {"waves", waves}};
}

namespace {

std::string square_points(const Pose2d& p, double scale, double ox, double oy) {
  std::string pts;
  char buf[64];
  const double h = kModuleWidth / 2;
  for (const Vector2d& c : {Vector2d(h, h), Vector2d(-h, h), Vector2d(-h, -h), Vector2d(h, -h)}) {
    const Vector2d w = p.transform(c);
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", (w.x() - ox) * scale, (oy - w.y()) * scale);
    pts += buf;
  }
  return pts;
}

}  // namespace

std::string run_to_svg(const RunResult& r) {
  constexpr double scale = 600.0;  // px per meter
  constexpr double margin = 0.1;
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  auto extend = [&](const Pose2d& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  };
  for (const auto& [id, p] : r.initial.pose) extend(p);
  for (const TrajectorySample& s : r.trajectory) extend(s.pose);
  if (!std::isfinite(min_x)) min_x = max_x = min_y = max_y = 0.0;
  const double ox = min_x - margin, oy = max_y + margin;
  const double width = (max_x - min_x + 2 * margin) * scale;
  const double height = (max_y - min_y + 2 * margin) * scale;

  std::ostringstream svg;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  svg << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // One trace per module.
  std::map<ModuleId, std::vector<Vector2d>> paths;
  for (const TrajectorySample& s : r.trajectory) {
    auto& pts = paths[s.id];
    if (pts.empty() || (pts.back() - s.pose.translation()).norm() > 2e-3) pts.push_back(s.pose.translation());
  }
  // Round caps turn the trace of a module that never moved into a dot.
  svg << "<g id=\"paths\" fill=\"none\" stroke-width=\"1.5\" stroke-linecap=\"round\">\n";
  for (auto& [id, pts] : paths) {
    if (pts.size() == 1) pts.push_back(pts.front());
    svg << "<polyline data-module=\"" << id << "\" stroke=\"#1f77b4\" points=\"";
    for (const Vector2d& p : pts) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", (p.x() - ox) * scale, (oy - p.y()) * scale);
      svg << buf;
    }
    svg << "\"/>\n";
  }
  svg << "</g>\n<g id=\"start\" fill=\"none\" stroke=\"#888\" stroke-dasharray=\"4 3\">\n";
  for (const auto& [id, p] : r.initial.pose)
    svg << "<polygon data-module=\"" << id << "\" points=\"" << square_points(p, scale, ox, oy) << "\"/>\n";
  svg << "</g>\n";
  if (!r.schedule.waves.empty()) {
    svg << "<g id=\"final\" fill=\"#ffbf80\" fill-opacity=\"0.6\" stroke=\"#333\">\n";
    for (const auto& [id, p] : r.final_world.pose)
      svg << "<polygon data-module=\"" << id << "\" points=\"" << square_points(p, scale, ox, oy) << "\"/>\n";
    svg << "</g>\n";
  }
  svg << "<g id=\"labels\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">\n";
  for (const auto& [id, p] : r.final_world.pose.empty() ? r.initial.pose : r.final_world.pose) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\">%d</text>\n", (p.x() - ox) * scale,
                  (oy - p.y()) * scale + 4, id);
    svg << buf;
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void emit_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + (dir / name).string());
  };
  nlohmann::json schedule = schedule_to_json(r.schedule);
  schedule["root"] = r.root;
  schedule["mapping"] = mapping_to_json(r.mapping);
  write("schedule.json", schedule.dump(2) + "\n");
  write("trajectory.csv", trajectory_csv(r));
  write("events.jsonl", events_jsonl(r));
  write("metrics.json", metrics_to_json(r).dump(2) + "\n");
  write("paths.svg", run_to_svg(r));
}

}  // namespace smores
