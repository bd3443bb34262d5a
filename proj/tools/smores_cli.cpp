// Command-line front end: each subcommand runs one pipeline stage and writes
// JSON that the next stage accepts.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smores/assignment.hpp"
#include "smores/layout.hpp"
#include "smores/scenario.hpp"
#include "smores/scheduler.hpp"
#include "smores/sim.hpp"
#include "smores/topology.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("parse error in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

smores::Scenario load(const std::string& path, const std::string& config) {
  smores::Scenario s = smores::load_scenario(path);
  if (!config.empty()) {
    try {
      smores::apply_config_overrides(read_json(config), s);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("config " + config + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw InvalidInput("config " + config + ": " + e.what());
    }
  }
  return s;
}

struct Staged {
  smores::ModuleId root = 0;
  smores::UnfoldedLayout layout;
  smores::Mapping mapping;
};

Staged stage_assign(const smores::Scenario& s) {
  Staged st;
  st.root = smores::select_root_module(s.modules);
  st.layout = smores::unfold(s.target);
  st.mapping = smores::assign(st.layout, smores::to_root_frame(s.modules, st.root), {st.layout.root, st.root});
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-assembly planner and simulator for SMORES-EP style modules"};
  app.require_subcommand(1);
  std::string config;
  app.add_option("--config", config, "JSON file with \"motion\"/\"sim\" parameter overrides");

  std::string scenario_path, out_path, mapping_path, svg_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario and report every violation");
  validate->add_option("scenario", scenario_path)->required();

  auto* unfold_cmd = app.add_subcommand("unfold", "Unfold the target topology onto the plane");
  unfold_cmd->add_option("scenario", scenario_path)->required();
  unfold_cmd->add_option("-o,--output", out_path, "layout JSON (default stdout)");
  unfold_cmd->add_option("--svg", svg_path, "also write an SVG of the layout");

  auto* assign_cmd = app.add_subcommand("assign", "Pick the root and map target vertices to modules");
  assign_cmd->add_option("scenario", scenario_path)->required();
  assign_cmd->add_option("-o,--output", out_path, "mapping JSON (default stdout)");

  auto* plan_cmd = app.add_subcommand("plan", "Build the wave schedule");
  plan_cmd->add_option("scenario", scenario_path)->required();
  plan_cmd->add_option("--mapping", mapping_path, "mapping JSON from `assign` (recomputed when omitted)");
  plan_cmd->add_option("-o,--output", out_path, "schedule JSON (default stdout)");

  auto* run_cmd = app.add_subcommand("run", "Plan and execute a scenario in simulation");
  run_cmd->add_option("scenario", scenario_path)->required();
  run_cmd->add_option("-o,--output", out_path, "output directory")->required();

  std::string init_path, goal_path, actions_path;
  auto* reconfig_cmd = app.add_subcommand("reconfig", "Parallelize a reconfiguration action list");
  reconfig_cmd->add_option("init", init_path, "initial configuration graph JSON")->required();
  reconfig_cmd->add_option("goal", goal_path, "goal configuration graph JSON")->required();
  reconfig_cmd->add_option("actions", actions_path, "{\"goal_to_init\": {...}, \"actions\": [...]}")->required();
  reconfig_cmd->add_option("-o,--output", out_path, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const smores::Scenario s = load(scenario_path, config);
      std::printf("ok: %zu modules, %zu helpers, root candidate %d\n", s.modules.size(), s.helpers.size(),
                  smores::select_root_module(s.modules));
      return kOk;
    }
    if (*unfold_cmd) {
      const smores::Scenario s = load(scenario_path, config);
      const smores::UnfoldedLayout layout = smores::unfold(s.target);
      write_text(out_path, smores::layout_to_json(layout).dump(2) + "\n");
      if (!svg_path.empty()) write_text(svg_path, smores::layout_to_svg(layout));
      return kOk;
    }
    if (*assign_cmd) {
      const smores::Scenario s = load(scenario_path, config);
      const Staged st = stage_assign(s);
      nlohmann::json j = smores::mapping_to_json(st.mapping);
      j["root"] = st.root;
      write_text(out_path, j.dump(2) + "\n");
      return kOk;
    }
    if (*plan_cmd) {
      const smores::Scenario s = load(scenario_path, config);
      smores::Mapping mapping;
      if (mapping_path.empty()) {
        mapping = stage_assign(s).mapping;
      } else {
        try {
          mapping = smores::mapping_from_json(read_json(mapping_path));
        } catch (const nlohmann::json::exception& e) {
          throw InvalidInput("mapping " + mapping_path + ": " + e.what());
        }
      }
      smores::Schedule schedule = smores::plan_assembly(s.target, mapping);
      std::vector<smores::ModuleId> helpers;
      smores::ModuleSet everyone = s.modules;
      for (const auto& [id, p] : s.helpers.pose) {
        helpers.push_back(id);
        everyone.pose[id] = p;
      }
      schedule = smores::insert_helper_actions(schedule, helpers, &everyone);
      write_text(out_path, smores::schedule_to_json(schedule).dump(2) + "\n");
      return kOk;
    }
    if (*run_cmd) {
      const smores::Scenario s = load(scenario_path, config);
      const smores::RunResult r = smores::run_scenario(s);
      smores::emit_outputs(r, out_path);
      std::printf("%s: %s, makespan %.2f s, %zu waves, %zu collisions\n", s.name.c_str(),
                  r.success ? "success" : ("FAILED (" + r.failure + ")").c_str(), r.metrics.makespan,
                  r.schedule.waves.size(), r.metrics.collisions);
      return r.success ? kOk : kRuntime;
    }
    if (*reconfig_cmd) {
      smores::ConfigGraph init, goal;
      smores::Mapping goal_to_init;
      std::vector<smores::AssemblyAction> actions;
      try {
        smores::from_json(read_json(init_path), init);
        smores::from_json(read_json(goal_path), goal);
        const nlohmann::json a = read_json(actions_path);
        for (const auto& [k, v] : a.at("goal_to_init").items())
          goal_to_init.target_to_module[std::stoi(k)] = v.get<smores::ModuleId>();
        for (const auto& act : a.at("actions")) actions.push_back(smores::action_from_json(act));
      } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(e.what());
      } catch (const smores::TopologyError& e) {
        throw InvalidInput(e.what());
      }
      const smores::Schedule schedule = smores::parallelize_reconfiguration(init, goal, goal_to_init, actions);
      std::filesystem::create_directories(out_path);
      write_text((std::filesystem::path(out_path) / "schedule.json").string(),
                 smores::schedule_to_json(schedule).dump(2) + "\n");
      std::printf("%zu waves, %zu actions\n", schedule.waves.size(), schedule.action_count());
      return kOk;
    }
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const smores::ScenarioError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
