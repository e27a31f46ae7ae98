#pragma once

// Entry point of the command-line tool: argument parsing, output placement,
// error-to-exit-code mapping, manifests and the concurrent sweep.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sonic/cli/artifacts.hpp"
#include "sonic/cli/commands.hpp"
#include "sonic/cli/config.hpp"

namespace sonic::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kFailed = 2 };

namespace fs = std::filesystem;

inline fs::path resolve_output(const Node& root, const std::string& subcommand, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (root.has("output_dir")) return root.string("output_dir");
  const auto name = root.string("name", subcommand);
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..")
    throw ValidationError("'name' must be a plain, non-empty file name");
  const char* env = std::getenv("SONIC_OUTPUT_ROOT");
  const fs::path base = env && *env ? fs::path(env) : fs::path("sonic_runs");
  return base / name;
}

inline void write_manifest(const fs::path& dir, const json& m) {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
}

/// Runs one config. Exit 1: nothing is written. Exit 2: only the manifest, carrying the error.
inline int run_config(const std::string& subcommand, const fs::path& config_file, const std::string& out_override,
                      std::ostream& log = std::cerr) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = utc_timestamp();
  json cfg;
  fs::path dir;
  json manifest;
  auto fail = [&](int code, const std::string& kind, const std::string& what) {
    log << "sonic_cli " << subcommand << ": " << kind << ": " << what << " [" << config_file.string() << "]\n";
    return code;
  };
  try {
    cfg = load_config(config_file);
    const Node root(cfg, "");
    check_header(root, subcommand);
    const auto it = runners().find(subcommand);
    if (it == runners().end()) throw ValidationError("unknown subcommand '" + subcommand + "'");
    dir = resolve_output(root, subcommand, out_override);
    manifest = {{"tool", kToolName},
                {"version", kToolVersion},
                {"schema_version", kSchemaVersion},
                {"subcommand", subcommand},
                {"config_file", config_file.string()},
                {"config", cfg},
                {"started_utc", started}};
    Artifacts art;
    RunContext ctx{root, art, root.boolean("svg", true), root.boolean("svg_timestamp", false)};
    it->second(ctx);
    manifest["outputs"] = art.flush(dir);
    manifest["status"] = "ok";
    manifest["exit_code"] = kOk;
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, manifest);
    log << "sonic_cli " << subcommand << ": wrote " << art.size() << " artifacts and manifest.json to "
        << dir.string() << '\n';
    return kOk;
  } catch (const ValidationError& e) {
    return fail(kInvalid, "invalid config", e.what());
  } catch (const DomainError& e) {
    return fail(kInvalid, "invalid parameters", e.what());
  } catch (const ConfigurationError& e) {
    return fail(kInvalid, "inconsistent parameters", e.what());
  } catch (const json::exception& e) {
    return fail(kInvalid, "invalid config", e.what());
  } catch (const std::exception& e) {
    fail(kFailed, "solver failure", e.what());
    if (dir.empty()) return kFailed;
    manifest["outputs"] = json::array();
    manifest["status"] = "failed";
    manifest["exit_code"] = kFailed;
    manifest["error"] = e.what();
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
      write_manifest(dir, manifest);
    } catch (const std::exception& w) {
      log << "sonic_cli: " << w.what() << '\n';
    }
    return kFailed;
  }
}

/// Runs the listed configs on a thread pool, each into its own subdirectory.
/// The sweep's exit code is the worst of its runs.
inline int run_sweep(const fs::path& config_file, const std::string& out_override, std::ostream& log = std::cerr) {
  struct Job {
    fs::path config;
    std::string subcommand;
    fs::path dir;
    int code = kOk;
  };
  std::vector<Job> jobs;
  fs::path dir;
  json cfg;
  unsigned threads = 0;
  try {
    cfg = load_config(config_file);
    const Node root(cfg, "");
    check_header(root, "sweep");
    root.allow({"schema_version", "subcommand", "name", "output_dir", "runs", "jobs"});
    dir = resolve_output(root, "sweep", out_override);
    threads = static_cast<unsigned>(root.integer("jobs", 0, 0));
    const auto runs = root.strings("runs");
    if (runs.empty()) throw ValidationError("'runs' must list at least one config");
    for (std::size_t k = 0; k < runs.size(); ++k) {
      fs::path p = runs[k];
      if (p.is_relative()) p = config_file.parent_path() / p;
      const auto sub_cfg = load_config(p);
      if (!sub_cfg.is_object() || !sub_cfg.contains("subcommand") || !sub_cfg["subcommand"].is_string())
        throw ValidationError("run config " + p.string() + " has no 'subcommand'");
      const auto sub = sub_cfg["subcommand"].get<std::string>();
      if (!runners().count(sub)) throw ValidationError("run config " + p.string() + ": subcommand '" + sub + "' cannot be swept");
      char idx[16];
      std::snprintf(idx, sizeof idx, "%03zu_", k);
      jobs.push_back({p, sub, dir / (idx + p.stem().string())});
    }
  } catch (const std::exception& e) {
    log << "sonic_cli sweep: invalid config: " << e.what() << " [" << config_file.string() << "]\n";
    return kInvalid;
  }

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < jobs.size();) {
      std::ostringstream local;
      jobs[k].code = run_config(jobs[k].subcommand, jobs[k].config, jobs[k].dir.string(), local);
      std::lock_guard lock(log_mutex);
      log << local.str();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kOk;
  json runs = json::array();
  for (const auto& j : jobs) {
    worst = std::max(worst, j.code);
    runs.push_back({{"config", j.config.string()},
                    {"subcommand", j.subcommand},
                    {"output_dir", j.dir.string()},
                    {"exit_code", j.code}});
  }
  try {
    write_manifest(dir, {{"tool", kToolName},
                         {"version", kToolVersion},
                         {"schema_version", kSchemaVersion},
                         {"subcommand", "sweep"},
                         {"config_file", config_file.string()},
                         {"config", cfg},
                         {"threads", threads},
                         {"runs", runs},
                         {"exit_code", worst}});
  } catch (const std::exception& e) {
    log << "sonic_cli sweep: " << e.what() << '\n';
    return kFailed;
  }
  return worst;
}

inline int main(int argc, char** argv) {
  CLI::App app{"Sonic-point and mixed-type flow toolkit. Every run is described by one JSON config file."};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  std::string config, out;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"phase-portrait", "critical trajectories and level sets in the (u, E) plane"},
      {"profile", "integrate a 1D profile and verify the monotonicity lemma"},
      {"kz-check", "evaluate the KZ condition along a profile"},
      {"keldysh-solve", "solve the Keldysh-type model problem and scan psi_xx near the sonic line"},
      {"mixed-solve", "solve the linearized mixed-type channel problem"},
      {"shock-polar", "steady shock polar, detachment and sonic angles"},
      {"geometry", "sonic circle and local coordinates of a self-similar state"},
      {"sweep", "run many configs concurrently into separate directories"}};
  for (const auto& [name, help] : subs) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("-c,--config", config, "JSON config file")->required();
    sc->add_option("-o,--out", out, "output directory (overrides the config and SONIC_OUTPUT_ROOT)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }
  const auto name = app.get_subcommands().front()->get_name();
  if (name == "sweep") return run_sweep(config, out);
  return run_config(name, config, out);
}

}  // namespace sonic::cli
