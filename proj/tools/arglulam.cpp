// SPDX-License-Identifier: Apache-2.0
//
// arglulam: command-line entry point.
//
// Exit codes: 0 success, 1 validation error, 2 IO error, 3 registry server
// unreachable or returned an error.
#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "arglulam/driftsim.hpp"
#include "arglulam/evaluation.hpp"
#include "arglulam/fiducial.hpp"
#include "arglulam/geometry.hpp"
#include "arglulam/json_io.hpp"
#include "arglulam/registry.hpp"
#include "arglulam/server.hpp"
#include "httplib.h"

namespace {

using namespace arglulam;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitClient = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure:
    case ErrorCode::kStorageFailure: return kExitIo;
    default: return kExitValidation;
  }
}

/// Writes to the named path, or stdout for "-".
void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  write_text_file(path, content);
}

struct LayoutArgs {
  std::string preset;
  double length = 0.0;
  int count = 0;
  double spacing = 0.0;
  std::string placement = "edge_top";
  std::string kind = "straight";
  double twist_deg = 0.0;
  double width = 0.2;
  double height = 0.4;
  double marker_size = kDefaultMarkerSize;
  int first_id = 0;
};

MarkerLayout build_layout(const LayoutArgs& a) {
  if (!a.preset.empty()) {
    const BeamPreset p = beam_preset(a.preset);
    return generate_layout(p.beam, p.count, p.spacing, p.placement, a.marker_size, a.first_id);
  }
  if (a.length <= 0.0 || a.count == 0 || a.spacing <= 0.0)
    throw Error(ErrorCode::kValidationFailed,
                "either --preset or all of --length, --count and --spacing are required");
  BeamSpec beam;
  beam.id = "custom";
  beam.length = a.length;
  beam.kind = beam_kind_from_string(a.kind);
  beam.total_twist = deg_to_rad(a.twist_deg);
  beam.width = a.width;
  beam.height = a.height;
  return generate_layout(beam, a.count, a.spacing, placement_from_string(a.placement), a.marker_size,
                         a.first_id);
}

void add_layout_flags(CLI::App* cmd, LayoutArgs& a) {
  cmd->add_option("--preset", a.preset, "Beam preset")
      ->check(CLI::IsMember({"straight-14", "twisted-24", "chamfered-40"}));
  cmd->add_option("--length", a.length, "Beam length (m)");
  cmd->add_option("--count", a.count, "Number of markers");
  cmd->add_option("--spacing", a.spacing, "Marker spacing (m)");
  cmd->add_option("--placement", a.placement, "edge_top | edge_side | around")
      ->check(CLI::IsMember({"edge_top", "edge_side", "around"}));
  cmd->add_option("--kind", a.kind, "straight | twisted | chamfered")
      ->check(CLI::IsMember({"straight", "twisted", "chamfered"}));
  cmd->add_option("--twist-deg", a.twist_deg, "Total twist over the length (degrees)");
  cmd->add_option("--width", a.width, "Cross-section width (m)");
  cmd->add_option("--height", a.height, "Cross-section height (m)");
  cmd->add_option("--marker-size", a.marker_size, "Marker side length (m)");
  cmd->add_option("--first-id", a.first_id, "First marker id");
}

// ---------------------------------------------------------------------------
// serve

int run_server(const std::string& data_dir, const std::string& host, int port,
               const std::string& port_file) {
  Registry registry(data_dir);
  httplib::Server server;
  install_routes(server, registry);

  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    std::cerr << "error: cannot bind " << host << ":" << port << "\n";
    return kExitIo;
  }
  if (!port_file.empty()) {
    const std::string tmp = port_file + ".tmp";
    write_text_file(tmp, std::to_string(bound) + "\n");
    std::filesystem::rename(tmp, port_file);
  }
  std::cerr << "arglulam registry on http://" << host << ":" << bound << " (data " << data_dir << ")\n";

  // SIGINT/SIGTERM -> stop(); in-flight requests complete first.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&server, set] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  const bool ok = server.listen_after_bind();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return ok ? kExitOk : kExitIo;
}

// ---------------------------------------------------------------------------
// registry client

struct ClientResult {
  int status = 0;
  std::string body;
};

struct ServerUrl {
  std::string host = "127.0.0.1";
  int port = 8080;
};

ServerUrl parse_server(const std::string& url) {
  std::string rest = url;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  ServerUrl out;
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    out.host = rest;
    out.port = 80;
  } else {
    out.host = rest.substr(0, colon);
    out.port = std::stoi(rest.substr(colon + 1));
  }
  return out;
}

class RegistryClient {
 public:
  explicit RegistryClient(const std::string& url) {
    const ServerUrl s = parse_server(url);
    client_ = std::make_unique<httplib::Client>(s.host, s.port);
    client_->set_connection_timeout(5);
    client_->set_read_timeout(30);
  }

  std::optional<ClientResult> get(const std::string& path) { return wrap(client_->Get(path)); }
  std::optional<ClientResult> del(const std::string& path) { return wrap(client_->Delete(path)); }
  std::optional<ClientResult> post(const std::string& path, const std::string& body) {
    return wrap(client_->Post(path, body, "application/json"));
  }

 private:
  static std::optional<ClientResult> wrap(const httplib::Result& r) {
    if (!r) return std::nullopt;
    return ClientResult{r->status, r->body};
  }
  std::unique_ptr<httplib::Client> client_;
};

/// Prints the response body; 2xx -> 0, anything else (or no answer) -> 3.
int finish_client(const std::optional<ClientResult>& r, const std::string& out_path = "-") {
  if (!r) {
    std::cerr << "error: registry server unreachable\n";
    return kExitClient;
  }
  if (r->status < 200 || r->status >= 300) {
    std::cout << r->body << (r->body.empty() || r->body.back() != '\n' ? "\n" : "");
    return kExitClient;
  }
  write_output(out_path, r->body);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-marker AR alignment toolkit for glulam fabrication"};
  app.require_subcommand(1);

  // layout
  LayoutArgs layout_args;
  std::string layout_out;
  auto* layout_cmd = app.add_subcommand("layout", "Generate a marker layout JSON");
  add_layout_flags(layout_cmd, layout_args);
  layout_cmd->add_option("--out", layout_out, "Output path ('-' for stdout)")->required();

  // markers
  std::string markers_layout, markers_out;
  SheetSpec sheet;
  bool no_label = false;
  auto* markers_cmd = app.add_subcommand("markers", "Render a printable SVG marker sheet");
  markers_cmd->add_option("--layout", markers_layout, "Layout JSON file")->required();
  markers_cmd->add_option("--module-mm", sheet.module_size, "Grid cell size (mm)");
  markers_cmd->add_option("--quiet-mm", sheet.quiet_zone, "Quiet zone around each marker (mm)");
  markers_cmd->add_option("--columns", sheet.columns, "Markers per row");
  markers_cmd->add_flag("--no-label", no_label, "Omit the text label under each marker");
  markers_cmd->add_option("--out", markers_out, "Output SVG path ('-' for stdout)")->required();

  // simulate
  std::string sim_layout, sim_preset, sim_profile = "factory", sim_out;
  double sim_duration = 120.0;
  std::uint64_t sim_seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a fabrication walk-along session");
  auto* sim_layout_opt = sim_cmd->add_option("--layout", sim_layout, "Layout JSON file");
  sim_cmd->add_option("--preset", sim_preset, "Beam preset instead of a layout file")
      ->check(CLI::IsMember({"straight-14", "twisted-24", "chamfered-40"}))
      ->excludes(sim_layout_opt);
  sim_cmd->add_option("--profile", sim_profile, "lab | factory")->check(CLI::IsMember({"lab", "factory"}));
  sim_cmd->add_option("--duration", sim_duration, "Session length (s)");
  sim_cmd->add_option("--seed", sim_seed, "Random seed")->required();
  sim_cmd->add_option("--out", sim_out, "Output session JSON ('-' for stdout)")->required();

  // evaluate
  std::string eval_session, eval_strategy = "interpolated", eval_out;
  double eval_tol = 2.0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Overlay deviation report for a session");
  eval_cmd->add_option("--session", eval_session, "Session JSON file")->required();
  eval_cmd->add_option("--strategy", eval_strategy, "interpolated | global_fit")
      ->check(CLI::IsMember({"interpolated", "global_fit"}));
  eval_cmd->add_option("--tolerance-mm", eval_tol, "Tolerance on mean deviation (mm)");
  eval_cmd->add_option("--out", eval_out, "Output CSV ('-' for stdout)")->required();

  // sweep
  double sweep_length = feet_to_m(40);
  std::string sweep_configs = "0.762,1.2192,1.8288", sweep_profile = "factory",
              sweep_strategy = "interpolated", sweep_placement = "edge_top", sweep_out;
  int sweep_runs = 50;
  std::uint64_t sweep_seed = 0;
  double sweep_duration = 120.0;
  unsigned sweep_threads = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Mean deviation versus marker spacing");
  sweep_cmd->add_option("--length", sweep_length, "Beam length (m)");
  sweep_cmd->add_option("--configs", sweep_configs,
                        "Comma-separated spacing[:count[:placement]] items; count defaults to "
                        "filling the beam");
  sweep_cmd->add_option("--placement", sweep_placement, "Default placement")
      ->check(CLI::IsMember({"edge_top", "edge_side", "around"}));
  sweep_cmd->add_option("--runs", sweep_runs, "Sessions per configuration");
  sweep_cmd->add_option("--seed", sweep_seed, "Base seed (run r uses seed + r)")->required();
  sweep_cmd->add_option("--profile", sweep_profile, "lab | factory")->check(CLI::IsMember({"lab", "factory"}));
  sweep_cmd->add_option("--strategy", sweep_strategy, "interpolated | global_fit")
      ->check(CLI::IsMember({"interpolated", "global_fit"}));
  sweep_cmd->add_option("--duration", sweep_duration, "Session length (s)");
  sweep_cmd->add_option("--threads", sweep_threads, "Parallel sessions");
  sweep_cmd->add_option("--out", sweep_out, "Output CSV ('-' for stdout)")->required();

  // serve
  std::string serve_data, serve_host = "127.0.0.1", serve_port_file;
  int serve_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the beam registry HTTP service");
  serve_cmd->add_option("--data", serve_data, "Data directory (default $ARGLULAM_DATA)");
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Port (0 picks a free one)");
  serve_cmd->add_option("--port-file", serve_port_file, "Write the bound port to this file");

  // beam client
  std::string server_url = "http://127.0.0.1:8080";
  auto* beam_cmd = app.add_subcommand("beam", "Registry client");
  beam_cmd->add_option("--server", server_url, "Registry base URL");
  beam_cmd->require_subcommand(1);

  std::string up_name, up_preset, up_spec;
  LayoutRequest up_layout;
  std::string up_placement = "edge_top";
  auto* upload_cmd = beam_cmd->add_subcommand("upload", "Create a beam from a preset or a BeamSpec file");
  upload_cmd->add_option("--name", up_name, "Beam name");
  auto* up_preset_opt = upload_cmd->add_option("--preset", up_preset, "Beam preset")
                            ->check(CLI::IsMember({"straight-14", "twisted-24", "chamfered-40"}));
  upload_cmd->add_option("--spec", up_spec, "BeamSpec JSON file")->excludes(up_preset_opt);
  upload_cmd->add_option("--count", up_layout.count, "Number of markers");
  upload_cmd->add_option("--spacing", up_layout.spacing, "Marker spacing (m)");
  upload_cmd->add_option("--placement", up_placement, "edge_top | edge_side | around")
      ->check(CLI::IsMember({"edge_top", "edge_side", "around"}));
  upload_cmd->add_option("--marker-size", up_layout.marker_size, "Marker side length (m)");

  std::string get_id;
  auto* get_cmd = beam_cmd->add_subcommand("get", "Fetch a beam record");
  get_cmd->add_option("beam_id", get_id, "Beam id")->required();

  auto* list_cmd = beam_cmd->add_subcommand("list", "List beams");

  std::string del_id;
  auto* del_cmd = beam_cmd->add_subcommand("delete", "Delete a beam (marker ids stay retired)");
  del_cmd->add_option("beam_id", del_id, "Beam id")->required();

  int resolve_id = 0;
  auto* resolve_cmd = beam_cmd->add_subcommand("resolve", "Resolve a scanned marker id");
  resolve_cmd->add_option("marker_id", resolve_id, "Marker id")->required();

  std::string sheet_id, sheet_out = "-";
  auto* sheet_cmd = beam_cmd->add_subcommand("sheet", "Download the printable marker sheet");
  sheet_cmd->add_option("beam_id", sheet_id, "Beam id")->required();
  sheet_cmd->add_option("--out", sheet_out, "Output SVG path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*layout_cmd) {
      write_output(layout_out, dump_document(build_layout(layout_args)));
      return kExitOk;
    }
    if (*markers_cmd) {
      sheet.label = !no_label;
      const auto layout = load_document<MarkerLayout>(markers_layout, "layout");
      write_output(markers_out, render_sheet(layout, sheet));
      return kExitOk;
    }
    if (*sim_cmd) {
      MarkerLayout layout;
      if (!sim_preset.empty()) {
        layout = beam_preset(sim_preset).layout();
      } else if (!sim_layout.empty()) {
        layout = load_document<MarkerLayout>(sim_layout, "layout");
      } else {
        throw Error(ErrorCode::kValidationFailed, "--layout or --preset is required");
      }
      const SessionLog log = run_session(make_session(layout, profile_by_name(sim_profile), sim_seed, sim_duration));
      write_output(sim_out, dump_document(log));
      return kExitOk;
    }
    if (*eval_cmd) {
      const auto log = load_document<SessionLog>(eval_session, "session");
      const DeviationReport report =
          deviation_report(log, strategy_from_string(eval_strategy), ToleranceSpec{eval_tol});
      write_output(eval_out, to_csv(report));
      if (eval_out != "-") std::cout << json(report).dump() << "\n";
      return kExitOk;
    }
    if (*sweep_cmd) {
      BeamSpec beam;
      beam.id = "sweep";
      beam.length = sweep_length;
      std::vector<SweepConfig> configs;
      std::stringstream items(sweep_configs);
      std::string item;
      while (std::getline(items, item, ',')) {
        if (item.empty()) continue;
        std::vector<std::string> parts;
        std::stringstream fields(item);
        std::string f;
        while (std::getline(fields, f, ':')) parts.push_back(f);
        SweepConfig sc;
        try {
          sc.spacing = std::stod(parts.at(0));
          sc.count = parts.size() > 1 && !parts[1].empty() ? std::stoi(parts[1])
                                                           : count_for_spacing(sweep_length, sc.spacing);
        } catch (const std::exception&) {
          throw Error(ErrorCode::kValidationFailed, "malformed sweep config '" + item + "'");
        }
        sc.placement = placement_from_string(parts.size() > 2 ? parts[2] : sweep_placement);
        configs.push_back(sc);
      }
      SweepOptions options;
      options.profile = profile_by_name(sweep_profile);
      options.strategy = strategy_from_string(sweep_strategy);
      options.duration = sweep_duration;
      options.threads = sweep_threads;
      const SweepResult result = sweep_spacing(beam, configs, sweep_runs, sweep_seed, options);
      write_output(sweep_out, to_csv(result));
      return kExitOk;
    }
    if (*serve_cmd) {
      if (serve_data.empty()) {
        const char* env = std::getenv("ARGLULAM_DATA");
        if (env == nullptr || *env == '\0')
          throw Error(ErrorCode::kValidationFailed, "--data or ARGLULAM_DATA is required");
        serve_data = env;
      }
      return run_server(serve_data, serve_host, serve_port, serve_port_file);
    }
    if (*beam_cmd) {
      RegistryClient client(server_url);
      if (*upload_cmd) {
        json body;
        if (!up_preset.empty()) {
          body = {{"preset", up_preset}};
          if (!up_name.empty()) body["name"] = up_name;
        } else if (!up_spec.empty()) {
          up_layout.placement = placement_from_string(up_placement);
          body = {{"name", up_name},
                  {"spec", load_document<BeamSpec>(up_spec, "beam spec")},
                  {"layout", up_layout}};
        } else {
          throw Error(ErrorCode::kValidationFailed, "--preset or --spec is required");
        }
        return finish_client(client.post("/api/beams", body.dump()));
      }
      if (*get_cmd) return finish_client(client.get("/api/beams/" + get_id));
      if (*list_cmd) return finish_client(client.get("/api/beams"));
      if (*del_cmd) return finish_client(client.del("/api/beams/" + del_id));
      if (*resolve_cmd) return finish_client(client.get("/api/markers/" + std::to_string(resolve_id)));
      if (*sheet_cmd) return finish_client(client.get("/api/beams/" + sheet_id + "/markers.svg"), sheet_out);
    }
  } catch (const arglulam::Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
