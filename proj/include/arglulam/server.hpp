// SPDX-License-Identifier: Apache-2.0
//
// HTTP/1.1 JSON API over a Registry.
//
//   POST   /api/beams                  create, 201 + record
//   GET    /api/beams                  200 [{beam_id, name, count}]
//   GET    /api/beams/{id}             200 record | 404
//   DELETE /api/beams/{id}             204 | 404
//   GET    /api/beams/{id}/markers.svg 200 image/svg+xml | 404
//   GET    /api/markers/{marker_id}    200 {beam_id, anchor_index, anchor} | 404
//
// Errors are {"error": code, "message": text}.
#pragma once

#include <string>

#include "arglulam/error.hpp"
#include "arglulam/json_io.hpp"
#include "arglulam/registry.hpp"

// After the Eigen-based headers: <resolv.h> defines a `_res` macro.
#include "httplib.h"

namespace arglulam {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownMarker: return 404;
    case ErrorCode::kIdSpaceExhausted: return 409;
    case ErrorCode::kStorageFailure:
    case ErrorCode::kIoFailure: return 500;
    default: return 400;
  }
}

inline std::string error_body(std::string_view code, const std::string& message) {
  return json{{"error", code}, {"message", message}}.dump();
}

/// Body of POST /api/beams: either {"name", "preset"} or
/// {"name", "spec": BeamSpec, "layout": {count, spacing, placement, marker_size}}.
struct CreateBeamRequest {
  std::string name;
  BeamSpec spec;
  LayoutRequest layout;
};

inline CreateBeamRequest parse_create_request(const std::string& body) {
  try {
    const json j = json::parse(body);
    CreateBeamRequest req;
    req.name = j.value("name", std::string{});
    if (j.contains("preset")) {
      const BeamPreset preset = beam_preset(j.at("preset").get<std::string>());
      req.spec = preset.beam;
      req.spec.id.clear();
      req.layout = {preset.count, preset.spacing, preset.placement, kDefaultMarkerSize};
      if (req.name.empty()) req.name = preset.name;
    } else {
      req.spec = j.at("spec").get<BeamSpec>();
      req.layout = j.at("layout").get<LayoutRequest>();
    }
    if (req.name.empty()) throw Error(ErrorCode::kValidationFailed, "beam name is required");
    return req;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("malformed request: ") + e.what());
  }
}

inline SheetSpec sheet_from_query(const httplib::Request& req) {
  SheetSpec sheet;
  try {
    if (req.has_param("module_mm")) sheet.module_size = std::stod(req.get_param_value("module_mm"));
    if (req.has_param("quiet_mm")) sheet.quiet_zone = std::stod(req.get_param_value("quiet_mm"));
    if (req.has_param("columns")) sheet.columns = std::stoi(req.get_param_value("columns"));
    if (req.has_param("label")) sheet.label = req.get_param_value("label") != "0";
  } catch (const std::exception&) {
    throw Error(ErrorCode::kValidationFailed, "malformed sheet parameters");
  }
  validate(sheet);
  return sheet;
}

/// Installs the API routes on `server`. The registry must outlive it.
inline void install_routes(httplib::Server& server, Registry& registry) {
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(error_body(to_string(e.code()), e.what()), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_body("Internal", e.what()), "application/json");
      }
    };
  };

  server.Post("/api/beams", guarded([&registry](const httplib::Request& req, httplib::Response& res) {
    const CreateBeamRequest create = parse_create_request(req.body);
    const BeamRecord record = registry.create_beam(create.name, create.spec, create.layout);
    res.status = 201;
    res.set_content(dump_document(record), "application/json");
  }));

  server.Get("/api/beams", guarded([&registry](const httplib::Request&, httplib::Response& res) {
    res.set_content(json(registry.list_beams()).dump(2) + "\n", "application/json");
  }));

  server.Get(R"(/api/beams/([A-Za-z0-9_-]+))",
             guarded([&registry](const httplib::Request& req, httplib::Response& res) {
               res.set_content(registry.get_beam_document(req.matches[1]), "application/json");
             }));

  server.Delete(R"(/api/beams/([A-Za-z0-9_-]+))",
                guarded([&registry](const httplib::Request& req, httplib::Response& res) {
                  registry.delete_beam(req.matches[1]);
                  res.status = 204;
                }));

  server.Get(R"(/api/beams/([A-Za-z0-9_-]+)/markers\.svg)",
             guarded([&registry](const httplib::Request& req, httplib::Response& res) {
               const SheetSpec sheet = sheet_from_query(req);
               res.set_content(registry.marker_sheet(req.matches[1], sheet), "image/svg+xml");
             }));

  server.Get(R"(/api/markers/(\d{1,9}))", guarded([&registry](const httplib::Request& req, httplib::Response& res) {
               const long id = std::stol(req.matches[1]);
               if (id < 0 || id >= kMarkerIdSpace)
                 throw Error(ErrorCode::kUnknownMarker, "marker id out of range");
               res.set_content(json(registry.resolve_marker(static_cast<int>(id))).dump(2) + "\n",
                               "application/json");
             }));
}

}  // namespace arglulam
