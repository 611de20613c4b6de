// SPDX-License-Identifier: Apache-2.0
//
// File-backed beam registry.
//
// Layout of the data directory:
//   manifest.json          {next_marker_id, next_beam_seq, beam_ids}
//   beams/<beam_id>.json   one immutable record per beam
//   .lock                  flock'ed by the owning process
//
// Every file is replaced atomically (write temp, fsync, rename, fsync dir).
// Create writes the record before the manifest; delete writes the manifest
// before unlinking the record. On open, a record file missing from the
// manifest is adopted if its sequence number is at or past next_beam_seq
// (creation interrupted) and removed otherwise (deletion interrupted).
// Marker ids are never recycled.
#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "arglulam/error.hpp"
#include "arglulam/fiducial.hpp"
#include "arglulam/geometry.hpp"
#include "arglulam/json_io.hpp"

namespace arglulam {

inline constexpr int kMarkerIdSpace = 65536;

struct MarkerBlock {
  int first_id = 0;
  int count = 0;

  bool operator==(const MarkerBlock&) const = default;
  bool contains(int id) const { return id >= first_id && id < first_id + count; }
};

struct BeamRecord {
  std::string beam_id;
  std::string name;
  BeamSpec spec;
  MarkerLayout layout;
  MarkerBlock marker_block;
  std::string created_at;  // UTC, ISO 8601

  bool operator==(const BeamRecord&) const = default;
};

struct LayoutRequest {
  int count = 0;
  double spacing = 0.0;
  PlacementMode placement = PlacementMode::kEdgeTop;
  double marker_size = kDefaultMarkerSize;
};

struct BeamSummary {
  std::string beam_id;
  std::string name;
  int count = 0;
};

struct MarkerResolution {
  std::string beam_id;
  int anchor_index = 0;
  MarkerAnchor anchor;
};

struct StoreManifest {
  int next_marker_id = 0;
  int next_beam_seq = 1;
  std::vector<std::string> beam_ids;
};

inline void to_json(json& j, const MarkerBlock& b) { j = json{{"first_id", b.first_id}, {"count", b.count}}; }
inline void from_json(const json& j, MarkerBlock& b) {
  b.first_id = j.at("first_id").get<int>();
  b.count = j.at("count").get<int>();
}

inline void to_json(json& j, const BeamRecord& r) {
  j = json{{"beam_id", r.beam_id}, {"name", r.name},         {"spec", r.spec},
           {"layout", r.layout},   {"marker_block", r.marker_block}, {"created_at", r.created_at}};
}
inline void from_json(const json& j, BeamRecord& r) {
  r.beam_id = j.at("beam_id").get<std::string>();
  r.name = j.at("name").get<std::string>();
  r.spec = j.at("spec").get<BeamSpec>();
  r.layout = j.at("layout").get<MarkerLayout>();
  r.marker_block = j.at("marker_block").get<MarkerBlock>();
  r.created_at = j.at("created_at").get<std::string>();
}

inline void to_json(json& j, const LayoutRequest& r) {
  j = json{{"count", r.count},
           {"spacing", r.spacing},
           {"placement", std::string(to_string(r.placement))},
           {"marker_size", r.marker_size}};
}
inline void from_json(const json& j, LayoutRequest& r) {
  r.count = j.at("count").get<int>();
  r.spacing = j.at("spacing").get<double>();
  r.placement = placement_from_string(j.value("placement", std::string("edge_top")));
  r.marker_size = j.value("marker_size", kDefaultMarkerSize);
}

inline void to_json(json& j, const BeamSummary& s) {
  j = json{{"beam_id", s.beam_id}, {"name", s.name}, {"count", s.count}};
}
inline void from_json(const json& j, BeamSummary& s) {
  s.beam_id = j.at("beam_id").get<std::string>();
  s.name = j.at("name").get<std::string>();
  s.count = j.at("count").get<int>();
}

inline void to_json(json& j, const MarkerResolution& m) {
  j = json{{"beam_id", m.beam_id}, {"anchor_index", m.anchor_index}, {"anchor", m.anchor}};
}
inline void from_json(const json& j, MarkerResolution& m) {
  m.beam_id = j.at("beam_id").get<std::string>();
  m.anchor_index = j.at("anchor_index").get<int>();
  m.anchor = j.at("anchor").get<MarkerAnchor>();
}

inline void to_json(json& j, const StoreManifest& m) {
  j = json{{"next_marker_id", m.next_marker_id}, {"next_beam_seq", m.next_beam_seq}, {"beam_ids", m.beam_ids}};
}
inline void from_json(const json& j, StoreManifest& m) {
  m.next_marker_id = j.at("next_marker_id").get<int>();
  m.next_beam_seq = j.at("next_beam_seq").get<int>();
  m.beam_ids = j.at("beam_ids").get<std::vector<std::string>>();
}

namespace detail {

inline std::string format_beam_id(int seq) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "b%06d", seq);
  return buf;
}

inline std::optional<int> parse_beam_id(const std::string& id) {
  if (id.size() < 2 || id[0] != 'b') return std::nullopt;
  int seq = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9' || seq > 100000000) return std::nullopt;
    seq = seq * 10 + (id[i] - '0');
  }
  if (format_beam_id(seq) != id) return std::nullopt;
  return seq;
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void fsync_path(const std::filesystem::path& p, int flags) {
  const int fd = ::open(p.c_str(), flags);
  if (fd < 0) throw Error(ErrorCode::kStorageFailure, "cannot open " + p.string());
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw Error(ErrorCode::kStorageFailure, "fsync failed for " + p.string());
}

/// Replaces `target` with `content` so readers see the old or the new file,
/// never a partial one.
inline void atomic_write(const std::filesystem::path& target, const std::string& content) {
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (f == nullptr) throw Error(ErrorCode::kStorageFailure, "cannot write " + tmp.string());
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size() &&
                    std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
    std::fclose(f);
    if (!ok) throw Error(ErrorCode::kStorageFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kStorageFailure, "rename failed: " + ec.message());
  fsync_path(target.parent_path(), O_RDONLY | O_DIRECTORY);
}

}  // namespace detail

/// Thread-safe registry over one data directory. Mutations are serialized;
/// reads share a lock and operate on the in-memory copy of immutable records.
class Registry {
 public:
  explicit Registry(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_ / "beams", ec);
    if (ec) throw Error(ErrorCode::kStorageFailure, "cannot create data directory: " + ec.message());
    lock_fd_ = ::open((dir_ / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
    if (lock_fd_ < 0) throw Error(ErrorCode::kStorageFailure, "cannot open lock file");
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(lock_fd_);
      throw Error(ErrorCode::kStorageFailure, "data directory is in use by another process");
    }
    try {
      recover();
    } catch (...) {
      ::close(lock_fd_);
      throw;
    }
  }

  ~Registry() {
    if (lock_fd_ >= 0) ::close(lock_fd_);
  }

  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  const std::filesystem::path& data_dir() const { return dir_; }

  BeamRecord create_beam(const std::string& name, const BeamSpec& spec, const LayoutRequest& request) {
    std::unique_lock lock(mutex_);
    if (request.count < 2) throw Error(ErrorCode::kValidationFailed, "layout requires at least 2 markers");
    if (manifest_.next_marker_id + request.count > kMarkerIdSpace)
      throw Error(ErrorCode::kIdSpaceExhausted, "not enough marker ids left");

    const int seq = manifest_.next_beam_seq;
    BeamRecord record;
    record.beam_id = detail::format_beam_id(seq);
    record.name = name;
    record.spec = spec;
    if (record.spec.id.empty()) record.spec.id = record.beam_id;
    record.layout = generate_layout(record.spec, request.count, request.spacing, request.placement,
                                    request.marker_size, manifest_.next_marker_id);
    record.marker_block = {manifest_.next_marker_id, request.count};
    record.created_at = detail::utc_now();

    detail::atomic_write(record_path(record.beam_id), dump_document(record));
    StoreManifest next = manifest_;
    next.next_marker_id += request.count;
    next.next_beam_seq = seq + 1;
    next.beam_ids.push_back(record.beam_id);
    detail::atomic_write(dir_ / "manifest.json", dump_document(next));
    manifest_ = std::move(next);
    records_[record.beam_id] = record;
    return record;
  }

  BeamRecord get_beam(const std::string& beam_id) const {
    std::shared_lock lock(mutex_);
    return find(beam_id);
  }

  /// Serialized record exactly as stored on disk.
  std::string get_beam_document(const std::string& beam_id) const {
    std::shared_lock lock(mutex_);
    find(beam_id);
    return read_text_file(record_path(beam_id).string());
  }

  std::vector<BeamSummary> list_beams() const {
    std::shared_lock lock(mutex_);
    std::vector<BeamSummary> out;
    for (const auto& id : manifest_.beam_ids) {
      const BeamRecord& r = records_.at(id);
      out.push_back({r.beam_id, r.name, r.marker_block.count});
    }
    return out;
  }

  void delete_beam(const std::string& beam_id) {
    std::unique_lock lock(mutex_);
    find(beam_id);
    StoreManifest next = manifest_;
    std::erase(next.beam_ids, beam_id);
    detail::atomic_write(dir_ / "manifest.json", dump_document(next));
    manifest_ = std::move(next);
    records_.erase(beam_id);
    std::error_code ec;
    std::filesystem::remove(record_path(beam_id), ec);
  }

  MarkerResolution resolve_marker(int marker_id) const {
    std::shared_lock lock(mutex_);
    for (const auto& [id, r] : records_) {
      if (!r.marker_block.contains(marker_id)) continue;
      for (std::size_t i = 0; i < r.layout.anchors.size(); ++i)
        if (r.layout.anchors[i].marker_id == marker_id)
          return {r.beam_id, static_cast<int>(i), r.layout.anchors[i]};
    }
    throw Error(ErrorCode::kUnknownMarker, "marker " + std::to_string(marker_id) + " does not belong to any registered beam");
  }

  std::string marker_sheet(const std::string& beam_id, const SheetSpec& sheet) const {
    return render_sheet(get_beam(beam_id).layout, sheet);
  }

  StoreManifest manifest() const {
    std::shared_lock lock(mutex_);
    return manifest_;
  }

 private:
  std::filesystem::path record_path(const std::string& beam_id) const {
    return dir_ / "beams" / (beam_id + ".json");
  }

  const BeamRecord& find(const std::string& beam_id) const {
    const auto it = records_.find(beam_id);
    if (it == records_.end()) throw Error(ErrorCode::kNotFound, "beam '" + beam_id + "' not found");
    return it->second;
  }

  void recover() {
    const auto manifest_path = dir_ / "manifest.json";
    if (std::filesystem::exists(manifest_path))
      manifest_ = load_document<StoreManifest>(manifest_path.string(), "manifest");

    std::error_code ec;
    std::filesystem::remove(dir_ / "manifest.json.tmp", ec);
    std::map<std::string, BeamRecord> on_disk;
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / "beams")) {
      const auto& p = entry.path();
      if (p.extension() == ".tmp") {
        std::filesystem::remove(p);
        continue;
      }
      if (p.extension() != ".json") continue;
      BeamRecord r = load_document<BeamRecord>(p.string(), "beam record");
      on_disk[r.beam_id] = std::move(r);
    }

    bool dirty = false;
    std::vector<std::string> listed;
    for (const auto& id : manifest_.beam_ids) {
      if (on_disk.count(id)) {
        listed.push_back(id);
      } else {
        dirty = true;  // cannot happen with the write ordering above
      }
    }
    for (auto& [id, r] : on_disk) {
      if (std::find(listed.begin(), listed.end(), id) != listed.end()) continue;
      const auto seq = detail::parse_beam_id(id);
      if (seq && *seq >= manifest_.next_beam_seq) {
        listed.push_back(id);
        manifest_.next_beam_seq = *seq + 1;
        manifest_.next_marker_id =
            std::max(manifest_.next_marker_id, r.marker_block.first_id + r.marker_block.count);
      } else {
        std::filesystem::remove(record_path(id));
      }
      dirty = true;
    }
    manifest_.beam_ids = listed;
    for (const auto& id : listed) records_[id] = on_disk[id];
    if (dirty || !std::filesystem::exists(manifest_path))
      detail::atomic_write(manifest_path, dump_document(manifest_));
  }

  std::filesystem::path dir_;
  int lock_fd_ = -1;
  mutable std::shared_mutex mutex_;
  StoreManifest manifest_;
  std::map<std::string, BeamRecord> records_;
};

}  // namespace arglulam
