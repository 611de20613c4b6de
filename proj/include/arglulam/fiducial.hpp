// SPDX-License-Identifier: Apache-2.0
//
// FMC-16: an 8x8 square matrix fiducial carrying a 16-bit id.
//
//   - Border (rows 0/7, columns 0/7) is black.
//   - Of the inner corners (1,1), (1,6), (6,6), (6,1) only (1,1) is black in
//     the upright orientation.
//   - The remaining 32 inner cells, row-major and MSB-first, hold the id
//     followed by CRC-16/CCITT-FALSE over the id's two big-endian bytes.
//
// Black cells are `true` (binary 1).
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>

#include "arglulam/error.hpp"
#include "arglulam/geometry.hpp"

namespace arglulam {

inline constexpr int kGridSize = 8;

using MarkerGrid = std::array<std::array<bool, kGridSize>, kGridSize>;

namespace detail {

constexpr std::array<std::uint16_t, 256> make_crc16_table() {
  std::array<std::uint16_t, 256> table{};
  for (unsigned i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int b = 0; b < 8; ++b)
      crc = static_cast<std::uint16_t>((crc & 0x8000) ? (crc << 1) ^ 0x1021 : crc << 1);
    table[i] = crc;
  }
  return table;
}

inline constexpr auto kCrc16Table = make_crc16_table();

constexpr bool is_inner_corner(int r, int c) {
  return (r == 1 || r == 6) && (c == 1 || c == 6);
}

constexpr bool is_border(int r, int c) {
  return r == 0 || c == 0 || r == kGridSize - 1 || c == kGridSize - 1;
}

}  // namespace detail

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
constexpr std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes) {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : bytes)
    crc = static_cast<std::uint16_t>((crc << 8) ^ detail::kCrc16Table[((crc >> 8) ^ b) & 0xFF]);
  return crc;
}

inline std::uint16_t fmc_checksum(std::uint16_t id) {
  const std::array<std::uint8_t, 2> bytes{static_cast<std::uint8_t>(id >> 8),
                                          static_cast<std::uint8_t>(id & 0xFF)};
  return crc16_ccitt_false(bytes);
}

/// Payload cell coordinates in bit order (32 cells).
inline const std::array<std::pair<int, int>, 32>& fmc_payload_cells() {
  static const auto cells = [] {
    std::array<std::pair<int, int>, 32> out{};
    std::size_t n = 0;
    for (int r = 1; r < kGridSize - 1; ++r)
      for (int c = 1; c < kGridSize - 1; ++c)
        if (!detail::is_inner_corner(r, c)) out[n++] = {r, c};
    return out;
  }();
  return cells;
}

inline MarkerGrid encode_fmc(int id) {
  if (id < 0 || id > 0xFFFF)
    throw Error(ErrorCode::kOutOfRange, "marker id " + std::to_string(id) + " exceeds 16 bits");
  MarkerGrid grid{};
  for (int r = 0; r < kGridSize; ++r)
    for (int c = 0; c < kGridSize; ++c) grid[r][c] = detail::is_border(r, c);
  grid[1][1] = true;

  const auto uid = static_cast<std::uint16_t>(id);
  const std::uint32_t payload = (static_cast<std::uint32_t>(uid) << 16) | fmc_checksum(uid);
  const auto& cells = fmc_payload_cells();
  for (std::size_t i = 0; i < cells.size(); ++i)
    grid[cells[i].first][cells[i].second] = ((payload >> (31 - i)) & 1u) != 0;
  return grid;
}

/// Quarter turns, clockwise as the grid is viewed (row 0 on top).
enum class GridRotation { k0 = 0, k90 = 1, k180 = 2, k270 = 3 };

inline int degrees(GridRotation r) { return 90 * static_cast<int>(r); }

inline MarkerGrid rotate(const MarkerGrid& grid, GridRotation rotation) {
  MarkerGrid out = grid;
  for (int k = 0; k < static_cast<int>(rotation); ++k) {
    MarkerGrid next{};
    for (int r = 0; r < kGridSize; ++r)
      for (int c = 0; c < kGridSize; ++c) next[r][c] = out[kGridSize - 1 - c][r];
    out = next;
  }
  return out;
}

struct FmcDecoded {
  int id = 0;
  GridRotation rotation = GridRotation::k0;  // how far the grid was turned from upright
};

inline FmcDecoded decode_fmc(const MarkerGrid& grid) {
  for (int r = 0; r < kGridSize; ++r)
    for (int c = 0; c < kGridSize; ++c)
      if (detail::is_border(r, c) && !grid[r][c])
        throw Error(ErrorCode::kBadBorder, "marker border is broken");

  const int black_corners = grid[1][1] + grid[1][6] + grid[6][6] + grid[6][1];
  if (black_corners != 1)
    throw Error(ErrorCode::kBadOrientation,
                "expected one black orientation corner, found " + std::to_string(black_corners));

  for (int k = 0; k < 4; ++k) {
    // Undo a clockwise turn of k quarters.
    const MarkerGrid upright = rotate(grid, static_cast<GridRotation>((4 - k) % 4));
    if (!upright[1][1]) continue;
    std::uint32_t payload = 0;
    for (const auto& [r, c] : fmc_payload_cells()) payload = (payload << 1) | (upright[r][c] ? 1u : 0u);
    const auto id = static_cast<std::uint16_t>(payload >> 16);
    const auto crc = static_cast<std::uint16_t>(payload & 0xFFFF);
    if (crc != fmc_checksum(id)) throw Error(ErrorCode::kBadChecksum, "marker checksum mismatch");
    return {id, static_cast<GridRotation>(k)};
  }
  throw Error(ErrorCode::kBadOrientation, "no valid orientation");
}

// ---------------------------------------------------------------------------
// Printable sheets

struct SheetSpec {
  double module_size = 12.5;  // mm per grid cell
  double quiet_zone = 25.0;   // mm of white margin on each side
  int columns = 2;
  bool label = true;
};

inline void validate(const SheetSpec& spec) {
  if (!(spec.module_size > 0.0)) throw Error(ErrorCode::kValidationFailed, "module size must be positive");
  if (!(spec.quiet_zone >= 0.0)) throw Error(ErrorCode::kValidationFailed, "quiet zone must be >= 0");
  if (spec.columns < 1) throw Error(ErrorCode::kValidationFailed, "columns must be >= 1");
}

namespace detail {

/// Fixed-point mm with trailing zeros trimmed; locale independent.
inline std::string mm(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

inline std::string xml_escape(const std::string& in) {
  std::string out;
  for (char ch : in) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline constexpr double kLabelBand = 10.0;  // mm below each tile

}  // namespace detail

/// SVG sheet with one physically sized marker per anchor. Each marker is a
/// `<g data-marker-id>` holding a white tile and one black rect per black cell.
inline std::string render_sheet(const MarkerLayout& layout, const SheetSpec& spec) {
  validate(spec);
  using detail::mm;
  const double tile = kGridSize * spec.module_size + 2.0 * spec.quiet_zone;
  const double pitch_y = tile + (spec.label ? detail::kLabelBand : 0.0);
  const int n = static_cast<int>(layout.anchors.size());
  const int cols = std::max(1, std::min(spec.columns, std::max(n, 1)));
  const int rows = std::max(1, (n + cols - 1) / cols);
  const double width = cols * tile;
  const double height = rows * pitch_y;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << mm(width)
     << "mm\" height=\"" << mm(height) << "mm\" viewBox=\"0 0 " << mm(width) << ' ' << mm(height)
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << mm(width) << "\" height=\"" << mm(height)
     << "\" fill=\"#ffffff\"/>\n";
  for (int i = 0; i < n; ++i) {
    const MarkerAnchor& anchor = layout.anchors[i];
    const double ox = (i % cols) * tile;
    const double oy = (i / cols) * pitch_y;
    const MarkerGrid grid = encode_fmc(anchor.marker_id);
    os << "<g data-marker-id=\"" << anchor.marker_id << "\" transform=\"translate(" << mm(ox) << ' '
       << mm(oy) << ")\">\n";
    os << "<rect class=\"quiet\" x=\"0\" y=\"0\" width=\"" << mm(tile) << "\" height=\"" << mm(tile)
       << "\" fill=\"#ffffff\"/>\n";
    for (int r = 0; r < kGridSize; ++r)
      for (int c = 0; c < kGridSize; ++c)
        if (grid[r][c])
          os << "<rect x=\"" << mm(spec.quiet_zone + c * spec.module_size) << "\" y=\""
             << mm(spec.quiet_zone + r * spec.module_size) << "\" width=\"" << mm(spec.module_size)
             << "\" height=\"" << mm(spec.module_size) << "\" fill=\"#000000\"/>\n";
    if (spec.label) {
      char arc[32];
      std::snprintf(arc, sizeof arc, "%.4f m", anchor.arclength);
      os << "<text x=\"" << mm(tile / 2.0) << "\" y=\"" << mm(tile + detail::kLabelBand * 0.6)
         << "\" font-family=\"monospace\" font-size=\"4\" text-anchor=\"middle\">"
         << detail::xml_escape(layout.beam.id) << " / " << anchor.marker_id << " / " << arc
         << "</text>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace arglulam
