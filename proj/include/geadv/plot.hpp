#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "geadv/eval.hpp"

namespace geadv::plot {

struct Canvas {
  int w = 0, h = 0;
  std::vector<uint8_t> rgb;

  Canvas(int width, int height) : w(width), h(height), rgb(size_t(width) * height * 3, 255) {}

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    uint8_t* p = &rgb[(size_t(y) * w + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  void fill_rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) set(x, y, r, g, b);
  }
};

namespace detail {

// 5x7 column-major bitmap glyphs; bit 0 is the top row.
inline const uint8_t* glyph(char c) {
  static const uint8_t digits[10][5] = {
      {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
      {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31},
      {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
      {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
      {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E}};
  static const uint8_t letters[26][5] = {
      {0x7E, 0x11, 0x11, 0x11, 0x7E}, {0x7F, 0x49, 0x49, 0x49, 0x36},
      {0x3E, 0x41, 0x41, 0x41, 0x22}, {0x7F, 0x41, 0x41, 0x22, 0x1C},
      {0x7F, 0x49, 0x49, 0x49, 0x41}, {0x7F, 0x09, 0x09, 0x09, 0x01},
      {0x3E, 0x41, 0x49, 0x49, 0x7A}, {0x7F, 0x08, 0x08, 0x08, 0x7F},
      {0x00, 0x41, 0x7F, 0x41, 0x00}, {0x20, 0x40, 0x41, 0x3F, 0x01},
      {0x7F, 0x08, 0x14, 0x22, 0x41}, {0x7F, 0x40, 0x40, 0x40, 0x40},
      {0x7F, 0x02, 0x0C, 0x02, 0x7F}, {0x7F, 0x04, 0x08, 0x10, 0x7F},
      {0x3E, 0x41, 0x41, 0x41, 0x3E}, {0x7F, 0x09, 0x09, 0x09, 0x06},
      {0x3E, 0x41, 0x51, 0x21, 0x5E}, {0x7F, 0x09, 0x19, 0x29, 0x46},
      {0x46, 0x49, 0x49, 0x49, 0x31}, {0x01, 0x01, 0x7F, 0x01, 0x01},
      {0x3F, 0x40, 0x40, 0x40, 0x3F}, {0x1F, 0x20, 0x40, 0x20, 0x1F},
      {0x3F, 0x40, 0x38, 0x40, 0x3F}, {0x63, 0x14, 0x08, 0x14, 0x63},
      {0x07, 0x08, 0x70, 0x08, 0x07}, {0x61, 0x51, 0x49, 0x45, 0x43}};
  static const uint8_t dot[5] = {0x00, 0x60, 0x60, 0x00, 0x00};
  static const uint8_t dash[5] = {0x08, 0x08, 0x08, 0x08, 0x08};
  static const uint8_t under[5] = {0x40, 0x40, 0x40, 0x40, 0x40};
  static const uint8_t lparen[5] = {0x00, 0x1C, 0x22, 0x41, 0x00};
  static const uint8_t rparen[5] = {0x00, 0x41, 0x22, 0x1C, 0x00};
  static const uint8_t plus[5] = {0x08, 0x08, 0x3E, 0x08, 0x08};
  static const uint8_t percent[5] = {0x23, 0x13, 0x08, 0x64, 0x62};
  static const uint8_t blank[5] = {0, 0, 0, 0, 0};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  if (c >= 'A' && c <= 'Z') return letters[c - 'A'];
  switch (c) {
    case '.': return dot;
    case '-': return dash;
    case '_': return under;
    case '(': return lparen;
    case ')': return rparen;
    case '+': return plus;
    case '%': return percent;
    default: return blank;
  }
}

inline void draw_text(Canvas& c, int x, int y, const std::string& text, uint8_t r = 30,
                      uint8_t g = 30, uint8_t b = 30) {
  for (char ch : text) {
    const uint8_t* gl = glyph(ch);
    for (int col = 0; col < 5; ++col) {
      for (int row = 0; row < 7; ++row) {
        if (gl[col] & (1 << row)) c.set(x + col, y + row, r, g, b);
      }
    }
    x += 6;
  }
}

inline void put_u32_be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

inline void write_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& data) {
  std::vector<uint8_t> head;
  put_u32_be(head, static_cast<uint32_t>(data.size()));
  os.write(reinterpret_cast<const char*>(head.data()), 4);
  os.write(type, 4);
  if (!data.empty()) os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<uint8_t> tail;
  put_u32_be(tail, static_cast<uint32_t>(crc));
  os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const Canvas& canvas) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open for write: " + path.string());
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  os.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<uint8_t> ihdr;
  detail::put_u32_be(ihdr, static_cast<uint32_t>(canvas.w));
  detail::put_u32_be(ihdr, static_cast<uint32_t>(canvas.h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::write_chunk(os, "IHDR", ihdr);
  // filter byte 0 per scanline, then zlib-compress
  std::vector<uint8_t> raw;
  raw.reserve(size_t(canvas.h) * (1 + size_t(canvas.w) * 3));
  for (int y = 0; y < canvas.h; ++y) {
    raw.push_back(0);
    const uint8_t* row = &canvas.rgb[size_t(y) * canvas.w * 3];
    raw.insert(raw.end(), row, row + size_t(canvas.w) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw ParseError("png compression failed");
  }
  compressed.resize(bound);
  detail::write_chunk(os, "IDAT", compressed);
  detail::write_chunk(os, "IEND", {});
}

/// Grouped bar chart of ASR per victim (one bar per method), 0..1 axis.
inline void plot_asr(const eval::TransferReport& report, const std::filesystem::path& path) {
  static const uint8_t palette[6][3] = {{66, 133, 244}, {219, 68, 55},  {244, 180, 0},
                                        {15, 157, 88},  {171, 71, 188}, {0, 172, 193}};
  const auto& victims = report.victims;
  const auto& methods = report.methods;
  if (victims.empty() || methods.empty()) throw ContractError("plot_asr: empty report");
  const int bar_w = 18, gap = 10, group_gap = 26;
  const int group_w = static_cast<int>(methods.size()) * (bar_w + gap) + group_gap;
  const int margin_l = 46, margin_b = 40, margin_t = 20 + 12 * static_cast<int>(methods.size());
  const int plot_h = 220;
  Canvas canvas(margin_l + group_w * static_cast<int>(victims.size()) + 20,
                margin_t + plot_h + margin_b);
  // axis and gridlines
  for (int q = 0; q <= 4; ++q) {
    const int y = margin_t + plot_h - (plot_h * q) / 4;
    for (int x = margin_l; x < canvas.w - 10; ++x) canvas.set(x, y, 220, 220, 220);
    char label[8];
    std::snprintf(label, sizeof(label), "%.2f", q / 4.0);
    detail::draw_text(canvas, 8, y - 3, label);
  }
  for (int y = margin_t; y <= margin_t + plot_h; ++y) canvas.set(margin_l, y, 60, 60, 60);
  for (size_t vi = 0; vi < victims.size(); ++vi) {
    int x = margin_l + static_cast<int>(vi) * group_w + group_gap / 2;
    for (size_t mi = 0; mi < methods.size(); ++mi) {
      for (const auto& cell : report.cells) {
        if (cell.victim != victims[vi] || cell.method != methods[mi]) continue;
        const auto* col = palette[mi % 6];
        if (!cell.self) {
          const int hgt = static_cast<int>(cell.asr * plot_h);
          canvas.fill_rect(x, margin_t + plot_h - hgt, x + bar_w, margin_t + plot_h, col[0], col[1],
                           col[2]);
        } else {
          detail::draw_text(canvas, x, margin_t + plot_h - 10, "self", 120, 120, 120);
        }
        break;
      }
      x += bar_w + gap;
    }
    detail::draw_text(canvas, margin_l + static_cast<int>(vi) * group_w + group_gap / 2,
                      margin_t + plot_h + 8, victims[vi]);
  }
  // legend
  for (size_t mi = 0; mi < methods.size(); ++mi) {
    const auto* col = palette[mi % 6];
    const int y = 8 + static_cast<int>(mi) * 12;
    canvas.fill_rect(margin_l, y, margin_l + 8, y + 8, col[0], col[1], col[2]);
    detail::draw_text(canvas, margin_l + 12, y, methods[mi]);
  }
  write_png(path, canvas);
}

}  // namespace geadv::plot
