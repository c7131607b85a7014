#include "varlab/glyph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "varlab/error.hpp"

namespace varlab {

namespace {

// Rows: curvature, brow angle, brow height, eye openness, mouth openness, tilt.
// Columns follow the canonical emotion order, so a class mean on axis k
// produces that emotion's caricature.
constexpr std::array<std::array<double, 6>, 6> kProjection = {{
    {0.00, -0.10, -0.20, 0.30, -0.30, -0.15},
    {0.00, 0.20, -0.10, 0.00, 0.25, -0.30},
    {0.30, 0.20, -0.10, 0.05, -0.05, -0.25},
    {0.30, 0.25, -0.15, -0.05, -0.10, 0.05},
    {0.30, 0.15, 0.05, 0.10, -0.05, 0.05},
    {0.00, -0.05, 0.10, 0.00, -0.10, 0.05},
}};

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

GlyphParams embedding_to_glyph(const Embedding& x) {
  require(x.size() >= 6, ErrorCode::kConfig, "glyph mapping needs at least 6 embedding coordinates");
  std::array<double, 6> out{};
  for (int r = 0; r < 6; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 6; ++c) {
      const double v = x[c];
      // inf * 0 would poison the sum; a zero weight ignores the coordinate.
      if (kProjection[r][c] != 0.0) acc += kProjection[r][c] * v;
    }
    out[r] = std::isnan(acc) ? 0.0 : std::tanh(acc);
  }
  return {out[0], out[1], out[2], out[3], out[4], out[5]};
}

std::string render_glyph(const GlyphParams& p, int size) {
  require(size > 0, ErrorCode::kConfig, "glyph size must be positive");
  const double s = size;
  const double curvature = clamp1(p.mouth_curvature);
  const double brow_angle = clamp1(p.eyebrow_angle);
  const double brow_height = clamp1(p.eyebrow_height);
  const double eye_open = clamp1(p.eye_openness);
  const double mouth_open = clamp1(p.mouth_openness);
  const double tilt = clamp1(p.face_tilt) * 15.0;

  const double cx = 0.5 * s;
  const double cy = 0.5 * s;
  const double eye_y = 0.42 * s;
  const double eye_dx = 0.15 * s;
  const double eye_rx = 0.06 * s;
  const double eye_ry = (0.035 + 0.025 * eye_open) * s;
  const double brow_y = eye_y - (0.09 + 0.04 * brow_height) * s;
  const double brow_half = 0.07 * s;
  const double brow_tilt = 0.03 * s * brow_angle;
  const double mouth_y = 0.68 * s;
  const double mouth_half = 0.14 * s;
  const double mouth_bend = 0.12 * s * curvature;
  const double mouth_gap = (0.01 + 0.03 * (mouth_open + 1.0)) * s;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) +
         "\" height=\"" + std::to_string(size) + "\" viewBox=\"0 0 " + std::to_string(size) + " " +
         std::to_string(size) + "\">\n";
  svg += "<g transform=\"rotate(" + num(tilt) + " " + num(cx) + " " + num(cy) + ")\">\n";
  svg += "<ellipse class=\"head\" cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" rx=\"" +
         num(0.36 * s) + "\" ry=\"" + num(0.44 * s) +
         "\" fill=\"#f1d3b3\" stroke=\"#333\" stroke-width=\"2\"/>\n";
  for (int side : {-1, 1}) {
    const double ex = cx + side * eye_dx;
    svg += "<ellipse class=\"eye\" cx=\"" + num(ex) + "\" cy=\"" + num(eye_y) + "\" rx=\"" +
           num(eye_rx) + "\" ry=\"" + num(eye_ry) + "\" fill=\"#fff\" stroke=\"#333\"/>\n";
    // Positive angle raises the inner end of each brow.
    const double inner_x = ex - side * brow_half;
    const double outer_x = ex + side * brow_half;
    svg += "<line class=\"brow\" x1=\"" + num(inner_x) + "\" y1=\"" + num(brow_y - brow_tilt) +
           "\" x2=\"" + num(outer_x) + "\" y2=\"" + num(brow_y + brow_tilt) +
           "\" stroke=\"#333\" stroke-width=\"3\"/>\n";
  }
  // Upper lip: quadratic curve whose control point sits below the corners
  // for a smile (positive curvature) and above them for a frown.
  svg += "<path class=\"mouth\" d=\"M " + num(cx - mouth_half) + " " + num(mouth_y) + " Q " +
         num(cx) + " " + num(mouth_y + mouth_bend) + " " + num(cx + mouth_half) + " " +
         num(mouth_y) + " Q " + num(cx) + " " + num(mouth_y + mouth_bend + mouth_gap) + " " +
         num(cx - mouth_half) + " " + num(mouth_y) +
         " Z\" fill=\"#7a2f2f\" stroke=\"#333\" stroke-width=\"2\"/>\n";
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace varlab
