#pragma once

#include <string>

#include "varlab/types.hpp"

namespace varlab {

// Face parameters, each in [-1, 1]. Zero everywhere is a neutral face.
struct GlyphParams {
  double mouth_curvature = 0.0;
  double eyebrow_angle = 0.0;
  double eyebrow_height = 0.0;
  double eye_openness = 0.0;
  double mouth_openness = 0.0;
  double face_tilt = 0.0;
};

// Fixed linear map of the first six embedding coordinates followed by tanh.
// Throws kConfig when the embedding has fewer than six coordinates.
GlyphParams embedding_to_glyph(const Embedding& x);

// Standalone SVG of a schematic face. Pure function of (params, size).
std::string render_glyph(const GlyphParams& params, int size);

}  // namespace varlab
