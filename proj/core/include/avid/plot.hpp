#pragma once

#include <filesystem>

#include "avid/evaluation.hpp"

namespace avid {

/// Draws axes, the chance diagonal and the curve into a square RGB PNG.
void render_roc_png(const EvalCurve& curve, const std::filesystem::path& path, int side = 400);

}  // namespace avid
