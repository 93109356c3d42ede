// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "unipix/dataset.hpp"
#include "unipix/image.hpp"

namespace unipix {

struct SceneClassification {
    SceneSpec scene;          // seed is always 0
    double confidence = 0.0;  // IoU of the winning shape template
    bool no_foreground = false;
};

// Rule-based judge for toy-scene images:
//  - foreground mask = brightest channel above mid-range, then a 3x3 majority filter
//  - position from the mask centroid (nearest anchor)
//  - size from the foreground pixel count against the small/large split
//  - shape from mask IoU against rendered templates at that position and size
//  - color from the mean foreground RGB (nearest palette entry)
// Ties resolve towards the earlier enum value.
SceneClassification classify_scene(const PixelImage& rgb);

}  // namespace unipix
