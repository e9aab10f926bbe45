#pragma once

#include "cmedl/image.hpp"

namespace cmedl {

/// Square window into a source frame. row0/col0 may be negative (or the window
/// may extend past the frame) when the source is smaller than the window; the
/// uncovered area is padded.
struct CropWindow {
    int row0 = 0;
    int col0 = 0;
    int side = 0;
    int src_rows = 0;
    int src_cols = 0;
    friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

struct CropResult {
    Image patch;
    CropWindow window;
};

/// Body mask by Otsu threshold, border flood-fill hole filling and the largest
/// 4-connected component. Throws Error("no body region") on empty foreground.
Grid<std::uint8_t> detect_body(const Image& img);

/// Crops a square patch of side patch_size centred on the body bounding box.
/// Bodies larger than the patch get a window rounded up to a multiple of 32.
CropResult crop_body(const Image& img, int patch_size);

Image apply_crop(const Image& img, const CropWindow& w);
Mask apply_crop(const Mask& mask, const CropWindow& w);

}  // namespace cmedl
