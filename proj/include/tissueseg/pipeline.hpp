#pragma once

#include <chrono>

#include "tissueseg/methods.hpp"
#include "tissueseg/preprocess.hpp"

namespace tissueseg {

/**
 * Segments one thumbnail and returns the mask in the input's own geometry.
 * With `normalize`, the image is fitted and padded to the working square first
 * and the mask is cropped and resized back afterwards. The elapsed time covers
 * the whole call.
 */
inline MaskResult segment_thumbnail(const RgbImage& img, const MethodSpec& spec,
                                    bool normalize = true, int size = kThumbnailSize) {
  validate(spec);
  const auto start = std::chrono::steady_clock::now();
  BinaryMask mask;
  if (normalize) {
    const auto work = normalize_thumbnail(img, size);
    mask = restore_geometry(segment(work.image, spec).mask, work.record);
  } else {
    mask = segment(img, spec).mask;
  }
  const auto stop = std::chrono::steady_clock::now();
  return MaskResult{std::move(mask), std::chrono::duration<double>(stop - start).count()};
}

}  // namespace tissueseg
