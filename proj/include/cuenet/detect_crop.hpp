#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cuenet/errors.hpp"
#include "cuenet/tensor.hpp"

namespace cuenet {

/// Axis-aligned box in frame pixel coordinates, origin top-left.
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  bool contains(const BBox& other) const {
    return x_min <= other.x_min && y_min <= other.y_min && x_max >= other.x_max && y_max >= other.y_max;
  }
  bool operator==(const BBox&) const = default;
};

struct FrameDims {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Person boxes per frame, in frame order.
struct DetectionSequence {
  std::vector<std::vector<BBox>> frames;
  FrameDims dims;

  std::size_t frame_count() const { return frames.size(); }
};

struct CropDecision {
  bool applied = false;
  BBox box;  // full frame when not applied
  std::size_t max_people = 0;
};

/// Reads the detection JSON Lines stream: one {"frame": i, "boxes": [[x0,y0,x1,y1], ...]} object per frame.
/// Frames may appear in any order but each index 0..T-1 exactly once. Boxes are clamped to `dims`.
DetectionSequence parse_detections(std::string_view stream, FrameDims dims);

/// Writes a sequence back out as JSON Lines, one frame per line in index order.
std::string format_detections(const DetectionSequence& seq);

/// Union box of every detection across every frame. The crop applies only when some
/// frame holds more than one person; otherwise the decision keeps the full frame.
/// Real coordinates are rounded outward to whole pixels.
CropDecision compute_crop_box(const DetectionSequence& seq);

BBox full_frame(FrameDims dims);

/// Pixel-index rectangle [y0, y1) x [x0, x1) of a decision's box; validates it against `dims`.
struct PixelRect {
  std::size_t x0, y0, x1, y1;
};
PixelRect pixel_rect(const BBox& box, FrameDims dims);

/// Spatial crop of a (T, H, W, c) video; the temporal extent is untouched.
template <Real Scalar>
Tensor<Scalar> apply_crop(const Tensor<Scalar>& video, const CropDecision& decision) {
  if (video.rank() != 4) throw DimensionError("apply_crop: expected a (T,H,W,c) video, got " + shape_string(video.shape()));
  if (!decision.applied) return video;
  const std::size_t T = video.extent(0), H = video.extent(1), W = video.extent(2), C = video.extent(3);
  const PixelRect r = pixel_rect(decision.box, {H, W});
  const std::size_t h = r.y1 - r.y0, w = r.x1 - r.x0;
  Tensor<Scalar> out({T, h, w, C});
  const Scalar* src = video.data().data();
  Scalar* dst = out.data().data();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < h; ++y) {
      const Scalar* row = src + ((t * H + r.y0 + y) * W + r.x0) * C;
      std::copy(row, row + w * C, dst + ((t * h + y) * w) * C);
    }
  }
  return out;
}

/// Source of per-frame person detections. Implementations must already drop low-confidence boxes.
class DetectorAdapter {
 public:
  virtual ~DetectorAdapter() = default;
  /// `frame` is one (H, W, c) image.
  virtual std::vector<BBox> detect(std::size_t frame_index, const Tensor<double>& frame) = 0;
};

/// Replays a recorded detection sequence.
class FixtureDetector final : public DetectorAdapter {
 public:
  explicit FixtureDetector(DetectionSequence recorded) : recorded_(std::move(recorded)) {}
  std::vector<BBox> detect(std::size_t frame_index, const Tensor<double>& frame) override;

 private:
  DetectionSequence recorded_;
};

/// Runs a detector over every frame of a (T, H, W, c) video.
template <Real Scalar>
DetectionSequence run_detector(DetectorAdapter& detector, const Tensor<Scalar>& video) {
  if (video.rank() != 4) throw DimensionError("run_detector: expected a (T,H,W,c) video");
  const std::size_t T = video.extent(0), H = video.extent(1), W = video.extent(2), C = video.extent(3);
  DetectionSequence seq;
  seq.dims = {H, W};
  const std::size_t frame_size = H * W * C;
  for (std::size_t t = 0; t < T; ++t) {
    auto begin = video.data().begin() + static_cast<std::ptrdiff_t>(t * frame_size);
    Tensor<double> frame({H, W, C}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(frame_size)));
    std::vector<BBox> boxes = detector.detect(t, frame);
    for (auto& b : boxes) {
      b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(W));
      b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(W));
      b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(H));
      b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(H));
    }
    seq.frames.push_back(std::move(boxes));
  }
  return seq;
}

}  // namespace cuenet
