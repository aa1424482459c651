#include "cuenet/detect_crop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace cuenet {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw FormatError("detections line " + std::to_string(line) + ": " + what);
}

double read_coord(const nlohmann::json& v, std::size_t line) {
  if (!v.is_number()) fail(line, "box coordinate is not a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(line, "box coordinate is not finite");
  return x;
}

}  // namespace

DetectionSequence parse_detections(std::string_view stream, FrameDims dims) {
  std::vector<std::optional<std::vector<BBox>>> slots;
  std::vector<std::size_t> seen_on_line;
  std::size_t line_no = 0;
  std::size_t last_line = 0;
  std::size_t pos = 0;
  const double W = static_cast<double>(dims.width);
  const double H = static_cast<double>(dims.height);
  while (pos <= stream.size()) {
    const std::size_t nl = stream.find('\n', pos);
    const std::string_view raw = stream.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? stream.size() + 1 : nl + 1;
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    last_line = line_no;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      fail(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("frame") || !obj.contains("boxes")) {
      fail(line_no, "expected an object with \"frame\" and \"boxes\"");
    }
    const auto& frame = obj["frame"];
    if (!frame.is_number_integer() || frame.get<long long>() < 0) fail(line_no, "\"frame\" must be a non-negative integer");
    const auto index = static_cast<std::size_t>(frame.get<long long>());
    if (!obj["boxes"].is_array()) fail(line_no, "\"boxes\" must be an array");

    std::vector<BBox> boxes;
    for (const auto& b : obj["boxes"]) {
      if (!b.is_array() || b.size() != 4) fail(line_no, "each box must be [x_min, y_min, x_max, y_max]");
      BBox box{read_coord(b[0], line_no), read_coord(b[1], line_no), read_coord(b[2], line_no),
               read_coord(b[3], line_no)};
      if (box.x_min > box.x_max || box.y_min > box.y_max) fail(line_no, "malformed box (min > max)");
      box.x_min = std::clamp(box.x_min, 0.0, W);
      box.x_max = std::clamp(box.x_max, 0.0, W);
      box.y_min = std::clamp(box.y_min, 0.0, H);
      box.y_max = std::clamp(box.y_max, 0.0, H);
      boxes.push_back(box);
    }

    if (index >= slots.size()) {
      slots.resize(index + 1);
      seen_on_line.resize(index + 1, 0);
    }
    if (slots[index]) {
      fail(line_no, "duplicate frame index " + std::to_string(index) + " (first seen on line " +
                        std::to_string(seen_on_line[index]) + ")");
    }
    slots[index] = std::move(boxes);
    seen_on_line[index] = line_no;
  }

  DetectionSequence seq;
  seq.dims = dims;
  seq.frames.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) fail(last_line, "frame index " + std::to_string(i) + " missing");
    seq.frames.push_back(std::move(*slots[i]));
  }
  return seq;
}

std::string format_detections(const DetectionSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : seq.frames[i]) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    nlohmann::json line = {{"frame", i}, {"boxes", boxes}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

BBox full_frame(FrameDims dims) {
  return {0.0, 0.0, static_cast<double>(dims.width), static_cast<double>(dims.height)};
}

CropDecision compute_crop_box(const DetectionSequence& seq) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BBox u{inf, inf, -inf, -inf};
  std::size_t max_people = 0;
  for (const auto& frame : seq.frames) {
    for (const auto& b : frame) {
      u.x_min = std::min(u.x_min, b.x_min);
      u.y_min = std::min(u.y_min, b.y_min);
      u.x_max = std::max(u.x_max, b.x_max);
      u.y_max = std::max(u.y_max, b.y_max);
    }
    max_people = std::max(max_people, frame.size());
  }

  CropDecision decision;
  decision.max_people = max_people;
  decision.applied = max_people > 1;
  if (!decision.applied) {
    decision.box = full_frame(seq.dims);
    return decision;
  }

  const double W = static_cast<double>(seq.dims.width);
  const double H = static_cast<double>(seq.dims.height);
  BBox box{std::floor(u.x_min), std::floor(u.y_min), std::ceil(u.x_max), std::ceil(u.y_max)};
  box.x_min = std::clamp(box.x_min, 0.0, W);
  box.y_min = std::clamp(box.y_min, 0.0, H);
  box.x_max = std::clamp(box.x_max, 0.0, W);
  box.y_max = std::clamp(box.y_max, 0.0, H);
  // A crop must keep at least one pixel per axis even when every box is degenerate.
  if (box.x_max <= box.x_min) {
    if (box.x_min >= W) box.x_min = W - 1;
    box.x_max = box.x_min + 1;
  }
  if (box.y_max <= box.y_min) {
    if (box.y_min >= H) box.y_min = H - 1;
    box.y_max = box.y_min + 1;
  }
  decision.box = box;
  return decision;
}

PixelRect pixel_rect(const BBox& box, FrameDims dims) {
  const auto bad = [&](const std::string& why) -> BoundsError {
    std::ostringstream os;
    os << "crop box (" << box.x_min << ',' << box.y_min << ',' << box.x_max << ',' << box.y_max << ") " << why
       << " for frame " << dims.height << 'x' << dims.width;
    return BoundsError(os.str());
  };
  const double W = static_cast<double>(dims.width), H = static_cast<double>(dims.height);
  if (!(box.x_min >= 0 && box.y_min >= 0 && box.x_max <= W && box.y_max <= H)) throw bad("lies outside");
  if (!(box.x_max > box.x_min && box.y_max > box.y_min)) throw bad("is empty");
  PixelRect r{static_cast<std::size_t>(std::floor(box.x_min)), static_cast<std::size_t>(std::floor(box.y_min)),
              static_cast<std::size_t>(std::ceil(box.x_max)), static_cast<std::size_t>(std::ceil(box.y_max))};
  return r;
}

std::vector<BBox> FixtureDetector::detect(std::size_t frame_index, const Tensor<double>& frame) {
  if (frame.rank() != 3 || frame.extent(0) != recorded_.dims.height || frame.extent(1) != recorded_.dims.width) {
    throw DimensionError("fixture detector: frame " + shape_string(frame.shape()) +
                         " does not match recorded dims");
  }
  if (frame_index >= recorded_.frames.size()) {
    throw BoundsError("fixture detector: no recording for frame " + std::to_string(frame_index));
  }
  return recorded_.frames[frame_index];
}

}  // namespace cuenet
