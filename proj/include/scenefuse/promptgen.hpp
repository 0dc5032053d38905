#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/model.hpp"

namespace scenefuse {

class PromptError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::string_view kDefaultInstruction =
    "Analyze the scene the vehicle is in, and quickly send an alert to the driver if necessary.";

// Rendered prompt with byte offsets of its four sections.
struct PromptText {
  std::string full_text;
  std::size_t instruction_offset = 0;
  std::size_t vehicle_offset = 0;
  std::size_t location_offset = 0;
  std::size_t scene_offset = 0;

  bool operator==(const PromptText&) const = default;
};

// Plain-text layout:
//
//   Instruction
//   <instruction>
//
//   Vehicle: Brake pedal = <pressed|not pressed> | Speed = <int> km/h | Steering angle = <deg>°
//
//   Location: <address>.
//
//   Scene
//   Object Detection (YOLOv8)
//   <class> (conf 0.00) | dist: 0.00 m; region: <left|right>
//   ...
//
//   Segmentation (Cityscapes)
//   Road (global) 00.00%
//   Sidewalk Left = <True (0.00%)|False>; Right = ...
//   <Class> Left = 0.00%; Right = 0.00%
//
// With no detections the detection block is the single line
// "Object Detection: none". A record without an address renders
// "<lat>, <lon>" and appends a note to `notes` when given.
PromptText render_prompt(const SceneRecord& record, std::string_view instruction = kDefaultInstruction,
                         std::vector<std::string>* notes = nullptr);

// 64-bit FNV-1a over the UTF-8 bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t prompt_digest(const PromptText& prompt) noexcept;
std::string digest_hex(std::uint64_t digest);

// Numeric formats shared with other renderers.
std::string format_fixed2(double v);
std::string format_percent(double fraction);
// Up to 5 decimals with trailing zeros trimmed; never "-0".
std::string format_steering(double degrees);

}  // namespace scenefuse
