#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenefuse/error.hpp"
#include "scenefuse/http.hpp"
#include "scenefuse/model.hpp"
#include "scenefuse/promptgen.hpp"

namespace scenefuse {

enum class BackendKind { TextOnly, Multimodal };
enum class Transport { Http, Mock };

std::string_view to_string(BackendKind kind) noexcept;
std::optional<BackendKind> parse_backend_kind(std::string_view s) noexcept;

struct BackendConfig {
  std::string backend_id;
  BackendKind kind = BackendKind::TextOnly;
  Transport transport = Transport::Mock;

  // Http transport. The request is a chat-style POST with one user message;
  // images travel as a base64 data URL next to the prompt text.
  std::string endpoint_url;
  std::string model_name;
  // Name of the environment variable holding the bearer token; empty means no auth.
  std::string auth_env_var;
  std::string response_text_path = "choices.0.message.content";
  std::string image_mime = "image/jpeg";

  int timeout_ms = 30000;
  int max_retries = 2;
  // Delay before retry i uses backoff_ms[min(i, size - 1)].
  std::vector<int> backoff_ms{250, 1000};

  // Mock transport only.
  std::optional<int> mock_delay_ms;
  std::optional<std::uint64_t> mock_seed;
};

// Throws ConfigError when the config breaks an invariant.
void check_backend(const BackendConfig& backend);

class DispatchError : public Error {
 public:
  enum class Kind { Timeout, Http, Auth, MalformedResponse, Contract };

  DispatchError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// What the mock back end knows about a scene.
struct SceneFacts {
  struct Object {
    std::string class_label;
    double confidence = 0.0;
    double distance_m = 0.0;
    Region region = Region::Left;
  };
  std::vector<Object> objects;
  bool sidewalk_left = false;
  bool sidewalk_right = false;
};

// Requires annotated detections.
SceneFacts facts_from_record(const SceneRecord& record);
// Reads the object and sidewalk lines of a rendered prompt.
SceneFacts facts_from_prompt(std::string_view prompt_text);

struct MockOutput {
  std::string text;
  bool risk = false;
};

// Risk when a person is closer than 10 m, a motor vehicle closer than 5 m, or
// a person stands on a side without sidewalk. The text names the nearest
// risky object with its distance and side, then lists everything in view.
// The seed only picks the opening word.
MockOutput mock_generate(const SceneFacts& facts, std::uint64_t seed);

const std::vector<std::string>& default_risk_keywords();
bool classify_risk(std::string_view text, std::span<const std::string> keywords = default_risk_keywords());

struct DispatchOptions {
  std::string scenario_id;
  std::vector<std::string> risk_keywords = default_risk_keywords();
  HttpTransport transport = http_send;
};

using ImageBytes = std::optional<std::span<const std::uint8_t>>;

Alert dispatch(const PromptText& prompt, ImageBytes image, const BackendConfig& backend,
               const DispatchOptions& options = {});

struct BackendOutcome {
  std::string backend_id;
  BackendKind kind = BackendKind::TextOnly;
  std::optional<Alert> alert;
  std::string error;

  bool ok() const noexcept { return alert.has_value(); }
};

class FanOutError : public Error {
 public:
  explicit FanOutError(std::vector<BackendOutcome> outcomes);
  const std::vector<BackendOutcome>& outcomes() const noexcept { return outcomes_; }

 private:
  std::vector<BackendOutcome> outcomes_;
};

// Dispatches to every back end concurrently. Text-only back ends receive the
// prompt alone even when an image is given. Results follow config order.
// Throws FanOutError only when every back end failed.
std::vector<BackendOutcome> fan_out(const PromptText& prompt, ImageBytes image,
                                    std::span<const BackendConfig> backends,
                                    const DispatchOptions& options = {});

}  // namespace scenefuse
