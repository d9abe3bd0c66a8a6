#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace memplan {

enum class LayerKind : std::uint8_t {
  Linear,
  LayerNorm,
  Gelu,
  QkvMatrix,
  Softmax,
  Score,
  DropoutMask,
  Other,
};

std::string_view to_string(LayerKind kind) noexcept;
std::optional<LayerKind> parse_layer_kind(std::string_view name) noexcept;

// One operator of a transformer block, measured at the profile's reference
// batch. compute_time_ms is the single-hop cost of recomputing the output
// from the previous operator's output.
struct OperatorProfile {
  int id = 0;
  std::string name;
  LayerKind kind = LayerKind::Other;
  std::int64_t mem_bytes = 0;
  double compute_time_ms = 0.0;
  double compress_time_ms = 0.0;
  double decompress_time_ms = 0.0;
  // compressed size / original size, in (0, 1].
  double compression_rate = 1.0;

  double codec_time_ms() const noexcept { return compress_time_ms + decompress_time_ms; }

  bool operator==(const OperatorProfile&) const = default;
};

// Bytes an operator's activation occupies once compressed. Rounded up to
// whole bytes so that every memory quantity stays an exact integer.
std::int64_t compressed_bytes(const OperatorProfile& op) noexcept;

// The operators of ONE transformer block in chain order, plus the global
// memory constants. Immutable once validated.
struct ModelProfile {
  std::vector<OperatorProfile> operators;
  int n_layers = 1;
  std::int64_t static_mem_bytes = 0;
  std::int64_t mem_budget_bytes = 0;
  int reference_batch = 1;
  // Forward + backward time of one iteration with no memory optimization.
  double base_step_time_ms = 0.0;

  std::size_t size() const noexcept { return operators.size(); }
  // Bytes left for activations after static memory.
  std::int64_t activation_capacity() const noexcept { return mem_budget_bytes - static_mem_bytes; }

  bool operator==(const ModelProfile&) const = default;
};

// Throws ValidationError naming the offending field (and operator id).
void validate(const ModelProfile& profile);

ModelProfile profile_from_json(const nlohmann::json& doc);
nlohmann::json profile_to_json(const ModelProfile& profile);

ModelProfile load_profile(const std::filesystem::path& path);
void save_profile(const ModelProfile& profile, const std::filesystem::path& path);

// Rescales activation memory and all per-operator times linearly from the
// reference batch to `batch`. Memory is rounded up to whole bytes. The
// result's reference_batch becomes `batch`; static memory and the budget are
// left alone.
ModelProfile scale_profile(const ModelProfile& profile, int batch);

}  // namespace memplan
