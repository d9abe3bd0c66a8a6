#include "memplan/profile.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "memplan/error.hpp"

namespace memplan {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 8> kKindNames{{
    {LayerKind::Linear, "Linear"},
    {LayerKind::LayerNorm, "LayerNorm"},
    {LayerKind::Gelu, "Gelu"},
    {LayerKind::QkvMatrix, "QkvMatrix"},
    {LayerKind::Softmax, "Softmax"},
    {LayerKind::Score, "Score"},
    {LayerKind::DropoutMask, "DropoutMask"},
    {LayerKind::Other, "Other"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string op_context(const OperatorProfile& op) {
  return "operator id " + std::to_string(op.id) + (op.name.empty() ? "" : " (" + op.name + ")");
}

void require_finite_nonneg(double v, const char* field, const OperatorProfile& op) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream msg;
    msg << field << " must be finite and >= 0, got " << v << " at " << op_context(op);
    throw ValidationError(msg.str());
  }
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing field \"" + std::string(key) + "\" in " + where);
  return *it;
}

template <typename T>
T get_as(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer())
      throw ParseError("field \"" + std::string(key) + "\" in " + where + " must be an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ParseError("field \"" + std::string(key) + "\" in " + where + " must be a number");
  } else {
    if (!v.is_string()) throw ParseError("field \"" + std::string(key) + "\" in " + where + " must be a string");
  }
  return v.get<T>();
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& item : obj.items()) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return item.key() == k; });
    if (!ok) throw ParseError("unknown field \"" + item.key() + "\" in " + where);
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "Other";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) noexcept {
  for (const auto& [k, n] : kKindNames)
    if (iequals(n, name)) return k;
  return std::nullopt;
}

std::int64_t compressed_bytes(const OperatorProfile& op) noexcept {
  const double exact = static_cast<double>(op.mem_bytes) * op.compression_rate;
  auto bytes = static_cast<std::int64_t>(std::ceil(exact));
  return std::clamp<std::int64_t>(bytes, 1, op.mem_bytes);
}

void validate(const ModelProfile& p) {
  if (p.operators.empty()) throw ValidationError("operators must be non-empty");
  if (p.n_layers < 1) throw ValidationError("n_layers must be >= 1");
  if (p.reference_batch < 1) throw ValidationError("reference_batch must be >= 1");
  if (p.static_mem_bytes < 0) throw ValidationError("static_mem_bytes must be >= 0");
  if (p.mem_budget_bytes <= p.static_mem_bytes)
    throw ValidationError("mem_budget_bytes (" + std::to_string(p.mem_budget_bytes) +
                          ") must exceed static_mem_bytes (" + std::to_string(p.static_mem_bytes) +
                          ")");
  if (!std::isfinite(p.base_step_time_ms) || p.base_step_time_ms < 0.0)
    throw ValidationError("base_step_time_ms must be finite and >= 0");

  for (std::size_t i = 0; i < p.operators.size(); ++i) {
    const auto& op = p.operators[i];
    if (op.id != static_cast<int>(i) + 1)
      throw ValidationError("id: operators must be numbered 1..N in chain order; position " +
                            std::to_string(i + 1) + " has " + op_context(op));
    if (op.mem_bytes <= 0)
      throw ValidationError("mem_bytes must be > 0 at " + op_context(op));
    require_finite_nonneg(op.compute_time_ms, "compute_time_ms", op);
    require_finite_nonneg(op.compress_time_ms, "compress_time_ms", op);
    require_finite_nonneg(op.decompress_time_ms, "decompress_time_ms", op);
    if (!std::isfinite(op.compression_rate) || op.compression_rate <= 0.0 ||
        op.compression_rate > 1.0) {
      std::ostringstream msg;
      msg << "compression_rate must be in (0, 1], got " << op.compression_rate << " at "
          << op_context(op);
      throw ValidationError(msg.str());
    }
  }
}

ModelProfile profile_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("profile must be a JSON object");
  const std::string top = "profile";
  reject_unknown(doc,
                 {"n_layers", "static_mem_bytes", "mem_budget_bytes", "reference_batch",
                  "base_step_time_ms", "operators"},
                 top);

  ModelProfile p;
  p.n_layers = get_as<int>(doc, "n_layers", top);
  p.static_mem_bytes = get_as<std::int64_t>(doc, "static_mem_bytes", top);
  p.mem_budget_bytes = get_as<std::int64_t>(doc, "mem_budget_bytes", top);
  p.reference_batch = get_as<int>(doc, "reference_batch", top);
  p.base_step_time_ms = get_as<double>(doc, "base_step_time_ms", top);

  const auto& ops = require(doc, "operators", top);
  if (!ops.is_array()) throw ParseError("field \"operators\" must be an array");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& o = ops[i];
    const std::string where = "operators[" + std::to_string(i) + "]";
    if (!o.is_object()) throw ParseError(where + " must be an object");
    reject_unknown(o,
                   {"id", "name", "kind", "mem_bytes", "compute_time_ms", "compress_time_ms",
                    "decompress_time_ms", "compression_rate"},
                   where);
    OperatorProfile op;
    op.id = get_as<int>(o, "id", where);
    op.name = get_as<std::string>(o, "name", where);
    const auto kind_name = get_as<std::string>(o, "kind", where);
    const auto kind = parse_layer_kind(kind_name);
    if (!kind) throw ParseError("unknown kind \"" + kind_name + "\" in " + where);
    op.kind = *kind;
    op.mem_bytes = get_as<std::int64_t>(o, "mem_bytes", where);
    op.compute_time_ms = get_as<double>(o, "compute_time_ms", where);
    op.compress_time_ms = get_as<double>(o, "compress_time_ms", where);
    op.decompress_time_ms = get_as<double>(o, "decompress_time_ms", where);
    op.compression_rate = get_as<double>(o, "compression_rate", where);
    p.operators.push_back(std::move(op));
  }
  validate(p);
  return p;
}

nlohmann::json profile_to_json(const ModelProfile& p) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : p.operators) {
    ops.push_back({
        {"id", op.id},
        {"name", op.name},
        {"kind", std::string(to_string(op.kind))},
        {"mem_bytes", op.mem_bytes},
        {"compute_time_ms", op.compute_time_ms},
        {"compress_time_ms", op.compress_time_ms},
        {"decompress_time_ms", op.decompress_time_ms},
        {"compression_rate", op.compression_rate},
    });
  }
  return {
      {"n_layers", p.n_layers},
      {"static_mem_bytes", p.static_mem_bytes},
      {"mem_budget_bytes", p.mem_budget_bytes},
      {"reference_batch", p.reference_batch},
      {"base_step_time_ms", p.base_step_time_ms},
      {"operators", std::move(ops)},
  };
}

ModelProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return profile_from_json(doc);
}

void save_profile(const ModelProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << profile_to_json(profile).dump(2) << '\n';
}

ModelProfile scale_profile(const ModelProfile& p, int batch) {
  if (batch < 1) throw ValidationError("batch must be >= 1, got " + std::to_string(batch));
  ModelProfile out = p;
  if (batch == p.reference_batch) return out;

  const double factor = static_cast<double>(batch) / p.reference_batch;
  for (auto& op : out.operators) {
    op.mem_bytes = (op.mem_bytes * batch + p.reference_batch - 1) / p.reference_batch;
    op.compute_time_ms *= factor;
    op.compress_time_ms *= factor;
    op.decompress_time_ms *= factor;
  }
  out.base_step_time_ms *= factor;
  out.reference_batch = batch;
  return out;
}

}  // namespace memplan
