#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "perc/estimators.hpp"

namespace perc::records {

using json = nlohmann::ordered_json;

inline constexpr const char* kRecordSchema = "perc-record/1";

// FNV-1a over the canonical (sorted-key, no-whitespace) serialization.
std::uint64_t manifest_hash(const nlohmann::json& manifest);
std::string manifest_hash_hex(const nlohmann::json& manifest);

json estimate_to_json(const Estimate& e);

struct WriteResult {
  std::filesystem::path record_path;
  std::optional<std::filesystem::path> curve_path;
  std::string hash;
};

// Content-addressed persistence: <outdir>/<command>-<hash16>.json (+ .csv).
// Re-running a manifest rewrites identical bytes; a hash collision with
// different content is reported as corruption.
WriteResult write_record(const std::filesystem::path& outdir, const std::string& command,
                         const nlohmann::json& manifest, const json& result,
                         const std::optional<std::string>& csv = std::nullopt);

json load_record(const std::filesystem::path& path);

}  // namespace perc::records
