#include "perc/records.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace perc::records {

std::uint64_t manifest_hash(const nlohmann::json& manifest) {
  std::string canon = manifest.dump();  // nlohmann::json objects sort keys
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string manifest_hash_hex(const nlohmann::json& manifest) {
  std::uint64_t h = manifest_hash(manifest);
  std::ostringstream os;
  os << std::hex;
  for (int i = 15; i >= 0; --i) os << ((h >> (4 * i)) & 0xf);
  return os.str();
}

json estimate_to_json(const Estimate& e) {
  return json{{"mean", e.mean},       {"std_error", e.std_error}, {"samples", e.samples},
              {"count", e.count},     {"seed", e.seed},           {"manifest", e.manifest}};
}

namespace {

void write_if_absent(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream existing;
    existing << in.rdbuf();
    if (existing.str() != content)
      throw std::runtime_error("content-address collision with different content: " +
                               path.string() + " (stale output directory?)");
    return;  // identical rerun, nothing to do
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

WriteResult write_record(const std::filesystem::path& outdir, const std::string& command,
                         const nlohmann::json& manifest, const json& result,
                         const std::optional<std::string>& csv) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  WriteResult wr;
  wr.hash = manifest_hash_hex(manifest);
  std::string stem = command + "-" + wr.hash;

  json record;
  record["schema"] = kRecordSchema;
  record["command"] = command;
  record["manifest"] = manifest;
  record["manifest_hash"] = wr.hash;
  record["result"] = result;
  if (csv) record["curve_file"] = stem + ".csv";

  wr.record_path = outdir / (stem + ".json");
  write_if_absent(wr.record_path, record.dump(2) + "\n");
  if (csv) {
    wr.curve_path = outdir / (stem + ".csv");
    write_if_absent(*wr.curve_path, *csv);
  }
  return wr;
}

json load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json record = json::parse(in);
  if (!record.contains("schema") || record["schema"] != kRecordSchema)
    throw std::runtime_error("not a perc record: " + path.string());
  return record;
}

}  // namespace perc::records
