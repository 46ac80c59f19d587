#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "perc/records.hpp"

namespace fs = std::filesystem;
using namespace perc;

TEST_SUITE("records") {

TEST_CASE("manifest hashing is canonical and frozen") {
  nlohmann::json m{{"command", "one-arm"}, {"d", 2},         {"n", 64},
                   {"p", 0.5},             {"samples", 10000}, {"seed", 7}};
  // Keys sort in the canonical dump regardless of insertion order.
  nlohmann::json shuffled{{"seed", 7}, {"p", 0.5},  {"command", "one-arm"},
                          {"n", 64},   {"d", 2},    {"samples", 10000}};
  CHECK(m.dump() == shuffled.dump());
  CHECK(records::manifest_hash_hex(m) == records::manifest_hash_hex(shuffled));
  // Frozen: locks the canonical serialization + FNV-1a scheme.
  CHECK(records::manifest_hash_hex(m) == "8d665a7f3e5c36f4");
}

TEST_CASE("records are content addressed and collision checked") {
  fs::path dir = fs::temp_directory_path() / "perc-records-test";
  fs::remove_all(dir);
  nlohmann::json m{{"command", "demo"}, {"x", 1}};
  records::json result{{"mean", 0.5}};
  auto wr1 = records::write_record(dir, "demo", m, result);
  CHECK(fs::exists(wr1.record_path));
  // Identical rerun: same path, content verified, no error.
  auto wr2 = records::write_record(dir, "demo", m, result);
  CHECK(wr1.record_path == wr2.record_path);
  // Same manifest with different content is flagged as corruption.
  records::json other{{"mean", 0.75}};
  CHECK_THROWS_AS(records::write_record(dir, "demo", m, other), std::runtime_error);

  auto loaded = records::load_record(wr1.record_path);
  CHECK(loaded["manifest"]["x"] == 1);
  CHECK(loaded["manifest_hash"] == wr1.hash);
}

TEST_CASE("estimate serialization carries the full provenance") {
  Estimate e = make_estimate(31, 100, 99, "demo manifest");
  auto j = records::estimate_to_json(e);
  CHECK(j["count"] == 31);
  CHECK(j["samples"] == 100);
  CHECK(j["seed"] == 99);
  CHECK(j["mean"].get<double>() == doctest::Approx(0.31));
  CHECK(j["manifest"] == "demo manifest");
}

}  // TEST_SUITE
