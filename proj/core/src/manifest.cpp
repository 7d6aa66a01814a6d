// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/manifest.hpp"

#include <fstream>
#include <sstream>

#include "ddmm/checkpoint.hpp"
#include "ddmm/errors.hpp"
#include "json.hpp"

namespace ddmm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string artifact_version() { return "ddmm 0.1.0"; }

std::string sample_id(std::uint64_t phantom_seed, std::uint64_t index) {
  return std::to_string(phantom_seed) + ":" + std::to_string(index);
}

FileDigest digest_file(const fs::path& path, const std::string& recorded_as) {
  const auto bytes = read_file(path);
  return {recorded_as, crc32_of(bytes.data(), bytes.size()), bytes.size()};
}

void Manifest::add_input(const fs::path& path) {
  if (fs::is_directory(path)) {
    const fs::path m = path / "manifest.json";
    require(fs::exists(m), "input directory has no manifest.json: " + path.string());
    inputs.push_back(digest_file(m, m.string()));
  } else {
    inputs.push_back(digest_file(path, path.string()));
  }
}

void Manifest::add_output(const fs::path& run_dir, const std::string& relative) {
  outputs.push_back(digest_file(run_dir / relative, relative));
}

namespace {

json digests_to_json(const std::vector<FileDigest>& v) {
  json a = json::array();
  for (const auto& d : v) a.push_back({{"path", d.path}, {"crc32", d.crc32}, {"bytes", d.bytes}});
  return a;
}

std::vector<FileDigest> digests_from_json(const json& a) {
  std::vector<FileDigest> v;
  for (const auto& d : a) {
    v.push_back({d.at("path").get<std::string>(), d.at("crc32").get<std::uint32_t>(),
                 d.at("bytes").get<std::uint64_t>()});
  }
  return v;
}

}  // namespace

std::string Manifest::to_json() const {
  json j;
  j["command"] = command;
  j["version"] = version;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = digests_to_json(inputs);
  j["outputs"] = digests_to_json(outputs);
  j["samples"] = samples;
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.command = j.at("command").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.config = j.at("config").get<std::string>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.inputs = digests_from_json(j.at("inputs"));
    m.outputs = digests_from_json(j.at("outputs"));
    m.samples = j.at("samples").get<std::map<std::string, std::set<std::string>>>();
    m.notes = j.at("notes").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return m;
}

void Manifest::write(const fs::path& path) const {
  const std::string s = to_json();
  write_file_atomic(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

Manifest Manifest::read(const fs::path& path) {
  require(fs::exists(path), "manifest not found: " + path.string());
  const auto bytes = read_file(path);
  try {
    return from_json(std::string(bytes.begin(), bytes.end()));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace ddmm
