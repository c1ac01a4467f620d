#pragma once

// Provenance record written next to every artifact a command produces.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "earl/common.hpp"
#include "earl/dataset.hpp"
#include "json.hpp"

namespace earl {

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  nlohmann::json datasets = nlohmann::json::array();  // {path, files: {name: fnv1a64}}
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string started = utc_timestamp();
  std::string finished;
  std::string status = "running";
  nlohmann::json outputs = nlohmann::json::array();

  // Checksums every regular file directly inside `dir` (a bundle) or the
  // file itself.
  void add_dataset(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    nlohmann::json files = nlohmann::json::object();
    if (fs::is_directory(path)) {
      std::vector<fs::path> entries;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file()) entries.push_back(e.path());
      }
      std::sort(entries.begin(), entries.end());
      for (const auto& p : entries) files[p.filename().string()] = bundle::hex(bundle::file_checksum(p));
    } else {
      files[path.filename().string()] = bundle::hex(bundle::file_checksum(path));
    }
    datasets.push_back({{"path", fs::absolute(path).lexically_normal().string()}, {"files", files}});
  }

  void add_output(const std::filesystem::path& path, const std::string& kind) {
    outputs.push_back({{"path", path.string()}, {"kind", kind}});
  }

  nlohmann::json to_json() const {
    return {{"command", command}, {"argv", argv},         {"config", config},     {"datasets", datasets},
            {"seed", seed},       {"version", version},   {"started", started},   {"finished", finished},
            {"status", status},   {"outputs", outputs}};
  }

  // Rewritten at start and at the end so an aborted run still leaves a record.
  void write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
  }

  void finish(const std::filesystem::path& path, std::string final_status = "ok") {
    finished = utc_timestamp();
    status = std::move(final_status);
    write(path);
  }
};

}  // namespace earl
