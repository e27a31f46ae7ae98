#pragma once

// Run artifacts are buffered in memory and only reach the disk once the run has
// succeeded, so a failed run never leaves half a result behind.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "sonic/core/error.hpp"

namespace sonic::cli {

inline constexpr const char* kToolName = "sonic_cli";
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(md[i]);
  return hex.str();
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Artifacts {
 public:
  /// Adds a file; a later add with the same name replaces it.
  void add(const std::string& name, const std::function<void(std::ostream&)>& writer) {
    std::ostringstream os;
    writer(os);
    files_[name] = os.str();
  }
  void add_json(const std::string& name, const nlohmann::json& j) { files_[name] = j.dump(2) + "\n"; }

  /// Writes everything into dir and returns the manifest entries, sorted by name.
  nlohmann::json flush(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto list = nlohmann::json::array();
    for (const auto& [name, bytes] : files_) {
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      out << bytes;
      out.close();
      if (!out) throw Error("cannot write " + (dir / name).string());
      list.push_back({{"file", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    return list;
  }

  std::size_t size() const { return files_.size(); }

 private:
  std::map<std::string, std::string> files_;
};

inline std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace sonic::cli
