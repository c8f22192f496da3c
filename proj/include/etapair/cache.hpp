#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace etapair {

inline constexpr int kCacheFormatVersion = 1;

/// Identifies what a cache file holds and for which model it was computed.
struct CacheKey {
  std::string kind;
  int sites = 0;
  int n_up = 0;
  int n_down = 0;
  double hopping = 0.0;
  double interaction = 0.0;

  nlohmann::json header() const;
  /// File name derived from the key, e.g. "spectrum_L8_4u4d_t1_U20.bin".
  std::string file_name() const;
};

/// Thrown when a cache file exists but does not belong to the requested key
/// or was written by another format version.
class CacheMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CacheBlob {
  nlohmann::json header;
  std::vector<double> payload;
};

/// Self-describing container: magic, JSON header (format version, model
/// parameters, index layout tag, plus `extra`), then raw doubles.
/// Written to a temporary file and renamed into place.
void write_cache(const std::filesystem::path& path, const CacheKey& key, std::span<const double> payload,
                 const nlohmann::json& extra = nlohmann::json::object());

/// nullopt when the file does not exist. Throws CacheMismatch when it does
/// but its header disagrees with `key` or the current format.
std::optional<CacheBlob> read_cache(const std::filesystem::path& path, const CacheKey& key);

/// SHA-1 of "blob <size>\0<contents>", the identifier git would give the file.
std::string git_blob_hash(const std::filesystem::path& path);

}  // namespace etapair
