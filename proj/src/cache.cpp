#include "etapair/cache.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

#include <openssl/evp.h>

#include "etapair/basis.hpp"

namespace etapair {

namespace {

constexpr char kMagic[8] = {'E', 'T', 'A', 'P', 'C', 'A', 'C', 'H'};

std::string compact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

nlohmann::json CacheKey::header() const {
  return {{"format_version", kCacheFormatVersion},
          {"kind", kind},
          {"sites", sites},
          {"n_up", n_up},
          {"n_down", n_down},
          {"hopping", hopping},
          {"interaction", interaction},
          {"layout", kIndexLayoutTag}};
}

std::string CacheKey::file_name() const {
  return kind + "_L" + std::to_string(sites) + "_" + std::to_string(n_up) + "u" + std::to_string(n_down) + "d_t" +
         compact(hopping) + "_U" + compact(interaction) + ".bin";
}

void write_cache(const std::filesystem::path& path, const CacheKey& key, std::span<const double> payload,
                 const nlohmann::json& extra) {
  nlohmann::json header = key.header();
  header["payload_doubles"] = payload.size();
  if (!extra.is_null() && !extra.empty()) header["extra"] = extra;
  const std::string text = header.dump();
  const std::uint64_t text_size = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write cache " + tmp.string());
    f.write(kMagic, sizeof kMagic);
    f.write(reinterpret_cast<const char*>(&text_size), sizeof text_size);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size_bytes()));
    if (!f) throw std::runtime_error("short write on cache " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<CacheBlob> read_cache(const std::filesystem::path& path, const CacheKey& key) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  const std::string hint = " (delete " + path.string() + " to rebuild it)";

  char magic[sizeof kMagic];
  std::uint64_t text_size = 0;
  f.read(magic, sizeof magic);
  f.read(reinterpret_cast<char*>(&text_size), sizeof text_size);
  if (!f || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic)) || text_size > (1u << 20)) {
    throw CacheMismatch("not an etapair cache file" + hint);
  }
  std::string text(text_size, '\0');
  f.read(text.data(), static_cast<std::streamsize>(text_size));
  CacheBlob blob;
  try {
    blob.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw CacheMismatch("unreadable cache header" + hint);
  }

  const nlohmann::json expected = key.header();
  for (auto it = expected.begin(); it != expected.end(); ++it) {
    if (!blob.header.contains(it.key()) || blob.header[it.key()] != it.value()) {
      throw CacheMismatch("stale cache: field '" + it.key() + "' is " +
                          (blob.header.contains(it.key()) ? blob.header[it.key()].dump() : std::string("missing")) +
                          ", expected " + it.value().dump() + hint);
    }
  }
  const auto count = blob.header.value("payload_doubles", std::uint64_t{0});
  blob.payload.resize(count);
  f.read(reinterpret_cast<char*>(blob.payload.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw CacheMismatch("truncated cache payload" + hint);
  return blob;
}

std::string git_blob_hash(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  const auto size = std::filesystem::file_size(path);
  const std::string prefix = "blob " + std::to_string(size) + std::string(1, '\0');

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha1 unavailable");
  }
  EVP_DigestUpdate(ctx, prefix.data(), prefix.size());
  std::vector<char> buf(1 << 20);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

}  // namespace etapair
