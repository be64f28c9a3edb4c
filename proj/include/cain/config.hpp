#ifndef CAIN_CONFIG_HPP_
#define CAIN_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cain {

// Flat key=value configuration. Lines are `key = value`, blank lines and
// `#` comments are ignored. Typed getters either require the key or take a
// default; a missing required key raises ConfigError naming the key.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

  // Canonical text form: sorted `key=value` lines. Used for hashing.
  std::string canonical() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// FNV-1a over a byte string; used for config hashes in checkpoints.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace cain

#endif  // CAIN_CONFIG_HPP_
