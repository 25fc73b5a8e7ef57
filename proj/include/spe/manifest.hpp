#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spe {

/// Ordered "key = value" text document used for dataset and model manifests
/// and for evaluation reports.
class Manifest {
 public:
  void set(const std::string& key, std::string value);
  void set_double(const std::string& key, double value);
  void set_uint(const std::string& key, std::uint64_t value);

  bool contains(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  /// Throws IoError when the key is missing or malformed.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  static Manifest parse(const std::string& text);

  void write(const std::filesystem::path& path) const;
  static Manifest read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest decimal text that round-trips a double.
std::string format_double(double value);

std::string join(std::span<const std::string> parts, char sep);
std::vector<std::string> split(const std::string& text, char sep);

// Little-endian blob helpers. Readers validate the element count.
void write_f32_blob(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected_count);
void write_u16_blob(const std::filesystem::path& path, std::span<const std::uint16_t> values);
std::vector<std::uint16_t> read_u16_blob(const std::filesystem::path& path, std::size_t expected_count);

/// Writes text to a file, throwing IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace spe
