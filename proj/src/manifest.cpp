#include "spe/manifest.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spe/errors.hpp"

namespace spe {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
void write_blob(const std::filesystem::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw IoError("short write to " + path.string());
}

template <typename T>
std::vector<T> read_blob(const std::filesystem::path& path, std::size_t expected_count) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  if (bytes != expected_count * sizeof(T)) {
    throw IoError(path.string() + ": blob holds " + std::to_string(bytes) + " bytes, manifest implies " +
                  std::to_string(expected_count * sizeof(T)));
  }
  std::vector<T> values(expected_count);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + path.string());
  return values;
}

}  // namespace

void Manifest::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

void Manifest::set_double(const std::string& key, double value) { set(key, format_double(value)); }

void Manifest::set_uint(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool Manifest::contains(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> Manifest::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw IoError("manifest is missing key '" + key + "'");
}

double Manifest::get_double(const std::string& key) const {
  const auto& text = get(key);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError("manifest key '" + key + "' is not a number: " + text);
  }
  return value;
}

std::uint64_t Manifest::get_uint(const std::string& key) const {
  const auto& text = get(key);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError("manifest key '" + key + "' is not an unsigned integer: " + text);
  }
  return value;
}

std::string Manifest::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw IoError("manifest line " + std::to_string(line_no) + " has no '='");
    m.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return m;
}

void Manifest::write(const std::filesystem::path& path) const { write_text(path, to_string()); }

Manifest Manifest::read(const std::filesystem::path& path) { return parse(read_text(path)); }

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::logic_error("format_double failed");
  return std::string(buf, ptr);
}

std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(trim(text.substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

void write_f32_blob(const std::filesystem::path& path, std::span<const float> values) { write_blob(path, values); }

std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected_count) {
  return read_blob<float>(path, expected_count);
}

void write_u16_blob(const std::filesystem::path& path, std::span<const std::uint16_t> values) {
  write_blob(path, values);
}

std::vector<std::uint16_t> read_u16_blob(const std::filesystem::path& path, std::size_t expected_count) {
  return read_blob<std::uint16_t>(path, expected_count);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace spe
