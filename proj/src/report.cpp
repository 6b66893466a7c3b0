#include "smectic/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <sys/stat.h>

#include "json.hpp"

namespace smectic {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool file_exists(const std::string& path) {
  struct stat st{};
  return ::stat(path.c_str(), &st) == 0;
}

}  // namespace

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not an integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: key '" + key + "' is not a boolean: " + v);
}

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
    cfg.kv[key] = val;
  }
  return cfg;
}

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      now = std::time_t(std::stoll(epoch));
    } catch (const std::exception&) {
      // keep wall clock on malformed override
    }
  }
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void RunManifest::add_config(const std::string& key, const std::string& value) {
  config_echo.emplace_back(key, value);
}

void RunManifest::add_result(const std::string& key, double value) {
  results.emplace_back(key, fmt17(value));
}

void RunManifest::add_result(const std::string& key, const std::string& value) {
  results.emplace_back(key, value);
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = m.tool;
  j["version"] = m.version;
  j["command"] = m.command;
  j["created_at"] = m.created_at;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : m.config_echo) cfg[k] = v;
  j["config"] = cfg;
  j["outputs"] = m.outputs;
  nlohmann::json res = nlohmann::json::object();
  for (const auto& [k, v] : m.results) res[k] = v;
  j["results"] = res;
  j["checks"] = nlohmann::json::array();
  for (const auto& [name, pass] : m.checks)
    j["checks"].push_back({{"name", name}, {"pass", pass}});
  return j.dump(2);
}

std::string write_manifest(const RunManifest& m, const std::string& dir) {
  for (const auto& out : m.outputs) {
    const std::string path = dir + "/" + out;
    if (!file_exists(path))
      throw std::runtime_error("manifest: listed output missing: " + path);
  }
  const std::string text = manifest_json(m);
  const std::string final_path = dir + "/manifest.json";
  const std::string tmp_path = final_path + ".tmp";
  std::FILE* fp = std::fopen(tmp_path.c_str(), "w");
  if (!fp) throw std::runtime_error("manifest: cannot open " + tmp_path);
  const bool ok = std::fwrite(text.data(), 1, text.size(), fp) == text.size() &&
                  std::fputc('\n', fp) != EOF;
  if (std::fclose(fp) != 0 || !ok) {
    std::remove(tmp_path.c_str());
    throw std::runtime_error("manifest: write failed: " + tmp_path);
  }
  if (std::rename(tmp_path.c_str(), final_path.c_str()) != 0) {
    std::remove(tmp_path.c_str());
    throw std::runtime_error("manifest: rename failed: " + final_path);
  }
  return final_path;
}

}  // namespace smectic
