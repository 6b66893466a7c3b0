#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace smectic {

// Flat "key = value" configuration text: one pair per line, '#' starts a
// comment, blank lines ignored. Keys and values are trimmed verbatim strings;
// typed accessors parse on demand and throw std::invalid_argument with the
// offending key on malformed input.
struct Config {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);

// "%.17g" round-trip formatting used by every writer.
std::string fmt17(double x);

// UTC timestamp "YYYY-MM-DDThh:mm:ssZ". Honors SOURCE_DATE_EPOCH when set so
// archived runs can be byte-identical.
std::string iso_utc_now();

// Run summary written by the CLI. The manifest is the last artifact a command
// writes (temp file + atomic rename), so a manifest on disk certifies the run
// finished and every listed output exists.
struct RunManifest {
  std::string tool = "smectic";
  std::string version;
  std::string command;
  std::string created_at;
  std::vector<std::pair<std::string, std::string>> config_echo;  // insertion order
  std::vector<std::string> outputs;                              // paths relative to dir
  std::vector<std::pair<std::string, std::string>> results;      // name -> printed value
  std::vector<std::pair<std::string, bool>> checks;

  void add_config(const std::string& key, const std::string& value);
  void add_result(const std::string& key, double value);
  void add_result(const std::string& key, const std::string& value);
};

// Serializes the manifest; throws std::runtime_error if any listed output is
// missing from dir at write time. Returns the manifest path.
std::string write_manifest(const RunManifest& m, const std::string& dir);

std::string manifest_json(const RunManifest& m);

}  // namespace smectic
