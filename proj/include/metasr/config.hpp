#pragma once

#include <map>
#include <ostream>
#include <string>

#include "metasr/meta.hpp"

namespace metasr {

// Flat `key = value` file, UTF-8, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Applies keys onto a config; unknown keys raise.
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv);

// All keys in a stable order, one "# key = value" line each.
void print_config(const RunConfig& cfg, std::ostream& out);

}  // namespace metasr
