#pragma once

// Window files: CSV with '#' metadata lines, one row per window. See
// docs/formats.md for the column layout.

#include <map>
#include <string>
#include <string_view>

#include "diffden/data_ingest.hpp"

namespace diffden {

inline constexpr int kWindowFormatVersion = 1;

struct WindowFile {
  std::map<std::string, std::string> meta;  // '# key=value' lines, format/length/stride excluded
  WindowSet train;
  WindowSet test;
};

std::string serialize_windows(const WindowFile& file);
WindowFile parse_windows(std::string_view text);

void save_windows(const WindowFile& file, const std::string& path);
WindowFile load_windows(const std::string& path);

}  // namespace diffden
