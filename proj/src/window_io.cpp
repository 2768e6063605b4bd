#include "diffden/window_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "diffden/error.hpp"

namespace diffden {
namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

template <class T>
T parse_field(std::string_view s, std::size_t line, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(Errc::MalformedRow, "line " + std::to_string(line) + ": bad " + what + " '" +
                                        std::string(s) + "'");
  return v;
}

void append_rows(std::string& out, const WindowSet& set) {
  for (const Window& w : set.windows) {
    out += w.source_ticker;
    out += ',';
    out += split_name(set.split);
    out += ',';
    out += w.role == WindowRole::Sample ? "sample" : "continuation";
    out += ',' + std::to_string(w.origin_index) + ',' + std::to_string(w.end_timestamp) + ',';
    append_number(out, w.norm.shift);
    out += ',';
    append_number(out, w.norm.scale);
    out += w.norm.degenerate ? ",1" : ",0";
    for (double v : w.values) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
}

}  // namespace

std::string serialize_windows(const WindowFile& file) {
  if (file.train.length != file.test.length || file.train.stride != file.test.stride)
    throw Error(Errc::ShapeMismatch, "train and test window sets disagree on L or stride");
  const std::size_t L = file.train.length;
  std::string out = "# format=diffden-windows\n# version=" + std::to_string(kWindowFormatVersion) +
                    "\n# length=" + std::to_string(L) + "\n# stride=" + std::to_string(file.train.stride) + "\n";
  for (const auto& [k, v] : file.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw Error(Errc::BadParams, "metadata keys may not contain '=' or newlines");
    out += "# " + k + "=" + v + "\n";
  }
  out += "ticker,split,role,origin_index,end_timestamp,shift,scale,degenerate";
  for (std::size_t i = 0; i < L; ++i) out += ",v" + std::to_string(i);
  out += '\n';
  for (const WindowSet* s : {&file.train, &file.test}) {
    for (const Window& w : s->windows)
      if (w.values.size() != L) throw Error(Errc::ShapeMismatch, "window length differs from L");
    append_rows(out, *s);
  }
  return out;
}

WindowFile parse_windows(std::string_view text) {
  WindowFile file;
  file.train.split = Split::Train;
  file.test.split = Split::Test;
  std::size_t L = 0, stride = 0, line_no = 0;
  bool have_header = false, have_format = false;
  int version = -1;

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (line.front() == '#') {
      line.remove_prefix(1);
      while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string key(line.substr(0, eq));
      const std::string_view val = line.substr(eq + 1);
      if (key == "format") {
        if (val != "diffden-windows") throw Error(Errc::VersionMismatch, "not a window file");
        have_format = true;
      } else if (key == "version") {
        version = parse_field<int>(val, line_no, "version");
      } else if (key == "length") {
        L = parse_field<std::size_t>(val, line_no, "length");
      } else if (key == "stride") {
        stride = parse_field<std::size_t>(val, line_no, "stride");
      } else {
        file.meta[key] = std::string(val);
      }
      continue;
    }
    if (!have_header) {
      if (!have_format) throw Error(Errc::VersionMismatch, "missing '# format=diffden-windows'");
      if (version != kWindowFormatVersion)
        throw Error(Errc::VersionMismatch, "window file version " + std::to_string(version));
      if (L < 2 || stride < 1) throw Error(Errc::MalformedRow, "missing or invalid length/stride");
      have_header = true;
      continue;
    }

    std::vector<std::string_view> f;
    std::size_t s = 0;
    while (true) {
      const std::size_t c = line.find(',', s);
      f.push_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (f.size() != 8 + L)
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                          std::to_string(8 + L) + " fields, got " + std::to_string(f.size()));
    Window w;
    w.source_ticker = std::string(f[0]);
    WindowSet* target = nullptr;
    if (f[1] == "train") target = &file.train;
    else if (f[1] == "test") target = &file.test;
    else throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": bad split");
    if (f[2] == "sample") w.role = WindowRole::Sample;
    else if (f[2] == "continuation") w.role = WindowRole::Continuation;
    else throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": bad role");
    w.origin_index = parse_field<std::size_t>(f[3], line_no, "origin_index");
    w.end_timestamp = parse_field<std::int64_t>(f[4], line_no, "end_timestamp");
    w.norm.shift = parse_field<double>(f[5], line_no, "shift");
    w.norm.scale = parse_field<double>(f[6], line_no, "scale");
    w.norm.degenerate = parse_field<int>(f[7], line_no, "degenerate") != 0;
    w.values.resize(L);
    for (std::size_t i = 0; i < L; ++i) w.values[i] = parse_field<double>(f[8 + i], line_no, "value");
    target->windows.push_back(std::move(w));
  }
  if (!have_header) throw Error(Errc::MalformedRow, "window file has no column header");
  file.train.length = file.test.length = L;
  file.train.stride = file.test.stride = stride;
  return file;
}

void save_windows(const WindowFile& file, const std::string& path) {
  const std::string text = serialize_windows(file);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(Errc::IoError, "short write to " + path);
}

WindowFile load_windows(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_windows(ss.str());
}

}  // namespace diffden
