#include "lssat/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "lssat/error.hpp"

namespace lssat {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw DataError(path.string() + ": truncated netpbm header");
  return tok;
}

std::size_t number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = token(in, path);
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad netpbm header field '" + tok + "'");
  }
}

}  // namespace

Raster read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string magic = token(in, path);
  std::size_t channels;
  bool binary;
  if (magic == "P5") channels = 1, binary = true;
  else if (magic == "P6") channels = 3, binary = true;
  else if (magic == "P2") channels = 1, binary = false;
  else if (magic == "P3") channels = 3, binary = false;
  else throw DataError(path.string() + ": unsupported image format (expected PGM/PPM)");

  Raster r;
  r.channels = channels;
  r.width = number(in, path);
  r.height = number(in, path);
  const std::size_t maxval = number(in, path);
  if (maxval == 0 || maxval > 255) throw DataError(path.string() + ": only 8-bit netpbm is supported");
  r.pixels.resize(r.height * r.width * channels);
  if (binary) {
    // `token` consumed exactly one whitespace byte after maxval.
    in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.pixels.size())) {
      throw DataError(path.string() + ": truncated pixel data");
    }
  } else {
    for (auto& px : r.pixels) {
      const std::size_t v = number(in, path);
      if (v > maxval) throw DataError(path.string() + ": sample exceeds maxval");
      px = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& px : r.pixels) px = static_cast<std::uint8_t>((px * 255 + maxval / 2) / maxval);
  }
  return r;
}

void write_netpbm(const Raster& r, const std::filesystem::path& path) {
  if (r.channels != 1 && r.channels != 3) throw DataError("netpbm: only 1 or 3 channels can be written");
  if (r.pixels.size() != r.height * r.width * r.channels) throw DataError("netpbm: pixel buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out << (r.channels == 1 ? "P5" : "P6") << '\n' << r.width << ' ' << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace lssat
