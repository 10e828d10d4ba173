#include "fmreg/pfm.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace fmreg {

namespace {

// Floats are written little-endian; hosts are assumed little-endian
// (checked once at runtime).
bool host_is_little_endian() {
  const uint16_t v = 1;
  uint8_t b;
  std::memcpy(&b, &v, 1);
  return b == 1;
}

}  // namespace

void write_pfm(const std::string& path, const ImageBuffer& img) {
  if (img.empty()) throw MalformedHeader("write_pfm: empty image");
  if (!host_is_little_endian()) {
    throw std::runtime_error("write_pfm: big-endian host unsupported");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pfm: cannot open " + path);

  std::string magic;
  if (img.channels() == 1) {
    magic = "Pf";
  } else if (img.channels() == 3) {
    magic = "PF";
  } else {
    magic = "PC" + std::to_string(img.channels());
  }
  out << magic << '\n' << img.width() << ' ' << img.height() << '\n' << "-1.0\n";

  // Bottom-to-top row order, as PFM readers expect.
  const size_t row_bytes = static_cast<size_t>(img.width()) * img.channels() * 4;
  for (int y = img.height() - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(img.pixel(0, y)),
              static_cast<std::streamsize>(row_bytes));
  }
  if (!out) throw std::runtime_error("write_pfm: write failed for " + path);
}

ImageBuffer read_pfm(const std::string& path) {
  if (!host_is_little_endian()) {
    throw std::runtime_error("read_pfm: big-endian host unsupported");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedHeader("read_pfm: cannot open " + path);

  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else if (magic.size() > 2 && magic.compare(0, 2, "PC") == 0) {
    try {
      channels = std::stoi(magic.substr(2));
    } catch (const std::exception&) {
      throw MalformedHeader("read_pfm: bad channel count in '" + magic + "'");
    }
  } else {
    throw MalformedHeader("read_pfm: unknown magic '" + magic + "'");
  }
  if (channels < 1) {
    throw MalformedHeader("read_pfm: channel count must be >= 1");
  }

  long long w = 0, h = 0;
  double scale = 0.0;
  if (!(in >> w >> h >> scale)) throw MalformedHeader("read_pfm: bad dimensions");
  if (w < 1 || h < 1 || w > 1 << 20 || h > 1 << 20) {
    throw MalformedHeader("read_pfm: dimensions out of range");
  }
  if (!(scale < 0.0)) {
    throw MalformedHeader("read_pfm: scale must be negative (little-endian)");
  }
  // Exactly one whitespace byte separates the header from the payload.
  in.get();

  ImageBuffer img(static_cast<int>(w), static_cast<int>(h), channels);
  const size_t row_bytes = static_cast<size_t>(w) * channels * 4;
  for (int y = img.height() - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(img.pixel(0, y)),
            static_cast<std::streamsize>(row_bytes));
    if (static_cast<size_t>(in.gcount()) != row_bytes) {
      throw TruncatedData("read_pfm: payload ends early in " + path);
    }
  }
  return img;
}

}  // namespace fmreg
