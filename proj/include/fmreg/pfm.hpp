#pragma once

#include <stdexcept>
#include <string>

#include "fmreg/image.hpp"

namespace fmreg {

class MalformedHeader : public std::runtime_error {
 public:
  explicit MalformedHeader(const std::string& what) : std::runtime_error(what) {}
};

class TruncatedData : public std::runtime_error {
 public:
  explicit TruncatedData(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Portable float map, little-endian only. Magic "Pf" for one channel,
 * "PF" for three, and the extension "PC<k>" for any other channel
 * count. Header is "<magic>\n<width> <height>\n-1.0\n" followed by
 * width*height*channels float32 samples, rows bottom-to-top,
 * channel-interleaved. The round trip is bit-exact for finite floats.
 */
void write_pfm(const std::string& path, const ImageBuffer& img);

/// Throws MalformedHeader / TruncatedData on invalid files.
ImageBuffer read_pfm(const std::string& path);

}  // namespace fmreg
