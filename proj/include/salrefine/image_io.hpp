#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "salrefine/image.hpp"

namespace salrefine {

/// Load an 8-bit PNG, PPM (P6) or PGM (P5) file. Grayscale inputs expand to
/// three identical channels; intensities scale from [0,255] to [0,1].
/// Throws std::runtime_error on missing files, malformed headers or
/// unsupported bit depths.
ImageRGB load_image(const std::string& path);

/// Load as a single-channel map (channel mean of load_image).
GrayMap load_graymap(const std::string& path);

/// Write an 8-bit file, format chosen by extension (.png or .pgm/.ppm).
/// Values store as round(v * 255). Writes are atomic (temp file + rename).
void save_graymap(const GrayMap& map, const std::string& path);
void save_image(const ImageRGB& image, const std::string& path);

/// Label map as 16-bit big-endian PGM, for superpixel debugging.
void save_label_map_pgm16(const std::vector<int>& labels, int width,
                          int height, const std::string& path);

// Tensor container: magic "SALT", u32 version=1, u32 K, u32 m, u32 h,
// then K*m*h little-endian f32, channel-major then row-major.
FeatureStack load_tensor(const std::string& path);
void save_tensor(const FeatureStack& stack, const std::string& path);

/// Stream-level record access, used for multi-record checkpoint files.
FeatureStack read_tensor_record(std::istream& in, const std::string& what);
void write_tensor_record(const FeatureStack& stack, std::ostream& out);

}  // namespace salrefine
