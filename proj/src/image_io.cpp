#include "salrefine/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>

namespace salrefine {

namespace {

constexpr char kTensorMagic[4] = {'S', 'A', 'L', 'T'};
constexpr uint32_t kTensorVersion = 1;

uint8_t quantize(double v) {
  const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

// RAII fclose, keeps the libpng error paths simple.
struct FileHandle {
  FILE* f = nullptr;
  explicit FileHandle(const std::string& path, const char* mode)
      : f(std::fopen(path.c_str(), mode)) {}
  ~FileHandle() {
    if (f) std::fclose(f);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
};

ImageRGB load_png(const std::string& path) {
  FileHandle fh(path, "rb");
  if (!fh.f) throw std::runtime_error("cannot open file: " + path);

  png_byte sig[8];
  if (std::fread(sig, 1, 8, fh.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw std::runtime_error("not a PNG file: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("malformed PNG: " + path);
  }

  png_init_io(png, fh.f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported bit depth (16-bit PNG): " + path);
  }

  // Normalize every input variant to 8-bit RGB.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const size_t row_bytes = png_get_rowbytes(png, info);
  if (row_bytes != static_cast<size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unexpected PNG row layout: " + path);
  }

  std::vector<uint8_t> raw(static_cast<size_t>(height) * row_bytes);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageRGB image(width, height);
  for (size_t i = 0; i < image.data.size(); ++i)
    image.data[i] = raw[i] / 255.0;
  return image;
}

void save_png(const std::string& path, int width, int height, int channels,
              const std::vector<uint8_t>& raw) {
  FileHandle fh(path, "wb");
  if (!fh.f) throw std::runtime_error("cannot open file for write: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG write failed: " + path);
  }

  png_init_io(png, fh.f);
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(raw.data() +
                                    static_cast<size_t>(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PPM (P6) / PGM (P5) with maxval 255; '#' comments allowed.
int read_pnm_token(std::istream& in, const std::string& path) {
  int c = in.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    else          in.get();
    c = in.peek();
  }
  int value = -1;
  in >> value;
  if (!in || value < 0)
    throw std::runtime_error("malformed PNM header: " + path);
  return value;
}

ImageRGB load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  char p, kind;
  in.get(p).get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    throw std::runtime_error("unsupported raster format: " + path);
  const bool rgb = kind == '6';

  const int width = read_pnm_token(in, path);
  const int height = read_pnm_token(in, path);
  const int maxval = read_pnm_token(in, path);
  if (width < 1 || height < 1)
    throw std::runtime_error("malformed PNM header: " + path);
  if (maxval != 255)
    throw std::runtime_error("unsupported bit depth (maxval " +
                             std::to_string(maxval) + "): " + path);
  in.get();  // single whitespace byte after the header

  const size_t n = static_cast<size_t>(width) * height * (rgb ? 3 : 1);
  std::vector<uint8_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw std::runtime_error("truncated PNM payload: " + path);

  ImageRGB image(width, height);
  for (size_t p_i = 0; p_i < static_cast<size_t>(width) * height; ++p_i) {
    for (int c = 0; c < 3; ++c)
      image.data[p_i * 3 + c] = raw[rgb ? p_i * 3 + c : p_i] / 255.0;
  }
  return image;
}

bool has_extension(const std::string& path, const char* ext) {
  const auto pos = path.rfind('.');
  if (pos == std::string::npos) return false;
  std::string e = path.substr(pos);
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

// Write-to-temp then rename, so readers never observe partial files.
void atomic_write(const std::string& path,
                  const std::function<void(const std::string&)>& writer) {
  const std::string tmp = path + ".tmp";
  writer(tmp);
  std::filesystem::rename(tmp, path);
}

void write_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& what) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw std::runtime_error("truncated tensor: " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

ImageRGB load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open file: " + path);
  char head[2] = {0, 0};
  probe.read(head, 2);
  probe.close();

  if (head[0] == 'P' && (head[1] == '5' || head[1] == '6'))
    return load_pnm(path);
  return load_png(path);
}

GrayMap load_graymap(const std::string& path) {
  const ImageRGB image = load_image(path);
  GrayMap map(image.width, image.height);
  for (size_t i = 0; i < map.data.size(); ++i)
    map.data[i] = (image.data[i * 3] + image.data[i * 3 + 1] +
                   image.data[i * 3 + 2]) / 3.0;
  return map;
}

void save_graymap(const GrayMap& map, const std::string& path) {
  std::vector<uint8_t> raw(map.data.size());
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(map.data[i]);

  atomic_write(path, [&](const std::string& tmp) {
    if (has_extension(path, ".pgm")) {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open file for write: " + path);
      out << "P5\n" << map.width << " " << map.height << "\n255\n";
      out.write(reinterpret_cast<const char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
      if (!out) throw std::runtime_error("write failed: " + path);
    } else {
      save_png(tmp, map.width, map.height, 1, raw);
    }
  });
}

void save_image(const ImageRGB& image, const std::string& path) {
  std::vector<uint8_t> raw(image.data.size());
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(image.data[i]);

  atomic_write(path, [&](const std::string& tmp) {
    if (has_extension(path, ".ppm")) {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open file for write: " + path);
      out << "P6\n" << image.width << " " << image.height << "\n255\n";
      out.write(reinterpret_cast<const char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
      if (!out) throw std::runtime_error("write failed: " + path);
    } else {
      save_png(tmp, image.width, image.height, 3, raw);
    }
  });
}

void save_label_map_pgm16(const std::vector<int>& labels, int width,
                          int height, const std::string& path) {
  if (labels.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("label map size mismatch");
  atomic_write(path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for write: " + path);
    out << "P5\n" << width << " " << height << "\n65535\n";
    for (int v : labels) {
      const uint16_t u = static_cast<uint16_t>(std::clamp(v, 0, 65535));
      const uint8_t be[2] = {static_cast<uint8_t>(u >> 8),
                             static_cast<uint8_t>(u & 0xff)};
      out.write(reinterpret_cast<const char*>(be), 2);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  });
}

FeatureStack read_tensor_record(std::istream& in, const std::string& what) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw std::runtime_error("bad tensor magic: " + what);
  const uint32_t version = read_u32(in, what);
  if (version != kTensorVersion)
    throw std::runtime_error("unsupported tensor version " +
                             std::to_string(version) + ": " + what);
  const uint32_t k = read_u32(in, what);
  const uint32_t m = read_u32(in, what);
  const uint32_t h = read_u32(in, what);
  if (k < 1 || m < 1 || h < 1)
    throw std::runtime_error("invalid tensor shape: " + what);

  const size_t n = static_cast<size_t>(k) * m * h;
  std::vector<float> payload(n);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != n * sizeof(float))
    throw std::runtime_error("truncated tensor payload: " + what);

  FeatureStack stack(static_cast<int>(k), static_cast<int>(m),
                     static_cast<int>(h));
  for (size_t i = 0; i < n; ++i) stack.data[i] = payload[i];
  return stack;
}

void write_tensor_record(const FeatureStack& stack, std::ostream& out) {
  out.write(kTensorMagic, 4);
  write_u32(out, kTensorVersion);
  write_u32(out, static_cast<uint32_t>(stack.channels));
  write_u32(out, static_cast<uint32_t>(stack.rows));
  write_u32(out, static_cast<uint32_t>(stack.cols));
  std::vector<float> payload(stack.data.size());
  for (size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<float>(stack.data[i]);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

FeatureStack load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return read_tensor_record(in, path);
}

void save_tensor(const FeatureStack& stack, const std::string& path) {
  atomic_write(path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for write: " + path);
    write_tensor_record(stack, out);
    if (!out) throw std::runtime_error("write failed: " + path);
  });
}

}  // namespace salrefine
