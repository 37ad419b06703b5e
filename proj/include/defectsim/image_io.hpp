#pragma once

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>
#include "json.hpp"

#include "defectsim/error.hpp"
#include "defectsim/imaging.hpp"

namespace defectsim {

namespace fs = std::filesystem;

/// Luminance weights applied to normalized RGB channels.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

/// Decoded PNG samples, interleaved, at the file's native bit depth.
struct RawRaster {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (gray) or 3 (RGB)
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t max_value() const { return bit_depth == 16 ? 65535 : 255; }
};

namespace detail {

struct PngReadState {
  RawRaster raster;
  std::vector<png_bytep> rows;
  std::vector<png_byte> bytes;
  const char* error = nullptr;
  ErrorCode code = ErrorCode::UnsupportedFormat;
};

// No objects with destructors may live in this frame: libpng reports errors by longjmp.
inline bool png_read_into(std::FILE* fp, PngReadState* st) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    st->error = "cannot allocate PNG reader";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    st->error = "cannot allocate PNG info";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    if (!st->error) st->error = "corrupt PNG stream";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian uint16 samples
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  if ((channels != 1 && channels != 3) || (out_depth != 8 && out_depth != 16)) {
    st->error = "only 8/16-bit grayscale and RGB PNG files are supported";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  st->bytes.resize(rowbytes * h);
  st->rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) st->rows[y] = st->bytes.data() + y * rowbytes;
  png_read_image(png, st->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  st->raster.width = static_cast<int>(w);
  st->raster.height = static_cast<int>(h);
  st->raster.channels = channels;
  st->raster.bit_depth = out_depth;
  return true;
}

struct PngWriteState {
  const RawRaster* raster = nullptr;
  std::vector<png_byte> bytes;
  std::vector<png_bytep> rows;
  const char* error = nullptr;
};

inline bool png_write_from(std::FILE* fp, PngWriteState* st) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    st->error = "cannot allocate PNG writer";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    st->error = "cannot allocate PNG info";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    st->error = "PNG encoding failed";
    return false;
  }
  const RawRaster& r = *st->raster;
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), r.bit_depth,
               r.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (r.bit_depth == 16) png_set_swap(png);
  png_write_image(png, st->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline void check_png_signature_and_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char head[24] = {};
  in.read(reinterpret_cast<char*>(head), sizeof head);
  detail::require(in.gcount() >= 8 && png_sig_cmp(head, 0, 8) == 0, ErrorCode::UnsupportedFormat,
                  path.string() + " is not a PNG file");
  detail::require(in.gcount() == 24, ErrorCode::UnsupportedFormat, path.string() + " is truncated");
  // IHDR follows the signature; zero dimensions are rejected before libpng sees them.
  auto be32 = [&](int o) {
    return (std::uint32_t{head[o]} << 24) | (std::uint32_t{head[o + 1]} << 16) | (std::uint32_t{head[o + 2]} << 8) |
           std::uint32_t{head[o + 3]};
  };
  detail::require(be32(16) != 0 && be32(20) != 0, ErrorCode::EmptyRaster, path.string() + " has zero size");
}

}  // namespace detail

inline RawRaster read_png(const fs::path& path) {
  detail::require(fs::exists(path), ErrorCode::FileNotFound, path.string());
  detail::check_png_signature_and_size(path);
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  detail::require(fp != nullptr, ErrorCode::FileNotFound, path.string());
  detail::PngReadState st;
  const bool ok = detail::png_read_into(fp, &st);
  std::fclose(fp);
  detail::require(ok, st.code, path.string() + ": " + (st.error ? st.error : "read failed"));

  RawRaster out = std::move(st.raster);
  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(count);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i)
      out.samples[i] = static_cast<std::uint16_t>(st.bytes[2 * i] | (st.bytes[2 * i + 1] << 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) out.samples[i] = st.bytes[i];
  }
  return out;
}

inline void write_png(const fs::path& path, const RawRaster& raster) {
  detail::require(raster.width > 0 && raster.height > 0, ErrorCode::EmptyRaster, "cannot write a zero-size raster");
  detail::require(raster.channels == 1 || raster.channels == 3, ErrorCode::UnsupportedFormat, "channels must be 1 or 3");
  detail::require(raster.bit_depth == 8 || raster.bit_depth == 16, ErrorCode::UnsupportedFormat,
                  "bit depth must be 8 or 16");
  const std::size_t count = static_cast<std::size_t>(raster.width) * raster.height * raster.channels;
  detail::require(raster.samples.size() == count, ErrorCode::DimensionMismatch, "sample count mismatch");

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::PngWriteState st;
  st.raster = &raster;
  const std::size_t bytes_per_sample = raster.bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(raster.width) * raster.channels * bytes_per_sample;
  st.bytes.resize(rowbytes * raster.height);
  for (std::size_t i = 0; i < count; ++i) {
    if (bytes_per_sample == 2) {
      st.bytes[2 * i] = static_cast<png_byte>(raster.samples[i] & 0xFF);
      st.bytes[2 * i + 1] = static_cast<png_byte>(raster.samples[i] >> 8);
    } else {
      detail::require(raster.samples[i] <= 255, ErrorCode::InvalidValue, "8-bit sample out of range");
      st.bytes[i] = static_cast<png_byte>(raster.samples[i]);
    }
  }
  st.rows.resize(raster.height);
  for (int y = 0; y < raster.height; ++y) st.rows[y] = st.bytes.data() + y * rowbytes;

  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  detail::require(fp != nullptr, ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const bool ok = detail::png_write_from(fp, &st);
  const bool closed = std::fclose(fp) == 0;
  detail::require(ok && closed, ErrorCode::IoError, path.string() + ": " + (st.error ? st.error : "write failed"));
}

/// Gray files are normalized by their maximum code; RGB files are converted
/// with the kLuma* weights on normalized channels.
inline GrayImage load_image(const fs::path& path) {
  const RawRaster raw = read_png(path);
  const double scale = 1.0 / raw.max_value();
  const std::size_t count = static_cast<std::size_t>(raw.width) * raw.height;
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (raw.channels == 1) {
      values[i] = raw.samples[i] * scale;
    } else {
      const double r = raw.samples[3 * i] * scale;
      const double g = raw.samples[3 * i + 1] * scale;
      const double b = raw.samples[3 * i + 2] * scale;
      values[i] = std::clamp(kLumaR * r + kLumaG * g + kLumaB * b, 0.0, 1.0);
    }
  }
  return GrayImage(raw.width, raw.height, std::move(values));
}

inline void save_image(const GrayImage& img, const fs::path& path, int bit_depth = 16) {
  detail::require(!img.empty(), ErrorCode::EmptyRaster, "cannot save an empty image");
  RawRaster raw{img.width(), img.height(), 1, bit_depth, {}};
  const double max_code = raw.max_value();
  raw.samples.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    raw.samples[i] = static_cast<std::uint16_t>(std::lround(img[i] * max_code));
  write_png(path, raw);
}

/// Loads K images and checks they share one size.
inline std::vector<GrayImage> load_image_stack(const std::vector<fs::path>& paths) {
  std::vector<GrayImage> images;
  images.reserve(paths.size());
  for (const auto& p : paths) {
    images.push_back(load_image(p));
    detail::require(images.back().width() == images.front().width() &&
                        images.back().height() == images.front().height(),
                    ErrorCode::DimensionMismatch, p.string() + " differs in size from " + paths.front().string());
  }
  return images;
}

inline Rgb8Image load_rgb8(const fs::path& path) {
  const RawRaster raw = read_png(path);
  detail::require(raw.channels == 3 && raw.bit_depth == 8, ErrorCode::UnsupportedFormat,
                  path.string() + " is not an 8-bit RGB PNG");
  Rgb8Image out(raw.width, raw.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<std::uint8_t>(raw.samples[i]);
  return out;
}

inline void save_rgb8(const Rgb8Image& img, const fs::path& path) {
  RawRaster raw{img.width, img.height, 3, 8, std::vector<std::uint16_t>(img.data.begin(), img.data.end())};
  write_png(path, raw);
}

inline NormalMap load_normal_map(const fs::path& path) { return decode_normal_map(load_rgb8(path)); }
inline void save_normal_map(const NormalMap& nm, const fs::path& path) { save_rgb8(encode_normal_map(nm), path); }

/// ID masks persist as 16-bit grayscale, so IDs above 65535 are rejected.
inline void save_mask(const MaskMap& mask, const fs::path& path) {
  RawRaster raw{mask.width(), mask.height(), 1, 16, {}};
  raw.samples.reserve(mask.size());
  for (auto v : mask.data()) {
    detail::require(v <= 65535, ErrorCode::InvalidValue, "mask ID exceeds 16-bit range");
    raw.samples.push_back(static_cast<std::uint16_t>(v));
  }
  write_png(path, raw);
}

inline MaskMap load_mask(const fs::path& path) {
  const RawRaster raw = read_png(path);
  detail::require(raw.channels == 1, ErrorCode::UnsupportedFormat, path.string() + " is not a grayscale mask");
  return MaskMap(raw.width, raw.height, std::vector<std::uint32_t>(raw.samples.begin(), raw.samples.end()));
}

/// Physical scale stored next to a 16-bit height raster:
/// height_mm = (code - zero_code) * mm_per_unit.
struct HeightScale {
  double mm_per_unit = 0.0;
  int zero_code = 0;
  double pixels_per_mm = 0.0;
};

inline fs::path sidecar_path(const fs::path& png_path) {
  fs::path p = png_path;
  p += ".json";
  return p;
}

inline HeightScale height_scale_for(const HeightMap& h) {
  double lo = 0.0, hi = 0.0;
  for (double v : h.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  HeightScale s;
  if (hi == lo) {
    s.mm_per_unit = 1.0;
    s.zero_code = 0;
    return s;
  }
  // Zero keeps an exact code so flat surroundings survive the round trip.
  s.zero_code = static_cast<int>(std::lround(-lo / (hi - lo) * 65535.0));
  const double below = s.zero_code > 0 ? -lo / s.zero_code : 0.0;
  const double above = s.zero_code < 65535 ? hi / (65535 - s.zero_code) : 0.0;
  s.mm_per_unit = std::max(below, above);
  return s;
}

inline void save_height_map(const HeightMap& h, const fs::path& path, double pixels_per_mm) {
  HeightScale s = height_scale_for(h);
  s.pixels_per_mm = pixels_per_mm;
  RawRaster raw{h.width(), h.height(), 1, 16, {}};
  raw.samples.reserve(h.size());
  for (double v : h.data()) {
    const long code = std::lround(v / s.mm_per_unit) + s.zero_code;
    raw.samples.push_back(static_cast<std::uint16_t>(std::clamp(code, 0L, 65535L)));
  }
  write_png(path, raw);
  const nlohmann::json meta = {{"mm_per_unit", s.mm_per_unit},
                               {"zero_code", s.zero_code},
                               {"pixels_per_mm", s.pixels_per_mm},
                               {"width", h.width()},
                               {"height", h.height()}};
  std::ofstream out(sidecar_path(path));
  detail::require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

struct LoadedHeightMap {
  HeightMap height;
  HeightScale scale;
};

inline LoadedHeightMap load_height_map(const fs::path& path) {
  const fs::path meta_path = sidecar_path(path);
  detail::require(fs::exists(meta_path), ErrorCode::FileNotFound, meta_path.string());
  nlohmann::json meta;
  try {
    std::ifstream in(meta_path);
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, meta_path.string() + ": " + e.what());
  }
  HeightScale s;
  s.mm_per_unit = meta.at("mm_per_unit").get<double>();
  s.zero_code = meta.at("zero_code").get<int>();
  s.pixels_per_mm = meta.value("pixels_per_mm", 0.0);
  const RawRaster raw = read_png(path);
  detail::require(raw.channels == 1 && raw.bit_depth == 16, ErrorCode::UnsupportedFormat,
                  path.string() + " is not a 16-bit grayscale height map");
  std::vector<double> heights(raw.samples.size());
  for (std::size_t i = 0; i < heights.size(); ++i)
    heights[i] = (static_cast<int>(raw.samples[i]) - s.zero_code) * s.mm_per_unit;
  return {HeightMap(raw.width, raw.height, std::move(heights)), s};
}

}  // namespace defectsim
