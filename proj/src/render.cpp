/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "swinsits/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "byteio.hpp"

namespace swinsits {

namespace {

constexpr Color kWhite{255, 255, 255};
constexpr Color kBlack{0, 0, 0};

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Color hsv(double hue_deg, double s, double v) {
  const double c = v * s;
  const double hp = hue_deg / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {to_byte(r + m), to_byte(g + m), to_byte(b + m)};
}

void check_map(std::span<const std::uint8_t> labels, std::int64_t height, std::int64_t width,
               const char* what) {
  SWINSITS_CHECK(height > 0 && width > 0 && static_cast<std::int64_t>(labels.size()) == height * width,
                 ErrorKind::Dimension, what, ": map of ", labels.size(), " pixels does not match ",
                 height, "x", width);
}

}  // namespace

Color default_class_color(std::int64_t id) {
  SWINSITS_CHECK(id >= 0, ErrorKind::Palette, "negative class id ", id);
  const double hue = static_cast<double>(id % 18) * 20.0;
  const double value = 1.0 - 0.3 * static_cast<double>((id / 18) % 3);
  return hsv(hue, 0.85, value);
}

Palette Palette::default_for(std::int64_t num_classes) {
  Palette p;
  for (std::int64_t k = 0; k < num_classes; ++k) p.set(k, default_class_color(k));
  return p;
}

Palette Palette::from_classes(const std::vector<ClassInfo>& classes) {
  Palette p;
  for (const auto& c : classes) p.set(c.id, c.color);
  return p;
}

Color Palette::color(std::int64_t id) const {
  auto it = colors_.find(id);
  if (it == colors_.end()) detail::raise(ErrorKind::Palette, "class id ", id, " has no palette color");
  return it->second;
}

Image render_class_map(std::span<const std::uint8_t> labels, std::int64_t height, std::int64_t width,
                       const Palette& palette) {
  check_map(labels, height, width, "render_class_map");
  Image img(height, width);
  for (std::int64_t r = 0; r < height; ++r)
    for (std::int64_t c = 0; c < width; ++c) {
      const auto id = labels[static_cast<std::size_t>(r * width + c)];
      img.set_pixel(r, c, id == kIgnoreLabel ? palette.ignore_color() : palette.color(id));
    }
  return img;
}

Image render_diff(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> actual,
                  std::int64_t height, std::int64_t width) {
  check_map(predicted, height, width, "render_diff");
  check_map(actual, height, width, "render_diff");
  Image img(height, width);
  for (std::int64_t r = 0; r < height; ++r)
    for (std::int64_t c = 0; c < width; ++c) {
      const auto i = static_cast<std::size_t>(r * width + c);
      const bool ignored = predicted[i] == kIgnoreLabel || actual[i] == kIgnoreLabel;
      img.set_pixel(r, c, !ignored && predicted[i] != actual[i] ? kWhite : kBlack);
    }
  return img;
}

std::int64_t count_white(const Image& image) {
  std::int64_t n = 0;
  for (std::int64_t r = 0; r < image.height; ++r)
    for (std::int64_t c = 0; c < image.width; ++c)
      if (image.pixel(r, c) == kWhite) ++n;
  return n;
}

Image stitch(const std::vector<Image>& tiles, std::int64_t rows, std::int64_t cols) {
  SWINSITS_CHECK(rows > 0 && cols > 0 && static_cast<std::int64_t>(tiles.size()) == rows * cols,
                 ErrorKind::Dimension, "stitch: ", tiles.size(), " tiles do not fill a ", rows, "x",
                 cols, " grid");
  const std::int64_t h = tiles[0].height, w = tiles[0].width;
  for (std::size_t i = 0; i < tiles.size(); ++i)
    SWINSITS_CHECK(tiles[i].height == h && tiles[i].width == w, ErrorKind::Dimension, "stitch: tile ",
                   i, " is ", tiles[i].height, "x", tiles[i].width, ", expected ", h, "x", w);
  Image out(rows * h, cols * w);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) {
      const Image& t = tiles[static_cast<std::size_t>(i * cols + j)];
      for (std::int64_t r = 0; r < h; ++r) {
        const auto src = t.rgb.begin() + r * w * 3;
        std::copy(src, src + w * 3, out.rgb.begin() + ((i * h + r) * out.width + j * w) * 3);
      }
    }
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto fail = [&](const char* msg) -> void {
    detail::raise(ErrorKind::Format, "ppm: ", msg, " at offset ", pos);
  };
  auto skip_space = [&] {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
  };
  auto number = [&]() -> std::int64_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("expected a number");
    std::int64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1 << 24)) fail("number too large");
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') fail("bad magic, expected P6");
  pos = 2;
  const std::int64_t w = number();
  const std::int64_t h = number();
  const std::int64_t maxval = number();
  if (maxval != 255) fail("only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("expected whitespace after header");
  ++pos;
  Image img(h, w);
  if (bytes.size() - pos < img.rgb.size()) fail("truncated pixel data");
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + img.rgb.size()), img.rgb.begin());
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  io::write_file(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(io::read_file(path)); }

}  // namespace swinsits
