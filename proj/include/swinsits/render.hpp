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

// Class-color maps, disagreement maps and mosaics written as binary PPM.

#ifndef SWINSITS_RENDER_HPP
#define SWINSITS_RENDER_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "swinsits/data.hpp"

namespace swinsits {

using Color = std::array<std::uint8_t, 3>;

// Hue (id mod 18) * 20 degrees; ids >= 18 step down in brightness.
Color default_class_color(std::int64_t id);

class Palette {
 public:
  Palette() = default;

  static Palette default_for(std::int64_t num_classes);
  static Palette from_classes(const std::vector<ClassInfo>& classes);

  void set(std::int64_t id, Color color) { colors_[id] = color; }
  bool covers(std::int64_t id) const { return colors_.count(id) != 0; }
  // Throws ErrorKind::Palette for ids without a color.
  Color color(std::int64_t id) const;
  Color ignore_color() const { return {0, 0, 0}; }
  std::size_t size() const { return colors_.size(); }

 private:
  std::map<std::int64_t, Color> colors_;
};

struct Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  Image() = default;
  Image(std::int64_t h, std::int64_t w) : height(h), width(w), rgb(static_cast<std::size_t>(h * w * 3), 0) {}

  Color pixel(std::int64_t r, std::int64_t c) const {
    const auto i = static_cast<std::size_t>((r * width + c) * 3);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set_pixel(std::int64_t r, std::int64_t c, Color color) {
    const auto i = static_cast<std::size_t>((r * width + c) * 3);
    rgb[i] = color[0];
    rgb[i + 1] = color[1];
    rgb[i + 2] = color[2];
  }
  bool operator==(const Image&) const = default;
};

Image render_class_map(std::span<const std::uint8_t> labels, std::int64_t height, std::int64_t width,
                       const Palette& palette);

// White where the maps disagree, black where they agree or either side is ignored.
Image render_diff(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> actual,
                  std::int64_t height, std::int64_t width);

std::int64_t count_white(const Image& image);

// Row-major grid: tile i*cols + j lands at (i*H, j*W).
Image stitch(const std::vector<Image>& tiles, std::int64_t rows, std::int64_t cols);

// "P6\n<w> <h>\n255\n" followed by RGB bytes.
std::vector<std::uint8_t> encode_ppm(const Image& image);
Image decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace swinsits

#endif  // SWINSITS_RENDER_HPP
