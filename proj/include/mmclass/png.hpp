#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

/// Tiny deterministic PNG writer (truecolor 8-bit, zlib-compressed) plus a
/// 5x7 bitmap font, enough for confusion-matrix heatmaps. No external image
/// libraries.
namespace mmc::png {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

    Image(int w, int h, std::uint8_t r = 255, std::uint8_t g = 255,
          std::uint8_t b = 255);

    void set_pixel(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
    void fill_rect(int x, int y, int w, int h, std::uint8_t r, std::uint8_t g,
                   std::uint8_t b);
};

/// Draw ASCII text at (x, y) = top-left corner. Glyphs are 5x7, advance 6
/// columns per character (times scale). Unknown characters render as a box.
void draw_text(Image& img, int x, int y, const std::string& text, std::uint8_t r,
               std::uint8_t g, std::uint8_t b, int scale = 1);

int text_width(const std::string& text, int scale = 1);
inline constexpr int kGlyphHeight = 7;

void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace mmc::png
