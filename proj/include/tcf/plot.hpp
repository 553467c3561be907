#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tcf {

// Minimal RGB raster with line drawing, written out as PNG.
class Canvas {
  public:
    Canvas(int width, int height, std::array<std::uint8_t, 3> background = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }

    void set_pixel(int x, int y, std::array<std::uint8_t, 3> color);
    void draw_line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> color, int thickness = 1);
    void draw_disc(double x, double y, double radius, std::array<std::uint8_t, 3> color);

    void save_png(const std::string& path) const;

  private:
    int width_, height_;
    std::vector<std::uint8_t> pixels_;  // RGB8 row-major
};

}  // namespace tcf
