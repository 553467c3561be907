#include "tcf/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <png.h>

#include "tcf/error.hpp"

namespace tcf {

Canvas::Canvas(int width, int height, std::array<std::uint8_t, 3> background) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ValidationError("canvas dimensions must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) set_pixel(x, y, background);
}

void Canvas::set_pixel(int x, int y, std::array<std::uint8_t, 3> color) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    pixels_[i] = color[0];
    pixels_[i + 1] = color[1];
    pixels_[i + 2] = color[2];
}

void Canvas::draw_disc(double cx, double cy, double radius, std::array<std::uint8_t, 3> color) {
    const int r = static_cast<int>(std::ceil(radius));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= radius * radius)
                set_pixel(static_cast<int>(std::lround(cx)) + dx, static_cast<int>(std::lround(cy)) + dy, color);
}

void Canvas::draw_line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> color, int thickness) {
    const double dx = x1 - x0, dy = y1 - y0;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::fabs(dx), std::fabs(dy)))));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const double x = x0 + t * dx, y = y0 + t * dy;
        if (thickness <= 1)
            set_pixel(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)), color);
        else
            draw_disc(x, y, thickness / 2.0, color);
    }
}

void Canvas::save_png(const std::string& path) const {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("libpng failure writing '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width_), static_cast<png_uint_32>(height_), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height_));
    for (int y = 0; y < height_; ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(pixels_.data() + static_cast<std::size_t>(y) * width_ * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace tcf
