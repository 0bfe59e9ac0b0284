#pragma once

// Minimal static SVG writer (rects, polylines, circles, text) used for phase
// portraits, classification strips and saturation heat maps. No dependencies;
// byte-deterministic output.

#include <string>
#include <vector>

#include "filippov/geometry.hpp"

namespace filippov {

class SvgCanvas {
public:
    // World rectangle [wx0,wx1] x [wy0,wy1] mapped onto a pixel canvas of the
    // given width; height follows from the aspect ratio. y points up.
    SvgCanvas(double wx0, double wy0, double wx1, double wy1, int width_px = 720);

    void fill_rect(double x0, double y0, double x1, double y1, const std::string& color,
                   double opacity = 1.0);
    void polyline(const std::vector<Point>& pts, const std::string& color,
                  double stroke_width = 1.5);
    void circle(const Point& c, double radius_px, const std::string& color);
    void text(const Point& at, const std::string& s, int font_px = 12,
              const std::string& color = "#333333");
    void frame(const std::string& color = "#888888");

    std::string finish() const;

private:
    double tx(double x) const;
    double ty(double y) const;

    double wx0_, wy0_, wx1_, wy1_;
    int width_, height_;
    std::vector<std::string> elements_;
};

// Simple two-color diverging ramp for heat maps.
std::string heat_color(double v01);

}  // namespace filippov
