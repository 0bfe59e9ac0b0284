#include "filippov/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace filippov {

namespace {

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

SvgCanvas::SvgCanvas(double wx0, double wy0, double wx1, double wy1, int width_px)
    : wx0_(wx0), wy0_(wy0), wx1_(wx1), wy1_(wy1), width_(width_px) {
    double aspect = (wy1_ - wy0_) / (wx1_ - wx0_);
    height_ = std::max(64, static_cast<int>(std::lround(width_ * aspect)));
}

double SvgCanvas::tx(double x) const {
    return (x - wx0_) / (wx1_ - wx0_) * width_;
}

double SvgCanvas::ty(double y) const {
    return height_ - (y - wy0_) / (wy1_ - wy0_) * height_;
}

void SvgCanvas::fill_rect(double x0, double y0, double x1, double y1,
                          const std::string& color, double opacity) {
    double rx = tx(std::min(x0, x1));
    double ry = ty(std::max(y0, y1));
    double w = std::fabs(tx(x1) - tx(x0));
    double h = std::fabs(ty(y1) - ty(y0));
    std::string e = "<rect x=\"" + px(rx) + "\" y=\"" + px(ry) + "\" width=\"" + px(w) +
                    "\" height=\"" + px(h) + "\" fill=\"" + color + "\"";
    if (opacity < 1.0) e += " fill-opacity=\"" + px(opacity) + "\"";
    e += "/>";
    elements_.push_back(std::move(e));
}

void SvgCanvas::polyline(const std::vector<Point>& pts, const std::string& color,
                         double stroke_width) {
    if (pts.size() < 2) return;
    std::string e = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                    px(stroke_width) + "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) e += ' ';
        e += px(tx(pts[i].x)) + "," + px(ty(pts[i].y));
    }
    e += "\"/>";
    elements_.push_back(std::move(e));
}

void SvgCanvas::circle(const Point& c, double radius_px, const std::string& color) {
    elements_.push_back("<circle cx=\"" + px(tx(c.x)) + "\" cy=\"" + px(ty(c.y)) +
                        "\" r=\"" + px(radius_px) + "\" fill=\"" + color + "\"/>");
}

void SvgCanvas::text(const Point& at, const std::string& s, int font_px,
                     const std::string& color) {
    elements_.push_back("<text x=\"" + px(tx(at.x)) + "\" y=\"" + px(ty(at.y)) +
                        "\" font-size=\"" + std::to_string(font_px) +
                        "\" font-family=\"monospace\" fill=\"" + color + "\">" + s +
                        "</text>");
}

void SvgCanvas::frame(const std::string& color) {
    elements_.push_back("<rect x=\"0.5\" y=\"0.5\" width=\"" + px(width_ - 1.0) +
                        "\" height=\"" + px(height_ - 1.0) + "\" fill=\"none\" stroke=\"" +
                        color + "\"/>");
}

std::string SvgCanvas::finish() const {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width_) +
           "\" height=\"" + std::to_string(height_) + "\" viewBox=\"0 0 " +
           std::to_string(width_) + " " + std::to_string(height_) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (const auto& e : elements_) {
        out += e;
        out += '\n';
    }
    out += "</svg>\n";
    return out;
}

std::string heat_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    int r = static_cast<int>(std::lround(255 * v));
    int g = static_cast<int>(std::lround(64 + 80 * (1.0 - v)));
    int b = static_cast<int>(std::lround(255 * (1.0 - v)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace filippov
