#include "igen/svg.hpp"

#include <cmath>
#include <cstdio>

namespace igen {

namespace {

constexpr double kScale = 100.0;
constexpr double kBoard = 5.0;

double sx(double x) { return x * kScale; }
double sy(double y) { return (kBoard - y) * kScale; }  // svg y grows downward

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const char* kShapeFill[] = {"#4c72b0", "#dd8452", "#55a868"};

std::string shape_svg(const SceneObject& o, int shape) {
  double cx = sx(o.x);
  double cy = sy(o.y);
  double r = o.radius * kScale;
  double deg = -o.angle * 180.0 / M_PI;
  const char* fill = kShapeFill[shape];
  char buf[512];
  if (shape == 0) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%s\" cy=\"%s\" r=\"%s\" fill=\"%s\" "
                  "fill-opacity=\"0.85\"/>\n",
                  num(cx).c_str(), num(cy).c_str(), num(r).c_str(), fill);
    return buf;
  }
  if (shape == 1) {
    // Equilateral triangle inscribed in the radius.
    std::string pts;
    for (int k = 0; k < 3; ++k) {
      double a = M_PI / 2.0 + 2.0 * M_PI * k / 3.0;
      pts += num(r * std::cos(a)) + "," + num(-r * std::sin(a));
      if (k < 2) pts += " ";
    }
    std::snprintf(buf, sizeof(buf),
                  "<polygon points=\"%s\" fill=\"%s\" fill-opacity=\"0.85\" "
                  "transform=\"translate(%s %s) rotate(%s)\"/>\n",
                  pts.c_str(), fill, num(cx).c_str(), num(cy).c_str(),
                  num(deg).c_str());
    return buf;
  }
  double half = r / std::sqrt(2.0);
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%s\" y=\"%s\" width=\"%s\" height=\"%s\" "
                "fill=\"%s\" fill-opacity=\"0.85\" "
                "transform=\"rotate(%s %s %s)\"/>\n",
                num(cx - half).c_str(), num(cy - half).c_str(),
                num(2 * half).c_str(), num(2 * half).c_str(), fill,
                num(deg).c_str(), num(cx).c_str(), num(cy).c_str());
  return buf;
}

std::string svg_open() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" "
         "height=\"500\" viewBox=\"0 0 500 500\">\n"
         "<rect width=\"500\" height=\"500\" fill=\"#fafafa\" "
         "stroke=\"#cccccc\"/>\n";
}

const char* kNavColorHex[] = {"#d62728", "#e7c545", "#9467bd", "#2ca02c"};

}  // namespace

std::string scene_svg(const Scene& scene) {
  std::string out = svg_open();
  for (int slot = 0; slot < 3; ++slot) {
    out += shape_svg(scene.objects[static_cast<size_t>(slot)],
                     scene.shape_of_slot[static_cast<size_t>(slot)]);
  }
  out += "</svg>\n";
  return out;
}

std::string nav2d_svg(const Nav2dEpisode& episode,
                      const std::vector<std::vector<std::array<double, 2>>>& paths) {
  std::string out = svg_open();
  char buf[512];
  for (int i = 0; i < 2; ++i) {
    const Nav2dObject& o = episode.objects[static_cast<size_t>(i)];
    bool is_target = i == episode.target_slot;
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%s\" cy=\"%s\" r=\"25\" fill=\"%s\" "
                  "stroke=\"%s\" stroke-width=\"3\"/>\n",
                  num(sx(o.x)).c_str(), num(sy(o.y)).c_str(),
                  kNavColorHex[o.color], is_target ? "#000000" : "#999999");
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%s\" y=\"%s\" font-size=\"14\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  num(sx(o.x)).c_str(), num(sy(o.y) + 45).c_str(),
                  nav_shape_name(o.shape));
    out += buf;
    // Arrival radius.
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%s\" cy=\"%s\" r=\"25\" fill=\"none\" "
                  "stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n",
                  num(sx(o.x)).c_str(), num(sy(o.y)).c_str());
    out += buf;
  }
  const char* path_colors[] = {"#1f77b4", "#ff7f0e", "#17becf"};
  for (size_t p = 0; p < paths.size(); ++p) {
    std::string pts;
    for (const auto& xy : paths[p]) {
      pts += num(sx(xy[0])) + "," + num(sy(xy[1])) + " ";
    }
    std::snprintf(buf, sizeof(buf),
                  "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" "
                  "stroke-width=\"2\"/>\n",
                  pts.c_str(), path_colors[p % 3]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<circle cx=\"%s\" cy=\"%s\" r=\"6\" fill=\"#000000\"/>\n",
                num(sx(episode.agent_x)).c_str(), num(sy(episode.agent_y)).c_str());
  out += buf;
  out += "</svg>\n";
  return out;
}

}  // namespace igen
