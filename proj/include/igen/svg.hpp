#ifndef IGEN_SVG_HPP_
#define IGEN_SVG_HPP_

#include <array>
#include <string>
#include <vector>

#include "igen/nav2d.hpp"
#include "igen/rearrange.hpp"

namespace igen {

// Draws the three shapes to scale on the [0,5]^2 board.
std::string scene_svg(const Scene& scene);

// Draws the episode objects, the arrival radius, and one or more agent
// paths (demo and/or generated).
std::string nav2d_svg(const Nav2dEpisode& episode,
                      const std::vector<std::vector<std::array<double, 2>>>& paths);

}  // namespace igen

#endif  // IGEN_SVG_HPP_
