// SPDX-License-Identifier: Apache-2.0
//
// mmlscm: multi-modal radio radiance fields for localized channel modelling
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef mmlscm_pointcloud_H
#define mmlscm_pointcloud_H

#include "mmlscm/array_model.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmlscm
{
    enum class frame_tag
    {
        world,
        bs_centered
    };

    struct point_cloud
    {
        std::vector<vec3> points;
        frame_tag frame = frame_tag::world;

        std::size_t size() const { return points.size(); }
    };

    enum class cloud_format
    {
        xyz_csv,
        ascii_ply
    };

    cloud_format cloud_format_from_string(const std::string &s);

    // Throws parse_error with a 1-based row (CSV) or line (PLY) number on malformed input
    point_cloud load_point_cloud(std::istream &is, cloud_format format);
    point_cloud load_point_cloud(const std::string &path);
    void write_xyz_csv(std::ostream &os, const point_cloud &cloud);

    // o -> o - p_bs; throws invalid_state if the cloud is already BS-centered
    point_cloud translate_to_bs(const point_cloud &cloud, const vec3 &p_bs);

    struct voxel_spec
    {
        vec3 mins = vec3::Zero();
        vec3 resolution = vec3::Constant(0.25);
        std::array<std::size_t, 3> dims{1, 1, 1};

        vec3 maxs() const;
        std::size_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }
        std::size_t flat(std::size_t ix, std::size_t iy, std::size_t iz) const { return (ix * dims[1] + iy) * dims[2] + iz; }

        // Smallest grid at the given resolution covering [lo, hi]
        static voxel_spec covering(const vec3 &lo, const vec3 &hi, const vec3 &resolution);

        void validate() const;
    };

    struct density_grid
    {
        voxel_spec spec;
        std::vector<std::uint32_t> rho; // X*Y*Z counts, index (ix*Y + iy)*Z + iz

        std::uint64_t total() const;

        // Floor-rule voxel index of p; points on the upper face map to the last voxel.
        // Returns false if p lies outside the box.
        bool voxel_of(const vec3 &p, std::array<std::size_t, 3> &idx) const;
    };

    // Points farther than this (in voxels) outside the box are rejected instead of clamped
    inline constexpr double voxel_clamp_margin = 1e-9;

    // Throws invalid_state for world-frame clouds and out_of_bounds (listing the offending points) otherwise
    density_grid voxelize(const point_cloud &cloud, const voxel_spec &spec);

    struct density_query
    {
        double value = 0.0;
        bool in_domain = false;
    };

    // Piecewise-constant count lookup; outside the box returns 0 with in_domain = false
    density_query density_at(const density_grid &grid, const vec3 &p);

    // Index of the first sample t_d whose voxel (at t_d * direction) is occupied
    std::optional<std::size_t> first_obstacle_index(const density_grid &grid, const vec3 &direction, std::span<const double> sample_ts);

    // t of the first occupied sample along the ray from the BS origin, absent if none
    std::optional<double> first_obstacle_depth(const density_grid &grid, const vec3 &direction, std::span<const double> sample_ts);

    // Exact entry distance into the first occupied voxel by 3D-DDA traversal (diagnostics only)
    std::optional<double> first_obstacle_depth_dda(const density_grid &grid, const vec3 &direction, double t_max);

    void save_density_grid(const std::string &path, const density_grid &grid);
    density_grid load_density_grid(const std::string &path);
}

#endif
