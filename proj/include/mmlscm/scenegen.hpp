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

#ifndef mmlscm_scenegen_H
#define mmlscm_scenegen_H

#include "mmlscm/array_model.hpp"
#include "mmlscm/pointcloud.hpp"
#include "mmlscm/radiance_field.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

/*!MD
# Synthetic scenes

World frame: `y` is up, the BS array faces `+z`. Boxes stand on the floor. Ground-truth APS per grid is
line of sight plus first-order specular reflections off box faces:

- LoS: `1 / |g - p_bs|^2` in the cell of the BS-to-grid direction, if no box blocks the segment.
- Reflection off a face: mirror `g` across the face plane to `g'`; the BS-to-`g'` ray must hit the face
  rectangle at `q`, both legs must be unblocked, and `reflectivity / (|q - p_bs| + |g - q|)^2` is added
  in the cell of the BS-to-`q` direction.

Directions with `cos(theta) <= 0` fall behind the array and are dropped.

Dataset directory layout:

File         | Content
-------------|--------------------------------------------
scene.txt    | `key=value` lines (room, BS, boxes, grids, seed)
points.xyz   | world-frame point cloud, `x,y,z` rows
aps.bin      | MMLC, array `aps` [L, N]
rsrp.bin     | MMLC RSRP records, base then rotated, one per grid each
phi.bin      | base measurement matrix
phi_rot.bin  | rotated measurement matrix
density.bin  | voxelized BS-frame density grid
depth.bin    | MMLC, arrays `z` [N] and `mask` [N] for uniform eval sampling
split.csv    | `grid_id,region` with region `explored` or `unexplored`
MD!*/

namespace mmlscm
{
    struct box
    {
        vec3 lo = vec3::Zero();
        vec3 hi = vec3::Zero();
        double reflectivity = 0.5;

        bool contains(const vec3 &p, double margin = 0.0) const;
        bool operator==(const box &) const = default;
    };

    struct scene
    {
        vec3 room_lo = vec3::Zero();
        vec3 room_hi = vec3::Zero();
        vec3 bs_position = vec3::Zero();
        std::vector<box> boxes;
        std::vector<vec3> grid_positions; // world frame
        std::uint64_t seed = 0;

        bool operator==(const scene &) const = default;
    };

    struct scene_config
    {
        vec3 room_lo = vec3::Zero();
        vec3 room_hi = vec3(20.0, 5.0, 20.0);
        vec3 bs_position = vec3(0.5, 3.0, 0.5);
        std::size_t n_boxes = 6;
        std::size_t n_grids = 500;
        double box_min_size = 1.0;
        double box_max_size = 3.0;
        double box_min_height = 1.0;
        double box_max_height = 3.0;
        double box_gap = 0.5;
        double reflectivity_min = 0.3;
        double reflectivity_max = 0.9;
        double grid_min_height = 0.5;
        double grid_max_height = 2.5;
        double grid_wall_margin = 0.5;
        bool reject_blocked = true; // drop grid candidates with an all-zero APS
        std::size_t n_tilt = 18;
        std::size_t n_azimuth = 90;
        std::size_t max_retries = 1000;
        std::uint64_t seed = 7;

        void validate() const;
    };

    // Seeded scene. Throws generation_failure when placement constraints cannot be met within max_retries.
    scene generate_scene(const scene_config &cfg);

    // True if the closed box intersects the segment between a and b, excluding end caps of
    // length `trim` (meters) at both ends
    bool segment_hits_box(const vec3 &a, const vec3 &b, const box &bx, double trim = 1e-9);
    bool segment_blocked(const vec3 &a, const vec3 &b, const std::vector<box> &boxes, double trim = 1e-9);

    // Points on every box face and the six room faces, Poisson count area * density per face,
    // Gaussian jitter with 1 cm standard deviation, clamped to the room
    point_cloud scene_point_cloud(const scene &s, double points_per_m2, std::uint64_t seed);

    struct propagation_path
    {
        std::size_t cell = 0;
        vec3 departure = vec3::Zero(); // unit, BS frame orientation
        double gain = 0.0;
        int box_index = -1; // -1 for line of sight
        int face = -1;      // 0..5 = -x, +x, -y, +y, -z, +z
    };

    // All contributing paths to the grid position (LoS first, then reflections in box/face order)
    std::vector<propagation_path> trace_paths(const scene &s, const vec3 &grid_position, const angular_grid &angular);
    Eigen::VectorXd ground_truth_aps(const scene &s, const vec3 &grid_position, const angular_grid &angular);

    // Quantities derived from the room geometry, all in the BS frame
    struct scene_frame
    {
        voxel_spec voxels;
        position_normalizer normalizer;
        double t_max = 0.0;
    };
    scene_frame make_scene_frame(const scene &s, double voxel_resolution = 0.25);

    struct dataset
    {
        scene geometry;
        angular_grid angular;
        measurement_matrix phi;
        measurement_matrix phi_rot;
        std::vector<Eigen::VectorXd> aps;     // per grid
        std::vector<rsrp_record> rsrp_base;   // per grid
        std::vector<rsrp_record> rsrp_rot;    // per grid
        std::vector<std::size_t> explored;    // sorted grid ids
        std::vector<std::size_t> unexplored;  // sorted grid ids
        point_cloud cloud;                    // world frame
        density_grid density;                 // BS frame
        Eigen::VectorXd depth;                // per ray, uniform eval sampling
        std::vector<std::uint8_t> depth_mask;
        std::size_t depth_samples = 0;        // knots used for depth
        double voxel_resolution = 0.25;

        std::size_t n_grids() const { return aps.size(); }
        scene_frame frame() const;
        vec3 grid_bs(std::size_t l) const { return geometry.grid_positions[l] - geometry.bs_position; }
    };

    struct dataset_config
    {
        double split_fraction = 0.8;
        double points_per_m2 = 100.0;
        double voxel_resolution = 0.25;
        std::size_t depth_samples = 128;
        std::uint64_t seed = 7;
        void validate() const;
    };

    // APS, RSRP under both matrices, seeded explored/unexplored split, point cloud, density grid, depth targets
    dataset build_dataset(const scene &s, const angular_grid &angular, const measurement_matrix &phi,
                          const measurement_matrix &phi_rot, const dataset_config &cfg);

    // Standard pipeline: default array, DFT codebook of 8 beams, (5 deg, 4 deg) rotation
    dataset generate_dataset(const scene_config &scfg, const dataset_config &dcfg);

    void save_scene_text(const std::string &path, const scene &s);
    scene load_scene_text(const std::string &path);

    void save_dataset(const std::string &dir, const dataset &d);
    dataset load_dataset(const std::string &dir);
}

#endif
