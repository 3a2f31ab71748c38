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

#include "mmlscm/scenegen.hpp"
#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/renderer.hpp"
#include "mmlscm/util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace mmlscm
{
    namespace
    {
        using Eigen::Index;

        struct face_rect
        {
            int axis = 0;     // normal axis
            double coord = 0; // plane coordinate
            double sign = 1;  // outward normal direction along axis
            vec3 lo, hi;      // rectangle bounds (lo[axis] == hi[axis] == coord)
        };

        face_rect box_face(const vec3 &lo, const vec3 &hi, int f)
        {
            face_rect r;
            r.axis = f / 2;
            const bool upper = f % 2 == 1;
            r.coord = upper ? hi[r.axis] : lo[r.axis];
            r.sign = upper ? 1.0 : -1.0;
            r.lo = lo;
            r.hi = hi;
            r.lo[r.axis] = r.hi[r.axis] = r.coord;
            return r;
        }

        std::string join3(const vec3 &v)
        {
            return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z());
        }

        std::vector<double> split_doubles(const std::string &s)
        {
            std::vector<double> out;
            std::stringstream ss(s);
            std::string tok;
            while (std::getline(ss, tok, ','))
            {
                std::size_t pos = 0;
                double v = 0.0;
                try
                {
                    v = std::stod(tok, &pos);
                }
                catch (const std::exception &)
                {
                    throw parse_error("invalid number '" + tok + "'", 0);
                }
                if (pos != tok.size())
                    throw parse_error("invalid number '" + tok + "'", 0);
                out.push_back(v);
            }
            return out;
        }

        vec3 parse_vec3(const std::string &s)
        {
            auto v = split_doubles(s);
            if (v.size() != 3)
                throw parse_error("expected three comma-separated values, got '" + s + "'", 0);
            return {v[0], v[1], v[2]};
        }

        bool boxes_overlap(const box &a, const box &b, double gap)
        {
            for (int k = 0; k < 3; ++k)
                if (a.hi[k] + gap <= b.lo[k] || b.hi[k] + gap <= a.lo[k])
                    return false;
            return true;
        }

        bool grid_ok(const scene &s, const vec3 &g)
        {
            if ((g.array() < s.room_lo.array()).any() || (g.array() > s.room_hi.array()).any())
                return false;
            for (const auto &b : s.boxes)
                if (b.contains(g, 0.1))
                    return false;
            return true;
        }

        std::string read_file(const std::string &path)
        {
            std::ifstream is(path, std::ios::binary);
            if (!is)
                throw io_error("cannot open '" + path + "'");
            std::stringstream ss;
            ss << is.rdbuf();
            return ss.str();
        }
    }

    bool box::contains(const vec3 &p, double margin) const
    {
        return (p.array() >= lo.array() - margin).all() && (p.array() <= hi.array() + margin).all();
    }

    void scene_config::validate() const
    {
        if ((room_hi.array() <= room_lo.array()).any())
            throw invalid_argument("scene_config: room extent must be positive on every axis");
        if ((bs_position.array() < room_lo.array()).any() || (bs_position.array() > room_hi.array()).any())
            throw invalid_argument("scene_config: BS must lie inside the room");
        if (!(box_min_size > 0.0) || box_max_size < box_min_size || !(box_min_height > 0.0) || box_max_height < box_min_height)
            throw invalid_argument("scene_config: invalid box size range");
        if (!(reflectivity_min >= 0.0) || reflectivity_max > 1.0 || reflectivity_max < reflectivity_min)
            throw invalid_argument("scene_config: reflectivity range must lie in [0, 1]");
        if (grid_max_height < grid_min_height)
            throw invalid_argument("scene_config: invalid grid height range");
        if (n_tilt == 0 || n_azimuth == 0)
            throw invalid_argument("scene_config: angular grid counts must be positive");
        if (max_retries == 0)
            throw invalid_argument("scene_config: max_retries must be positive");
    }

    bool segment_hits_box(const vec3 &a, const vec3 &b, const box &bx, double trim)
    {
        const vec3 d = b - a;
        const double len = d.norm();
        if (len <= 2.0 * trim)
            return false;
        double t0 = trim / len, t1 = 1.0 - trim / len;
        for (int k = 0; k < 3; ++k)
        {
            if (d[k] == 0.0)
            {
                if (a[k] < bx.lo[k] || a[k] > bx.hi[k])
                    return false;
                continue;
            }
            double ta = (bx.lo[k] - a[k]) / d[k], tb = (bx.hi[k] - a[k]) / d[k];
            if (ta > tb)
                std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1)
                return false;
        }
        return true;
    }

    bool segment_blocked(const vec3 &a, const vec3 &b, const std::vector<box> &boxes, double trim)
    {
        for (const auto &bx : boxes)
            if (segment_hits_box(a, b, bx, trim))
                return true;
        return false;
    }

    std::vector<propagation_path> trace_paths(const scene &s, const vec3 &g, const angular_grid &angular)
    {
        std::vector<propagation_path> paths;
        const vec3 &bs = s.bs_position;

        const vec3 los = g - bs;
        std::size_t cell = 0;
        if (los.norm() > 0.0 && angular.nearest_cell(los, cell) && !segment_blocked(bs, g, s.boxes))
            paths.push_back({cell, los.normalized(), 1.0 / los.squaredNorm(), -1, -1});

        for (std::size_t bi = 0; bi < s.boxes.size(); ++bi)
        {
            const auto &bx = s.boxes[bi];
            for (int f = 0; f < 6; ++f)
            {
                const face_rect fr = box_face(bx.lo, bx.hi, f);
                const int k = fr.axis;
                if ((bs[k] - fr.coord) * fr.sign <= 0.0 || (g[k] - fr.coord) * fr.sign <= 0.0)
                    continue;
                vec3 mirror = g;
                mirror[k] = 2.0 * fr.coord - g[k];
                const double u = (fr.coord - bs[k]) / (mirror[k] - bs[k]);
                vec3 q = bs + u * (mirror - bs);
                q[k] = fr.coord;
                bool on_face = true;
                for (int j = 0; j < 3; ++j)
                    if (j != k && (q[j] < fr.lo[j] || q[j] > fr.hi[j]))
                        on_face = false;
                if (!on_face)
                    continue;
                const vec3 dep = q - bs;
                if (!(dep.norm() > 0.0) || !angular.nearest_cell(dep, cell))
                    continue;
                if (segment_blocked(bs, q, s.boxes) || segment_blocked(q, g, s.boxes))
                    continue;
                const double len = (mirror - bs).norm();
                paths.push_back({cell, dep.normalized(), bx.reflectivity / (len * len), int(bi), f});
            }
        }
        return paths;
    }

    Eigen::VectorXd ground_truth_aps(const scene &s, const vec3 &grid_position, const angular_grid &angular)
    {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(Index(angular.size()));
        for (const auto &p : trace_paths(s, grid_position, angular))
            x[Index(p.cell)] += p.gain;
        return x;
    }

    scene generate_scene(const scene_config &cfg)
    {
        cfg.validate();
        scene s;
        s.room_lo = cfg.room_lo;
        s.room_hi = cfg.room_hi;
        s.bs_position = cfg.bs_position;
        s.seed = cfg.seed;

        std::mt19937_64 rng(mix_seed(cfg.seed, 0xB0C5));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto uniform = [&](std::mt19937_64 &r, double a, double b) { return a + (b - a) * unit(r); };

        for (std::size_t i = 0; i < cfg.n_boxes; ++i)
        {
            bool placed = false;
            for (std::size_t attempt = 0; attempt < cfg.max_retries && !placed; ++attempt)
            {
                box b;
                const double sx = uniform(rng, cfg.box_min_size, cfg.box_max_size);
                const double sz = uniform(rng, cfg.box_min_size, cfg.box_max_size);
                const double h = std::min(uniform(rng, cfg.box_min_height, cfg.box_max_height), cfg.room_hi.y() - cfg.room_lo.y());
                const double x0 = uniform(rng, cfg.room_lo.x() + cfg.box_gap, cfg.room_hi.x() - cfg.box_gap - sx);
                const double z0 = uniform(rng, cfg.room_lo.z() + cfg.box_gap, cfg.room_hi.z() - cfg.box_gap - sz);
                b.lo = vec3(x0, cfg.room_lo.y(), z0);
                b.hi = vec3(x0 + sx, cfg.room_lo.y() + h, z0 + sz);
                b.reflectivity = uniform(rng, cfg.reflectivity_min, cfg.reflectivity_max);
                if (b.lo.x() < cfg.room_lo.x() || b.hi.x() > cfg.room_hi.x() || b.lo.z() < cfg.room_lo.z() || b.hi.z() > cfg.room_hi.z())
                    continue;
                if (b.contains(cfg.bs_position, cfg.box_gap))
                    continue;
                bool clash = false;
                for (const auto &o : s.boxes)
                    clash = clash || boxes_overlap(o, b, cfg.box_gap);
                if (clash)
                    continue;
                s.boxes.push_back(b);
                placed = true;
            }
            if (!placed)
                throw generation_failure("generate_scene: could not place box " + std::to_string(i) + " without overlap");
        }

        const auto angular = build_angular_grid(cfg.n_tilt, cfg.n_azimuth);
        const double m = cfg.grid_wall_margin;
        for (std::size_t l = 0; l < cfg.n_grids; ++l)
        {
            std::mt19937_64 grng(mix_seed(cfg.seed, 0x10000 + l));
            bool placed = false;
            for (std::size_t attempt = 0; attempt < cfg.max_retries && !placed; ++attempt)
            {
                const vec3 g(uniform(grng, cfg.room_lo.x() + m, cfg.room_hi.x() - m),
                             uniform(grng, cfg.grid_min_height, cfg.grid_max_height),
                             uniform(grng, std::max(cfg.room_lo.z() + m, cfg.bs_position.z() + m), cfg.room_hi.z() - m));
                if (!grid_ok(s, g))
                    continue;
                if (cfg.reject_blocked && ground_truth_aps(s, g, angular).maxCoeff() <= 0.0)
                    continue;
                s.grid_positions.push_back(g);
                placed = true;
            }
            if (!placed)
                throw generation_failure("generate_scene: could not place grid " + std::to_string(l));
        }
        return s;
    }

    point_cloud scene_point_cloud(const scene &s, double points_per_m2, std::uint64_t seed)
    {
        if (!(points_per_m2 > 0.0))
            throw invalid_argument("scene_point_cloud: density must be positive");
        point_cloud cloud;
        cloud.frame = frame_tag::world;

        std::vector<face_rect> faces;
        for (int f = 0; f < 6; ++f)
            faces.push_back(box_face(s.room_lo, s.room_hi, f));
        for (const auto &b : s.boxes)
            for (int f = 0; f < 6; ++f)
                faces.push_back(box_face(b.lo, b.hi, f));

        std::normal_distribution<double> jitter(0.0, 0.01);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t i = 0; i < faces.size(); ++i)
        {
            const auto &fr = faces[i];
            const vec3 ext = fr.hi - fr.lo;
            double area = 1.0;
            for (int k = 0; k < 3; ++k)
                if (k != fr.axis)
                    area *= ext[k];
            std::mt19937_64 rng(mix_seed(seed, i));
            std::poisson_distribution<long long> count(area * points_per_m2);
            const long long n = area > 0.0 ? count(rng) : 0;
            for (long long p = 0; p < n; ++p)
            {
                vec3 pt;
                for (int k = 0; k < 3; ++k)
                    pt[k] = k == fr.axis ? fr.coord : fr.lo[k] + ext[k] * unit(rng);
                for (int k = 0; k < 3; ++k)
                    pt[k] = std::clamp(pt[k] + jitter(rng), s.room_lo[k], s.room_hi[k]);
                cloud.points.push_back(pt);
            }
        }
        return cloud;
    }

    scene_frame make_scene_frame(const scene &s, double voxel_resolution)
    {
        scene_frame f;
        const vec3 lo = s.room_lo - s.bs_position, hi = s.room_hi - s.bs_position;
        f.voxels = voxel_spec::covering(lo, hi, vec3::Constant(voxel_resolution));
        f.normalizer.center = 0.5 * (lo + hi);
        f.normalizer.half_extent = 0.5 * (hi - lo);
        for (int c = 0; c < 8; ++c)
        {
            const vec3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
            f.t_max = std::max(f.t_max, corner.norm());
        }
        return f;
    }

    scene_frame dataset::frame() const { return make_scene_frame(geometry, voxel_resolution); }

    void dataset_config::validate() const
    {
        if (!(split_fraction > 0.0 && split_fraction < 1.0))
            throw invalid_argument("dataset_config: split_fraction must lie in (0, 1)");
        if (!(points_per_m2 > 0.0) || !(voxel_resolution > 0.0))
            throw invalid_argument("dataset_config: point density and voxel resolution must be positive");
        if (depth_samples < 2)
            throw invalid_argument("dataset_config: depth_samples must be at least 2");
    }

    dataset build_dataset(const scene &s, const angular_grid &angular, const measurement_matrix &phi,
                          const measurement_matrix &phi_rot, const dataset_config &cfg)
    {
        cfg.validate();
        dataset d;
        d.geometry = s;
        d.angular = angular;
        d.phi = phi;
        d.phi_rot = phi_rot;
        d.voxel_resolution = cfg.voxel_resolution;
        d.depth_samples = cfg.depth_samples;

        const std::size_t L = s.grid_positions.size();
        for (std::size_t l = 0; l < L; ++l)
        {
            d.aps.push_back(ground_truth_aps(s, s.grid_positions[l], angular));
            d.rsrp_base.push_back(expected_rsrp(phi, d.aps.back(), l, matrix_tag::base));
            d.rsrp_rot.push_back(expected_rsrp(phi_rot, d.aps.back(), l, matrix_tag::rotated));
        }

        std::vector<std::size_t> ids(L);
        std::iota(ids.begin(), ids.end(), std::size_t(0));
        std::mt19937_64 rng(mix_seed(cfg.seed, 0x5917));
        for (std::size_t i = L; i > 1; --i)
        {
            std::uniform_int_distribution<std::size_t> u(0, i - 1);
            std::swap(ids[i - 1], ids[u(rng)]);
        }
        const std::size_t n_explored = std::size_t(std::llround(cfg.split_fraction * double(L)));
        d.explored.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_explored));
        d.unexplored.assign(ids.begin() + std::ptrdiff_t(n_explored), ids.end());
        std::sort(d.explored.begin(), d.explored.end());
        std::sort(d.unexplored.begin(), d.unexplored.end());

        d.cloud = scene_point_cloud(s, cfg.points_per_m2, mix_seed(cfg.seed, 0xC10D));
        const auto frame = d.frame();
        d.density = voxelize(translate_to_bs(d.cloud, s.bs_position), frame.voxels);

        const auto sampling = make_sampling(frame.t_max, cfg.depth_samples, sampling_mode::uniform);
        const auto tq = query_distances(sampling, query_placement::midpoint);
        d.depth = Eigen::VectorXd::Zero(Index(angular.size()));
        d.depth_mask.assign(angular.size(), 0);
        for (std::size_t n = 0; n < angular.size(); ++n)
            if (auto idx = first_obstacle_index(d.density, angular.directions[n], tq))
            {
                d.depth[Index(n)] = sampling.ts[*idx];
                d.depth_mask[n] = 1;
            }
        return d;
    }

    dataset generate_dataset(const scene_config &scfg, const dataset_config &dcfg)
    {
        const auto s = generate_scene(scfg);
        const auto angular = build_angular_grid(scfg.n_tilt, scfg.n_azimuth);
        const array_config array;
        const auto cb = build_dft_codebook(array, 8);
        const auto phi = build_measurement_matrix(array, angular, cb);
        const auto phi_rot = shift_measurement_matrix(phi, angular, {1, 1});
        return build_dataset(s, angular, phi, phi_rot, dcfg);
    }

    // ---------------------------------------------------------------- serialization

    void save_scene_text(const std::string &path, const scene &s)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw io_error("cannot write '" + path + "'");
        os << "format=mmlscm_scene\n";
        os << "seed=" << s.seed << '\n';
        os << "room_lo=" << join3(s.room_lo) << '\n';
        os << "room_hi=" << join3(s.room_hi) << '\n';
        os << "bs=" << join3(s.bs_position) << '\n';
        os << "boxes=" << s.boxes.size() << '\n';
        for (std::size_t i = 0; i < s.boxes.size(); ++i)
            os << "box." << i << '=' << join3(s.boxes[i].lo) << ',' << join3(s.boxes[i].hi) << ','
               << format_double(s.boxes[i].reflectivity) << '\n';
        os << "grids=" << s.grid_positions.size() << '\n';
        for (std::size_t i = 0; i < s.grid_positions.size(); ++i)
            os << "grid." << i << '=' << join3(s.grid_positions[i]) << '\n';
        if (!os)
            throw io_error("write failed for '" + path + "'");
    }

    scene load_scene_text(const std::string &path)
    {
        std::ifstream is(path);
        if (!is)
            throw io_error("cannot open '" + path + "'");
        std::map<std::string, std::string> kv;
        std::string line;
        std::size_t row = 0;
        while (std::getline(is, line))
        {
            ++row;
            if (line.empty() || line[0] == '#')
                continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw parse_error("scene file: expected key=value", row);
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        auto at = [&](const std::string &k) -> const std::string & {
            auto it = kv.find(k);
            if (it == kv.end())
                throw parse_error("scene file: missing key '" + k + "'", 0);
            return it->second;
        };
        if (at("format") != "mmlscm_scene")
            throw parse_error("scene file: unknown format", 0);
        scene s;
        s.seed = std::stoull(at("seed"));
        s.room_lo = parse_vec3(at("room_lo"));
        s.room_hi = parse_vec3(at("room_hi"));
        s.bs_position = parse_vec3(at("bs"));
        const std::size_t nb = std::stoul(at("boxes")), ng = std::stoul(at("grids"));
        for (std::size_t i = 0; i < nb; ++i)
        {
            auto v = split_doubles(at("box." + std::to_string(i)));
            if (v.size() != 7)
                throw parse_error("scene file: box entries need 7 values", 0);
            s.boxes.push_back({vec3(v[0], v[1], v[2]), vec3(v[3], v[4], v[5]), v[6]});
        }
        for (std::size_t i = 0; i < ng; ++i)
            s.grid_positions.push_back(parse_vec3(at("grid." + std::to_string(i))));
        return s;
    }

    void save_dataset(const std::string &dir, const dataset &d)
    {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        const fs::path root(dir);
        save_scene_text((root / "scene.txt").string(), d.geometry);
        {
            std::ofstream os(root / "points.xyz", std::ios::binary);
            write_xyz_csv(os, d.cloud);
            if (!os)
                throw io_error("write failed for points.xyz");
        }

        const std::uint64_t L = d.aps.size(), N = d.angular.size();
        std::vector<double> aps(L * N);
        for (std::size_t l = 0; l < L; ++l)
            std::copy(d.aps[l].data(), d.aps[l].data() + N, aps.begin() + std::ptrdiff_t(l * N));
        container c;
        c.meta["kind"] = "aps";
        c.meta["n_tilt"] = std::to_string(d.angular.n_tilt);
        c.meta["n_azimuth"] = std::to_string(d.angular.n_azimuth);
        c.meta["voxel_resolution"] = format_double(d.voxel_resolution);
        c.add("aps", {L, N}, std::span<const double>(aps));
        c.save((root / "aps.bin").string());

        std::vector<rsrp_record> all = d.rsrp_base;
        all.insert(all.end(), d.rsrp_rot.begin(), d.rsrp_rot.end());
        save_rsrp_records((root / "rsrp.bin").string(), all);
        save_measurement_matrix((root / "phi.bin").string(), d.phi);
        save_measurement_matrix((root / "phi_rot.bin").string(), d.phi_rot);
        save_density_grid((root / "density.bin").string(), d.density);

        container z;
        z.meta["kind"] = "depth_targets";
        z.meta["depth_samples"] = std::to_string(d.depth_samples);
        std::vector<std::uint32_t> mask(d.depth_mask.begin(), d.depth_mask.end());
        z.add("z", {N}, std::span<const double>(d.depth.data(), N));
        z.add("mask", {N}, std::span<const std::uint32_t>(mask));
        z.save((root / "depth.bin").string());

        std::ofstream sp(root / "split.csv", std::ios::binary);
        sp << "grid_id,region\n";
        std::vector<std::string> region(L);
        for (auto id : d.explored)
            region[id] = "explored";
        for (auto id : d.unexplored)
            region[id] = "unexplored";
        for (std::size_t l = 0; l < L; ++l)
            sp << l << ',' << region[l] << '\n';
        if (!sp)
            throw io_error("write failed for split.csv");
    }

    dataset load_dataset(const std::string &dir)
    {
        namespace fs = std::filesystem;
        const fs::path root(dir);
        if (!fs::is_directory(root))
            throw io_error("dataset directory '" + dir + "' does not exist");
        dataset d;
        d.geometry = load_scene_text((root / "scene.txt").string());
        d.cloud = load_point_cloud((root / "points.xyz").string());

        auto c = container::load((root / "aps.bin").string());
        d.angular = build_angular_grid(std::size_t(c.meta_int("n_tilt")), std::size_t(c.meta_int("n_azimuth")));
        d.voxel_resolution = c.meta_double("voxel_resolution");
        const auto &aps = c.get("aps", dtype::f64);
        if (aps.dims.size() != 2 || aps.dims[1] != d.angular.size())
            throw io_error("aps.bin does not match the angular grid");
        const std::size_t L = aps.dims[0], N = aps.dims[1];
        if (L != d.geometry.grid_positions.size())
            throw io_error("aps.bin grid count does not match scene.txt");
        for (std::size_t l = 0; l < L; ++l)
            d.aps.push_back(Eigen::Map<const Eigen::VectorXd>(aps.f64.data() + l * N, Index(N)));

        for (auto &r : load_rsrp_records((root / "rsrp.bin").string()))
            (r.tag == matrix_tag::base ? d.rsrp_base : d.rsrp_rot).push_back(std::move(r));
        d.phi = load_measurement_matrix((root / "phi.bin").string());
        d.phi_rot = load_measurement_matrix((root / "phi_rot.bin").string());
        d.density = load_density_grid((root / "density.bin").string());

        auto z = container::load((root / "depth.bin").string());
        d.depth_samples = std::size_t(z.meta_int("depth_samples"));
        const auto &zv = z.get("z", dtype::f64);
        const auto &mk = z.get("mask", dtype::u32);
        if (zv.f64.size() != N || mk.u32.size() != N)
            throw io_error("depth.bin does not match the angular grid");
        d.depth = Eigen::Map<const Eigen::VectorXd>(zv.f64.data(), Index(N));
        d.depth_mask.assign(mk.u32.begin(), mk.u32.end());

        std::istringstream sp(read_file((root / "split.csv").string()));
        std::string line;
        std::getline(sp, line);
        std::size_t row = 1;
        while (std::getline(sp, line))
        {
            ++row;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw parse_error("split.csv: expected grid_id,region", row);
            const std::size_t id = std::stoul(line.substr(0, comma));
            const std::string region = line.substr(comma + 1);
            if (id >= L)
                throw parse_error("split.csv: grid id out of range", row);
            if (region == "explored")
                d.explored.push_back(id);
            else if (region == "unexplored")
                d.unexplored.push_back(id);
            else
                throw parse_error("split.csv: unknown region '" + region + "'", row);
        }
        if (d.rsrp_base.size() != L || d.rsrp_rot.size() != L || d.explored.size() + d.unexplored.size() != L)
            throw io_error("dataset files are inconsistent");
        return d;
    }
}
