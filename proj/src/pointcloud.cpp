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

#include "mmlscm/pointcloud.hpp"
#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mmlscm
{
    namespace
    {
        std::string trim(const std::string &s)
        {
            auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos)
                return {};
            auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        bool parse_number(const std::string &tok, double &v)
        {
            const std::string t = trim(tok);
            if (t.empty())
                return false;
            char *end = nullptr;
            v = std::strtod(t.c_str(), &end);
            return end == t.c_str() + t.size();
        }

        vec3 parse_xyz(const std::vector<std::string> &fields, std::size_t ix, std::size_t iy, std::size_t iz, std::size_t row)
        {
            const std::size_t need = std::max({ix, iy, iz}) + 1;
            if (fields.size() < need)
                throw parse_error("point cloud: expected at least " + std::to_string(need) + " fields", row);
            vec3 p;
            const std::size_t cols[3] = {ix, iy, iz};
            for (int a = 0; a < 3; ++a)
            {
                double v = 0.0;
                if (!parse_number(fields[cols[a]], v))
                    throw parse_error("point cloud: malformed coordinate '" + trim(fields[cols[a]]) + "'", row);
                if (!std::isfinite(v))
                    throw parse_error("point cloud: non-finite coordinate", row);
                p[a] = v;
            }
            return p;
        }

        point_cloud load_csv(std::istream &is)
        {
            point_cloud pc;
            std::string line;
            std::size_t row = 0;
            while (std::getline(is, line))
            {
                ++row;
                const std::string t = trim(line);
                if (t.empty() || t[0] == '#')
                    continue;
                std::vector<std::string> fields;
                std::stringstream ss(t);
                std::string f;
                while (std::getline(ss, f, ','))
                    fields.push_back(f);
                if (fields.size() != 3)
                    throw parse_error("xyz-csv: expected 3 comma-separated fields, got " + std::to_string(fields.size()), row);
                pc.points.push_back(parse_xyz(fields, 0, 1, 2, row));
            }
            return pc;
        }

        point_cloud load_ply(std::istream &is)
        {
            std::string line;
            std::size_t lineno = 0;
            auto next = [&](std::string &out) {
                if (!std::getline(is, out))
                    return false;
                ++lineno;
                out = trim(out);
                return true;
            };

            if (!next(line) || line != "ply")
                throw parse_error("ply: missing 'ply' magic", lineno);

            std::size_t n_vertex = 0, n_props = 0;
            std::size_t ix = SIZE_MAX, iy = SIZE_MAX, iz = SIZE_MAX;
            bool in_vertex = false, vertex_seen = false, ascii = false;
            while (true)
            {
                if (!next(line))
                    throw parse_error("ply: truncated header", lineno);
                if (line == "end_header")
                    break;
                std::istringstream ls(line);
                std::string kw;
                ls >> kw;
                if (kw == "format")
                {
                    std::string fmt;
                    ls >> fmt;
                    ascii = fmt == "ascii";
                }
                else if (kw == "element")
                {
                    std::string name;
                    std::size_t count = 0;
                    ls >> name >> count;
                    in_vertex = name == "vertex";
                    if (in_vertex)
                    {
                        if (vertex_seen)
                            throw parse_error("ply: duplicate vertex element", lineno);
                        vertex_seen = true;
                        n_vertex = count;
                    }
                    else if (!vertex_seen)
                        throw parse_error("ply: elements before 'vertex' are not supported", lineno);
                }
                else if (kw == "property" && in_vertex)
                {
                    std::string type, name;
                    ls >> type;
                    if (type == "list")
                        throw parse_error("ply: list properties on vertices are not supported", lineno);
                    ls >> name;
                    if (name == "x")
                        ix = n_props;
                    else if (name == "y")
                        iy = n_props;
                    else if (name == "z")
                        iz = n_props;
                    ++n_props;
                }
            }
            if (!ascii)
                throw parse_error("ply: only 'format ascii' is supported", 0);
            if (ix == SIZE_MAX || iy == SIZE_MAX || iz == SIZE_MAX)
                throw parse_error("ply: vertex element lacks x/y/z properties", 0);

            point_cloud pc;
            pc.points.reserve(n_vertex);
            for (std::size_t k = 0; k < n_vertex; ++k)
            {
                if (!next(line))
                    throw parse_error("ply: truncated stream, expected " + std::to_string(n_vertex) + " vertices", lineno + 1);
                std::istringstream ls(line);
                std::vector<std::string> fields;
                std::string f;
                while (ls >> f)
                    fields.push_back(f);
                pc.points.push_back(parse_xyz(fields, ix, iy, iz, lineno));
            }
            return pc;
        }

        double ffloor_index(double coord, double lo, double res)
        {
            return std::floor((coord - lo) / res);
        }
    }

    cloud_format cloud_format_from_string(const std::string &s)
    {
        if (s == "xyz-csv" || s == "csv" || s == "xyz")
            return cloud_format::xyz_csv;
        if (s == "ascii-ply" || s == "ply")
            return cloud_format::ascii_ply;
        throw invalid_argument("unknown point cloud format '" + s + "'");
    }

    point_cloud load_point_cloud(std::istream &is, cloud_format format)
    {
        switch (format)
        {
        case cloud_format::xyz_csv:
            return load_csv(is);
        case cloud_format::ascii_ply:
            return load_ply(is);
        }
        throw invalid_argument("unknown point cloud format");
    }

    point_cloud load_point_cloud(const std::string &path)
    {
        std::ifstream is(path);
        if (!is)
            throw io_error("cannot open '" + path + "'");
        const auto dot = path.rfind('.');
        const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
        return load_point_cloud(is, ext == "ply" ? cloud_format::ascii_ply : cloud_format::xyz_csv);
    }

    void write_xyz_csv(std::ostream &os, const point_cloud &cloud)
    {
        for (const auto &p : cloud.points)
            os << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
    }

    point_cloud translate_to_bs(const point_cloud &cloud, const vec3 &p_bs)
    {
        if (cloud.frame != frame_tag::world)
            throw invalid_state("translate_to_bs: cloud is already BS-centered");
        point_cloud out;
        out.frame = frame_tag::bs_centered;
        out.points.reserve(cloud.size());
        for (const auto &p : cloud.points)
            out.points.push_back(p - p_bs);
        return out;
    }

    vec3 voxel_spec::maxs() const
    {
        return mins + vec3(double(dims[0]), double(dims[1]), double(dims[2])).cwiseProduct(resolution);
    }

    void voxel_spec::validate() const
    {
        for (int a = 0; a < 3; ++a)
        {
            if (!(resolution[a] > 0.0))
                throw invalid_argument("voxel_spec: resolutions must be > 0");
            if (dims[a] < 1)
                throw invalid_argument("voxel_spec: dims must be >= 1");
        }
    }

    voxel_spec voxel_spec::covering(const vec3 &lo, const vec3 &hi, const vec3 &resolution)
    {
        voxel_spec s;
        s.mins = lo;
        s.resolution = resolution;
        for (int a = 0; a < 3; ++a)
            s.dims[a] = std::max<std::size_t>(1, std::size_t(std::ceil((hi[a] - lo[a]) / resolution[a] - 1e-9)));
        s.validate();
        return s;
    }

    std::uint64_t density_grid::total() const
    {
        std::uint64_t s = 0;
        for (auto c : rho)
            s += c;
        return s;
    }

    bool density_grid::voxel_of(const vec3 &p, std::array<std::size_t, 3> &idx) const
    {
        for (int a = 0; a < 3; ++a)
        {
            const double q = (p[a] - spec.mins[a]) / spec.resolution[a];
            const double n = double(spec.dims[a]);
            if (!(q >= -voxel_clamp_margin) || !(q <= n + voxel_clamp_margin))
                return false;
            double f = std::floor(q);
            f = std::clamp(f, 0.0, n - 1.0);
            idx[a] = std::size_t(f);
        }
        return true;
    }

    density_grid voxelize(const point_cloud &cloud, const voxel_spec &spec)
    {
        if (cloud.frame != frame_tag::bs_centered)
            throw invalid_state("voxelize: cloud must be BS-centered");
        spec.validate();

        density_grid g;
        g.spec = spec;
        g.rho.assign(spec.n_voxels(), 0u);

        std::vector<std::size_t> bad;
        std::array<std::size_t, 3> idx{};
        for (std::size_t k = 0; k < cloud.size(); ++k)
        {
            if (!g.voxel_of(cloud.points[k], idx))
            {
                bad.push_back(k);
                continue;
            }
            ++g.rho[spec.flat(idx[0], idx[1], idx[2])];
        }
        if (!bad.empty())
        {
            std::string msg = "voxelize: " + std::to_string(bad.size()) + " point(s) outside the bounding box, indices";
            for (std::size_t i = 0; i < bad.size() && i < 16; ++i)
                msg += " " + std::to_string(bad[i]);
            if (bad.size() > 16)
                msg += " ...";
            throw out_of_bounds(msg);
        }
        return g;
    }

    density_query density_at(const density_grid &grid, const vec3 &p)
    {
        std::array<std::size_t, 3> idx{};
        if (!grid.voxel_of(p, idx))
            return {0.0, false};
        return {double(grid.rho[grid.spec.flat(idx[0], idx[1], idx[2])]), true};
    }

    std::optional<std::size_t> first_obstacle_index(const density_grid &grid, const vec3 &direction, std::span<const double> sample_ts)
    {
        if (sample_ts.empty())
            throw invalid_argument("first_obstacle_depth: empty sample list");
        for (std::size_t d = 0; d < sample_ts.size(); ++d)
            if (density_at(grid, sample_ts[d] * direction).value > 0.0)
                return d;
        return std::nullopt;
    }

    std::optional<double> first_obstacle_depth(const density_grid &grid, const vec3 &direction, std::span<const double> sample_ts)
    {
        auto d = first_obstacle_index(grid, direction, sample_ts);
        if (!d)
            return std::nullopt;
        return sample_ts[*d];
    }

    std::optional<double> first_obstacle_depth_dda(const density_grid &grid, const vec3 &direction, double t_max)
    {
        const auto &s = grid.spec;
        const vec3 lo = s.mins, hi = s.maxs();

        // Slab entry/exit of the ray from the origin
        double t0 = 0.0, t1 = t_max;
        for (int a = 0; a < 3; ++a)
        {
            if (direction[a] == 0.0)
            {
                if (0.0 < lo[a] || 0.0 > hi[a])
                    return std::nullopt;
                continue;
            }
            double ta = (lo[a]) / direction[a], tb = (hi[a]) / direction[a];
            if (ta > tb)
                std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        if (t0 > t1)
            return std::nullopt;

        const vec3 p0 = t0 * direction;
        long long idx[3], step[3];
        double t_next[3], t_delta[3];
        for (int a = 0; a < 3; ++a)
        {
            const double q = ffloor_index(p0[a], lo[a], s.resolution[a]);
            idx[a] = std::clamp<long long>((long long)q, 0, (long long)s.dims[a] - 1);
            if (direction[a] > 0.0)
            {
                step[a] = 1;
                t_next[a] = (lo[a] + double(idx[a] + 1) * s.resolution[a]) / direction[a];
                t_delta[a] = s.resolution[a] / direction[a];
            }
            else if (direction[a] < 0.0)
            {
                step[a] = -1;
                t_next[a] = (lo[a] + double(idx[a]) * s.resolution[a]) / direction[a];
                t_delta[a] = -s.resolution[a] / direction[a];
            }
            else
            {
                step[a] = 0;
                t_next[a] = std::numeric_limits<double>::infinity();
                t_delta[a] = std::numeric_limits<double>::infinity();
            }
        }

        double t = t0;
        while (t <= t1)
        {
            if (grid.rho[s.flat(std::size_t(idx[0]), std::size_t(idx[1]), std::size_t(idx[2]))] > 0)
                return t;
            int a = 0;
            if (t_next[1] < t_next[a])
                a = 1;
            if (t_next[2] < t_next[a])
                a = 2;
            t = t_next[a];
            idx[a] += step[a];
            if (idx[a] < 0 || idx[a] >= (long long)s.dims[a])
                break;
            t_next[a] += t_delta[a];
        }
        return std::nullopt;
    }

    void save_density_grid(const std::string &path, const density_grid &grid)
    {
        container c;
        c.meta["kind"] = "density_grid";
        for (int a = 0; a < 3; ++a)
        {
            const char axis = "xyz"[a];
            c.meta[std::string("min_") + axis] = format_double(grid.spec.mins[a]);
            c.meta[std::string("res_") + axis] = format_double(grid.spec.resolution[a]);
        }
        const auto &d = grid.spec.dims;
        c.add("rho", {d[0], d[1], d[2]}, std::span<const std::uint32_t>(grid.rho));
        c.save(path);
    }

    density_grid load_density_grid(const std::string &path)
    {
        auto c = container::load(path);
        if (c.meta_at("kind") != "density_grid")
            throw io_error("'" + path + "' is not a density grid");
        const auto &a = c.get("rho", dtype::u32);
        if (a.dims.size() != 3)
            throw io_error("density grid must be rank 3");
        density_grid g;
        for (int k = 0; k < 3; ++k)
        {
            const char axis = "xyz"[k];
            g.spec.mins[k] = c.meta_double(std::string("min_") + axis);
            g.spec.resolution[k] = c.meta_double(std::string("res_") + axis);
            g.spec.dims[k] = a.dims[k];
        }
        g.spec.validate();
        g.rho = a.u32;
        return g;
    }
}
