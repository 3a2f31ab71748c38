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

#include "mmlscm/run_config.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace mmlscm
{
    namespace
    {
        std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos)
                return "";
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        double to_double(const std::string &key, const std::string &v)
        {
            std::size_t pos = 0;
            double d = 0.0;
            try
            {
                d = std::stod(v, &pos);
            }
            catch (const std::exception &)
            {
                pos = 0;
            }
            if (pos == 0 || pos != v.size())
                throw invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
            return d;
        }

        std::uint64_t to_uint(const std::string &key, const std::string &v)
        {
            if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
                throw invalid_argument("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
            return std::stoull(v);
        }

        bool to_bool(const std::string &key, const std::string &v)
        {
            if (v == "1" || v == "true")
                return true;
            if (v == "0" || v == "false")
                return false;
            throw invalid_argument("config: '" + key + "' expects true/false, got '" + v + "'");
        }

        vec3 to_vec3(const std::string &key, const std::string &v)
        {
            std::stringstream ss(v);
            std::string tok;
            vec3 out;
            int i = 0;
            while (std::getline(ss, tok, ','))
            {
                if (i >= 3)
                    break;
                out[i++] = to_double(key, trim(tok));
            }
            if (i != 3 || std::getline(ss, tok, ','))
                throw invalid_argument("config: '" + key + "' expects x,y,z");
            return out;
        }

        std::string vec3_str(const vec3 &v)
        {
            return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z());
        }

        struct accessor
        {
            std::function<std::string(const run_config &)> get;
            std::function<void(run_config &, const std::string &, const std::string &)> set;
        };

#define MMLSCM_DBL(expr)                                                                            \
    accessor{[](const run_config &c) { return format_double(c.expr); },                           \
             [](run_config &c, const std::string &k, const std::string &v) { c.expr = to_double(k, v); }}
#define MMLSCM_UINT(expr)                                                                           \
    accessor{[](const run_config &c) { return std::to_string(c.expr); },                          \
             [](run_config &c, const std::string &k, const std::string &v) { c.expr = decltype(c.expr)(to_uint(k, v)); }}
#define MMLSCM_BOOL(expr)                                                                           \
    accessor{[](const run_config &c) { return std::string(c.expr ? "true" : "false"); },          \
             [](run_config &c, const std::string &k, const std::string &v) { c.expr = to_bool(k, v); }}
#define MMLSCM_VEC(expr)                                                                            \
    accessor{[](const run_config &c) { return vec3_str(c.expr); },                                \
             [](run_config &c, const std::string &k, const std::string &v) { c.expr = to_vec3(k, v); }}

        const std::vector<std::pair<std::string, accessor>> &table()
        {
            static const std::vector<std::pair<std::string, accessor>> t = {
                {"scene.seed", MMLSCM_UINT(scene.seed)},
                {"scene.room_lo", MMLSCM_VEC(scene.room_lo)},
                {"scene.room_hi", MMLSCM_VEC(scene.room_hi)},
                {"scene.bs_position", MMLSCM_VEC(scene.bs_position)},
                {"scene.n_boxes", MMLSCM_UINT(scene.n_boxes)},
                {"scene.n_grids", MMLSCM_UINT(scene.n_grids)},
                {"scene.box_min_size", MMLSCM_DBL(scene.box_min_size)},
                {"scene.box_max_size", MMLSCM_DBL(scene.box_max_size)},
                {"scene.box_min_height", MMLSCM_DBL(scene.box_min_height)},
                {"scene.box_max_height", MMLSCM_DBL(scene.box_max_height)},
                {"scene.reflectivity_min", MMLSCM_DBL(scene.reflectivity_min)},
                {"scene.reflectivity_max", MMLSCM_DBL(scene.reflectivity_max)},
                {"scene.grid_min_height", MMLSCM_DBL(scene.grid_min_height)},
                {"scene.grid_max_height", MMLSCM_DBL(scene.grid_max_height)},
                {"scene.reject_blocked", MMLSCM_BOOL(scene.reject_blocked)},
                {"scene.n_tilt", MMLSCM_UINT(scene.n_tilt)},
                {"scene.n_azimuth", MMLSCM_UINT(scene.n_azimuth)},
                {"data.seed", MMLSCM_UINT(data.seed)},
                {"data.split_fraction", MMLSCM_DBL(data.split_fraction)},
                {"data.points_per_m2", MMLSCM_DBL(data.points_per_m2)},
                {"data.voxel_resolution", MMLSCM_DBL(data.voxel_resolution)},
                {"data.depth_samples", MMLSCM_UINT(data.depth_samples)},
                {"field.seed", MMLSCM_UINT(field.seed)},
                {"field.position_order", MMLSCM_UINT(field.position.order)},
                {"field.position_base", MMLSCM_DBL(field.position.base)},
                {"field.density_order", MMLSCM_UINT(field.density.order)},
                {"field.density_base", MMLSCM_DBL(field.density.base)},
                {"field.att_width", MMLSCM_UINT(field.att_width)},
                {"field.att_layers", MMLSCM_UINT(field.att_layers)},
                {"field.att_skip", MMLSCM_UINT(field.att_skip)},
                {"field.rad_width", MMLSCM_UINT(field.rad_width)},
                {"field.rad_layers", MMLSCM_UINT(field.rad_layers)},
                {"field.sh_degree", MMLSCM_UINT(field.sh_degree)},
                {"field.out_init_scale", MMLSCM_DBL(field.out_init_scale)},
                {"train.seed", MMLSCM_UINT(train.seed)},
                {"train.lambda1", MMLSCM_DBL(train.lambda1)},
                {"train.lambda2", MMLSCM_DBL(train.lambda2)},
                {"train.sm_mode", MMLSCM_BOOL(train.sm_mode)},
                {"train.lr_start", MMLSCM_DBL(train.lr_start)},
                {"train.lr_end", MMLSCM_DBL(train.lr_end)},
                {"train.batch_grids", MMLSCM_UINT(train.batch_grids)},
                {"train.steps", MMLSCM_UINT(train.steps)},
                {"train.rays_per_step", MMLSCM_UINT(train.rays_per_step)},
                {"train.ray_samples", MMLSCM_UINT(train.ray_samples)},
                {"train.deterministic", MMLSCM_BOOL(train.deterministic)},
                {"train.checkpoint_every", MMLSCM_UINT(train.checkpoint_every)},
                {"eval.ray_samples", MMLSCM_UINT(eval_ray_samples)},
                {"eval.omp_max_atoms", MMLSCM_UINT(omp_max_atoms)},
                {"noise.level_db", MMLSCM_DBL(noise.level_db)},
                {"noise.phi", MMLSCM_BOOL(noise.phi)},
                {"noise.rsrp", MMLSCM_BOOL(noise.rsrp)},
                {"noise.seed", MMLSCM_UINT(noise.seed)},
                {"render.placement",
                 accessor{[](const run_config &c) { return std::string(c.placement == query_placement::midpoint ? "midpoint" : "segment_start"); },
                          [](run_config &c, const std::string &k, const std::string &v) {
                              if (v == "midpoint")
                                  c.placement = query_placement::midpoint;
                              else if (v == "segment_start")
                                  c.placement = query_placement::segment_start;
                              else
                                  throw invalid_argument("config: '" + k + "' expects midpoint or segment_start");
                          }}},
            };
            return t;
        }

#undef MMLSCM_DBL
#undef MMLSCM_UINT
#undef MMLSCM_BOOL
#undef MMLSCM_VEC

        const accessor &find(const std::string &key)
        {
            for (const auto &[k, a] : table())
                if (k == key)
                    return a;
            throw invalid_argument("config: unknown key '" + key + "'");
        }
    }

    void run_config::set(const std::string &key, const std::string &value) { find(key).set(*this, key, trim(value)); }

    std::string run_config::get(const std::string &key) const { return find(key).get(*this); }

    const std::vector<std::string> &run_config::keys()
    {
        static const std::vector<std::string> k = [] {
            std::vector<std::string> out;
            for (const auto &e : table())
                out.push_back(e.first);
            return out;
        }();
        return k;
    }

    void run_config::read(std::istream &is)
    {
        std::string line;
        std::size_t row = 0;
        while (std::getline(is, line))
        {
            ++row;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.resize(hash);
            line = trim(line);
            if (line.empty())
                continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw parse_error("config: expected key = value", row);
            try
            {
                set(trim(line.substr(0, eq)), line.substr(eq + 1));
            }
            catch (const invalid_argument &e)
            {
                throw parse_error(e.what(), row);
            }
        }
    }

    void run_config::load(const std::string &path)
    {
        std::ifstream is(path);
        if (!is)
            throw io_error("cannot open config '" + path + "'");
        read(is);
    }

    void run_config::write(std::ostream &os) const
    {
        for (const auto &[k, a] : table())
            os << k << " = " << a.get(*this) << '\n';
    }
}
