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

#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mmlscm
{
    namespace
    {
        template <typename T>
        void put_le(std::vector<std::uint8_t> &out, T v)
        {
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                         std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                            std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
            U u = std::bit_cast<U>(v);
            for (std::size_t i = 0; i < sizeof(U); ++i)
                out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFFu));
        }

        class reader
        {
        public:
            explicit reader(std::istream &is) : is_(is) {}

            template <typename T>
            T get()
            {
                using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                             std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                                std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
                unsigned char buf[sizeof(U)];
                raw(buf, sizeof(U));
                U u = 0;
                for (std::size_t i = 0; i < sizeof(U); ++i)
                    u |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
                return std::bit_cast<T>(u);
            }

            void raw(void *dst, std::size_t n)
            {
                is_.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
                if (static_cast<std::size_t>(is_.gcount()) != n)
                    throw io_error("MMLC: truncated stream");
            }

        private:
            std::istream &is_;
        };

        void check_dims(const std::vector<std::uint64_t> &dims, std::size_t n)
        {
            std::uint64_t prod = 1;
            for (auto d : dims)
                prod *= d;
            if (prod != n)
                throw invalid_argument("MMLC: payload size does not match dims");
            if (dims.size() > 255)
                throw invalid_argument("MMLC: rank too large");
        }
    }

    std::uint64_t array_entry::n_elem() const
    {
        std::uint64_t prod = 1;
        for (auto d : dims)
            prod *= d;
        return prod;
    }

    void container::add(const std::string &name, std::vector<std::uint64_t> dims, std::span<const double> data)
    {
        check_dims(dims, data.size());
        array_entry e;
        e.name = name;
        e.type = dtype::f64;
        e.dims = std::move(dims);
        e.f64.assign(data.begin(), data.end());
        arrays.push_back(std::move(e));
    }

    void container::add(const std::string &name, std::vector<std::uint64_t> dims, std::span<const std::uint32_t> data)
    {
        check_dims(dims, data.size());
        array_entry e;
        e.name = name;
        e.type = dtype::u32;
        e.dims = std::move(dims);
        e.u32.assign(data.begin(), data.end());
        arrays.push_back(std::move(e));
    }

    bool container::has(const std::string &name) const
    {
        for (const auto &a : arrays)
            if (a.name == name)
                return true;
        return false;
    }

    const array_entry &container::get(const std::string &name, dtype type) const
    {
        for (const auto &a : arrays)
            if (a.name == name)
            {
                if (a.type != type)
                    throw io_error("MMLC: array '" + name + "' has unexpected dtype");
                return a;
            }
        throw io_error("MMLC: missing array '" + name + "'");
    }

    const std::string &container::meta_at(const std::string &key) const
    {
        auto it = meta.find(key);
        if (it == meta.end())
            throw io_error("MMLC: missing metadata key '" + key + "'");
        return it->second;
    }

    double container::meta_double(const std::string &key) const
    {
        const auto &s = meta_at(key);
        std::istringstream ss(s);
        ss.imbue(std::locale::classic());
        double v = 0.0;
        if (!(ss >> v))
            throw io_error("MMLC: metadata '" + key + "' is not a number");
        return v;
    }

    long long container::meta_int(const std::string &key) const
    {
        const auto &s = meta_at(key);
        try
        {
            std::size_t pos = 0;
            long long v = std::stoll(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument(s);
            return v;
        }
        catch (const std::exception &)
        {
            throw io_error("MMLC: metadata '" + key + "' is not an integer");
        }
    }

    std::vector<std::uint8_t> container::bytes() const
    {
        std::vector<std::uint8_t> out;
        out.insert(out.end(), {'M', 'M', 'L', 'C'});
        out.push_back(version);

        std::string text;
        for (const auto &[k, v] : meta)
        {
            if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
                throw invalid_argument("MMLC: metadata keys/values must not contain '=' or newlines");
            text += k + "=" + v + "\n";
        }
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
        out.insert(out.end(), text.begin(), text.end());

        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
        for (const auto &a : arrays)
        {
            out.push_back(static_cast<std::uint8_t>(a.type));
            out.push_back(static_cast<std::uint8_t>(a.dims.size()));
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
            out.insert(out.end(), a.name.begin(), a.name.end());
            for (auto d : a.dims)
                put_le<std::uint64_t>(out, d);
            if (a.type == dtype::f64)
                for (double v : a.f64)
                    put_le<double>(out, v);
            else
                for (std::uint32_t v : a.u32)
                    put_le<std::uint32_t>(out, v);
        }
        return out;
    }

    void container::write(std::ostream &os) const
    {
        auto b = bytes();
        os.write(reinterpret_cast<const char *>(b.data()), static_cast<std::streamsize>(b.size()));
        if (!os)
            throw io_error("MMLC: write failed");
    }

    container container::read(std::istream &is)
    {
        reader r(is);
        char magic[4];
        r.raw(magic, 4);
        if (std::memcmp(magic, "MMLC", 4) != 0)
            throw io_error("MMLC: bad magic");
        auto ver = r.get<std::uint8_t>();
        if (ver != version)
            throw io_error("MMLC: unsupported version " + std::to_string(ver));

        container c;
        auto meta_len = r.get<std::uint32_t>();
        std::string text(meta_len, '\0');
        if (meta_len)
            r.raw(text.data(), meta_len);
        std::istringstream ms(text);
        std::string line;
        while (std::getline(ms, line))
        {
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw io_error("MMLC: malformed metadata line");
            c.meta[line.substr(0, eq)] = line.substr(eq + 1);
        }

        auto n_arrays = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < n_arrays; ++i)
        {
            array_entry e;
            auto t = r.get<std::uint8_t>();
            if (t != 1 && t != 2)
                throw io_error("MMLC: unknown dtype");
            e.type = static_cast<dtype>(t);
            auto rank = r.get<std::uint8_t>();
            auto name_len = r.get<std::uint16_t>();
            e.name.resize(name_len);
            if (name_len)
                r.raw(e.name.data(), name_len);
            for (std::uint8_t k = 0; k < rank; ++k)
                e.dims.push_back(r.get<std::uint64_t>());
            auto n = e.n_elem();
            if (n > (1ull << 34))
                throw io_error("MMLC: array too large");
            if (e.type == dtype::f64)
            {
                e.f64.resize(n);
                for (auto &v : e.f64)
                    v = r.get<double>();
            }
            else
            {
                e.u32.resize(n);
                for (auto &v : e.u32)
                    v = r.get<std::uint32_t>();
            }
            c.arrays.push_back(std::move(e));
        }
        return c;
    }

    void container::save(const std::string &path) const
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw io_error("cannot open '" + path + "' for writing");
        write(os);
    }

    container container::load(const std::string &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw io_error("cannot open '" + path + "'");
        return read(is);
    }

    std::string file_hash(const std::string &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw io_error("cannot open '" + path + "'");
        std::uint64_t h = 14695981039346656037ull;
        char buf[65536];
        while (is)
        {
            is.read(buf, sizeof(buf));
            auto n = is.gcount();
            for (std::streamsize i = 0; i < n; ++i)
            {
                h ^= static_cast<unsigned char>(buf[i]);
                h *= 1099511628211ull;
            }
        }
        std::ostringstream ss;
        ss << std::hex << std::setw(16) << std::setfill('0') << h;
        return ss.str();
    }
}
