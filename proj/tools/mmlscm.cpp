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
#include "mmlscm/run_config.hpp"
#include "mmlscm/util.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace mmlscm;

namespace
{
    struct usage_error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct options
    {
        std::string out = "run";
        std::string scene;
        std::string config;
        std::vector<std::string> checkpoints;
        std::string name;
        std::vector<std::string> set;
        std::optional<std::uint64_t> seed;
        std::optional<double> lambda1, lambda2, noise_db;
        std::optional<std::size_t> subset, steps;
        bool sm = false;
        bool deterministic = false;
        bool train_noisy = false;
        bool print_config = false;
    };

    std::string dataset_dir(const options &o) { return o.scene.empty() ? (fs::path(o.out) / "dataset").string() : o.scene; }

    run_config make_config(const options &o)
    {
        run_config c;
        const auto saved = fs::path(o.out) / "config.txt";
        if (!o.config.empty())
            c.load(o.config);
        else if (fs::exists(saved))
            c.load(saved.string());
        for (const auto &kv : o.set)
        {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw usage_error("--set expects key=value, got '" + kv + "'");
            c.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (o.seed)
        {
            c.scene.seed = *o.seed;
            c.data.seed = *o.seed;
        }
        if (o.lambda1)
            c.train.lambda1 = *o.lambda1;
        if (o.lambda2)
            c.train.lambda2 = *o.lambda2;
        if (o.sm)
            c.train.sm_mode = true;
        if (o.subset)
            c.train.rays_per_step = *o.subset;
        if (o.steps)
            c.train.steps = *o.steps;
        if (o.noise_db)
            c.noise.level_db = *o.noise_db;
        if (o.deterministic)
            c.train.deterministic = true;
        return c;
    }

    std::size_t thread_count(const run_config &c) { return c.train.deterministic ? 1 : env_threads(); }

    std::string method_label(const train_config &t) { return t.effective_lambda2() > 0.0 ? "MM-LSCM" : "SM-LSCM"; }

    std::string file_stem(const std::string &label)
    {
        std::string s;
        for (char ch : label)
            s += ch == '-' ? '_' : char(std::tolower(static_cast<unsigned char>(ch)));
        return s;
    }

    void write_text(const fs::path &p, const std::string &text)
    {
        std::ofstream os(p, std::ios::binary);
        if (!os)
            throw io_error("cannot write '" + p.string() + "'");
        os << text;
    }

    // Every regular file under the run directory with its content hash, sorted by relative path
    void write_manifest(const std::string &run_dir)
    {
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto &e : fs::recursive_directory_iterator(run_dir))
        {
            if (!e.is_regular_file())
                continue;
            const auto rel = fs::relative(e.path(), run_dir).generic_string();
            if (rel == "manifest.txt")
                continue;
            rows.emplace_back(rel, file_hash(e.path().string()));
        }
        std::sort(rows.begin(), rows.end());
        std::ostringstream os;
        os << "# path fnv1a64\n";
        for (const auto &[p, h] : rows)
            os << p << ' ' << h << '\n';
        write_text(fs::path(run_dir) / "manifest.txt", os.str());
    }

    void print_metrics(const metrics &m, const std::string &condition)
    {
        for (std::size_t k = 0; k < 3; ++k)
        {
            const auto &s = m.subtasks[k];
            std::cout << m.method << ' ' << condition << " subtask" << k + 1 << ' ';
            if (!s.applicable)
                std::cout << "n/a\n";
            else
                std::cout << "mae_db=" << format_double(s.mae_db) << " mse_aps=" << format_double(s.mse_aps)
                          << " grids=" << s.n_grids << '\n';
        }
    }

    void save_metrics(const fs::path &p, const metrics &m)
    {
        std::ofstream os(p, std::ios::binary);
        if (!os)
            throw io_error("cannot write '" + p.string() + "'");
        write_metrics_csv(os, {m});
    }

    void save_aps(const fs::path &p, const std::vector<Eigen::VectorXd> &x)
    {
        container c;
        c.meta["kind"] = "aps_estimate";
        const auto n = x.empty() ? 0 : x.front().size();
        std::vector<double> flat;
        flat.reserve(x.size() * std::size_t(n));
        for (const auto &v : x)
        {
            if (v.size() != n)
                throw invalid_state("aps estimate lengths differ");
            flat.insert(flat.end(), v.data(), v.data() + v.size());
        }
        c.add("aps", {x.size(), std::uint64_t(n)}, flat);
        c.save(p.string());
    }

    // --------------------------------------------------------------- commands

    void cmd_gen(const options &o)
    {
        const auto cfg = make_config(o);
        fs::create_directories(o.out);
        const auto d = generate_dataset(cfg.scene, cfg.data);
        save_dataset(dataset_dir(o), d);
        std::ostringstream os;
        cfg.write(os);
        write_text(fs::path(o.out) / "config.txt", os.str());
        write_manifest(o.out);
        std::cout << "gen grids=" << d.n_grids() << " explored=" << d.explored.size()
                  << " unexplored=" << d.unexplored.size() << " points=" << d.cloud.size() << '\n';
    }

    fit_result run_training(const options &o, const run_config &cfg, const training_set &set, const std::string &ckpt)
    {
        train_config tc = cfg.train;
        train_state start = o.checkpoints.empty() ? make_train_state(cfg.field) : load_checkpoint(o.checkpoints.front(), &cfg.field);
        if (tc.checkpoint_every > 0)
            tc.checkpoint_path = ckpt;
        auto r = fit(std::move(start), set, tc,
                     [&](std::size_t step, const loss_breakdown &l) {
                         if (step % 100 == 0 || step + 1 == tc.steps)
                             std::cerr << "step " << step << " total=" << format_double(l.total) << '\n';
                     },
                     cfg.placement);
        return r;
    }

    void cmd_train(const options &o)
    {
        const auto cfg = make_config(o);
        const auto d = load_dataset(dataset_dir(o));
        const auto label = o.name.empty() ? method_label(cfg.train) : o.name;
        const auto stem = file_stem(label);
        fs::create_directories(o.out);
        const auto ckpt = (fs::path(o.out) / (stem + ".ckpt")).string();

        const std::size_t first = o.checkpoints.empty() ? 0 : load_checkpoint(o.checkpoints.front(), &cfg.field).step;
        const auto r = run_training(o, cfg, make_training_set(d), ckpt);
        save_checkpoint(ckpt, r.state);
        {
            std::ofstream os(fs::path(o.out) / (stem + "_loss.csv"), std::ios::binary);
            write_loss_history_csv(os, r.history, first);
        }
        std::ostringstream os;
        cfg.write(os);
        write_text(fs::path(o.out) / (stem + "_config.txt"), os.str());
        write_manifest(o.out);
        const auto &last = r.history.empty() ? loss_breakdown{} : r.history.back();
        std::cout << label << " steps=" << r.state.step << " radio_fit=" << format_double(last.radio_fit)
                  << " sparsity=" << format_double(last.sparsity) << " env=" << format_double(last.env)
                  << " total=" << format_double(last.total) << '\n';
    }

    // Label stored next to a checkpoint by `train`, else derived from the file name
    std::string checkpoint_label(const std::string &ckpt, const std::string &override_name)
    {
        if (!override_name.empty())
            return override_name;
        const auto p = fs::path(ckpt);
        const auto cfg_path = p.parent_path() / (p.stem().string() + "_config.txt");
        if (fs::exists(cfg_path))
        {
            run_config c;
            c.load(cfg_path.string());
            return method_label(c.train);
        }
        return p.stem().string();
    }

    void cmd_eval(const options &o)
    {
        if (o.checkpoints.empty())
            throw usage_error("eval needs --checkpoint");
        const auto cfg = make_config(o);
        const auto d = load_dataset(dataset_dir(o));
        fs::create_directories(o.out);
        const auto target = clean_target(d);
        for (const auto &ck : o.checkpoints)
        {
            const auto label = checkpoint_label(ck, o.checkpoints.size() == 1 ? o.name : "");
            const auto st = load_checkpoint(ck);
            const auto x = predict_aps(st.params, d, cfg.eval_ray_samples, {}, thread_count(cfg), cfg.placement);
            const auto m = evaluate_subtasks(label, x, d, target, method_kind::field);
            save_metrics(fs::path(o.out) / ("metrics_" + file_stem(label) + ".csv"), m);
            save_aps(fs::path(o.out) / (file_stem(label) + "_aps.bin"), x);
            print_metrics(m, "clean");
        }
        write_manifest(o.out);
    }

    void write_wnomp_csv(const fs::path &p, const dataset &d, const std::vector<Eigen::VectorXd> &x)
    {
        std::ofstream os(p, std::ios::binary);
        if (!os)
            throw io_error("cannot write '" + p.string() + "'");
        os << "grid_id,index,value\n";
        for (auto l : d.explored)
            for (Eigen::Index n = 0; n < x[l].size(); ++n)
                if (x[l][n] != 0.0)
                    os << l << ',' << n << ',' << format_double(x[l][n]) << '\n';
    }

    void cmd_baseline(const options &o)
    {
        const auto cfg = make_config(o);
        const auto d = load_dataset(dataset_dir(o));
        fs::create_directories(o.out);
        omp_config oc;
        oc.max_atoms = cfg.omp_max_atoms;
        const auto target = clean_target(d);
        const auto x = wnomp_predict(d, target, oc);
        const auto m = evaluate_subtasks("WNOMP", x, d, target, method_kind::wnomp);
        save_metrics(fs::path(o.out) / "metrics_wnomp.csv", m);
        write_wnomp_csv(fs::path(o.out) / "wnomp_aps.csv", d, x);
        write_manifest(o.out);
        print_metrics(m, "clean");
    }

    void cmd_robustness(const options &o)
    {
        const auto cfg = make_config(o);
        if (o.checkpoints.empty() && !o.train_noisy)
            throw usage_error("robustness needs --checkpoint (or --train-noisy)");
        const auto d = load_dataset(dataset_dir(o));
        fs::create_directories(o.out);
        const auto target = noisy_target(d, cfg.noise);
        std::vector<metrics> rows;

        omp_config oc;
        oc.max_atoms = cfg.omp_max_atoms;
        rows.push_back(evaluate_subtasks("WNOMP", wnomp_predict(d, target, oc), d, target, method_kind::wnomp));

        if (o.train_noisy)
        {
            const auto label = (o.name.empty() ? method_label(cfg.train) : o.name) + "-train-noisy";
            const auto stem = file_stem(label);
            options fresh = o;
            fresh.checkpoints.clear();
            const auto r = run_training(fresh, cfg, make_training_set(d, target), (fs::path(o.out) / (stem + ".ckpt")).string());
            save_checkpoint((fs::path(o.out) / (stem + ".ckpt")).string(), r.state);
            const auto x = predict_aps(r.state.params, d, cfg.eval_ray_samples, {}, thread_count(cfg), cfg.placement);
            rows.push_back(evaluate_subtasks(label, x, d, target, method_kind::field));
        }
        else
            for (const auto &ck : o.checkpoints)
            {
                const auto st = load_checkpoint(ck);
                const auto x = predict_aps(st.params, d, cfg.eval_ray_samples, {}, thread_count(cfg), cfg.placement);
                rows.push_back(evaluate_subtasks(checkpoint_label(ck, o.checkpoints.size() == 1 ? o.name : ""), x, d,
                                                 target, method_kind::field));
            }

        for (const auto &m : rows)
        {
            save_metrics(fs::path(o.out) / ("metrics_" + file_stem(m.method) + "_noisy.csv"), m);
            print_metrics(m, "noisy");
        }
        std::ostringstream os;
        os << "level_db=" << format_double(cfg.noise.level_db) << "\nphi=" << (cfg.noise.phi ? "true" : "false")
           << "\nrsrp=" << (cfg.noise.rsrp ? "true" : "false") << "\nseed=" << cfg.noise.seed << '\n';
        write_text(fs::path(o.out) / "noise.txt", os.str());
        write_manifest(o.out);
    }

    int method_rank(const std::string &m)
    {
        if (m.rfind("MM-LSCM", 0) == 0)
            return 0;
        if (m.rfind("SM-LSCM", 0) == 0)
            return 1;
        if (m == "WNOMP")
            return 2;
        return 3;
    }

    std::vector<metrics> collect(const std::string &run_dir, bool noisy)
    {
        std::vector<metrics> rows;
        std::vector<fs::path> files;
        for (const auto &e : fs::directory_iterator(run_dir))
        {
            const auto f = e.path().filename().string();
            const bool is_noisy = f.size() > 10 && f.substr(f.size() - 10) == "_noisy.csv";
            if (f.rfind("metrics_", 0) == 0 && e.path().extension() == ".csv" && is_noisy == noisy)
                files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto &f : files)
        {
            std::ifstream is(f);
            for (auto &m : read_metrics_csv(is))
                rows.push_back(std::move(m));
        }
        std::stable_sort(rows.begin(), rows.end(),
                         [](const metrics &a, const metrics &b) { return method_rank(a.method) < method_rank(b.method); });
        return rows;
    }

    void cmd_report(const options &o)
    {
        const auto clean = collect(o.out, false);
        const auto noisy = collect(o.out, true);
        if (clean.empty() && noisy.empty())
            throw io_error("no metrics files in '" + o.out + "'");

        std::string noise_line = "no noisy runs";
        if (fs::exists(fs::path(o.out) / "noise.txt"))
        {
            std::ifstream is(fs::path(o.out) / "noise.txt");
            std::string line, level = "?";
            while (std::getline(is, line))
                if (line.rfind("level_db=", 0) == 0)
                    level = line.substr(9);
            noise_line = "noise: zero-mean Gaussian in dB, std " + level +
                         " dB, multiplicative on every nonzero entry of Phi and y; models trained on clean data";
        }

        std::ostringstream txt;
        txt << "# " << noise_line << "\n# MAE floor " << format_double(rsrp_floor) << " before log10\n\n";
        if (!clean.empty())
        {
            txt << "clean\n";
            write_metrics_table(txt, clean);
            std::ofstream os(fs::path(o.out) / "report.csv", std::ios::binary);
            write_metrics_csv(os, clean);
        }
        if (!noisy.empty())
        {
            txt << "\nnoisy\n";
            write_metrics_table(txt, noisy);
            std::ofstream os(fs::path(o.out) / "report_noisy.csv", std::ios::binary);
            write_metrics_csv(os, noisy);
        }
        write_text(fs::path(o.out) / "report.txt", txt.str());
        write_manifest(o.out);
        std::cout << txt.str();
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"mmlscm: radio radiance fields for localized channel modelling"};
    app.require_subcommand(1);
    options o;

    auto common = [&](CLI::App *c) {
        c->add_option("--out", o.out, "run directory")->capture_default_str();
        c->add_option("--config", o.config, "key = value run config (default: <out>/config.txt if present)");
        c->add_option("--set", o.set, "override one config key, key=value (repeatable)");
        c->add_flag("--deterministic", o.deterministic, "single-threaded, bitwise reproducible");
        c->add_flag("--print-config", o.print_config, "print the effective config and exit");
    };
    auto with_scene = [&](CLI::App *c) { c->add_option("--scene", o.scene, "dataset directory (default: <out>/dataset)"); };
    auto with_train = [&](CLI::App *c) {
        c->add_option("--lambda1", o.lambda1, "sparsity weight");
        c->add_option("--lambda2", o.lambda2, "depth loss weight");
        c->add_flag("--sm", o.sm, "single-modality ablation (lambda2 = 0)");
        c->add_option("--subset", o.subset, "rays per backward pass (0 = all)");
        c->add_option("--steps", o.steps, "training steps");
    };

    auto *gen = app.add_subcommand("gen", "generate a synthetic scene and dataset");
    common(gen);
    gen->add_option("--seed", o.seed, "scene and dataset seed");

    auto *train = app.add_subcommand("train", "train a field on the explored grids");
    common(train);
    with_scene(train);
    with_train(train);
    train->add_option("--checkpoint", o.checkpoints, "resume from this checkpoint")->expected(1);
    train->add_option("--name", o.name, "method label (default MM-LSCM or SM-LSCM)");

    auto *eval = app.add_subcommand("eval", "score checkpoints on the three sub-tasks");
    common(eval);
    with_scene(eval);
    eval->add_option("--checkpoint", o.checkpoints, "trained checkpoint(s)");
    eval->add_option("--name", o.name, "method label");

    auto *rob = app.add_subcommand("robustness", "score under noisy Phi and RSRP");
    common(rob);
    with_scene(rob);
    with_train(rob);
    rob->add_option("--checkpoint", o.checkpoints, "checkpoint(s) trained on clean data");
    rob->add_option("--noise-db", o.noise_db, "noise standard deviation in dB");
    rob->add_flag("--train-noisy", o.train_noisy, "train a fresh model on the noisy data instead");
    rob->add_option("--name", o.name, "method label");

    auto *base = app.add_subcommand("baseline", "WNOMP estimates on explored grids");
    common(base);
    with_scene(base);

    auto *rep = app.add_subcommand("report", "comparison table from the metrics in the run directory");
    rep->add_option("--out", o.out, "run directory")->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return 2;
    }

    try
    {
        if (o.print_config)
        {
            make_config(o).write(std::cout);
            return 0;
        }
        if (gen->parsed())
            cmd_gen(o);
        else if (train->parsed())
            cmd_train(o);
        else if (eval->parsed())
            cmd_eval(o);
        else if (rob->parsed())
            cmd_robustness(o);
        else if (base->parsed())
            cmd_baseline(o);
        else if (rep->parsed())
            cmd_report(o);
        return 0;
    }
    catch (const usage_error &e)
    {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }
    catch (const mmlscm::invalid_argument &e)
    {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
