#include <CLI11.hpp>

#include <iostream>

#include "zeroscatter/train.hpp"

namespace fs = std::filesystem;

namespace {

bool glob_match(const char* p, const char* s) {
    for (; *p; ++p) {
        if (*p == '*') {
            while (p[1] == '*') ++p;
            for (const char* t = s;; ++t) {
                if (glob_match(p + 1, t)) return true;
                if (!*t) return false;
            }
        } else if (*p == '?') {
            if (!*s++) return false;
        } else if (*p != *s++) {
            return false;
        }
    }
    return !*s;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
    fs::path pp(pattern);
    if (fs::is_regular_file(pp)) return {pp};
    fs::path dir = pp.parent_path().empty() ? fs::path(".") : pp.parent_path();
    std::string pat = pp.filename().string();
    if (!fs::is_directory(dir)) zs::fail_data("input directory not found: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && glob_match(pat.c_str(), e.path().filename().string().c_str()))
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) zs::fail_data("no inputs match '" + pattern + "'");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"descattering toolkit: synthetic data, training, inference, evaluation"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "write a synthetic stereo-video dataset");
    std::string gen_out, gen_scatter = "mixed", gen_population = "both";
    int gen_count = 100, gen_w = 128, gen_h = 128, gen_prims = 24;
    double gen_dmin = 5, gen_dmax = 100;
    uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "dataset root to create")->required();
    gen->add_option("--count", gen_count, "total sample count");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--scatter", gen_scatter, "light|medium|dense|mixed");
    gen->add_option("--population", gen_population, "both|clear|scatter");
    gen->add_option("--width", gen_w, "frame width");
    gen->add_option("--height", gen_h, "frame height");
    gen->add_option("--primitives", gen_prims, "primitives per scene");
    gen->add_option("--depth-min", gen_dmin, "nearest primitive depth, meters");
    gen->add_option("--depth-max", gen_dmax, "farthest primitive depth, meters");
    gen->callback([&] {
        zs::GenDataConfig g;
        g.out_root = gen_out;
        g.count = gen_count;
        g.seed = gen_seed;
        g.scatter = gen_scatter;
        g.population = gen_population;
        g.scene.width = gen_w;
        g.scene.height = gen_h;
        g.scene.primitive_count = gen_prims;
        g.scene.d_min = zs::real(gen_dmin);
        g.scene.d_max = zs::real(gen_dmax);
        zs::gen_dataset(g);
        std::cout << "wrote " << gen_count << " samples under " << gen_out << "\n";
    });

    auto* train = app.add_subcommand("train", "run the unpaired training loop");
    std::string tr_config, tr_data, tr_out, tr_resume;
    train->add_option("--config", tr_config, "flat key = value config file");
    train->add_option("--data", tr_data, "dataset root (overrides config)");
    train->add_option("--out", tr_out, "run directory (overrides config)");
    train->add_option("--resume", tr_resume, "checkpoint to continue from");
    train->callback([&] {
        zs::TrainConfig cfg =
            tr_config.empty() ? zs::TrainConfig{} : zs::load_train_config(tr_config);
        if (!tr_data.empty()) cfg.data_root = tr_data;
        if (!tr_out.empty()) cfg.out_root = tr_out;
        if (!tr_resume.empty()) cfg.resume = tr_resume;
        zs::run_training(cfg);
    });

    auto* inf = app.add_subcommand("infer", "descatter images with a trained checkpoint");
    std::string in_ckpt, in_glob, in_out;
    inf->add_option("--ckpt", in_ckpt, "checkpoint file")->required();
    inf->add_option("--in", in_glob, "input images (glob)")->required();
    inf->add_option("--out", in_out, "output directory")->required();
    inf->callback([&] {
        zs::TrainState st = zs::load_state(in_ckpt);
        zs::infer(st, expand_glob(in_glob), in_out, &std::cout);
    });

    auto* ev = app.add_subcommand("eval", "paired evaluation on a synthetic dataset");
    std::string ev_ckpt, ev_data, ev_report;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--data", ev_data, "dataset root with a scatter/ split")->required();
    ev->add_option("--report", ev_report, "report file (.json for JSON, else a text table)");
    ev->callback([&] {
        zs::TrainState st = zs::load_state(ev_ckpt);
        zs::MetricReport rep = zs::evaluate_dataset(st, ev_data);
        if (ev_report.empty()) {
            std::cout << rep.to_table();
        } else {
            fs::path rp(ev_report);
            if (!rp.parent_path().empty()) fs::create_directories(rp.parent_path());
            std::ofstream f(rp);
            if (!f) zs::fail_data("cannot write report: " + ev_report);
            f << (rp.extension() == ".json" ? rep.to_json() : rep.to_table());
            std::cout << "report written to " << ev_report << "\n";
        }
        std::printf("mean psnr %.4f (input %.4f, processed %.4f)  mean ssim %.4f "
                    "(input %.4f, processed %.4f)\n",
                    rep.psnr_model, rep.psnr_input, rep.psnr_proc, rep.ssim_model,
                    rep.ssim_input, rep.ssim_proc);
    });

    auto* r2g = app.add_subcommand("train-rgb2gated", "fit the gated network on clear samples");
    std::string rg_data, rg_out;
    int rg_steps = 1500, rg_width = 16;
    uint64_t rg_seed = 1;
    r2g->add_option("--data", rg_data, "dataset root (clear/ split is used)")->required();
    r2g->add_option("--out", rg_out, "checkpoint file to write")->required();
    r2g->add_option("--steps", rg_steps, "training steps");
    r2g->add_option("--width", rg_width, "base channel width");
    r2g->add_option("--seed", rg_seed, "training seed");
    r2g->callback([&] {
        zs::io::DatasetIndex idx = zs::io::index_dataset(rg_data);
        if (idx.clear_dirs.empty()) zs::fail_data("no clear samples under " + rg_data);
        std::vector<std::pair<zs::Image, zs::GatedImage>> corpus;
        for (const auto& d : idx.clear_dirs) {
            zs::SceneSample s = zs::io::load_sample(d);
            corpus.emplace_back(zs::process(s.left_cur), s.gated);
        }
        zs::R2GTrainConfig rt;
        rt.steps = rg_steps;
        rt.meta.base_width = rg_width;
        rt.seed = rg_seed;
        rt.verbose = true;
        double l1 = 0;
        zs::ad::ParamStore store = zs::train_rgb2gated(corpus, rt, &l1);
        zs::io::save_checkpoint(rg_out, store, rt.meta.to_map());
        std::cout << "train l1 " << l1 << ", saved to " << rg_out << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const zs::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return zs::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
