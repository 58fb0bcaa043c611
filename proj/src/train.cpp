#include "zeroscatter/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace zs {

// -------------------------------------------------------------------- config

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) fail_usage("learning_rate must be > 0");
    if (batch_size < 1) fail_usage("batch_size must be >= 1");
    if (max_steps < 1) fail_usage("max_steps must be >= 1");
    for (double w : {w_model, w_mm, w_cons, c2c_l1, c2c_perc, c2c_grad, c2c_adv})
        if (!(w >= 0)) fail_usage("loss weights must be >= 0");
    if (checkpoint_every < 1) fail_usage("checkpoint_every must be >= 1");
    if (log_every < 1) fail_usage("log_every must be >= 1");
    if (gen_base_width < 2 || disc_base_width < 2 || r2g_base_width < 2)
        fail_usage("model base widths must be >= 2");
    if (r2g_steps < 1) fail_usage("r2g_steps must be >= 1");
}

LossConfig TrainConfig::loss_config() const {
    LossConfig c;
    c.weights.w_model = (real)w_model;
    c.weights.w_mm = (real)w_mm;
    c.weights.w_cons = (real)w_cons;
    c.weights.c2c_l1 = (real)c2c_l1;
    c.weights.c2c_perc = (real)c2c_perc;
    c.weights.c2c_grad = (real)c2c_grad;
    c.weights.c2c_adv = (real)c2c_adv;
    c.enable_multimodal = enable_multimodal;
    c.enable_consistency = enable_consistency;
    c.enable_gc_block = enable_gc_block;
    c.detach_gc_from_model_losses = detach_gc_from_model_losses;
    return c;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    size_t pos = 0;
    double x;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        fail_usage("config key '" + key + "': cannot parse number from '" + v + "'");
    }
    if (pos != v.size()) fail_usage("config key '" + key + "': trailing junk in '" + v + "'");
    return x;
}

int64_t parse_int(const std::string& key, const std::string& v) {
    size_t pos = 0;
    int64_t x;
    try {
        x = std::stoll(v, &pos);
    } catch (const std::exception&) {
        fail_usage("config key '" + key + "': cannot parse integer from '" + v + "'");
    }
    if (pos != v.size()) fail_usage("config key '" + key + "': trailing junk in '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail_usage("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail_usage("config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            fail_usage("config line " + std::to_string(lineno) + ": empty key or value");
        if (key == "learning_rate") c.learning_rate = parse_double(key, val);
        else if (key == "batch_size") c.batch_size = (int)parse_int(key, val);
        else if (key == "max_steps") c.max_steps = parse_int(key, val);
        else if (key == "w_model") c.w_model = parse_double(key, val);
        else if (key == "w_mm") c.w_mm = parse_double(key, val);
        else if (key == "w_cons") c.w_cons = parse_double(key, val);
        else if (key == "c2c_l1") c.c2c_l1 = parse_double(key, val);
        else if (key == "c2c_perc") c.c2c_perc = parse_double(key, val);
        else if (key == "c2c_grad") c.c2c_grad = parse_double(key, val);
        else if (key == "c2c_adv") c.c2c_adv = parse_double(key, val);
        else if (key == "enable_multimodal") c.enable_multimodal = parse_bool(key, val);
        else if (key == "enable_consistency") c.enable_consistency = parse_bool(key, val);
        else if (key == "enable_gc_block") c.enable_gc_block = parse_bool(key, val);
        else if (key == "detach_gc_from_model_losses")
            c.detach_gc_from_model_losses = parse_bool(key, val);
        else if (key == "seed") c.seed = (uint64_t)parse_int(key, val);
        else if (key == "data_root") c.data_root = val;
        else if (key == "out_root") c.out_root = val;
        else if (key == "resume") c.resume = val;
        else if (key == "checkpoint_every") c.checkpoint_every = parse_int(key, val);
        else if (key == "gen_base_width") c.gen_base_width = (int)parse_int(key, val);
        else if (key == "disc_base_width") c.disc_base_width = (int)parse_int(key, val);
        else if (key == "r2g_base_width") c.r2g_base_width = (int)parse_int(key, val);
        else if (key == "r2g_steps") c.r2g_steps = (int)parse_int(key, val);
        else if (key == "log_every") c.log_every = (int)parse_int(key, val);
        else fail_usage("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

TrainConfig load_train_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) fail_data("config file not found: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_train_config(ss.str());
}

// --------------------------------------------------------------------- state

TrainState init_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st;
    st.gen_meta.base_width = cfg.gen_base_width;
    st.disc_meta.base_width = cfg.disc_base_width;
    st.r2g_meta.base_width = cfg.r2g_base_width;
    st.loss_cfg = cfg.loss_config();
    st.learning_rate = cfg.learning_rate;
    st.seed = cfg.seed;
    init_generator(st.params, st.gen_meta, seed_stream(cfg.seed, "gen-init"));
    init_discriminators(st.params, st.disc_meta, seed_stream(cfg.seed, "disc-init"));
    st.perc = make_perceptual_extractor(st.loss_cfg.perceptual);
    return st;
}

namespace {

std::map<std::string, std::string> state_meta(const TrainState& st) {
    std::map<std::string, std::string> m = st.gen_meta.to_map();
    for (const auto& [k, v] : st.r2g_meta.to_map()) m[k] = v;
    m["disc_base_width"] = std::to_string(st.disc_meta.base_width);
    m["disc_layers"] = std::to_string(st.disc_meta.layers);
    m["step"] = std::to_string(st.step);
    m["gen_t"] = std::to_string(st.gen_t);
    m["disc_t"] = std::to_string(st.disc_t);
    m["seed"] = std::to_string(st.seed);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", st.learning_rate);
    m["learning_rate"] = buf;
    const LossWeights& w = st.loss_cfg.weights;
    auto putw = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        m[k] = buf;
    };
    putw("w_model", w.w_model);
    putw("w_mm", w.w_mm);
    putw("w_cons", w.w_cons);
    putw("c2c_l1", w.c2c_l1);
    putw("c2c_perc", w.c2c_perc);
    putw("c2c_grad", w.c2c_grad);
    putw("c2c_adv", w.c2c_adv);
    putw("stereo_alpha", st.loss_cfg.stereo_alpha);
    m["enable_multimodal"] = st.loss_cfg.enable_multimodal ? "1" : "0";
    m["enable_consistency"] = st.loss_cfg.enable_consistency ? "1" : "0";
    m["enable_gc_block"] = st.loss_cfg.enable_gc_block ? "1" : "0";
    m["detach_gc_from_model_losses"] = st.loss_cfg.detach_gc_from_model_losses ? "1" : "0";
    m["perc_base_width"] = std::to_string(st.loss_cfg.perceptual.base_width);
    m["perc_stages"] = std::to_string(st.loss_cfg.perceptual.stages);
    m["perc_seed"] = std::to_string(st.loss_cfg.perceptual.seed);
    m["proc_tile_rows"] = std::to_string(st.proc.tile_rows);
    m["proc_tile_cols"] = std::to_string(st.proc.tile_cols);
    putw("proc_clip_limit", st.proc.clip_limit);
    putw("proc_gamma", st.proc.gamma);
    return m;
}

std::string meta_get(const std::map<std::string, std::string>& m, const std::string& k,
                     const std::string& fallback) {
    auto it = m.find(k);
    return it == m.end() ? fallback : it->second;
}

}  // namespace

void save_state(const TrainState& st, const fs::path& path) {
    io::save_checkpoint(path, st.params, state_meta(st));
}

TrainState load_state(const fs::path& path) {
    std::map<std::string, std::string> m;
    TrainState st;
    st.params = io::load_checkpoint(path, m);
    st.gen_meta = GenMeta::from_map(m);
    st.r2g_meta = R2GMeta::from_map(m);
    st.disc_meta.base_width = std::stoi(meta_get(m, "disc_base_width", "16"));
    st.disc_meta.layers = std::stoi(meta_get(m, "disc_layers", "5"));
    st.step = std::stoll(meta_get(m, "step", "0"));
    st.gen_t = std::stoll(meta_get(m, "gen_t", "0"));
    st.disc_t = std::stoll(meta_get(m, "disc_t", "0"));
    st.seed = std::stoull(meta_get(m, "seed", "1"));
    st.learning_rate = std::stod(meta_get(m, "learning_rate", "5e-5"));
    LossConfig& c = st.loss_cfg;
    c.weights.w_model = (real)std::stod(meta_get(m, "w_model", "1"));
    c.weights.w_mm = (real)std::stod(meta_get(m, "w_mm", "1"));
    c.weights.w_cons = (real)std::stod(meta_get(m, "w_cons", "1"));
    c.weights.c2c_l1 = (real)std::stod(meta_get(m, "c2c_l1", "1"));
    c.weights.c2c_perc = (real)std::stod(meta_get(m, "c2c_perc", "1"));
    c.weights.c2c_grad = (real)std::stod(meta_get(m, "c2c_grad", "1"));
    c.weights.c2c_adv = (real)std::stod(meta_get(m, "c2c_adv", "0.1"));
    c.stereo_alpha = (real)std::stod(meta_get(m, "stereo_alpha", "10"));
    c.enable_multimodal = meta_get(m, "enable_multimodal", "1") == "1";
    c.enable_consistency = meta_get(m, "enable_consistency", "1") == "1";
    c.enable_gc_block = meta_get(m, "enable_gc_block", "1") == "1";
    c.detach_gc_from_model_losses = meta_get(m, "detach_gc_from_model_losses", "1") == "1";
    c.perceptual.base_width = std::stoi(meta_get(m, "perc_base_width", "8"));
    c.perceptual.stages = std::stoi(meta_get(m, "perc_stages", "3"));
    c.perceptual.seed = std::stoull(meta_get(m, "perc_seed", "7313"));
    st.proc.tile_rows = std::stoi(meta_get(m, "proc_tile_rows", "8"));
    st.proc.tile_cols = std::stoi(meta_get(m, "proc_tile_cols", "8"));
    st.proc.clip_limit = (real)std::stod(meta_get(m, "proc_clip_limit", "2"));
    st.proc.gamma = (real)std::stod(meta_get(m, "proc_gamma", "2.2"));
    st.perc = make_perceptual_extractor(c.perceptual);
    return st;
}

void prepare_rgb2gated(TrainState& st, const TrainConfig& cfg,
                       const std::vector<SceneSample>& clear_samples) {
    if (st.params.has("r2g.head.w")) return;
    for (const char* root : {cfg.out_root.c_str(), cfg.data_root.c_str()}) {
        if (!*root) continue;
        fs::path p = fs::path(root) / "rgb2gated.zsc";
        if (!fs::exists(p)) continue;
        std::map<std::string, std::string> m;
        ad::ParamStore r2g = io::load_checkpoint(p, m);
        if (!r2g.has("r2g.head.w")) fail_data("no gated-network parameters in " + p.string());
        st.r2g_meta = R2GMeta::from_map(m);
        for (auto& [name, e] : r2g.entries)
            if (name.rfind("r2g.", 0) == 0) st.params.entries[name] = std::move(e);
        std::cout << "[train] loaded gated network from " << p << "\n";
        return;
    }
    if (clear_samples.empty()) fail_data("cannot train the gated network: no clear samples");
    std::cout << "[train] training gated network on " << clear_samples.size()
              << " clear samples\n";
    std::vector<std::pair<Image, GatedImage>> corpus;
    corpus.reserve(clear_samples.size());
    for (const SceneSample& s : clear_samples)
        corpus.emplace_back(process(s.left_cur, st.proc), s.gated);
    R2GTrainConfig rt;
    rt.steps = cfg.r2g_steps;
    rt.meta = st.r2g_meta;
    rt.seed = seed_stream(cfg.seed, "r2g-train");
    rt.verbose = true;
    double final_l1 = 0;
    ad::ParamStore r2g = train_rgb2gated(corpus, rt, &final_l1);
    std::cout << "[train] gated network train l1 " << final_l1 << "\n";
    if (!cfg.out_root.empty()) {
        fs::path p = fs::path(cfg.out_root) / "rgb2gated.zsc";
        io::save_checkpoint(p, r2g, st.r2g_meta.to_map());
        std::cout << "[train] saved gated network to " << p << "\n";
    }
    for (auto& [name, e] : r2g.entries)
        if (name.rfind("r2g.", 0) == 0) st.params.entries[name] = std::move(e);
}

// ------------------------------------------------------------------ stepping

LossReport train_step(TrainState& st, const std::vector<const SceneSample*>& clear_batch,
                      const std::vector<const SceneSample*>& scatter_batch) {
    if (st.loss_cfg.enable_multimodal && !scatter_batch.empty() && !st.params.has("r2g.head.w"))
        fail_usage("gated-network parameters missing from the state; prepare them first");
    std::string at = " at step " + std::to_string(st.step);
    GenBatch batch = prepare_batch(clear_batch, scatter_batch, st.proc, st.loss_cfg,
                                   seed_stream(st.seed, "batch", (uint64_t)st.step));
    ad::AdamConfig acfg;
    acfg.lr = st.learning_rate;
    LossReport rep;
    rep.step = st.step;

    auto [c2c_fake, s2s_fake] = make_disc_fakes(st.params, st.gen_meta, batch, st.loss_cfg);
    {
        ad::Graph g;
        ad::Bound db = ad::bind_params(g, st.params, {"disc."});
        DiscLossNodes dn = disc_loss_graph(g, db, st.disc_meta, batch, c2c_fake, s2s_fake);
        g.check_finite(dn.c2c, "disc_c2c loss" + at);
        g.check_finite(dn.s2s, "disc_s2s loss" + at);
        g.backward(dn.total);
        ad::Adam opt(acfg, "disc.");
        opt.set_step_count(st.disc_t);
        opt.step(st.params, g, db);
        st.disc_t = opt.step_count();
        rep.disc_c2c = g.scalar(dn.c2c);
        rep.disc_s2s = g.scalar(dn.s2s);
    }
    {
        ad::Graph g;
        ad::Bound gb = ad::bind_params(g, st.params, {"gt.", "gc."});
        ad::Bound db = ad::bind_frozen(g, st.params, {"disc."});
        ad::Bound rb = ad::bind_frozen(g, st.params, {"r2g."});
        ad::Bound pb = ad::bind_frozen(g, st.perc, {"perc."});
        TotalLossNodes n = total_loss_graph(g, gb, db, rb, pb, st.gen_meta, st.disc_meta,
                                            st.r2g_meta, batch, st.loss_cfg);
        const std::pair<const char*, int> parts[] = {
            {"c2c", n.c2c},           {"s2s", n.s2s},       {"multimodal", n.multimodal},
            {"temporal", n.temporal}, {"stereo", n.stereo}, {"total", n.total},
        };
        for (const auto& [name, id] : parts)
            if (id >= 0) g.check_finite(id, std::string(name) + " loss" + at);
        g.backward(n.total);
        ad::Adam opt(acfg, "");
        opt.set_step_count(st.gen_t);
        opt.step(st.params, g, gb);
        st.gen_t = opt.step_count();
        LossReport gen_rep = report_from_nodes(g, n, st.loss_cfg.weights);
        rep.c2c = gen_rep.c2c;
        rep.s2s = gen_rep.s2s;
        rep.multimodal = gen_rep.multimodal;
        rep.temporal = gen_rep.temporal;
        rep.stereo = gen_rep.stereo;
        rep.total = gen_rep.total;
        rep.weights = gen_rep.weights;
    }
    ++st.step;
    return rep;
}

namespace {

std::vector<SceneSample> load_dirs(const std::vector<fs::path>& dirs) {
    std::vector<SceneSample> out;
    out.reserve(dirs.size());
    for (const fs::path& d : dirs) out.push_back(io::load_sample(d));
    return out;
}

}  // namespace

TrainState run_training(const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.data_root.empty()) fail_usage("data_root is required for training");
    if (cfg.out_root.empty()) fail_usage("out_root is required for training");
    fs::create_directories(cfg.out_root);

    io::DatasetIndex idx = io::index_dataset(cfg.data_root);
    if (idx.clear_dirs.empty() || idx.scatter_dirs.empty())
        fail_data("training needs both clear/ and scatter/ samples under " + cfg.data_root);
    std::vector<SceneSample> clear = load_dirs(idx.clear_dirs);
    std::vector<SceneSample> scatter = load_dirs(idx.scatter_dirs);
    std::cout << "[train] " << clear.size() << " clear / " << scatter.size()
              << " scatter samples\n";

    TrainState st;
    if (!cfg.resume.empty()) {
        st = load_state(cfg.resume);
        std::cout << "[train] resumed from " << cfg.resume << " at step " << st.step << "\n";
        if (!st.params.has("r2g.head.w"))
            fail_data("resume checkpoint lacks the gated network: " + cfg.resume);
    } else {
        st = init_state(cfg);
        prepare_rgb2gated(st, cfg, clear);
    }

    uint64_t r2g_frozen = st.params.checksum("r2g.");
    std::ofstream log(fs::path(cfg.out_root) / "train_log.jsonl", std::ios::app);
    if (!log) fail_data("cannot open training log under " + cfg.out_root);

    while (st.step < cfg.max_steps) {
        Rng order(seed_stream(st.seed, "order", (uint64_t)st.step));
        std::vector<const SceneSample*> cb, sb;
        for (int i = 0; i < cfg.batch_size; ++i)
            cb.push_back(&clear[(size_t)order.uniform_int(0, (int64_t)clear.size() - 1)]);
        for (int i = 0; i < cfg.batch_size; ++i)
            sb.push_back(&scatter[(size_t)order.uniform_int(0, (int64_t)scatter.size() - 1)]);
        LossReport rep = train_step(st, cb, sb);
        log << rep.to_json() << "\n";
        if (st.step % cfg.log_every == 0 || st.step == cfg.max_steps) {
            std::cout << "[train] step " << st.step << " total " << rep.total << " c2c "
                      << rep.c2c << " s2s " << rep.s2s << " mm " << rep.multimodal << " temp "
                      << rep.temporal << " stereo " << rep.stereo << "\n";
            log.flush();
        }
        if (st.step % cfg.checkpoint_every == 0 || st.step == cfg.max_steps)
            save_state(st, fs::path(cfg.out_root) / ("ckpt_" + std::to_string(st.step) + ".zsc"));
    }

    if (st.params.checksum("r2g.") != r2g_frozen)
        throw Error(ErrorKind::Internal,
                    "gated-network parameters changed during training; they must stay frozen");
    return st;
}

// ---------------------------------------------------------------- evaluation

MetricReport evaluate(const TrainState& st, const std::vector<SceneSample>& scatter_samples,
                      const std::vector<std::string>& ids) {
    if (scatter_samples.empty())
        fail_data("evaluation needs paired scatter samples, got an empty set");
    check_data(ids.size() == scatter_samples.size(), "evaluation ids/samples size mismatch");
    MetricReport rep;
    for (size_t i = 0; i < scatter_samples.size(); ++i) {
        const SceneSample& s = scatter_samples[i];
        Image target = process(s.clear_reference, st.proc);
        Image out = full_forward(st.params, st.gen_meta, s.left_cur, st.loss_cfg.enable_gc_block);
        Image proc_in = process(s.left_cur, st.proc);
        EvalRow row;
        row.id = ids[i];
        row.psnr_model = psnr(out, target);
        row.ssim_model = ssim(out, target);
        row.psnr_input = psnr(s.left_cur, target);
        row.ssim_input = ssim(s.left_cur, target);
        row.psnr_proc = psnr(proc_in, target);
        row.ssim_proc = ssim(proc_in, target);
        rep.rows.push_back(std::move(row));
    }
    std::sort(rep.rows.begin(), rep.rows.end(),
              [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
    double n = (double)rep.rows.size();
    for (const EvalRow& r : rep.rows) {
        rep.psnr_model += r.psnr_model / n;
        rep.ssim_model += r.ssim_model / n;
        rep.psnr_input += r.psnr_input / n;
        rep.ssim_input += r.ssim_input / n;
        rep.psnr_proc += r.psnr_proc / n;
        rep.ssim_proc += r.ssim_proc / n;
    }
    return rep;
}

MetricReport evaluate_dataset(const TrainState& st, const fs::path& data_root) {
    io::DatasetIndex idx = io::index_dataset(data_root);
    std::vector<SceneSample> samples = load_dirs(idx.scatter_dirs);
    std::vector<std::string> ids;
    ids.reserve(idx.scatter_dirs.size());
    for (const fs::path& d : idx.scatter_dirs) ids.push_back(d.filename().string());
    return evaluate(st, samples, ids);
}

std::string MetricReport::to_table() const {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %11s %11s %11s %11s %11s %11s\n", "id",
                  "psnr_model", "ssim_model", "psnr_input", "ssim_input", "psnr_proc",
                  "ssim_proc");
    out << buf;
    auto line = [&](const std::string& id, double pm, double sm, double pi, double si, double pp,
                    double sp) {
        std::snprintf(buf, sizeof buf, "%-10s %11.4f %11.4f %11.4f %11.4f %11.4f %11.4f\n",
                      id.c_str(), pm, sm, pi, si, pp, sp);
        out << buf;
    };
    for (const EvalRow& r : rows)
        line(r.id, r.psnr_model, r.ssim_model, r.psnr_input, r.ssim_input, r.psnr_proc,
             r.ssim_proc);
    line("mean", psnr_model, ssim_model, psnr_input, ssim_input, psnr_proc, ssim_proc);
    return out.str();
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const EvalRow& r : rows) {
        nlohmann::ordered_json row;
        row["id"] = r.id;
        row["psnr_model"] = r.psnr_model;
        row["ssim_model"] = r.ssim_model;
        row["psnr_input"] = r.psnr_input;
        row["ssim_input"] = r.ssim_input;
        row["psnr_proc"] = r.psnr_proc;
        row["ssim_proc"] = r.ssim_proc;
        j["rows"].push_back(std::move(row));
    }
    j["mean"] = {{"psnr_model", psnr_model}, {"ssim_model", ssim_model},
                 {"psnr_input", psnr_input}, {"ssim_input", ssim_input},
                 {"psnr_proc", psnr_proc},   {"ssim_proc", ssim_proc}};
    return j.dump(2);
}

// ----------------------------------------------------------------- inference

namespace {

// reflect-101 fold into [0, n)
int fold(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

Tensor reflect_pad(const Tensor& t, int oh, int ow) {
    Tensor out(t.n, t.c, oh, ow);
    for (int n = 0; n < t.n; ++n)
        for (int c = 0; c < t.c; ++c)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x)
                    out.at(n, c, y, x) = t.at(n, c, fold(y, t.h), fold(x, t.w));
    return out;
}

}  // namespace

std::vector<fs::path> infer(const TrainState& st, const std::vector<fs::path>& inputs,
                            const fs::path& out_dir, std::ostream* log) {
    if (inputs.empty()) fail_usage("no input images to descatter");
    fs::create_directories(out_dir);
    std::vector<fs::path> outputs;
    for (const fs::path& p : inputs) {
        auto t0 = std::chrono::steady_clock::now();
        Tensor t = io::read_png(p);
        if (t.c == 1) {
            Tensor rgb(1, 3, t.h, t.w);
            for (int c = 0; c < 3; ++c)
                std::copy(t.v.begin(), t.v.end(), rgb.v.begin() + (int64_t)c * t.plane());
            t = std::move(rgb);
        }
        int h = t.h, w = t.w;
        int ph = std::max(16, (h + 15) / 16 * 16);
        int pw = std::max(16, (w + 15) / 16 * 16);
        bool padded = ph != h || pw != w;
        Image img(ph, pw, DomainTag::RawScatter);
        img.data = padded ? reflect_pad(t, ph, pw) : std::move(t);
        Image out = full_forward(st.params, st.gen_meta, img, st.loss_cfg.enable_gc_block);
        Tensor result(1, 3, h, w);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) result.at(0, c, y, x) = out.data.at(0, c, y, x);
        fs::path dst = out_dir / (p.stem().string() + "_descattered.png");
        io::write_png16(dst, result);
        outputs.push_back(dst);
        if (log) {
            double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                  t0)
                            .count();
            *log << "[infer] " << p.filename().string() << " " << h << "x" << w;
            if (padded) *log << " (reflect-padded to " << ph << "x" << pw << ")";
            *log << " " << ms << " ms -> " << dst.string() << "\n";
        }
    }
    return outputs;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return 1;
        case ErrorKind::Data: return 2;
        case ErrorKind::Numeric: return 3;
        default: return 4;
    }
}

}  // namespace zs
