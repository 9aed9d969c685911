#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "c2f/c2f.hpp"

namespace c2f::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(Errc e) {
    switch (e) {
        case Errc::io_failure: return kIo;
        case Errc::bad_magic:
        case Errc::bad_version:
        case Errc::truncated:
        case Errc::magic_dims_mismatch: return kFormat;
        case Errc::dimension_mismatch: return kDimension;
        case Errc::invalid_argument: return kInvalidArgument;
        case Errc::non_finite:
        case Errc::divergence: return kNumeric;
    }
    return kInternal;
}

void error_line(std::ostream& err, std::string_view kind, int code, std::string_view msg) {
    err << "c2f: error kind=" << kind << " code=" << code << ": " << msg << "\n";
}

std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    detail::require(static_cast<bool>(is), Errc::io_failure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text(const std::string& text, const std::string& path, std::ostream& out) {
    if (path == "-") {
        out << text;
        return;
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(os), Errc::io_failure, "cannot open " + path + " for writing");
    os << text;
    detail::require(static_cast<bool>(os), Errc::io_failure, "write failed: " + path);
}

void emit_json(const ordered_json& j, const std::string& path, std::ostream& out) {
    write_text(j.dump(2) + "\n", path, out);
}

ordered_json parse_json(const std::string& text, const std::string& what) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::invalid_argument, what + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    detail::require(!ec, Errc::io_failure, "cannot create " + dir.string());
}

HeatmapFormat parse_format(const std::string& s) {
    if (s == "pgm") return HeatmapFormat::pgm;
    if (s == "csv") return HeatmapFormat::csv;
    throw Error(Errc::invalid_argument, "unknown heatmap format '" + s + "'");
}

std::string format_ext(HeatmapFormat f) { return f == HeatmapFormat::pgm ? ".pgm" : ".csv"; }

// ---------------------------------------------------------------------------
// Config file: a flat JSON object whose keys are long option names. Values
// fill options that are absent from the command line.

std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::optional<std::string> config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (!config_path || args.size() < 2) return args;

    const auto cfg = parse_json(read_text(*config_path), "config " + *config_path);
    detail::require(cfg.is_object(), Errc::invalid_argument, "config file must hold a JSON object");
    auto given = [&](const std::string& key) {
        const std::string flag = "--" + key;
        return std::any_of(args.begin() + 1, args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    auto scalar = [](const ordered_json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };

    std::vector<std::string> merged(args.begin(), args.begin() + 2);
    for (const auto& [key, value] : cfg.items()) {
        if (key == "config" || given(key)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) merged.push_back("--" + key);
        } else if (value.is_array()) {
            merged.push_back("--" + key);
            for (const auto& v : value) merged.push_back(scalar(v));
        } else if (!value.is_null()) {
            merged.push_back("--" + key);
            merged.push_back(scalar(value));
        }
    }
    merged.insert(merged.end(), args.begin() + 2, args.end());
    return merged;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct MenuOptions {
    std::size_t window = 4;
    std::string preset = "3branch";
    std::string kernels;
    bool discard = false;
    std::string pooling = "mean";
};

void add_menu_options(CLI::App* sub, MenuOptions& m) {
    sub->add_option("--window", m.window, "Region window size w")->capture_default_str();
    sub->add_option("--menu", m.preset, "Scale menu: 3branch | 7branch | custom")->capture_default_str();
    sub->add_option("--kernels", m.kernels, "Custom menu kernels, coarsest first, e.g. 4x4,2x2,1x1");
    sub->add_flag("--discard", m.discard, "Prepend the zero-token discard pseudo-scale");
    sub->add_option("--pooling", m.pooling, "Selector descriptor pooling: mean | max")->capture_default_str();
}

std::vector<Kernel> parse_kernels(const std::string& spec) {
    std::vector<Kernel> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto x = item.find('x');
        detail::require(x != std::string::npos, Errc::invalid_argument, "kernel '" + item + "' is not of the form KHxKW");
        try {
            out.push_back({std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1))});
        } catch (const std::exception&) {
            throw Error(Errc::invalid_argument, "kernel '" + item + "' is not of the form KHxKW");
        }
    }
    return out;
}

SamplerConfig build_sampler(const MenuOptions& m) {
    SamplerConfig cfg{ScaleMenu::three_branch(m.window, m.discard), ScorePooling::mean};
    if (m.preset == "7branch")
        cfg.menu = ScaleMenu::seven_branch(m.window, m.discard);
    else if (m.preset == "custom")
        cfg.menu = ScaleMenu(m.window, parse_kernels(m.kernels), m.discard);
    else
        detail::require(m.preset == "3branch", Errc::invalid_argument, "unknown menu '" + m.preset + "'");
    if (m.pooling == "max")
        cfg.pooling = ScorePooling::max;
    else
        detail::require(m.pooling == "mean", Errc::invalid_argument, "unknown pooling '" + m.pooling + "'");
    return cfg;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
    const auto x = s.find('x');
    detail::require(x != std::string::npos, Errc::invalid_argument, "grid '" + s + "' is not of the form HxW");
    try {
        return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw Error(Errc::invalid_argument, "grid '" + s + "' is not of the form HxW");
    }
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
    SyntheticConfig cfg;
    std::string structure = "block";
    std::string out;
};

int cmd_gen(const GenOptions& o, std::ostream& out) {
    SyntheticConfig cfg = o.cfg;
    if (o.structure == "uniform")
        cfg.structure = Structure::uniform_noise;
    else if (o.structure == "block")
        cfg.structure = Structure::block_structured;
    else
        throw Error(Errc::invalid_argument, "unknown structure '" + o.structure + "'");
    const auto paths = write_fixture(gen_synthetic(cfg), o.out);
    ordered_json j;
    j["seed"] = cfg.seed;
    j["structure"] = o.structure;
    j["files"] = {paths.map.string(), paths.global.string(), paths.queries.string(), paths.keys.string()};
    emit_json(j, "-", out);
    return kOk;
}

// ---------------------------------------------------------------------------
// compress

struct CompressOptions {
    std::string map, global, params, queries, keys, attn;
    std::string strategy = "both";
    MenuOptions menu;
    double gamma = 0.85;
    std::size_t layer = 8;
    std::size_t total_layers = 32;
    double keep = 0.4;
    std::uint64_t seed = 0;
    bool stochastic = false;
    std::vector<std::size_t> layer_range{8, 24};
    std::vector<double> gamma_range{0.7, 1.0};
    std::string out = "-";
    std::string heatmap_dir;
    std::string heatmap_format = "pgm";
};

int cmd_compress(const CompressOptions& o, std::ostream& out, std::ostream& err) {
    const Strategy strategy = parse_strategy(o.strategy);
    const Tensor map = read_tensor_as(o.map, Magic::fmap);
    const std::size_t height = map.dim(0), width = map.dim(1);
    const auto sampler = build_sampler(o.menu);
    const bool use_vision = strategy == Strategy::vision || strategy == Strategy::both;
    const bool use_text = strategy == Strategy::text || strategy == Strategy::both;
    const auto heat_format = parse_format(o.heatmap_format);

    std::optional<Tensor> global;
    if (use_vision || strategy == Strategy::heuristic) {
        detail::require(!o.global.empty(), Errc::invalid_argument, "--global is required for strategy " + o.strategy);
        global = read_tensor_as(o.global, Magic::fmap);
    }

    CompressionReport report;
    report.strategy = strategy;
    report.input_tokens = height * width;

    // Tokens handed to the text sampler, with their grid footprints.
    std::vector<TokenFootprint> candidates;
    if (use_vision) {
        const std::size_t ng = global_tokens(*global).dim(0);
        const SelectorParams params = o.params.empty()
                                          ? SelectorParams::init(sampler.menu.size(), ng, o.seed)
                                          : SelectorParams::unpack(read_tensor_as(o.params, Magic::selw));
        const Compression c = compress_inference(map, *global, params, sampler);
        report.vision = summarize_vision(c, sampler.menu);
        candidates = c.tokens.footprints;
    } else if (use_text) {
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) candidates.push_back({0, y, x, 1, 1});
    }

    std::vector<double> importance_scores;
    if (use_text) {
        std::size_t layer = o.layer;
        double gamma = o.gamma;
        if (o.stochastic) {
            detail::require(o.layer_range.size() == 2 && o.gamma_range.size() == 2, Errc::invalid_argument,
                            "--layer-range and --gamma-range take two values");
            StochasticSampler draws({o.layer_range[0], o.layer_range[1], o.gamma_range[0], o.gamma_range[1], o.seed},
                                    o.total_layers);
            const auto d = draws.draw();
            layer = d.layer;
            gamma = d.gamma;
        }
        detail::require(layer < o.total_layers, Errc::invalid_argument, "--layer must be below --total-layers");
        detail::require(!candidates.empty(), Errc::invalid_argument, "no tokens reach the text sampler");

        Tensor attn;
        if (!o.attn.empty()) {
            attn = read_tensor_as(o.attn, Magic::attn);
            detail::require(attn.rank() == 3, Errc::dimension_mismatch, "--attn must be h x T x N");
        } else {
            detail::require(!o.queries.empty() && !o.keys.empty(), Errc::invalid_argument,
                            "text sampling needs --attn or both --queries and --keys");
            const Tensor q = read_tensor_as(o.queries, Magic::attn);
            const Tensor k = read_tensor_as(o.keys, Magic::attn);
            detail::require(k.rank() == 3 && k.dim(1) == height * width, Errc::dimension_mismatch,
                            "--keys must be h x (H*W) x d for the feature map");
            attn = attention_scores(q, use_vision ? pool_keys(k, width, candidates) : k);
        }
        detail::require(attn.dim(2) == candidates.size(), Errc::dimension_mismatch,
                        "attention covers " + std::to_string(attn.dim(2)) + " tokens, sampler input has " +
                            std::to_string(candidates.size()));
        importance_scores = importance(attn);
        const auto sel = cumulative_topk(importance_scores, gamma);
        if (sel.degenerate) err << "c2f: notice: all-zero importance, keeping every token\n";
        report.text = summarize_text(sel, candidates.size(), layer, o.total_layers);
    }

    std::vector<double> heuristic_scores;
    std::vector<TokenFootprint> heuristic_footprints;
    if (strategy == Strategy::heuristic) {
        heuristic_scores = heuristic_importance(map, *global, sampler.menu.window());
        report.heuristic = HeuristicSummary{o.keep, heuristic_topk(heuristic_scores, o.keep)};
        heuristic_footprints = partition_order_tokens(map, sampler.menu.window()).footprints;
    }

    finalize(report);
    emit_json(to_json(report), o.out, out);

    if (!o.heatmap_dir.empty()) {
        const fs::path dir(o.heatmap_dir);
        ensure_dir(dir);
        const auto ext = format_ext(heat_format);
        if (report.vision) export_heatmap(selection_grid(*report.vision), heat_format, dir / ("scales" + ext));
        if (report.text) {
            export_heatmap(paint_footprints(height, width, candidates, importance_scores), heat_format,
                           dir / ("importance" + ext));
            std::vector<double> kept(importance_scores.size(), 0.0);
            for (std::size_t i : report.text->kept) kept[i] = importance_scores[i];
            export_heatmap(paint_footprints(height, width, candidates, kept), heat_format, dir / ("selected" + ext));
        }
        if (report.heuristic) {
            std::vector<double> kept(heuristic_scores.size(), 0.0);
            for (std::size_t i : report.heuristic->kept) kept[i] = heuristic_scores[i];
            export_heatmap(paint_footprints(height, width, heuristic_footprints, kept), heat_format,
                           dir / ("selected" + ext));
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    std::vector<std::string> maps, globals;
    std::string task;
    std::size_t task_maps = 8;
    std::size_t steps = 500;
    double lr = 2.0;
    double alpha = 0.1;
    std::vector<double> imbalance;
    bool no_downstream = false;
    MenuOptions menu;
    std::string init, resume_log;
    std::uint64_t seed = 0;
    std::string out;
    std::string log;
};

ordered_json step_json(const StepRecord& r) {
    ordered_json j;
    j["step"] = r.step;
    j["loss"] = r.total;
    j["downstream"] = r.downstream;
    j["auxiliary"] = r.auxiliary;
    j["f"] = r.f;
    j["P"] = r.P;
    return j;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
    const auto sampler = build_sampler(o.menu);
    std::vector<TrainingSample> data;
    if (!o.task.empty()) {
        detail::require(o.task == "indifferent", Errc::invalid_argument, "unknown task '" + o.task + "'");
        detail::require(o.maps.empty(), Errc::invalid_argument, "--task and --map are exclusive");
        IndifferentTaskConfig tc;
        tc.maps = o.task_maps;
        tc.window = sampler.menu.window();
        tc.seed = o.seed;
        data = scale_indifferent_task(tc);
    } else {
        detail::require(!o.maps.empty(), Errc::invalid_argument, "train needs --map files or --task");
        detail::require(o.globals.size() == 1 || o.globals.size() == o.maps.size(), Errc::invalid_argument,
                        "give one --global per --map, or a single shared --global");
        for (std::size_t i = 0; i < o.maps.size(); ++i)
            data.push_back({read_tensor_as(o.maps[i], Magic::fmap),
                            read_tensor_as(o.globals[o.globals.size() == 1 ? 0 : i], Magic::fmap)});
    }

    TrainConfig tc;
    tc.steps = o.steps;
    tc.learning_rate = o.lr;
    tc.seed = o.seed;
    tc.objective.loss.alpha = o.alpha;
    if (!o.imbalance.empty()) tc.objective.loss.imbalance_weights = o.imbalance;
    tc.objective.downstream.enabled = !o.no_downstream;
    if (!o.init.empty()) tc.init = SelectorParams::unpack(read_tensor_as(o.init, Magic::selw));

    ordered_json prior_history = ordered_json::array();
    if (!o.resume_log.empty()) {
        const auto prior = parse_json(read_text(o.resume_log), "training log " + o.resume_log);
        try {
            prior_history = prior.at("history");
            if (!prior_history.empty()) tc.start_step = prior_history.back().at("step").get<std::size_t>() + 1;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::invalid_argument, std::string("malformed training log: ") + e.what());
        }
    }

    const TrainRun run = train_selector(data, sampler, tc);
    write_tensor(o.out, run.params.packed(), Magic::selw);

    ordered_json log;
    log["logVersion"] = 1;
    log["task"] = o.task.empty() ? "files" : o.task;
    log["alpha"] = o.alpha;
    log["learningRate"] = o.lr;
    log["seed"] = o.seed;
    log["scales"] = sampler.menu.size();
    log["startStep"] = prior_history.empty() ? tc.start_step : prior_history.front().at("step").get<std::size_t>();
    log["steps"] = prior_history.size() + run.history.size();
    ordered_json history = prior_history;
    for (const auto& r : run.history) history.push_back(step_json(r));
    log["history"] = std::move(history);
    const auto& f = run.final_diagnostics.f;
    ordered_json fin;
    fin["loss"] = run.final_loss;
    fin["f"] = f;
    fin["P"] = run.final_diagnostics.P;
    log["final"] = std::move(fin);
    log["collapsed"] = *std::max_element(f.begin(), f.end()) == 1.0;
    emit_json(log, o.log.empty() ? "-" : o.log, out);
    return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradCheckOptions {
    std::size_t instances = 5;
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
    double margin = 1e-3;
    std::optional<double> alpha;
    bool corrupt = false;
    std::string out = "-";
};

int cmd_gradcheck(const GradCheckOptions& o, std::ostream& out, std::ostream& err) {
    std::mt19937_64 rng(o.seed);
    ordered_json rows = ordered_json::array();
    bool ok = true;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < o.instances; ++i) {
        auto inst = random_gradcheck_instance(rng);
        if (o.alpha) inst.objective.loss.alpha = *o.alpha;
        auto res = check_selector_gradient(inst.batch, inst.params, inst.cfg, inst.objective, o.margin);
        ordered_json row;
        row["instance"] = i;
        row["margin"] = res.margin;
        if (res.skipped) {
            err << "c2f: notice: instance " << i << " skipped, argmax margin " << res.margin << " <= " << o.margin
                << "\n";
            row["status"] = "skipped";
            rows.push_back(std::move(row));
            continue;
        }
        if (o.corrupt) {
            res.analytic[0] += 1.0;
            res.relative_error = relative_error(res.analytic, res.numeric);
        }
        const bool pass = res.relative_error <= o.tolerance;
        ok = ok && pass;
        worst = std::max(worst, res.relative_error);
        ++checked;
        row["relativeError"] = res.relative_error;
        row["status"] = pass ? "pass" : "fail";
        rows.push_back(std::move(row));
    }
    ordered_json j;
    j["tolerance"] = o.tolerance;
    j["checked"] = checked;
    j["worstRelativeError"] = worst;
    j["passed"] = ok;
    j["instances"] = std::move(rows);
    emit_json(j, o.out, out);
    if (!ok) {
        error_line(err, "gradcheck_failed", kGradCheckFailed, "analytic gradient disagrees with finite differences");
        return kGradCheckFailed;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// evolution

struct EvolutionOptions {
    std::string attn;
    std::optional<std::size_t> layers;
    std::string grid;
    std::string out;
    std::string format = "pgm";
};

int cmd_evolution(const EvolutionOptions& o, std::ostream& out) {
    Tensor stack = read_tensor_as(o.attn, Magic::attn);
    if (stack.rank() == 3) stack = stack.reshaped({1, stack.dim(0), stack.dim(1), stack.dim(2)});
    if (o.layers)
        detail::require(*o.layers == stack.dim(0), Errc::dimension_mismatch,
                        "expected " + std::to_string(*o.layers) + " layers, file has " + std::to_string(stack.dim(0)));
    const std::size_t n = stack.dim(3);
    std::size_t gh = 1, gw = n;
    if (!o.grid.empty()) {
        std::tie(gh, gw) = parse_grid(o.grid);
        detail::require(gh * gw == n, Errc::dimension_mismatch, "grid " + o.grid + " does not cover " + std::to_string(n) + " tokens");
    }
    const auto fmt = parse_format(o.format);
    const fs::path dir(o.out);
    ensure_dir(dir);
    const auto per_layer = per_layer_importance(stack);
    ordered_json files = ordered_json::array();
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
        std::ostringstream name;
        name << "layer_" << std::setw(3) << std::setfill('0') << l << format_ext(fmt);
        export_heatmap(Tensor({gh, gw}, per_layer[l]), fmt, dir / name.str());
        files.push_back((dir / name.str()).string());
    }
    ordered_json j;
    j["layers"] = per_layer.size();
    j["grid"] = {gh, gw};
    j["files"] = std::move(files);
    emit_json(j, "-", out);
    return kOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
    std::vector<std::string> inputs;
    std::string out = "-";
    std::string heatmap_dir;
    std::string format = "pgm";
};

int cmd_report(const ReportOptions& o, std::ostream& out) {
    const auto fmt = parse_format(o.format);
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        const auto r = report_from_json(parse_json(read_text(o.inputs[i]), "report " + o.inputs[i]));
        ordered_json row;
        row["file"] = o.inputs[i];
        row["strategy"] = strategy_name(r.strategy);
        row["inputTokens"] = r.input_tokens;
        row["afterVision"] = r.vision ? ordered_json(r.vision->after_vision) : ordered_json(nullptr);
        row["textKept"] = r.text ? ordered_json(r.text->k) : ordered_json(nullptr);
        row["heuristicKept"] = r.heuristic ? ordered_json(r.heuristic->kept.size()) : ordered_json(nullptr);
        row["effectiveTokens"] = r.effective_tokens;
        row["retainedFraction"] = r.effective_tokens / static_cast<double>(r.input_tokens);
        if (r.vision) row["f"] = r.vision->f;
        rows.push_back(std::move(row));
        if (!o.heatmap_dir.empty() && r.vision) {
            ensure_dir(o.heatmap_dir);
            export_heatmap(selection_grid(*r.vision), fmt,
                           fs::path(o.heatmap_dir) / ("report_" + std::to_string(i) + "_scales" + format_ext(fmt)));
        }
    }
    ordered_json j;
    j["reports"] = std::move(rows);
    emit_json(j, o.out, out);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coarse-to-fine visual token compression toolkit", "c2f"};
    app.require_subcommand(1);
    std::string config;

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Write a seeded synthetic fixture (map, global, queries, keys)");
    gen_cmd->add_option("--config", config, "JSON file with option defaults");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--height", gen.cfg.H)->capture_default_str();
    gen_cmd->add_option("--width", gen.cfg.W)->capture_default_str();
    gen_cmd->add_option("--channels", gen.cfg.C)->capture_default_str();
    gen_cmd->add_option("--global-height", gen.cfg.Hg)->capture_default_str();
    gen_cmd->add_option("--global-width", gen.cfg.Wg)->capture_default_str();
    gen_cmd->add_option("--heads", gen.cfg.heads)->capture_default_str();
    gen_cmd->add_option("--text-tokens", gen.cfg.text_tokens)->capture_default_str();
    gen_cmd->add_option("--head-dim", gen.cfg.head_dim)->capture_default_str();
    gen_cmd->add_option("--window", gen.cfg.window)->capture_default_str();
    gen_cmd->add_option("--rectangles", gen.cfg.rectangles)->capture_default_str();
    gen_cmd->add_option("--structure", gen.structure, "block | uniform")->capture_default_str();
    gen_cmd->add_option("--seed", gen.cfg.seed)->capture_default_str();

    CompressOptions comp;
    auto* comp_cmd = app.add_subcommand("compress", "Run the samplers and write a compression report");
    comp_cmd->add_option("--config", config, "JSON file with option defaults");
    comp_cmd->add_option("--map", comp.map, "Feature map (FMAP H x W x C)")->required();
    comp_cmd->add_option("--global", comp.global, "Global features (FMAP Hg x Wg x C)");
    comp_cmd->add_option("--params", comp.params, "Selector params (SELW); seeded init when absent");
    comp_cmd->add_option("--queries", comp.queries, "Text queries (ATTN h x T x d)");
    comp_cmd->add_option("--keys", comp.keys, "Visual keys on the full grid (ATTN h x H*W x d)");
    comp_cmd->add_option("--attn", comp.attn, "Precomputed attention (ATTN h x T x N)");
    comp_cmd->add_option("--strategy", comp.strategy, "vision | text | both | heuristic")->capture_default_str();
    add_menu_options(comp_cmd, comp.menu);
    comp_cmd->add_option("--gamma", comp.gamma, "Cumulative importance threshold")->capture_default_str();
    comp_cmd->add_option("--layer", comp.layer, "Text sampler insertion layer")->capture_default_str();
    comp_cmd->add_option("--total-layers", comp.total_layers)->capture_default_str();
    comp_cmd->add_option("--keep", comp.keep, "Heuristic keep fraction")->capture_default_str();
    comp_cmd->add_option("--seed", comp.seed)->capture_default_str();
    comp_cmd->add_flag("--stochastic", comp.stochastic, "Draw layer and gamma from the training ranges");
    comp_cmd->add_option("--layer-range", comp.layer_range)->expected(2)->capture_default_str();
    comp_cmd->add_option("--gamma-range", comp.gamma_range)->expected(2)->capture_default_str();
    comp_cmd->add_option("--out", comp.out, "Report path, - for stdout")->capture_default_str();
    comp_cmd->add_option("--heatmap-dir", comp.heatmap_dir);
    comp_cmd->add_option("--heatmap-format", comp.heatmap_format, "pgm | csv")->capture_default_str();

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train the scale selector by gradient descent");
    train_cmd->add_option("--config", config, "JSON file with option defaults");
    train_cmd->add_option("--map", train.maps, "Training feature maps");
    train_cmd->add_option("--global", train.globals, "Global features, one per map or one shared");
    train_cmd->add_option("--task", train.task, "Built-in task: indifferent");
    train_cmd->add_option("--task-maps", train.task_maps)->capture_default_str();
    train_cmd->add_option("--steps", train.steps)->capture_default_str();
    train_cmd->add_option("--lr", train.lr)->capture_default_str();
    train_cmd->add_option("--alpha", train.alpha, "Balance loss weight")->capture_default_str();
    train_cmd->add_option("--imbalance", train.imbalance, "Per-scale penalty weights (sum to S)");
    train_cmd->add_flag("--no-downstream", train.no_downstream, "Train on the auxiliary loss only");
    add_menu_options(train_cmd, train.menu);
    train_cmd->add_option("--init", train.init, "Start from these params (SELW)");
    train_cmd->add_option("--resume-log", train.resume_log, "Continue the history of this training log");
    train_cmd->add_option("--seed", train.seed)->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output params (SELW)")->required();
    train_cmd->add_option("--log", train.log, "Training log JSON, - for stdout");

    GradCheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Compare the analytic selector gradient with finite differences");
    gc_cmd->add_option("--config", config, "JSON file with option defaults");
    gc_cmd->add_option("--instances", gc.instances)->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
    gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
    gc_cmd->add_option("--margin", gc.margin, "Skip instances whose argmax margin is at most this")->capture_default_str();
    gc_cmd->add_option("--alpha", gc.alpha, "Override the balance weight");
    gc_cmd->add_flag("--corrupt", gc.corrupt, "Perturb the analytic gradient (exercises the failure path)");
    gc_cmd->add_option("--out", gc.out)->capture_default_str();

    EvolutionOptions evo;
    auto* evo_cmd = app.add_subcommand("evolution", "Per-layer importance heatmaps from an attention stack");
    evo_cmd->add_option("--config", config, "JSON file with option defaults");
    evo_cmd->add_option("--attn", evo.attn, "ATTN L x h x T x N (or h x T x N)")->required();
    evo_cmd->add_option("--layers", evo.layers, "Expected layer count");
    evo_cmd->add_option("--grid", evo.grid, "Token grid HxW for the heatmaps");
    evo_cmd->add_option("--out", evo.out, "Output directory")->required();
    evo_cmd->add_option("--format", evo.format, "pgm | csv")->capture_default_str();

    ReportOptions rep;
    auto* rep_cmd = app.add_subcommand("report", "Validate reports and print a side-by-side summary");
    rep_cmd->add_option("--config", config, "JSON file with option defaults");
    rep_cmd->add_option("--in", rep.inputs, "Report JSON files")->required();
    rep_cmd->add_option("--out", rep.out)->capture_default_str();
    rep_cmd->add_option("--heatmap-dir", rep.heatmap_dir);
    rep_cmd->add_option("--format", rep.format, "pgm | csv")->capture_default_str();

    try {
        auto args = merge_config(raw_args);
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp& e) {
            out << app.help();
            return kOk;
        } catch (const CLI::CallForAllHelp& e) {
            out << app.help("", CLI::AppFormatMode::All);
            return kOk;
        } catch (const CLI::ParseError& e) {
            error_line(err, "usage", kUsage, e.what());
            return kUsage;
        }

        if (gen_cmd->parsed()) return cmd_gen(gen, out);
        if (comp_cmd->parsed()) return cmd_compress(comp, out, err);
        if (train_cmd->parsed()) return cmd_train(train, out);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc, out, err);
        if (evo_cmd->parsed()) return cmd_evolution(evo, out);
        if (rep_cmd->parsed()) return cmd_report(rep, out);
        return kUsage;
    } catch (const Error& e) {
        const int code = exit_code_for(e.code());
        error_line(err, errc_name(e.code()), code, e.what());
        return code;
    } catch (const std::exception& e) {
        error_line(err, "internal", kInternal, e.what());
        return kInternal;
    }
}

}  // namespace c2f::cli
