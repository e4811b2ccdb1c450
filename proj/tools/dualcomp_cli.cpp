// dualcomp command-line front end.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <dualcomp/dualcomp.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dualcomp;

namespace {

struct Common {
    std::string config_path;
    std::string run_dir = "run";
};

RunConfig load_config(const Common& c) {
    if (c.config_path.empty()) return {};
    std::ifstream in(c.config_path);
    if (!in) throw Error("cannot open config '" + c.config_path + "'");
    return parse_config(in, c.config_path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Config snapshot plus the command's own arguments, so the run can be replayed.
void snapshot(const fs::path& dir, const RunConfig& cfg, const json& args) {
    io::write_file_atomic(dir / "config.txt", format_config(cfg));
    io::write_file_atomic(dir / "invocation.json", dump(args));
}

Lexicon load_lexicon(const RunConfig& cfg) {
    if (cfg.lexicon_path.empty()) return default_lexicon();
    std::ifstream in(cfg.lexicon_path);
    if (!in) throw Error("cannot open lexicon '" + cfg.lexicon_path + "'");
    return parse_lexicon(in);
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
    if (count < 1) throw ConfigError("--seeds must be >= 1");
    std::vector<std::uint64_t> out(static_cast<std::size_t>(count));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = first + k;
    return out;
}

void add_scene_options(CLI::App* cmd, scene::SceneSpec& s, std::string& task) {
    cmd->add_option("--height", s.height, "grid rows")->capture_default_str();
    cmd->add_option("--width", s.width, "grid columns")->capture_default_str();
    cmd->add_option("--dim", s.dim, "feature dimension")->capture_default_str();
    cmd->add_option("--objects", s.n_objects, "object blobs per scene")->capture_default_str();
    cmd->add_option("--roads", s.n_roads, "roads per scene")->capture_default_str();
    cmd->add_option("--noise", s.noise_scale, "background perturbation norm")->capture_default_str();
    cmd->add_option("--task", task, "semantic | balanced | geometric")->capture_default_str();
}

json scene_json(const scene::SceneSpec& s) {
    return {{"height", s.height},         {"width", s.width},       {"dim", s.dim},
            {"objects", s.n_objects},     {"roads", s.n_roads},     {"noise", s.noise_scale},
            {"task", scene::to_string(s.task_kind)}};
}

json truth_json(const scene::GroundTruth& t) {
    auto cells = [&](const std::vector<char>& mask) {
        json out = json::array();
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) {
                const Cell c = t.shape.cell(i);
                out.push_back({c.row, c.col});
            }
        return out;
    };
    json roads = json::array();
    for (const auto& m : t.road_masks) roads.push_back(cells(m));
    return {{"height", t.shape.height}, {"width", t.shape.width}, {"task", scene::to_string(t.task_kind)},
            {"object_cells", cells(t.object_mask)}, {"roads", roads}};
}

void write_rows(const fs::path& path, const std::vector<bench::RunRow>& rows) {
    std::ostringstream csv;
    bench::write_csv(csv, rows);
    io::write_file_atomic(path, csv.str());
}

// ---------------------------------------------------------------------------

int cmd_gen_scene(const Common& common, scene::SceneSpec spec, const std::string& task) {
    const auto cfg = load_config(common);
    spec.task_kind = scene::parse_task_kind(task);
    const auto sc = scene::generate_scene(spec);
    const fs::path dir = common.run_dir;
    const std::string stem = "scene_" + std::to_string(spec.seed);
    io::write_grid(sc.grid, dir / (stem + ".fgrd"));
    io::write_file_atomic(dir / (stem + ".truth.json"), dump(truth_json(sc.truth)));
    json args = scene_json(spec);
    args["command"] = "gen-scene";
    args["seed"] = spec.seed;
    snapshot(dir, cfg, args);
    std::cout << (dir / (stem + ".fgrd")).string() << "\n";
    return 0;
}

struct CompressArgs {
    std::vector<std::string> grids;
    std::optional<double> lambda;
    std::optional<double> rho;
    std::string instruction;
    std::string model;
    std::string out_dir;
    bool unscaled = false;
};

int cmd_compress(const Common& common, const CompressArgs& a) {
    auto cfg = load_config(common);
    const bool explicit_policy = a.lambda.has_value() || a.rho.has_value();
    if (explicit_policy == !a.instruction.empty())
        throw ConfigError("give exactly one of --instruction or --lambda/--rho");
    if (explicit_policy && !(a.lambda && a.rho)) throw ConfigError("--lambda and --rho go together");
    if (a.unscaled) cfg.pipeline.scale_vectors = false;

    std::optional<RouterModel> router;
    InstructionRepr instr;
    if (!explicit_policy) {
        const std::string path = a.model.empty() ? cfg.model_path : a.model;
        if (path.empty()) throw ConfigError("--instruction needs a router model (--model or paths.model)");
        router = io::read_model(path);
        instr = scene::embed_instruction(a.instruction, router->dims().input);
    }

    const fs::path out = a.out_dir.empty() ? fs::path(common.run_dir) : fs::path(a.out_dir);
    const unsigned workers = default_workers();
    PipelineConfig inner = cfg.pipeline;
    inner.workers = a.grids.size() > 1 ? 1 : workers;
    std::vector<json> reports(a.grids.size());
    parallel_for(a.grids.size(), workers, [&](std::size_t k) {
        const fs::path src = a.grids[k];
        try {
            const auto grid = io::read_grid(src);
            const auto res = router ? compress(grid, *router, instr, inner)
                                    : compress(grid, TaskPolicy{*a.lambda, *a.rho}, inner);
            const std::string stem = src.stem().string();
            io::write_file_atomic(out / (stem + ".dcsq"), io::encode_sequence(res.sequence, inner.scale_vectors));
            json r{{"grid", src.string()},
                   {"sequence", (out / (stem + ".dcsq")).string()},
                   {"router_invoked", res.router_invoked},
                   {"lambda", res.policy.lambda},
                   {"rho", res.policy.rho},
                   {"n_max", res.budget.n_max},
                   {"n_sem", res.budget.n_sem},
                   {"n_geo", res.budget.n_geo},
                   {"tokens_kept", res.tokens_kept()},
                   {"tokens_emitted", res.tokens_emitted()},
                   {"compression_ratio", res.compression_ratio()}};
            io::write_file_atomic(out / (stem + ".json"), dump(r));
            reports[k] = std::move(r);
        } catch (const Error& e) {
            throw Error(src.string() + ": " + e.what());
        }
    });
    json args{{"command", "compress"}, {"grids", a.grids}};
    if (explicit_policy) {
        args["lambda"] = *a.lambda;
        args["rho"] = *a.rho;
    } else {
        args["instruction"] = a.instruction;
    }
    snapshot(out, cfg, args);
    for (const auto& r : reports) std::cout << r.dump() << "\n";
    return 0;
}

int cmd_route(const Common& common, const std::string& instruction, std::string model, std::int64_t n_max) {
    const auto cfg = load_config(common);
    if (model.empty()) model = cfg.model_path;
    if (model.empty()) throw ConfigError("route needs a router model (--model or paths.model)");
    const auto m = io::read_model(model);
    const auto p = router_forward(m, scene::embed_instruction(instruction, m.dims().input));
    const auto b = allocate_budget(p, n_max);
    std::cout << dump({{"lambda", p.lambda},
                       {"rho", p.rho},
                       {"rule_lambda", rule_label(instruction, load_lexicon(cfg))},
                       {"n_max", b.n_max},
                       {"n_keep", b.n_keep},
                       {"n_sem", b.n_sem},
                       {"n_geo", b.n_geo}});
    return 0;
}

struct TrainArgs {
    std::string labels;
    std::size_t corpus = 2000;
    std::uint64_t corpus_seed = 1;
    TrainOptions opt;
};

int cmd_train_router(const Common& common, const TrainArgs& a) {
    const auto cfg = load_config(common);
    std::vector<LabelRecord> labels;
    if (!a.labels.empty()) {
        std::ifstream in(a.labels);
        if (!in) throw Error("cannot open labels '" + a.labels + "'");
        labels = io::parse_labels(in, cfg.alpha, cfg.pipeline.rho_min, a.labels);
    } else {
        labels = scene::label_corpus(scene::instruction_corpus(a.corpus, a.corpus_seed), load_lexicon(cfg), {}, cfg.alpha,
                                     cfg.pipeline.rho_min);
    }
    const auto samples = scene::training_samples(labels, cfg.router_dims.input);
    TrainLog log;
    const auto model = train_router(init_router(cfg.router_dims, cfg.pipeline.rho_min, a.opt.seed), samples, a.opt, &log);
    const fs::path dir = common.run_dir;
    io::write_model(model, dir / "router.dcrt");
    io::write_file_atomic(dir / "labels.jsonl", io::format_labels(labels));
    io::write_file_atomic(dir / "train_log.json",
                          dump({{"initial_loss", log.initial_loss}, {"final_loss", log.final_loss}, {"step_loss", log.step_loss}}));
    json args{{"command", "train-router"}, {"steps", a.opt.steps},        {"learning_rate", a.opt.learning_rate},
              {"batch", a.opt.batch_size}, {"seed", a.opt.seed},         {"labels", a.labels},
              {"corpus", a.corpus},        {"corpus_seed", a.corpus_seed}};
    snapshot(dir, cfg, args);
    std::printf("loss %.6g -> %.6g over %d steps; model %s\n", log.initial_loss, log.final_loss, a.opt.steps,
                (dir / "router.dcrt").string().c_str());
    return 0;
}

int cmd_pilot(const Common& common, scene::SceneSpec spec, std::uint64_t first_seed, int seeds, std::vector<double> rhos) {
    const auto cfg = load_config(common);
    std::sort(rhos.begin(), rhos.end(), std::greater<>());
    bench::SweepConfig sw;
    sw.base = spec;
    sw.seeds = seed_range(first_seed, seeds);
    sw.rhos = rhos;
    sw.pipeline = cfg.pipeline;
    sw.workers = default_workers();
    const auto rows = bench::duality_sweep(sw);
    const fs::path dir = common.run_dir;
    write_rows(dir / "pilot.csv", rows);
    json args = scene_json(spec);
    args.erase("task");
    args.update({{"command", "pilot"}, {"first_seed", first_seed}, {"seeds", seeds}, {"rhos", rhos}});
    snapshot(dir, cfg, args);
    std::cout << (dir / "pilot.csv").string() << ": " << rows.size() << " rows\n";
    return 0;
}

int cmd_ablate(const Common& common, scene::SceneSpec spec, const std::string& task, std::uint64_t first_seed, int seeds,
               double rho, double lambda) {
    const auto cfg = load_config(common);
    spec.task_kind = scene::parse_task_kind(task);
    bench::AblationConfig ab;
    ab.base = spec;
    ab.seeds = seed_range(first_seed, seeds);
    ab.rho = rho;
    ab.lambda = lambda;
    ab.pipeline = cfg.pipeline;
    ab.workers = default_workers();
    const auto rows = bench::ablation_matrix(ab);
    const fs::path dir = common.run_dir;
    write_rows(dir / "ablation.csv", rows);
    json args = scene_json(spec);
    args.update({{"command", "ablate"}, {"first_seed", first_seed}, {"seeds", seeds}, {"rho", rho}, {"lambda", lambda}});
    snapshot(dir, cfg, args);
    std::printf("%-14s %6s %10s %10s %10s %8s\n", "variant", "runs", "obj_pres", "path_rec", "connected", "tokens");
    for (const auto& [name, s] : bench::summarize_by_variant(rows))
        std::printf("%-14s %6zu %10.4f %10.4f %10.4f %8.2f\n", name.c_str(), s.runs, s.mean_object_preservation,
                    s.mean_path_recall, s.mean_connected, s.mean_tokens);
    return 0;
}

// Efficiency table over compress reports.
int cmd_report(const std::vector<std::string>& reports, bool as_json) {
    if (reports.empty()) throw ConfigError("report needs at least one compress JSON report");
    json rows = json::array();
    std::int64_t total_max = 0, total_kept = 0, total_emitted = 0;
    for (const auto& path : reports) {
        json r;
        try {
            r = json::parse(io::read_file(path));
            total_max += r.at("n_max").get<std::int64_t>();
            total_kept += r.at("tokens_kept").get<std::int64_t>();
            total_emitted += r.at("tokens_emitted").get<std::int64_t>();
        } catch (const json::exception& e) {
            throw FormatError(path + ": " + e.what());
        }
        rows.push_back(r);
    }
    const double grids = static_cast<double>(rows.size());
    const json summary{{"grids", rows.size()},
                       {"compression_ratio", static_cast<double>(total_max) / static_cast<double>(total_kept)},
                       {"tokens_per_grid", static_cast<double>(total_kept) / grids},
                       {"token_volume", total_kept},
                       {"tokens_emitted", total_emitted}};
    if (as_json) {
        std::cout << dump({{"summary", summary}, {"grids", rows}});
        return 0;
    }
    std::printf("%-32s %8s %8s %8s %10s\n", "grid", "n_max", "kept", "emitted", "ratio");
    for (const auto& r : rows)
        std::printf("%-32s %8lld %8lld %8lld %9.2fx\n", fs::path(r.at("grid").get<std::string>()).filename().string().c_str(),
                    static_cast<long long>(r.at("n_max").get<std::int64_t>()),
                    static_cast<long long>(r.at("tokens_kept").get<std::int64_t>()),
                    static_cast<long long>(r.at("tokens_emitted").get<std::int64_t>()),
                    r.at("compression_ratio").get<double>());
    std::printf("\ncompression ratio %.2fx  tokens per grid %.2f  token volume %lld\n",
                summary["compression_ratio"].get<double>(), summary["tokens_per_grid"].get<double>(),
                static_cast<long long>(total_kept));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dualcomp: task-aware visual token compression"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_path, "key = value run configuration");
    app.add_option("--run-dir", common.run_dir, "output directory")->capture_default_str();

    scene::SceneSpec gen_spec;
    std::string gen_task = "balanced";
    auto* gen = app.add_subcommand("gen-scene", "write a synthetic scene grid and its ground truth");
    add_scene_options(gen, gen_spec, gen_task);
    gen->add_option("--seed", gen_spec.seed, "scene seed")->capture_default_str();

    CompressArgs ca;
    double lam = 0.0, rho = 0.0;
    auto* comp = app.add_subcommand("compress", "compress grid files to token sequences");
    comp->add_option("grids", ca.grids, "grid files")->required()->check(CLI::ExistingFile);
    auto* lam_opt = comp->add_option("--lambda", lam, "explicit geometric preference");
    auto* rho_opt = comp->add_option("--rho", rho, "explicit retention ratio");
    comp->add_option("--instruction", ca.instruction, "route this instruction through the router");
    comp->add_option("--model", ca.model, "router model file");
    comp->add_option("--out", ca.out_dir, "output directory (default: --run-dir)");
    comp->add_flag("--unscaled", ca.unscaled, "store unweighted token vectors");

    std::string route_text, route_model;
    std::int64_t route_nmax = 576;
    auto* route = app.add_subcommand("route", "predict (lambda, rho) and the token budget for an instruction");
    route->add_option("instruction", route_text)->required();
    route->add_option("--model", route_model, "router model file");
    route->add_option("--n-max", route_nmax, "tokens before compression")->capture_default_str();

    TrainArgs ta;
    auto* train = app.add_subcommand("train-router", "train the router on rule-labelled instructions");
    train->add_option("--labels", ta.labels, "JSONL label file (default: synthetic corpus)");
    train->add_option("--corpus", ta.corpus, "synthetic corpus size")->capture_default_str();
    train->add_option("--corpus-seed", ta.corpus_seed)->capture_default_str();
    train->add_option("--steps", ta.opt.steps)->capture_default_str();
    train->add_option("--lr", ta.opt.learning_rate)->capture_default_str();
    train->add_option("--batch", ta.opt.batch_size)->capture_default_str();
    train->add_option("--seed", ta.opt.seed)->capture_default_str();

    scene::SceneSpec pilot_spec;
    pilot_spec.height = pilot_spec.width = 24;
    std::string pilot_task = "balanced";
    std::uint64_t pilot_first = 0;
    int pilot_seeds = 10;
    std::vector<double> pilot_rhos{1.0 / 24.0, 1.0 / 48.0, 1.0 / 96.0};
    auto* pilot = app.add_subcommand("pilot", "duality sweep over seeded scenes and task kinds");
    add_scene_options(pilot, pilot_spec, pilot_task);
    pilot->add_option("--first-seed", pilot_first)->capture_default_str();
    pilot->add_option("--seeds", pilot_seeds, "number of scenes")->capture_default_str();
    pilot->add_option("--rho", pilot_rhos, "retention ratios")->delimiter(',');

    scene::SceneSpec ab_spec;
    std::string ab_task = "geometric";
    std::uint64_t ab_first = 0;
    int ab_seeds = 10;
    double ab_rho = 0.05, ab_lambda = 0.9;
    auto* ablate = app.add_subcommand("ablate", "run every pipeline variant on seeded scenes");
    add_scene_options(ablate, ab_spec, ab_task);
    ablate->add_option("--first-seed", ab_first)->capture_default_str();
    ablate->add_option("--seeds", ab_seeds, "number of scenes")->capture_default_str();
    ablate->add_option("--rho", ab_rho)->capture_default_str();
    ablate->add_option("--lambda", ab_lambda)->capture_default_str();

    std::vector<std::string> report_files;
    bool report_json = false;
    auto* report = app.add_subcommand("report", "efficiency table over compress reports");
    report->add_option("reports", report_files, "JSON reports written by compress")->required()->check(CLI::ExistingFile);
    report->add_flag("--json", report_json);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return cmd_gen_scene(common, gen_spec, gen_task);
        if (*comp) {
            if (*lam_opt) ca.lambda = lam;
            if (*rho_opt) ca.rho = rho;
            return cmd_compress(common, ca);
        }
        if (*route) return cmd_route(common, route_text, route_model, route_nmax);
        if (*train) return cmd_train_router(common, ta);
        if (*pilot) {
            pilot_spec.task_kind = scene::parse_task_kind(pilot_task);
            return cmd_pilot(common, pilot_spec, pilot_first, pilot_seeds, pilot_rhos);
        }
        if (*ablate) return cmd_ablate(common, ab_spec, ab_task, ab_first, ab_seeds, ab_rho, ab_lambda);
        if (*report) return cmd_report(report_files, report_json);
    } catch (const std::exception& e) {
        std::cerr << "dualcomp " << app.get_subcommands().front()->get_name() << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
