// Command-line harness: generation, trace capture, proxy selection, threshold
// sweeps and latent comparison. Exit codes: 0 success, 2 bad configuration or
// arguments, 3 numeric failure during generation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ditreuse/io.hpp"
#include "ditreuse/metrics.hpp"
#include "ditreuse/sampler.hpp"
#include "ditreuse/selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ditreuse;

namespace {

constexpr const char* kOutDirEnv = "DITREUSE_OUT_DIR";

fs::path resolve_out_dir(const std::string& cli_out, const std::string& config_out) {
    if (!cli_out.empty()) return cli_out;
    if (!config_out.empty()) return config_out;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return ".";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
    out << text;
}

json decisions_to_json(const GenerationResult& r) {
    json log = json::array();
    for (std::size_t i = 0; i < r.decisions.size(); ++i) {
        const StepDecision& d = r.decisions[i];
        log.push_back(json{{"step", i + 1},
                           {"reused_cond", d.reused_cond},
                           {"reused_uncond", d.reused_uncond},
                           {"metric_cond", d.metric_cond},
                           {"metric_uncond", d.metric_uncond}});
    }
    return log;
}

int cmd_generate(const std::string& config_path, const std::string& threshold_override,
                 const std::string& mode_override, const std::string& tap_override,
                 const std::string& out_override) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (!threshold_override.empty()) cfg.reuse.threshold = parse_threshold(threshold_override);
    if (!mode_override.empty()) cfg.reuse.mode = reuse_mode_from_name(mode_override);
    if (!tap_override.empty()) cfg.reuse.proxy_tap = tap_from_name(tap_override);
    cfg.reuse.validate();

    const fs::path out_dir = resolve_out_dir(out_override, cfg.output_dir);
    fs::create_directories(out_dir);

    const DiTWeights weights = init_weights(cfg.model);
    json runs = json::array();
    for (std::uint64_t prompt : cfg.prompts) {
        const GenerationResult r = generate(prompt, weights, cfg.scheduler, cfg.reuse);
        const std::string latent_name = "latent_prompt" + std::to_string(prompt) + ".bin";
        save_latent(out_dir / latent_name, r.final_latent);
        runs.push_back(json{{"prompt_id", prompt},
                            {"latent_file", latent_name},
                            {"reuse_ratio", r.reuse_ratio()},
                            {"reused_cond_steps", r.reused_cond_steps()},
                            {"reused_uncond_steps", r.reused_uncond_steps()},
                            {"flops_total", r.flops.total()},
                            {"decisions", decisions_to_json(r)}});
    }
    json stats{{"schema_version", kSchemaVersion},
               {"threshold", threshold_to_json(cfg.reuse.threshold)},
               {"mode", std::string(reuse_mode_name(cfg.reuse.mode))},
               {"tap", std::string(tap_name(cfg.reuse.proxy_tap))},
               {"n_steps", cfg.scheduler.n_steps},
               {"runs", runs}};
    write_text(out_dir / "generate_stats.json", stats.dump(2) + "\n");

    // The trace flag additionally records full-compute traces of the same
    // prompts, so proxy selection can run against the very same experiment.
    if (cfg.trace) {
        std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>> traces;
        for (std::uint64_t prompt : cfg.prompts)
            traces.emplace_back(prompt, record_trace(prompt, weights, cfg.scheduler));
        write_traces_jsonl(out_dir / "traces.jsonl", traces);
    }
    std::cout << "wrote " << cfg.prompts.size() << " latent(s) and generate_stats.json to "
              << out_dir.string() << "\n";
    return 0;
}

int cmd_trace(const std::string& config_path, int n_prompts, const std::string& out_override) {
    if (n_prompts < 1) throw ArgumentError("--prompts must be at least 1");
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    const fs::path out_dir = resolve_out_dir("", cfg.output_dir);
    fs::create_directories(out_dir);
    const fs::path out_path = out_override.empty() ? out_dir / "traces.jsonl" : fs::path(out_override);

    const DiTWeights weights = init_weights(cfg.model);
    std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>> traces;
    traces.reserve(n_prompts);
    for (int p = 0; p < n_prompts; ++p)
        traces.emplace_back(p, record_trace(static_cast<std::uint64_t>(p), weights, cfg.scheduler));
    write_traces_jsonl(out_path, traces);
    std::cout << "wrote " << n_prompts << " prompt trace(s) to " << out_path.string() << "\n";
    return 0;
}

int cmd_select_proxy(const std::string& traces_path, bool exclude_warmup,
                     const std::string& out_override) {
    const auto tagged = read_traces_jsonl(traces_path);
    std::vector<std::vector<StepTrace>> traces;
    traces.reserve(tagged.size());
    for (const auto& [prompt, steps] : tagged) traces.push_back(steps);

    const SelectionReport report = select_proxy(traces, exclude_warmup);
    std::cout << selection_report_table(report);
    std::cout << "selected: " << tap_name(report.selected) << "\n";
    if (!out_override.empty())
        write_text(out_override, selection_report_to_json(report).dump(2) + "\n");
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& threshold_args,
              const std::vector<std::string>& mode_args, const std::string& out_override) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    std::vector<double> thresholds;
    if (threshold_args.empty()) {
        thresholds = {0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
    } else {
        for (const std::string& t : threshold_args) thresholds.push_back(parse_threshold(t));
    }
    std::vector<ReuseMode> modes;
    if (mode_args.empty()) {
        modes = {ReuseMode::aligned};
    } else {
        for (const std::string& m : mode_args) modes.push_back(reuse_mode_from_name(m));
    }

    const fs::path out_dir = resolve_out_dir("", cfg.output_dir);
    fs::create_directories(out_dir);
    const fs::path out_path = out_override.empty() ? out_dir / "sweep.csv" : fs::path(out_override);

    const std::vector<SweepRow> rows = run_sweep(cfg, thresholds, modes);
    write_sweep_csv(out_path, rows);
    std::cout << "wrote " << rows.size() << " sweep row(s) to " << out_path.string() << "\n";
    return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& config_path) {
    const Latent a = load_latent(path_a);
    const Latent b = load_latent(path_b);
    if (!a.same_shape(b)) throw DimensionError("compare: latent shapes differ");

    ModelConfig model;
    if (!config_path.empty()) model = ExperimentConfig::load(config_path).model;
    model.latent_shape = {a.frames, a.channels, a.height, a.width};

    const FrameStack fa = decode(a, model);
    const FrameStack fb = decode(b, model);
    const json out{{"psnr_db", psnr(fa, fb)}, {"ssim", ssim(fa, fb)}};
    std::cout << out.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free step-reuse harness for a toy video diffusion transformer"};
    app.require_subcommand(1);

    std::string config_path, out_path, threshold_arg, mode_arg, tap_arg;
    std::string traces_path, latent_a, latent_b;
    std::vector<std::string> threshold_list, mode_list;
    int n_prompts = 16;
    bool exclude_warmup = true;

    CLI::App* gen = app.add_subcommand("generate", "generate latents with the reuse controller");
    gen->add_option("--config", config_path, "experiment config JSON")->required();
    gen->add_option("--threshold", threshold_arg, "override reuse threshold (number or inf)");
    gen->add_option("--mode", mode_arg, "override reuse mode (aligned|independent)");
    gen->add_option("--tap", tap_arg, "override proxy tap");
    gen->add_option("--out", out_path, "output directory");

    CLI::App* trace = app.add_subcommand("trace", "record full-compute step traces");
    trace->add_option("--config", config_path, "experiment config JSON")->required();
    trace->add_option("--prompts", n_prompts, "number of prompts to trace")
        ->default_val(16);
    trace->add_option("--out", out_path, "output JSONL file");

    CLI::App* sel = app.add_subcommand("select-proxy", "rank proxy candidates from traces");
    sel->add_option("--traces", traces_path, "trace JSONL file")->required();
    sel->add_flag("--exclude-warmup,!--no-exclude-warmup", exclude_warmup,
                  "drop the first 20% of steps from the correlation")
        ->default_val(true);
    sel->add_option("--out", out_path, "selection report JSON file");

    CLI::App* sweep = app.add_subcommand("sweep", "quality/reuse sweep over thresholds");
    sweep->add_option("--config", config_path, "experiment config JSON")->required();
    sweep->add_option("--thresholds", threshold_list, "threshold grid")->delimiter(',');
    sweep->add_option("--modes", mode_list, "reuse modes to sweep")->delimiter(',');
    sweep->add_option("--out", out_path, "output CSV file");

    CLI::App* cmp = app.add_subcommand("compare", "PSNR/SSIM between two latent files");
    cmp->add_option("latent_a", latent_a, "reference latent")->required();
    cmp->add_option("latent_b", latent_b, "candidate latent")->required();
    cmp->add_option("--config", config_path, "experiment config JSON (decoder seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_generate(config_path, threshold_arg, mode_arg, tap_arg, out_path);
        if (*trace) return cmd_trace(config_path, n_prompts, out_path);
        if (*sel) return cmd_select_proxy(traces_path, exclude_warmup, out_path);
        if (*sweep) return cmd_sweep(config_path, threshold_list, mode_list, out_path);
        if (*cmp) return cmd_compare(latent_a, latent_b, config_path);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
