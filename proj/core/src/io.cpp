#include "ditreuse/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ditreuse {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& context) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (std::string_view a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key \"" + key + "\" in " + context);
    }
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void save_latent(const std::filesystem::path& path, const Latent& latent) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
    out.write(kLatentMagic, sizeof(kLatentMagic));
    write_u32(out, kLatentVersion);
    write_u32(out, static_cast<std::uint32_t>(latent.frames));
    write_u32(out, static_cast<std::uint32_t>(latent.channels));
    write_u32(out, static_cast<std::uint32_t>(latent.height));
    write_u32(out, static_cast<std::uint32_t>(latent.width));
    write_u32(out, 0);  // reserved
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(latent.data.data()),
              static_cast<std::streamsize>(latent.data.size() * sizeof(float)));
    if (!out) throw ArgumentError("write failed for " + path.string());
}

Latent load_latent(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kLatentMagic, sizeof(magic)) != 0)
        throw ArgumentError(path.string() + ": not a latent file (bad magic)");
    const std::uint32_t version = read_u32(in);
    if (version != kLatentVersion)
        throw ArgumentError(path.string() + ": unsupported latent version " +
                            std::to_string(version));
    const int f = static_cast<int>(read_u32(in));
    const int c = static_cast<int>(read_u32(in));
    const int h = static_cast<int>(read_u32(in));
    const int w = static_cast<int>(read_u32(in));
    read_u32(in);  // reserved
    if (!in || f < 1 || c < 1 || h < 1 || w < 1)
        throw ArgumentError(path.string() + ": corrupt latent header");
    Latent latent(f, c, h, w);
    in.read(reinterpret_cast<char*>(latent.data.data()),
            static_cast<std::streamsize>(latent.data.size() * sizeof(float)));
    if (!in) throw ArgumentError(path.string() + ": truncated latent payload");
    return latent;
}

double threshold_from_json(const json& v) {
    if (v.is_string()) {
        return parse_threshold(v.get<std::string>());
    }
    if (v.is_number()) return v.get<double>();
    throw ConfigError("threshold must be a number or \"inf\"");
}

json threshold_to_json(double threshold) {
    if (std::isinf(threshold)) return "inf";
    return threshold;
}

double parse_threshold(const std::string& text) {
    if (text == "inf" || text == "+inf" || text == "infinity")
        return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse threshold \"" + text + "\"");
    }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    check_keys(j, {"schema_version", "model", "scheduler", "reuse", "prompts", "output_dir",
                   "trace"},
               "experiment config");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
        throw ConfigError("unsupported config schema_version");

    ExperimentConfig cfg;
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"n_blocks", "hidden_dim", "n_heads", "mlp_ratio", "patch", "latent_shape",
                       "cond_tokens", "cond_dim", "seed"},
                   "model config");
        if (m.contains("n_blocks")) cfg.model.n_blocks = m.at("n_blocks").get<int>();
        if (m.contains("hidden_dim")) cfg.model.hidden_dim = m.at("hidden_dim").get<int>();
        if (m.contains("n_heads")) cfg.model.n_heads = m.at("n_heads").get<int>();
        if (m.contains("mlp_ratio")) cfg.model.mlp_ratio = m.at("mlp_ratio").get<double>();
        if (m.contains("patch")) cfg.model.patch = m.at("patch").get<std::array<int, 3>>();
        if (m.contains("latent_shape"))
            cfg.model.latent_shape = m.at("latent_shape").get<std::array<int, 4>>();
        if (m.contains("cond_tokens")) cfg.model.cond_tokens = m.at("cond_tokens").get<int>();
        if (m.contains("cond_dim")) cfg.model.cond_dim = m.at("cond_dim").get<int>();
        if (m.contains("seed")) cfg.model.seed = m.at("seed").get<std::uint64_t>();
    }
    if (j.contains("scheduler")) {
        const json& s = j.at("scheduler");
        check_keys(s, {"n_steps", "guidance_scale", "seed"}, "scheduler config");
        if (s.contains("n_steps")) cfg.scheduler.n_steps = s.at("n_steps").get<int>();
        if (s.contains("guidance_scale"))
            cfg.scheduler.guidance_scale = s.at("guidance_scale").get<double>();
        if (s.contains("seed")) cfg.scheduler.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("reuse")) {
        const json& r = j.at("reuse");
        check_keys(r, {"threshold", "warmup_fraction", "proxy_tap", "mode", "norm_epsilon"},
                   "reuse config");
        if (r.contains("threshold")) cfg.reuse.threshold = threshold_from_json(r.at("threshold"));
        if (r.contains("warmup_fraction"))
            cfg.reuse.warmup_fraction = r.at("warmup_fraction").get<double>();
        if (r.contains("proxy_tap"))
            cfg.reuse.proxy_tap = tap_from_name(r.at("proxy_tap").get<std::string>());
        if (r.contains("mode"))
            cfg.reuse.mode = reuse_mode_from_name(r.at("mode").get<std::string>());
        if (r.contains("norm_epsilon")) cfg.reuse.norm_epsilon = r.at("norm_epsilon").get<double>();
    }
    if (j.contains("prompts")) cfg.prompts = j.at("prompts").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("trace")) cfg.trace = j.at("trace").get<bool>();

    cfg.model.validate();
    cfg.scheduler.validate();
    cfg.reuse.validate();
    if (cfg.prompts.empty()) throw ConfigError("prompt list must not be empty");
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

namespace {

json step_trace_to_json(std::uint64_t prompt_id, const StepTrace& t) {
    json candidates = json::object();
    json norms = json::object();
    for (int k = 0; k < kNumTaps; ++k) {
        const std::string name(tap_name(static_cast<TapId>(k)));
        candidates[name] = t.candidate_metrics[k] ? json(*t.candidate_metrics[k]) : json(nullptr);
        norms[name] = t.proxy_l1[k];
    }
    return json{{"schema_version", kSchemaVersion},
                {"prompt_id", prompt_id},
                {"step", t.step},
                {"oracle", t.oracle ? json(*t.oracle) : json(nullptr)},
                {"candidates", candidates},
                {"residual_l1", t.residual_l1},
                {"proxy_l1", norms}};
}

StepTrace step_trace_from_json(const json& j) {
    check_keys(j, {"schema_version", "prompt_id", "step", "oracle", "candidates", "residual_l1",
                   "proxy_l1"},
               "trace line");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw ArgumentError("unsupported trace schema_version");
    StepTrace t;
    t.step = j.at("step").get<int>();
    if (!j.at("oracle").is_null()) t.oracle = j.at("oracle").get<double>();
    const json& candidates = j.at("candidates");
    const json& norms = j.at("proxy_l1");
    for (int k = 0; k < kNumTaps; ++k) {
        const std::string name(tap_name(static_cast<TapId>(k)));
        const json& c = candidates.at(name);
        if (!c.is_null()) t.candidate_metrics[k] = c.get<double>();
        t.proxy_l1[k] = norms.at(name).get<double>();
    }
    t.residual_l1 = j.at("residual_l1").get<double>();
    return t;
}

}  // namespace

void write_traces_jsonl(const std::filesystem::path& path,
                        const std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>>& traces) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
    for (const auto& [prompt_id, steps] : traces)
        for (const StepTrace& t : steps) out << step_trace_to_json(prompt_id, t).dump() << "\n";
    if (!out) throw ArgumentError("write failed for " + path.string());
}

std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>> read_traces_jsonl(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path.string());
    std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>> result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            const std::uint64_t prompt_id = j.at("prompt_id").get<std::uint64_t>();
            StepTrace t = step_trace_from_json(j);
            if (result.empty() || result.back().first != prompt_id)
                result.emplace_back(prompt_id, std::vector<StepTrace>{});
            result.back().second.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw ArgumentError(path.string() + " line " + std::to_string(line_no) + ": " +
                                e.what());
        } catch (const Error& e) {
            throw ArgumentError(path.string() + " line " + std::to_string(line_no) + ": " +
                                e.what());
        }
    }
    if (result.empty()) throw ArgumentError(path.string() + ": empty trace file");
    return result;
}

json selection_report_to_json(const SelectionReport& report) {
    json taps = json::array();
    for (int k = 0; k < kNumTaps; ++k) {
        const TapStats& s = report.per_tap[k];
        taps.push_back(json{{"tap", std::string(tap_name(static_cast<TapId>(k)))},
                            {"mean_rho", std::isnan(s.mean_rho) ? json(nullptr) : json(s.mean_rho)},
                            {"std_rho", std::isnan(s.std_rho) ? json(nullptr) : json(s.std_rho)},
                            {"prompts_used", s.prompts_used}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"selected_tap", std::string(tap_name(report.selected))},
                {"prompt_count", report.prompt_count},
                {"exclude_warmup", report.exclude_warmup},
                {"degenerate_pairs", report.degenerate_pairs},
                {"taps", taps}};
}

std::string selection_report_table(const SelectionReport& report) {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-16s %9s %9s %8s\n", "proxy", "mean rho", "std", "prompts");
    out << line;
    out << std::string(45, '-') << "\n";
    for (int k = 0; k < kNumTaps; ++k) {
        const TapStats& s = report.per_tap[k];
        const bool selected = report.selected == static_cast<TapId>(k) && s.prompts_used > 0;
        if (s.prompts_used == 0) {
            std::snprintf(line, sizeof(line), "%-16s %9s %9s %8d\n",
                          std::string(tap_name(static_cast<TapId>(k))).c_str(), "n/a", "n/a", 0);
        } else {
            std::snprintf(line, sizeof(line), "%-16s %9.3f %9.3f %8d%s\n",
                          std::string(tap_name(static_cast<TapId>(k))).c_str(), s.mean_rho,
                          s.std_rho, s.prompts_used, selected ? "  <- selected" : "");
        }
        out << line;
    }
    out << "exclude_warmup: " << (report.exclude_warmup ? "true" : "false")
        << "  degenerate pairs: " << report.degenerate_pairs << "\n";
    return out.str();
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const std::vector<double>& thresholds,
                                const std::vector<ReuseMode>& modes) {
    if (thresholds.empty()) throw ArgumentError("run_sweep: empty threshold list");
    if (modes.empty()) throw ArgumentError("run_sweep: empty mode list");
    const DiTWeights weights = init_weights(config.model);

    std::vector<GenerationResult> baselines;
    baselines.reserve(config.prompts.size());
    for (std::uint64_t prompt : config.prompts)
        baselines.push_back(generate(prompt, weights, config.scheduler, std::nullopt));

    std::vector<SweepRow> rows;
    rows.reserve(thresholds.size() * modes.size() * config.prompts.size());
    for (double threshold : thresholds)
        for (ReuseMode mode : modes)
            for (std::size_t p = 0; p < config.prompts.size(); ++p) {
                ReuseConfig rc = config.reuse;
                rc.threshold = threshold;
                rc.mode = mode;
                const GenerationResult fast =
                    generate(config.prompts[p], weights, config.scheduler, rc);
                const RunStats stats = run_stats(fast, baselines[p], config.model);
                rows.push_back(SweepRow{threshold, mode, config.prompts[p], stats.reuse_ratio,
                                        stats.flop_speedup, stats.psnr_db, stats.ssim});
            }
    return rows;
}

namespace {

std::string csv_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return json(v).dump();  // shortest round-trip representation
}

}  // namespace

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
    out << kSweepCsvHeader << "\n";
    for (const SweepRow& r : rows) {
        out << kSchemaVersion << "," << csv_number(r.threshold) << "," << reuse_mode_name(r.mode)
            << "," << r.prompt_id << "," << csv_number(r.reuse_ratio) << ","
            << csv_number(r.flop_speedup) << "," << csv_number(r.psnr_db) << ","
            << csv_number(r.ssim) << "\n";
    }
    if (!out) throw ArgumentError("write failed for " + path.string());
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError(path.string() + ": empty CSV");
    if (line != kSweepCsvHeader)
        throw ArgumentError(path.string() + ": unexpected CSV header");
    std::vector<SweepRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 8)
            throw ArgumentError(path.string() + " line " + std::to_string(line_no) +
                                ": expected 8 fields");
        try {
            if (std::stoi(fields[0]) != kSchemaVersion)
                throw ArgumentError(path.string() + " line " + std::to_string(line_no) +
                                    ": unsupported schema_version");
            SweepRow r;
            r.threshold = parse_threshold(fields[1]);
            r.mode = reuse_mode_from_name(fields[2]);
            r.prompt_id = std::stoull(fields[3]);
            r.reuse_ratio = std::stod(fields[4]);
            r.flop_speedup = std::stod(fields[5]);
            r.psnr_db = std::stod(fields[6]);
            r.ssim = std::stod(fields[7]);
            rows.push_back(r);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw ArgumentError(path.string() + " line " + std::to_string(line_no) + ": " +
                                e.what());
        }
    }
    return rows;
}

}  // namespace ditreuse
