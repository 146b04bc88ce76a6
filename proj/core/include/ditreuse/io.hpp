#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ditreuse/metrics.hpp"
#include "ditreuse/sampler.hpp"
#include "ditreuse/selection.hpp"

namespace ditreuse {

// Latent container: 32-byte header (8-byte magic "DRLATENT", u32 version,
// u32 frames/channels/height/width, u32 reserved) followed by the row-major
// float32 payload, all little-endian.
inline constexpr char kLatentMagic[8] = {'D', 'R', 'L', 'A', 'T', 'E', 'N', 'T'};
inline constexpr std::uint32_t kLatentVersion = 1;

void save_latent(const std::filesystem::path& path, const Latent& latent);
Latent load_latent(const std::filesystem::path& path);

inline constexpr int kSchemaVersion = 1;

// Single JSON document describing an experiment. Unknown keys are rejected at
// every nesting level.
struct ExperimentConfig {
    ModelConfig model;
    SchedulerConfig scheduler;
    ReuseConfig reuse;
    std::vector<std::uint64_t> prompts = {0};
    std::string output_dir;
    bool trace = false;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

// Threshold values serialize as numbers, with infinity spelled "inf".
double threshold_from_json(const nlohmann::json& v);
nlohmann::json threshold_to_json(double threshold);
double parse_threshold(const std::string& text);

// Trace files are JSONL: one StepTrace per line tagged with its prompt id,
// grouped by prompt in file order.
void write_traces_jsonl(const std::filesystem::path& path,
                        const std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>>& traces);
std::vector<std::pair<std::uint64_t, std::vector<StepTrace>>> read_traces_jsonl(
    const std::filesystem::path& path);

nlohmann::json selection_report_to_json(const SelectionReport& report);
std::string selection_report_table(const SelectionReport& report);

struct SweepRow {
    double threshold = 0.0;
    ReuseMode mode = ReuseMode::aligned;
    std::uint64_t prompt_id = 0;
    double reuse_ratio = 0.0;
    double flop_speedup = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

inline constexpr std::string_view kSweepCsvHeader =
    "schema_version,threshold,mode,prompt_id,reuse_ratio,flop_speedup,psnr_db,ssim";

// Runs the baseline once per prompt and one accelerated run per
// (threshold, mode, prompt), in that nesting order.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const std::vector<double>& thresholds,
                                const std::vector<ReuseMode>& modes);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

}  // namespace ditreuse
