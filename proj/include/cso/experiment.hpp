#pragma once

// Training and evaluation protocol: D scenes split 70/30, 100-epoch ADAM
// training with cross-entropy, evaluation on a freshly generated 100-image
// test set, and the init-seed x split-seed grid with Table-1 style summaries.
//
// Seed streams (all derived, so a run is a pure function of config + seeds):
//   dataset        hash_seed(data_seed, scene_index)
//   train/val split  hash_seed(split_seed, fnv1a("split"))
//   batch shuffle    hash_seed(init_seed, split_seed, fnv1a("shuffle"), epoch)
//   test set         hash_seed(fnv1a(canonical config json), fnv1a("test"))

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cso/adam.hpp"
#include "cso/metrics.hpp"
#include "cso/scene.hpp"
#include "cso/unet.hpp"

namespace cso::experiment {

struct ExperimentConfig {
    scene::CsoConfig regime;
    int dataset_size = 100;  // D, train + validation
    double train_fraction = 0.7;
    int epochs = 100;
    int batch_size = 8;
    double learning_rate = 1e-3;
    int base_width = 16;
    int test_size = 100;
    uint64_t data_seed = 1;

    unet::UNetArch arch() const {
        unet::UNetArch a;
        a.base_width = base_width;
        a.out_channels = regime.num_mask_classes();
        return a;
    }
    int train_size() const {
        return static_cast<int>(std::lround(train_fraction * dataset_size));
    }
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
// FNV-1a of the canonical config json, hex; names run directories and seeds
// the test-set stream.
std::string config_digest(const ExperimentConfig& config);
uint64_t test_set_seed(const ExperimentConfig& config);

struct MetricsReport {
    std::vector<ClassCounts> per_class;              // index = class id - 1
    std::vector<std::array<double, 2>> per_image;    // shirt (precision, recall)
    double shirt_precision = 0.0;                    // pooled over all pixels
    double shirt_recall = 0.0;
    double shirt_precision_image_mean = 0.0;         // per-image averaged variant
    double shirt_recall_image_mean = 0.0;
    bool converged = false;  // shirt precision > 0.5 and recall > 0.5
};

struct RunRecord {
    std::string digest;
    uint64_t init_seed = 0;
    uint64_t split_seed = 0;
    std::vector<double> train_loss;  // per epoch, mean pixel cross-entropy
    std::vector<double> val_loss;    // empty entries = no validation split
    std::string checkpoint_path;
    MetricsReport test;
    bool diverged = false;
};

nlohmann::json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

MetricsReport evaluate_on(const unet::UNetModel<float>& model,
                          const std::vector<scene::Image>& images,
                          const std::vector<scene::Mask>& masks, int batch_size = 8);

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

// Trains one model. When out_dir is non-empty, persists record.json,
// loss.csv, metrics.csv, the final checkpoint and a few test overlays there.
RunRecord train_run(const ExperimentConfig& config, uint64_t init_seed,
                    uint64_t split_seed, const sprites::SpriteProvider& trainval_sprites,
                    const sprites::SpriteProvider& test_sprites,
                    const std::string& out_dir = "", const EpochCallback& on_epoch = {});

struct GridSummary {
    int converged = 0;
    int total = 0;
    // mean +/- sample std over converged runs only (pooled shirt metrics)
    double precision_mean = 0.0, precision_std = 0.0;
    double recall_mean = 0.0, recall_std = 0.0;
};

GridSummary summarize(const std::vector<RunRecord>& records);

std::vector<RunRecord> run_grid(const ExperimentConfig& config,
                                const std::vector<uint64_t>& init_seeds,
                                const std::vector<uint64_t>& split_seeds,
                                const sprites::SpriteProvider& trainval_sprites,
                                const sprites::SpriteProvider& test_sprites,
                                const std::string& out_dir = "",
                                const EpochCallback& on_epoch = {});

// Table-1 style text row plus summary.csv writer.
std::string format_summary_row(const ExperimentConfig& config, const GridSummary& s);
void write_summary_csv(const std::string& path, const ExperimentConfig& config,
                       const GridSummary& s);

}  // namespace cso::experiment
