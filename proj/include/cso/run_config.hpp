#pragma once

// Versioned JSON run configuration shared by all CLI subcommands. Precedence
// is flag > config file > default; unknown keys anywhere in the file are
// rejected, and the fully resolved configuration is echoed into the output
// directory before any work happens.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cso/scene.hpp"

namespace cso::config {

enum class SpriteSource { synthetic, idx };

struct SpriteOptions {
    SpriteSource source = SpriteSource::synthetic;
    std::string data_dir;  // defaults to $CSO_DATA_DIR when unset
    sprites::ClassLabelMap labels;
};

struct RunOptions {
    uint64_t master_seed = 1;
    std::string regime = "easy";
    std::string profile = "desk";  // desk: base_width 16; paper: base_width 64
    int base_width = 0;            // 0 = derive from profile

    // cso geometry overrides applied on top of the regime preset
    nlohmann::json cso_overrides = nlohmann::json::object();

    // experiment
    int dataset_size = 100;
    double train_fraction = 0.7;
    int epochs = 100;
    int batch_size = 8;
    double learning_rate = 1e-3;
    int test_size = 100;
    int init_seeds = 5;
    int split_seeds = 5;

    // probe
    std::string reference = "shirt";
    std::string measure = "both";
    int stride = 20;
    int images_per_position = 20;

    SpriteOptions sprites;

    int resolved_base_width() const;
    scene::CsoConfig resolved_cso() const;
};

// Parses and validates a config file; throws ConfigError on unknown keys,
// bad values or version mismatch.
RunOptions load_config_file(const std::string& path);

nlohmann::json resolved_to_json(const RunOptions& opts);

// Writes resolved_config.json into `dir` (creating it), before any work.
void echo_resolved_config(const RunOptions& opts, const std::string& dir);

sprites::SpriteProvider make_provider(const SpriteOptions& opts, sprites::Split split);

}  // namespace cso::config
