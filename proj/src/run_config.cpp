#include "cso/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace cso::config {

using nlohmann::json;

int RunOptions::resolved_base_width() const {
    if (base_width > 0) return base_width;
    if (profile == "desk") return 16;
    if (profile == "paper") return 64;
    throw ConfigError("unknown profile '" + profile + "' (desk|paper)");
}

scene::CsoConfig RunOptions::resolved_cso() const {
    scene::CsoConfig c = scene::CsoConfig::make(scene::regime_from_name(regime));
    if (!cso_overrides.empty()) {
        json j = scene::config_to_json(c);
        for (auto it = cso_overrides.begin(); it != cso_overrides.end(); ++it)
            j[it.key()] = it.value();
        c = scene::config_from_json(j);
    }
    return c;
}

namespace {

void require_keys(const json& j, const std::set<std::string>& known,
                  const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

RunOptions load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }

    require_keys(j, {"version", "master_seed", "regime", "profile", "cso", "unet",
                     "experiment", "probe", "sprites"},
                 "config root");
    if (j.contains("version") && j.at("version").get<int>() != 1)
        throw ConfigError("unsupported config version");

    RunOptions o;
    if (j.contains("master_seed")) o.master_seed = j.at("master_seed").get<uint64_t>();
    if (j.contains("regime")) o.regime = j.at("regime").get<std::string>();
    if (j.contains("profile")) o.profile = j.at("profile").get<std::string>();

    if (j.contains("cso")) {
        require_keys(j.at("cso"),
                     {"regime", "image_size", "triangle_leg_x", "triangle_leg_y",
                      "structure_translation_bound", "per_object_jitter_bound",
                      "noise_count", "noise_class", "noise_bottom_left_only",
                      "noise_region_size", "target_classes"},
                     "cso section");
        o.cso_overrides = j.at("cso");
        if (o.cso_overrides.contains("regime"))
            o.regime = o.cso_overrides.at("regime").get<std::string>();
    }
    if (j.contains("unet")) {
        require_keys(j.at("unet"), {"base_width"}, "unet section");
        if (j.at("unet").contains("base_width"))
            o.base_width = j.at("unet").at("base_width").get<int>();
    }
    if (j.contains("experiment")) {
        const json& e = j.at("experiment");
        require_keys(e,
                     {"d", "train_fraction", "epochs", "batch_size", "learning_rate",
                      "test_size", "init_seeds", "split_seeds"},
                     "experiment section");
        if (e.contains("d")) o.dataset_size = e.at("d").get<int>();
        if (e.contains("train_fraction")) o.train_fraction = e.at("train_fraction").get<double>();
        if (e.contains("epochs")) o.epochs = e.at("epochs").get<int>();
        if (e.contains("batch_size")) o.batch_size = e.at("batch_size").get<int>();
        if (e.contains("learning_rate")) o.learning_rate = e.at("learning_rate").get<double>();
        if (e.contains("test_size")) o.test_size = e.at("test_size").get<int>();
        if (e.contains("init_seeds")) o.init_seeds = e.at("init_seeds").get<int>();
        if (e.contains("split_seeds")) o.split_seeds = e.at("split_seeds").get<int>();
    }
    if (j.contains("probe")) {
        const json& p = j.at("probe");
        require_keys(p, {"reference", "measure", "stride", "images_per_position"},
                     "probe section");
        if (p.contains("reference")) o.reference = p.at("reference").get<std::string>();
        if (p.contains("measure")) o.measure = p.at("measure").get<std::string>();
        if (p.contains("stride")) o.stride = p.at("stride").get<int>();
        if (p.contains("images_per_position"))
            o.images_per_position = p.at("images_per_position").get<int>();
    }
    if (j.contains("sprites")) {
        const json& s = j.at("sprites");
        require_keys(s, {"source", "data_dir", "labels"}, "sprites section");
        if (s.contains("source")) {
            const std::string src = s.at("source").get<std::string>();
            if (src == "synthetic") o.sprites.source = SpriteSource::synthetic;
            else if (src == "idx") o.sprites.source = SpriteSource::idx;
            else throw ConfigError("sprites.source must be synthetic|idx");
        }
        if (s.contains("data_dir")) o.sprites.data_dir = s.at("data_dir").get<std::string>();
        if (s.contains("labels")) {
            require_keys(s.at("labels"), {"shirt", "pants", "bag", "shoe"},
                         "sprites.labels section");
            for (int c = 0; c < sprites::kNumClasses; ++c) {
                const char* name = sprites::class_name(static_cast<sprites::SemClass>(c));
                if (s.at("labels").contains(name))
                    o.sprites.labels.label[static_cast<size_t>(c)] =
                        s.at("labels").at(name).get<int>();
            }
        }
    }
    return o;
}

json resolved_to_json(const RunOptions& o) {
    json j;
    j["version"] = 1;
    j["master_seed"] = o.master_seed;
    j["regime"] = o.regime;
    j["profile"] = o.profile;
    j["cso"] = scene::config_to_json(o.resolved_cso());
    j["unet"] = {{"base_width", o.resolved_base_width()}};
    j["experiment"] = {{"d", o.dataset_size},
                       {"train_fraction", o.train_fraction},
                       {"epochs", o.epochs},
                       {"batch_size", o.batch_size},
                       {"learning_rate", o.learning_rate},
                       {"test_size", o.test_size},
                       {"init_seeds", o.init_seeds},
                       {"split_seeds", o.split_seeds}};
    j["probe"] = {{"reference", o.reference},
                  {"measure", o.measure},
                  {"stride", o.stride},
                  {"images_per_position", o.images_per_position}};
    json labels;
    for (int c = 0; c < sprites::kNumClasses; ++c)
        labels[sprites::class_name(static_cast<sprites::SemClass>(c))] =
            o.sprites.labels.label[static_cast<size_t>(c)];
    j["sprites"] = {{"source", o.sprites.source == SpriteSource::synthetic ? "synthetic" : "idx"},
                    {"data_dir", o.sprites.data_dir},
                    {"labels", labels}};
    return j;
}

void echo_resolved_config(const RunOptions& opts, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
    std::ofstream f(std::filesystem::path(dir) / "resolved_config.json");
    if (!f) throw IoError("cannot write resolved_config.json in " + dir);
    f << resolved_to_json(opts).dump(2) << "\n";
}

sprites::SpriteProvider make_provider(const SpriteOptions& opts, sprites::Split split) {
    if (opts.source == SpriteSource::synthetic) return sprites::SpriteProvider::synthetic();
    std::string dir = opts.data_dir;
    if (dir.empty()) {
        const char* env = std::getenv("CSO_DATA_DIR");
        if (!env || !*env)
            throw ConfigError("idx sprites need --data-dir or CSO_DATA_DIR");
        dir = env;
    }
    return sprites::SpriteProvider::from_dir(dir, split, opts.labels);
}

}  // namespace cso::config
