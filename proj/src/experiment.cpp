#include "cso/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace cso::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

json experiment_config_to_json(const ExperimentConfig& c) {
    json j;
    j["cso"] = scene::config_to_json(c.regime);
    j["dataset_size"] = c.dataset_size;
    j["train_fraction"] = c.train_fraction;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["base_width"] = c.base_width;
    j["test_size"] = c.test_size;
    j["data_seed"] = c.data_seed;
    return j;
}

std::string config_digest(const ExperimentConfig& c) {
    const std::string canon = experiment_config_to_json(c).dump();
    const uint64_t h = fnv1a_bytes(canon.data(), canon.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

uint64_t test_set_seed(const ExperimentConfig& c) {
    const std::string canon = experiment_config_to_json(c).dump();
    return hash_seed(fnv1a_bytes(canon.data(), canon.size()), fnv1a("test"));
}

namespace {

// Batch assembly: images to (B,1,H,W) float, masks to (B,H,W) int32.
nn::Tensor<float> batch_images(const std::vector<const scene::Image*>& imgs) {
    const int b = static_cast<int>(imgs.size());
    const int h = imgs[0]->h, w = imgs[0]->w;
    nn::Tensor<float> t({b, 1, h, w});
    for (int i = 0; i < b; ++i)
        std::copy(imgs[static_cast<size_t>(i)]->px.begin(), imgs[static_cast<size_t>(i)]->px.end(),
                  t.data.begin() + static_cast<size_t>(i) * h * w);
    return t;
}

nn::Tensor<int32_t> batch_masks(const std::vector<const scene::Mask*>& masks) {
    const int b = static_cast<int>(masks.size());
    const int h = masks[0]->h, w = masks[0]->w;
    nn::Tensor<int32_t> t({b, h, w});
    for (int i = 0; i < b; ++i)
        for (size_t p = 0; p < masks[static_cast<size_t>(i)]->v.size(); ++p)
            t.data[static_cast<size_t>(i) * h * w + p] = masks[static_cast<size_t>(i)]->v[p];
    return t;
}

double forward_loss(const unet::UNetModel<float>& model,
                    const std::vector<const scene::Image*>& imgs,
                    const std::vector<const scene::Mask*>& masks) {
    nn::Tape<float> tape;
    auto input = tape.leaf(batch_images(imgs), false);
    auto logits = model.forward(tape, input, false);
    auto loss = tape.softmax_cross_entropy(logits, batch_masks(masks));
    return static_cast<double>(tape.value(loss).data[0]);
}

}  // namespace

MetricsReport evaluate_on(const unet::UNetModel<float>& model,
                          const std::vector<scene::Image>& images,
                          const std::vector<scene::Mask>& masks, int batch_size) {
    if (images.size() != masks.size())
        throw ShapeMismatch("evaluate_on: image/mask count mismatch");
    MetricsReport rep;
    const int num_classes = model.arch.out_channels;
    rep.per_class.assign(static_cast<size_t>(num_classes) - 1, {});

    for (size_t start = 0; start < images.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(images.size(), start + static_cast<size_t>(batch_size));
        std::vector<const scene::Image*> imgs;
        for (size_t i = start; i < end; ++i) imgs.push_back(&images[i]);

        nn::Tape<float> tape;
        auto input = tape.leaf(batch_images(imgs), false);
        auto logits = tape.value(model.forward(tape, input, false));

        for (size_t i = start; i < end; ++i) {
            const scene::Mask pred = argmax_classes(logits, static_cast<int>(i - start));
            for (int c = 1; c < num_classes; ++c) {
                const ClassCounts cc = compute_metrics(pred, masks[i], c);
                auto& agg = rep.per_class[static_cast<size_t>(c) - 1];
                agg.tp += cc.tp;
                agg.fp += cc.fp;
                agg.fn += cc.fn;
                if (c == 1) rep.per_image.push_back({cc.precision(), cc.recall()});
            }
        }
    }

    const ClassCounts& shirt = rep.per_class[0];
    rep.shirt_precision = shirt.precision();
    rep.shirt_recall = shirt.recall();
    double psum = 0, rsum = 0;
    for (const auto& pr : rep.per_image) {
        psum += pr[0];
        rsum += pr[1];
    }
    const double n = rep.per_image.empty() ? 1.0 : static_cast<double>(rep.per_image.size());
    rep.shirt_precision_image_mean = psum / n;
    rep.shirt_recall_image_mean = rsum / n;
    rep.converged = rep.shirt_precision > 0.5 && rep.shirt_recall > 0.5;
    return rep;
}

namespace {

json metrics_to_json(const MetricsReport& m) {
    json j;
    json pc = json::array();
    for (size_t c = 0; c < m.per_class.size(); ++c)
        pc.push_back({{"class_id", c + 1},
                      {"tp", m.per_class[c].tp},
                      {"fp", m.per_class[c].fp},
                      {"fn", m.per_class[c].fn},
                      {"precision", m.per_class[c].precision()},
                      {"recall", m.per_class[c].recall()}});
    j["per_class"] = std::move(pc);
    j["shirt_precision"] = m.shirt_precision;
    j["shirt_recall"] = m.shirt_recall;
    j["shirt_precision_image_mean"] = m.shirt_precision_image_mean;
    j["shirt_recall_image_mean"] = m.shirt_recall_image_mean;
    j["converged"] = m.converged;
    return j;
}

MetricsReport metrics_from_json(const json& j) {
    MetricsReport m;
    for (const auto& e : j.at("per_class")) {
        ClassCounts c;
        c.tp = e.at("tp").get<int64_t>();
        c.fp = e.at("fp").get<int64_t>();
        c.fn = e.at("fn").get<int64_t>();
        m.per_class.push_back(c);
    }
    m.shirt_precision = j.at("shirt_precision").get<double>();
    m.shirt_recall = j.at("shirt_recall").get<double>();
    m.shirt_precision_image_mean = j.at("shirt_precision_image_mean").get<double>();
    m.shirt_recall_image_mean = j.at("shirt_recall_image_mean").get<double>();
    m.converged = j.at("converged").get<bool>();
    return m;
}

}  // namespace

json run_record_to_json(const RunRecord& r) {
    json j;
    j["digest"] = r.digest;
    j["init_seed"] = r.init_seed;
    j["split_seed"] = r.split_seed;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["checkpoint"] = r.checkpoint_path;
    j["test_metrics"] = metrics_to_json(r.test);
    j["diverged"] = r.diverged;
    return j;
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.digest = j.at("digest").get<std::string>();
    r.init_seed = j.at("init_seed").get<uint64_t>();
    r.split_seed = j.at("split_seed").get<uint64_t>();
    r.train_loss = j.at("train_loss").get<std::vector<double>>();
    r.val_loss = j.at("val_loss").get<std::vector<double>>();
    r.checkpoint_path = j.at("checkpoint").get<std::string>();
    r.test = metrics_from_json(j.at("test_metrics"));
    r.diverged = j.at("diverged").get<bool>();
    return r;
}

RunRecord train_run(const ExperimentConfig& config, uint64_t init_seed,
                    uint64_t split_seed, const sprites::SpriteProvider& trainval_sprites,
                    const sprites::SpriteProvider& test_sprites,
                    const std::string& out_dir, const EpochCallback& on_epoch) {
    RunRecord rec;
    rec.digest = config_digest(config);
    rec.init_seed = init_seed;
    rec.split_seed = split_seed;

    const auto dataset = scene::generate_dataset(config.regime, trainval_sprites,
                                                 config.dataset_size, config.data_seed);

    // split: Fisher-Yates permutation driven by split_seed alone
    std::vector<int> perm(dataset.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    {
        Rng rng(hash_seed(split_seed, fnv1a("split")));
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1],
                      perm[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    }
    const int n_train = std::min(config.train_size(), static_cast<int>(dataset.size()));
    std::vector<int> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<int> val_idx(perm.begin() + n_train, perm.end());

    auto model = unet::build_unet<float>(config.arch(), init_seed);
    nn::AdamState<float> adam;
    adam.lr = static_cast<float>(config.learning_rate);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<int> order = train_idx;
        {
            Rng rng(hash_seed(init_seed, split_seed, fnv1a("shuffle"),
                              static_cast<uint64_t>(epoch)));
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1],
                          order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
        }

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::vector<const scene::Image*> imgs;
            std::vector<const scene::Mask*> msks;
            for (size_t i = start; i < end; ++i) {
                imgs.push_back(&dataset[static_cast<size_t>(order[i])].image);
                msks.push_back(&dataset[static_cast<size_t>(order[i])].mask);
            }

            nn::Tape<float> tape;
            auto input = tape.leaf(batch_images(imgs), false);
            std::vector<nn::Tape<float>::NodeId> param_ids;
            auto logits = model.forward(tape, input, true, &param_ids);
            auto loss = tape.softmax_cross_entropy(logits, batch_masks(msks));
            tape.backward(loss);

            std::vector<nn::Tensor<float>*> params;
            std::vector<const nn::Tensor<float>*> grads;
            for (size_t p = 0; p < model.params.size(); ++p) {
                params.push_back(&model.params[p].value);
                grads.push_back(&tape.grad(param_ids[p]));
            }
            adam.step(params, grads);
            loss_sum += static_cast<double>(tape.value(loss).data[0]) *
                        static_cast<double>(end - start);
        }
        const double train_loss =
            train_idx.empty() ? 0.0 : loss_sum / static_cast<double>(train_idx.size());
        rec.train_loss.push_back(train_loss);

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val_idx.empty()) {
            double vsum = 0.0;
            for (size_t start = 0; start < val_idx.size(); start += static_cast<size_t>(config.batch_size)) {
                const size_t end = std::min(val_idx.size(), start + static_cast<size_t>(config.batch_size));
                std::vector<const scene::Image*> imgs;
                std::vector<const scene::Mask*> msks;
                for (size_t i = start; i < end; ++i) {
                    imgs.push_back(&dataset[static_cast<size_t>(val_idx[i])].image);
                    msks.push_back(&dataset[static_cast<size_t>(val_idx[i])].mask);
                }
                vsum += forward_loss(model, imgs, msks) * static_cast<double>(end - start);
            }
            val_loss = vsum / static_cast<double>(val_idx.size());
        }
        rec.val_loss.push_back(val_loss);
        if (on_epoch) on_epoch(epoch, train_loss, val_loss);

        if (!std::isfinite(train_loss)) {  // diverged: stop, keep the record
            rec.diverged = true;
            break;
        }
    }

    // fresh test set of the same configuration
    const auto test_scenes =
        scene::generate_dataset(config.regime, test_sprites, config.test_size, test_set_seed(config));
    std::vector<scene::Image> test_images;
    std::vector<scene::Mask> test_masks;
    for (const auto& s : test_scenes) {
        test_images.push_back(s.image);
        test_masks.push_back(s.mask);
    }
    bool finite_params = true;
    for (const auto& p : model.params)
        for (float v : p.value.data)
            if (!std::isfinite(v)) { finite_params = false; break; }
    if (finite_params)
        rec.test = evaluate_on(model, test_images, test_masks, config.batch_size);
    else
        rec.test.per_class.assign(static_cast<size_t>(config.regime.num_mask_classes()) - 1, {});

    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(fs::path(out_dir) / "overlays", ec);
        if (ec) throw IoError("cannot create run directory " + out_dir);

        rec.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
        unet::save_checkpoint(model, rec.checkpoint_path, rec.digest);

        std::ofstream loss_csv(fs::path(out_dir) / "loss.csv");
        loss_csv << "epoch,train_loss,val_loss\n";
        for (size_t e = 0; e < rec.train_loss.size(); ++e) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e, rec.train_loss[e],
                          rec.val_loss[e]);
            loss_csv << buf;
        }

        std::ofstream metrics_csv(fs::path(out_dir) / "metrics.csv");
        metrics_csv << "class_id,tp,fp,fn,precision,recall\n";
        for (size_t c = 0; c < rec.test.per_class.size(); ++c) {
            const auto& cc = rec.test.per_class[c];
            char buf[160];
            std::snprintf(buf, sizeof buf, "%zu,%lld,%lld,%lld,%.17g,%.17g\n", c + 1,
                          static_cast<long long>(cc.tp), static_cast<long long>(cc.fp),
                          static_cast<long long>(cc.fn), cc.precision(), cc.recall());
            metrics_csv << buf;
        }

        for (size_t i = 0; i < std::min<size_t>(4, test_scenes.size()); ++i) {
            nn::Tape<float> tape;
            std::vector<const scene::Image*> imgs = {&test_images[i]};
            auto input = tape.leaf(batch_images(imgs), false);
            auto logits = tape.value(model.forward(tape, input, false));
            const scene::Mask pred = argmax_classes(logits, 0);
            char name[32];
            std::snprintf(name, sizeof name, "%03zu.png", i);
            io::write_png((fs::path(out_dir) / "overlays" / name).string(),
                          render_overlay(test_images[i], pred, test_masks[i]));
        }

        std::ofstream rj(fs::path(out_dir) / "record.json");
        rj << run_record_to_json(rec).dump(2) << "\n";
        if (!rj) throw IoError("cannot write record.json in " + out_dir);
    }
    return rec;
}

GridSummary summarize(const std::vector<RunRecord>& records) {
    GridSummary s;
    s.total = static_cast<int>(records.size());
    std::vector<double> ps, rs;
    for (const auto& r : records) {
        if (!r.test.converged) continue;
        ++s.converged;
        ps.push_back(r.test.shirt_precision);
        rs.push_back(r.test.shirt_recall);
    }
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
        if (v.empty()) { mean = 0; sd = 0; return; }
        double m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += (x - m) * (x - m);
        sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        mean = m;
    };
    mean_std(ps, s.precision_mean, s.precision_std);
    mean_std(rs, s.recall_mean, s.recall_std);
    return s;
}

std::vector<RunRecord> run_grid(const ExperimentConfig& config,
                                const std::vector<uint64_t>& init_seeds,
                                const std::vector<uint64_t>& split_seeds,
                                const sprites::SpriteProvider& trainval_sprites,
                                const sprites::SpriteProvider& test_sprites,
                                const std::string& out_dir, const EpochCallback& on_epoch) {
    std::vector<RunRecord> records;
    for (uint64_t is : init_seeds)
        for (uint64_t ss : split_seeds) {
            std::string run_dir;
            if (!out_dir.empty()) {
                char name[64];
                std::snprintf(name, sizeof name, "run_i%llu_s%llu",
                              static_cast<unsigned long long>(is),
                              static_cast<unsigned long long>(ss));
                run_dir = (fs::path(out_dir) / name).string();
            }
            records.push_back(train_run(config, is, ss, trainval_sprites, test_sprites,
                                        run_dir, on_epoch));
        }
    if (!out_dir.empty())
        write_summary_csv((fs::path(out_dir) / "summary.csv").string(), config,
                          summarize(records));
    return records;
}

std::string format_summary_row(const ExperimentConfig& config, const GridSummary& s) {
    char buf[256];
    if (s.converged > 0)
        std::snprintf(buf, sizeof buf, "%-8s %7d   %.2f +- %.2f   %.2f +- %.2f   %d/%d",
                      scene::regime_name(config.regime.regime), config.dataset_size,
                      s.precision_mean, s.precision_std, s.recall_mean, s.recall_std,
                      s.converged, s.total);
    else
        std::snprintf(buf, sizeof buf, "%-8s %7d   %-14s %-14s %d/%d",
                      scene::regime_name(config.regime.regime), config.dataset_size, "-",
                      "-", s.converged, s.total);
    return buf;
}

void write_summary_csv(const std::string& path, const ExperimentConfig& config,
                       const GridSummary& s) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "regime,d,precision_mean,precision_std,recall_mean,recall_std,converged,total\n";
    char buf[256];
    if (s.converged > 0)
        std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                      scene::regime_name(config.regime.regime), config.dataset_size,
                      s.precision_mean, s.precision_std, s.recall_mean, s.recall_std,
                      s.converged, s.total);
    else
        std::snprintf(buf, sizeof buf, "%s,%d,,,,,%d,%d\n",
                      scene::regime_name(config.regime.regime), config.dataset_size,
                      s.converged, s.total);
    f << buf;
}

}  // namespace cso::experiment
