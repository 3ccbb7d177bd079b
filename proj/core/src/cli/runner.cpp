#include "robustdet/cli/runner.hpp"

#include "robustdet/advtrain/train.hpp"
#include "robustdet/cli/visualize.hpp"
#include "robustdet/core/container.hpp"
#include "robustdet/core/error.hpp"
#include "robustdet/core/random.hpp"
#include "robustdet/core/synthetic.hpp"
#include "robustdet/eval/metrics.hpp"
#include "robustdet/eval/protocol.hpp"
#include "robustdet/model/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>

#ifndef ROBUSTDET_VERSION
#define ROBUSTDET_VERSION "0.0.0"
#endif

namespace robustdet::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view version() { return ROBUSTDET_VERSION; }

std::vector<DatasetEntry> read_dataset_index(const fs::path& root) {
    const fs::path path = root / kDatasetIndexFile;
    if (!fs::exists(path)) throw IngestionError("dataset index not found: " + path.string() + " (run gen-data first)");
    try {
        const auto j = nlohmann::json::parse(read_text(path));
        std::vector<DatasetEntry> out;
        for (const auto& e : j.at("datasets")) {
            out.push_back({e.at("name").get<std::string>(), parse_role(e.at("role").get<std::string>())});
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed dataset index " + path.string() + ": " + e.what());
    }
}

void write_dataset_index(const fs::path& root, const std::vector<DatasetEntry>& entries) {
    ordered_json list = ordered_json::array();
    for (const auto& e : entries) list.push_back({{"name", e.name}, {"role", std::string(to_string(e.role))}});
    write_text(root / kDatasetIndexFile, ordered_json{{"datasets", list}}.dump(2) + "\n");
}

std::vector<DatasetSpec> dataset_specs(const RunConfig& cfg, DatasetSplit split, const std::vector<std::string>& names,
                                       const char* key) {
    const auto index = read_dataset_index(cfg.dataset.root);
    std::vector<DatasetEntry> chosen;
    if (names.empty()) {
        chosen = index;
    } else {
        for (const auto& n : names) {
            auto it = std::find_if(index.begin(), index.end(), [&](const DatasetEntry& e) { return e.name == n; });
            if (it == index.end()) throw ConfigError(key, "dataset '" + n + "' is not in " + (cfg.dataset.root / kDatasetIndexFile).string());
            chosen.push_back(*it);
        }
    }
    std::vector<DatasetSpec> specs;
    for (const auto& e : chosen) {
        DatasetSpec s;
        s.name = e.name;
        s.role = e.role;
        s.split = split;
        s.source = DirectorySource{cfg.dataset.root / e.name / std::string(to_string(split))};
        s.preprocess = {cfg.dataset.jpeg_quality, cfg.dataset.image_size};
        specs.push_back(std::move(s));
    }
    return specs;
}

namespace {

struct Context {
    const RunConfig& cfg;
    std::ostream* log;
    std::vector<fs::path> artifacts;
    ordered_json details = ordered_json::object();

    void note(const std::string& line) const {
        if (log) *log << line << '\n';
    }
    fs::path out(const fs::path& name) { return cfg.output_dir / name; }
    void wrote(const fs::path& p) { artifacts.push_back(p); }
    void write(const fs::path& name, const std::string& text) {
        write_text(out(name), text);
        wrote(out(name));
    }
};

void require_file(const fs::path& path, const char* key) {
    if (path.empty()) throw ConfigError(key, "a file path is required");
    if (!fs::exists(path)) throw ConfigError(key, "file not found: " + path.string());
}

LabeledImages load_all(const std::vector<DatasetSpec>& specs) {
    std::vector<LabeledImages> parts;
    for (const auto& s : specs) parts.push_back(load_images(s));
    return merge(parts);
}

std::shared_ptr<const diffusion::DireExtractor> load_extractor(const RunConfig& cfg) {
    const fs::path path = cfg.backbone_path();
    require_file(path, "diffusion.checkpoint");
    auto predictor = std::make_shared<const diffusion::GaussianPredictor>(diffusion::load_predictor(path));
    return std::make_shared<const diffusion::DireExtractor>(cfg.schedule(), predictor, cfg.diffusion.dire_scale);
}

/// Detector and whatever it needs to be attacked end to end.
struct Target {
    model::DetectorModel detector;
    std::shared_ptr<const diffusion::DireExtractor> extractor;
    std::unique_ptr<model::DetectorModel> surrogate;

    bool dire() const { return detector.spec().input_space == model::InputSpace::kDire; }

    Tensor inputs(const ImageTensor& x) const { return dire() ? extractor->features(x).tensor() : x.tensor(); }

    ImageTensor attack(const ImageTensor& x, const LabelVector& y, const attack::AttackConfig& a,
                       attack::GradMode mode) const {
        if (!dire()) return attack::pgd(detector, x, y, a);
        return attack::pgd_through_dire(detector, x, y, a, mode, *extractor, surrogate.get());
    }
};

Target load_target(const RunConfig& cfg, const fs::path& checkpoint, const char* key) {
    require_file(checkpoint, key);
    Target t{model::load_detector(checkpoint), nullptr, nullptr};
    if (t.dire()) {
        t.extractor = load_extractor(cfg);
        if (attack::parse_grad_mode(cfg.attack.grad_mode) == attack::GradMode::kSurrogate) {
            require_file(cfg.model.surrogate, "model.surrogate");
            t.surrogate = std::make_unique<model::DetectorModel>(model::load_detector(cfg.model.surrogate));
        }
    }
    return t;
}

std::string file_stem(const std::string& id) { return fs::path(id).stem().string(); }

// --- gen-data ---------------------------------------------------------------

void write_split(const SyntheticSource& src, const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < src.images->size(); ++i) {
        char file[64];
        std::snprintf(file, sizeof(file), "_%06zu.png", src.first_index + i);
        write_png(dir / (name + file), (*src.images)[i]);
    }
}

void run_gen_data(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    SyntheticParams params = cfg.synthetic_params();
    params.measure_separability = false;
    const fs::path root = cfg.dataset.root;
    fs::create_directories(root);

    const auto backbone = fit_benchmark_backbone(cfg.seed, params);
    diffusion::save_predictor(root / "backbone.ckpt", *backbone);
    ctx.wrote(root / "backbone.ckpt");

    std::vector<DatasetEntry> entries;
    ordered_json domains = ordered_json::array();
    for (std::size_t d = 0; d < cfg.dataset.domains.size(); ++d) {
        const std::string& domain = cfg.dataset.domains[d];
        // Domains differ in their real-image seed and in the fingerprint the
        // generator leaves, so cross-domain evaluation has something to miss.
        SyntheticParams p = params;
        p.fingerprint = d % 2 == 0 ? Fingerprint::kCheckerboard : Fingerprint::kStripes;
        const std::uint64_t domain_seed = d == 0 ? cfg.seed : Rng::derive(cfg.seed, 100 + d).next();
        const SyntheticBenchmark b = make_synthetic_domain(domain_seed, p, domain, backbone);
        for (const DatasetSpec* s : {&b.real_train, &b.real_test, &b.fake_train, &b.fake_test}) {
            const auto& src = std::get<SyntheticSource>(s->source);
            write_split(src, root / s->name / std::string(to_string(s->split)), s->name);
        }
        entries.push_back({b.real_train.name, DatasetRole::kReal});
        entries.push_back({b.fake_train.name, DatasetRole::kFake});
        domains.push_back({{"name", domain},
                           {"seed", domain_seed},
                           {"fingerprint", std::string(to_string(p.fingerprint))},
                           {"datasets", {b.real_train.name, b.fake_train.name}}});
        ctx.note("wrote domain " + domain);
    }
    write_dataset_index(root, entries);
    ctx.wrote(root / kDatasetIndexFile);

    const ordered_json bench{{"seed", cfg.seed},
                             {"image_size", params.image_size},
                             {"channels", params.channels},
                             {"train_per_class", params.train_per_class},
                             {"test_per_class", params.test_per_class},
                             {"texture", params.real.texture},
                             {"fingerprint_amplitude", params.fingerprint_amplitude},
                             {"backbone", "backbone.ckpt"},
                             {"backbone_id", backbone->id()},
                             {"domains", domains}};
    write_text(root / "benchmark.json", bench.dump(2) + "\n");
    ctx.wrote(root / "benchmark.json");
}

// --- train ------------------------------------------------------------------

void run_train(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const std::string& mode = cfg.training.mode;
    auto input_space = model::parse_input_space(cfg.model.input_space);
    if (mode == "at-dire") input_space = model::InputSpace::kDire;
    if (mode == "at" && input_space == model::InputSpace::kDire) {
        throw ConfigError("training.mode", "adversarial training on DIRE features is mode at-dire");
    }

    const LabeledImages data = load_all(dataset_specs(cfg, DatasetSplit::kTrain, cfg.dataset.train, "dataset.train"));
    const model::DetectorSpec spec{model::parse_architecture(cfg.model.architecture), input_space,
                                   data.images.channels(), data.images.height(), data.images.width()};
    model::DetectorModel detector = model::DetectorModel::create(spec, cfg.seed);
    const advtrain::TrainConfig tc = cfg.train_config();
    const attack::AttackConfig atk = cfg.attack.config(true, cfg.seed);

    auto progress = [&](const advtrain::EpochStats& e) {
        char line[160];
        std::snprintf(line, sizeof(line), "epoch %zu clean %.4f adv %.4f total %.4f (%.1fs)", e.epoch, e.clean_loss,
                      e.adv_loss, e.total_loss, e.seconds);
        ctx.note(line);
    };

    advtrain::TrainReport report;
    if (input_space == model::InputSpace::kPixel) {
        report = mode == "at" ? advtrain::train_adversarial(detector, data, tc, atk, progress)
                              : advtrain::train_standard(detector, data, tc, progress);
    } else {
        const auto extractor = load_extractor(cfg);
        std::unique_ptr<model::DetectorModel> surrogate;
        const auto grad_mode = attack::parse_grad_mode(cfg.attack.grad_mode);
        if (mode == "at-dire" && grad_mode == attack::GradMode::kSurrogate) {
            require_file(cfg.model.surrogate, "model.surrogate");
            surrogate = std::make_unique<model::DetectorModel>(model::load_detector(cfg.model.surrogate));
        }
        diffusion::DireCache cache;
        const advtrain::DireTrainingContext dctx{extractor.get(), grad_mode, surrogate.get(), &cache};
        report = mode == "at-dire" ? advtrain::train_adversarial_dire(detector, data, tc, atk, dctx, progress)
                                   : advtrain::train_standard_dire(detector, data, tc, dctx, progress);
        ctx.details["dire_cache"] = {{"entries", cache.size()}, {"hits", cache.hits()}, {"misses", cache.misses()}};
    }

    model::save_detector(ctx.out("detector.ckpt"), detector);
    ctx.wrote(ctx.out("detector.ckpt"));
    // Timings vary between runs, so they live in the manifest only.
    ctx.write("train_report.csv", report.to_csv(false));
    ordered_json manifest{{"datasets", report.datasets_seen}, {"items", report.items_seen}};
    ctx.write("training_manifest.json", manifest.dump(1) + "\n");

    ordered_json epochs = ordered_json::array();
    for (const auto& e : report.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"clean_loss", e.clean_loss},
                          {"adv_loss", e.adv_loss},
                          {"total_loss", e.total_loss},
                          {"seconds", e.seconds}});
    }
    ctx.details["train_report"] = {{"epochs", epochs},
                                   {"final_train_accuracy", report.final_train_accuracy},
                                   {"optimizer_steps", report.optimizer_steps},
                                   {"attack_invocations", report.attack_invocations},
                                   {"clean_views", report.clean_views},
                                   {"adversarial_views", report.adversarial_views},
                                   {"parameter_hash", detector.parameter_hash()}};
}

// --- attack -----------------------------------------------------------------

void run_attack(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const Target target = load_target(cfg, cfg.model.checkpoint, "model.checkpoint");
    const LabeledImages data = load_all(dataset_specs(cfg, DatasetSplit::kTest, cfg.dataset.test, "dataset.test"));
    const attack::AttackConfig a = cfg.attack.config(false, cfg.seed);
    const auto mode = attack::parse_grad_mode(cfg.attack.grad_mode);

    LabelVector clean_pred, adv_pred;
    double linf = 0.0;
    for (const Batch& b : make_batches(data, cfg.evaluation.batch_size)) {
        const ImageTensor adv = target.attack(b.images, b.labels, a, mode);
        linf = std::max(linf, max_abs_diff(adv, b.images));
        const auto pc = target.detector.predict(target.inputs(b.images));
        const auto pa = target.detector.predict(target.inputs(adv));
        clean_pred.insert(clean_pred.end(), pc.begin(), pc.end());
        adv_pred.insert(adv_pred.end(), pa.begin(), pa.end());
        for (std::size_t i = 0; i < b.indices.size(); ++i) {
            const std::size_t k = b.indices[i];
            const fs::path path = ctx.out(fs::path("adversarial") / data.origins[k] / (file_stem(data.ids[k]) + ".png"));
            fs::create_directories(path.parent_path());
            write_png(path, to_raw_image(adv, i));
        }
    }
    ctx.wrote(ctx.out("adversarial"));
    const double acc_clean = eval::accuracy(clean_pred, data.labels), acc_adv = eval::accuracy(adv_pred, data.labels);
    const auto score = eval::robustness_score(acc_adv, acc_clean);
    const auto e = eval::echo(a, mode);
    const ordered_json summary{
        {"images", data.size()},
        {"acc_clean", acc_clean},
        {"acc_adv", acc_adv},
        {"robustness_score", score ? ordered_json(*score) : ordered_json(nullptr)},
        {"max_linf", linf},
        {"attack",
         {{"epsilon", e.epsilon}, {"step_size", e.step_size}, {"num_steps", e.num_steps},
          {"random_init", e.random_init}, {"grad_mode", e.grad_mode}}}};
    ctx.write("attack_summary.json", summary.dump(2) + "\n");
}

// --- dire -------------------------------------------------------------------

void run_dire(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const auto extractor = load_extractor(cfg);
    Container maps;
    maps.kind = "dire-maps";
    maps.attributes = {{"backbone_id", extractor->backbone_id()},
                       {"schedule_id", extractor->schedule_id()},
                       {"scale", std::to_string(cfg.diffusion.dire_scale)}};
    ordered_json summary = ordered_json::object();
    for (const DatasetSpec& spec : dataset_specs(cfg, DatasetSplit::kTest, cfg.dataset.test, "dataset.test")) {
        const LabeledImages data = load_images(spec);
        const diffusion::DireMap d = extractor->dire(data.images);
        const ImageTensor rendered = extractor->features_from_residual(d.residual);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const fs::path path = ctx.out(fs::path("dire") / spec.name / (file_stem(data.ids[i]) + ".png"));
            fs::create_directories(path.parent_path());
            write_png(path, to_raw_image(rendered, i));
        }
        maps.arrays.push_back({spec.name, d.residual.shape(), d.residual.storage()});
        summary[spec.name] = {{"role", std::string(to_string(spec.role))},
                              {"images", data.size()},
                              {"mean", d.mean()},
                              {"max", d.max()}};
        ctx.note("dire " + spec.name);
    }
    ctx.wrote(ctx.out("dire"));
    write_container(ctx.out("dire_maps.ckpt"), maps);
    ctx.wrote(ctx.out("dire_maps.ckpt"));
    ctx.write("dire_summary.json", summary.dump(2) + "\n");
}

// --- eval -------------------------------------------------------------------

eval::TrainingManifest read_training_manifest(const fs::path& checkpoint) {
    const fs::path path = checkpoint.parent_path() / "training_manifest.json";
    eval::TrainingManifest m;
    if (!fs::exists(path)) return m;
    try {
        const auto j = nlohmann::json::parse(read_text(path));
        for (const auto& d : j.at("datasets")) m.datasets.insert(d.get<std::string>());
        for (const auto& i : j.at("items")) m.items.insert(i.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed training manifest " + path.string() + ": " + e.what());
    }
    return m;
}

void run_eval(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    if (cfg.evaluation.models.empty()) throw ConfigError("evaluation.models", "no models to evaluate");
    const auto protocol = eval::parse_protocol(cfg.evaluation.protocol);

    std::vector<std::unique_ptr<Target>> targets;
    std::vector<eval::EvaluatedModel> models;
    for (const auto& [method, settings] : cfg.evaluation.models) {
        for (const auto& [setting, path] : settings) {
            targets.push_back(std::make_unique<Target>(load_target(cfg, path, "evaluation.models")));
            const Target& t = *targets.back();
            eval::EvaluatedModel m{method, eval::parse_setting(setting), &t.detector, t.extractor.get(),
                                   t.surrogate.get(), read_training_manifest(path)};
            if (protocol == eval::Protocol::kCrossDomain && m.training.datasets.empty()) {
                throw ProtocolError("cross-domain evaluation needs the training manifest next to " + path.string());
            }
            models.push_back(std::move(m));
        }
    }

    eval::ProtocolConfig pc;
    pc.protocol = protocol;
    pc.attack = cfg.attack.config(false, cfg.seed);
    pc.grad_mode = attack::parse_grad_mode(cfg.attack.grad_mode);
    pc.training_datasets = cfg.evaluation.training_datasets;
    pc.batch_size = cfg.evaluation.batch_size;

    const auto datasets = dataset_specs(cfg, DatasetSplit::kTest, cfg.dataset.test, "dataset.test");
    eval::EvalTrace trace;
    const eval::EvalReport report = eval::evaluate_protocol(models, datasets, pc, &trace);
    ctx.write("report.csv", eval::render_report(report, eval::ReportFormat::kCsv));
    ctx.write("report.json", eval::render_report(report, eval::ReportFormat::kJson));
    ctx.write("report.md", eval::render_report(report, eval::ReportFormat::kMarkdown));
    ctx.details["attack_passes"] = trace.attacks.size();
}

// --- viz --------------------------------------------------------------------

void run_viz(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const Target target = load_target(cfg, cfg.model.checkpoint, "model.checkpoint");
    const LabeledImages all = load_all(dataset_specs(cfg, DatasetSplit::kTest, cfg.dataset.test, "dataset.test"));
    // Evenly spaced picks so both classes show up.
    const std::size_t count = std::min(cfg.viz.count, all.size());
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < count; ++i) picks.push_back(i * all.size() / count);
    const LabeledImages data = all.subset(picks);

    const auto mode = attack::parse_grad_mode(cfg.attack.grad_mode);
    const ImageTensor adv = target.attack(data.images, data.labels, cfg.attack.config(false, cfg.seed), mode);
    const double factor = cfg.viz.effective_factor();
    ordered_json summary{{"kind", cfg.viz.kind}, {"factor", factor}, {"items", data.ids}};

    if (cfg.viz.kind == "noise") {
        for (const auto& p : visualize_noise(data.images, adv, ctx.out("viz"), factor)) ctx.wrote(p);
        summary["noise_offset"] = kNoiseOffset;
        summary["panel"] = "original | adversarial | clip((adversarial - original) * factor + 0.5)";
    } else {
        const auto extractor = target.extractor ? target.extractor : load_extractor(cfg);
        const diffusion::DireMap d_clean = extractor->dire(data.images), d_adv = extractor->dire(adv);
        for (const auto& p : visualize_dire_difference(d_clean, d_adv, ctx.out("viz"), factor, extractor->scale())) {
            ctx.wrote(p);
        }
        const Tensor diff = dire_difference(d_clean.residual, d_adv.residual, factor);
        double sum[2] = {0.0, 0.0};
        std::size_t n[2] = {0, 0};
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (double v : diff.sample(i)) sum[data.labels[i]] += v;
            n[data.labels[i]] += diff.sample_size();
        }
        auto avg = [&](int k) { return n[k] ? ordered_json(sum[k] / static_cast<double>(n[k])) : ordered_json(nullptr); };
        summary["mean_difference_real"] = avg(0);
        summary["mean_difference_fake"] = avg(1);
        summary["panel"] = "DIRE(original) | DIRE(adversarial) | clip(|difference| * factor)";
    }
    ctx.write("viz_summary.json", summary.dump(2) + "\n");
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunResult run_command(const RunConfig& cfg, std::ostream* log) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started_at = utc_now();
    Context ctx{cfg, log, {}, ordered_json::object()};
    RunResult result;
    try {
        validate(cfg);
        fs::create_directories(cfg.output_dir);
        switch (cfg.command) {
            case Command::kGenData: run_gen_data(ctx); break;
            case Command::kTrain: run_train(ctx); break;
            case Command::kAttack: run_attack(ctx); break;
            case Command::kDire: run_dire(ctx); break;
            case Command::kEval: run_eval(ctx); break;
            case Command::kViz: run_viz(ctx); break;
        }
    } catch (const std::exception& e) {
        result.exit_code = 1;
        result.error = e.what();
    }
    result.artifacts = ctx.artifacts;

    ordered_json artifacts = ordered_json::array();
    for (const auto& p : ctx.artifacts) artifacts.push_back(p.generic_string());
    ordered_json manifest{
        {"tool", "robustdet"},
        {"version", std::string(version())},
        {"command", std::string(to_string(cfg.command))},
        {"seed", cfg.seed},
        {"status", result.exit_code == 0 ? "ok" : "error"},
        {"error", result.exit_code == 0 ? ordered_json(nullptr) : ordered_json(result.error)},
        {"started_at", started_at},
        {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
        {"config", ordered_json::parse(to_json_text(cfg))},
        {"artifacts", artifacts},
        {"details", ctx.details},
    };
    result.manifest = cfg.output_dir / "manifest.json";
    try {
        write_text(result.manifest, manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        if (result.exit_code == 0) result.error = e.what();
        result.exit_code = 1;
    }
    return result;
}

}  // namespace robustdet::cli
