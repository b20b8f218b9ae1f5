#include "cli.hpp"

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "eovseg/config.hpp"
#include "eovseg/error.hpp"
#include "eovseg/evaluation.hpp"
#include "eovseg/model.hpp"
#include "eovseg/pipeline.hpp"
#include "eovseg/profiler.hpp"
#include "eovseg/verify.hpp"

namespace eovseg {

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;

    ModelConfig config() const {
        ModelConfig c = config_path.empty() ? ModelConfig{} : load_config(config_path);
        if (seed) c.weight_seed = *seed;
        return c;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "model config (JSON); defaults built in")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "random seed");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text)) throw FormatError(path.string() + ": cannot write");
}

SegmentMap resample_nearest(const SegmentMap& m, std::size_t h, std::size_t w) {
    SegmentMap out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(y, x) = m.at(y * m.height / h, x * m.width / w);
    return out;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    Common common;
    std::string spec, out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
    const ModelConfig c = a.common.config();
    const SceneSpec spec = load_scene_spec(a.spec);
    Rng rng(a.common.seed.value_or(0));
    const Scene scene = generate_scene(spec, rng, c.prompt_templates, c.embed_dim);
    save_scene(a.out, scene);
    out << "wrote " << a.out << ": image " << shape_str(scene.image.shape()) << ", " << scene.gt.segments.size()
        << " segments, templates " << shape_str(scene.templates.shape()) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
    Common common;
    std::string scene, fusion, trace, weights, report;
    bool gt_as_prediction = false;
    std::size_t resize_short = 0;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
    ModelConfig c = a.common.config();
    if (!a.fusion.empty()) c.fusion = parse_fusion(a.fusion);
    const Scene scene = load_scene(a.scene);
    const TextEmbeddings text = make_text_embeddings(scene.templates, scene.classes);
    if (text.embeddings.dim(1) != c.embed_dim)
        throw ConfigError("scene templates have width " + std::to_string(text.embeddings.dim(1)) +
                          " but the config expects " + std::to_string(c.embed_dim));

    PanopticAnnotation pred;
    ForwardResult result;
    if (a.gt_as_prediction) {
        pred = scene.gt;
    } else {
        const ModelWeights w = load_or_create_weights(a.weights, c);
        const Tensor image = a.resize_short ? resize_short_side(scene.image, a.resize_short) : scene.image;
        Trace trace;
        result = forward(image, text, c, w, a.trace.empty() ? nullptr : &trace);
        if (!a.trace.empty()) trace.save(a.trace);
        pred = result.panoptic;
        if (a.resize_short) pred.map = resample_nearest(pred.map, scene.gt.map.height, scene.gt.map.width);
        for (const auto& [name, shape] : result.stage_shapes) out << "stage " << name << ' ' << shape_str(shape) << '\n';
    }

    const auto q = pq_metrics(pred, scene.gt);
    const double mi = miou(pred.semantic(), scene.gt.semantic());
    auto shape_or = [](const Tensor& t) { return t.empty() ? std::string("-") : shape_str(t.shape()); };
    std::ostringstream csv;
    csv << "mode,pq,sq,rq,miou,image,masks,scores,panoptic\n";
    csv << std::setprecision(6) << std::fixed << (a.gt_as_prediction ? "gt" : to_string(c.fusion)) << ',' << q.pq << ','
        << q.sq << ',' << q.rq << ',' << mi << ',' << shape_str(scene.image.shape()) << ','
        << shape_or(result.masks.logits) << ',' << shape_or(result.scores.scores) << ',' << pred.map.height << 'x'
        << pred.map.width << '\n';
    out << csv.str();
    if (!a.report.empty()) write_text(a.report, csv.str());
    return kExitOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
    Common common;
    std::size_t trials = 25;
    std::string sabotage;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    if (!a.common.config_path.empty()) a.common.config();  // validated for the contract; checks use desk extents
    VerifyOptions opt;
    opt.trials = a.trials;
    opt.seed = a.common.seed.value_or(0);
    if (!a.sabotage.empty()) {
        const auto f = parse_fault(a.sabotage);
        if (!f) throw ConfigError("unknown --sabotage target '" + a.sabotage + "'");
        opt.fault = *f;
    }
    const auto report = run_verification(opt);
    out << format_report(report);
    if (!report.passed()) {
        err << "verify failed: " << report.first_failure()->name << ": " << report.first_failure()->detail << '\n';
        return kExitVerifyFailed;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- profile / bench

struct ProfileArgs {
    Common common;
    std::string mode, scene, out_path;
    std::size_t reps = 5;
    std::size_t features = 16;
};

void require_reps(std::size_t reps) {
    if (reps < kMinReps) throw CLI::ValidationError("--reps", "must be at least " + std::to_string(kMinReps));
}

int cmd_profile(const ProfileArgs& a, std::ostream& out) {
    require_reps(a.reps);
    ModelConfig c = a.common.config();
    if (!a.mode.empty()) c.interaction = parse_interaction(a.mode);
    const ModelWeights w = ModelWeights::create(c);
    Tensor image;
    TextEmbeddings text;
    if (!a.scene.empty()) {
        const Scene s = load_scene(a.scene);
        image = s.image;
        text = make_text_embeddings(s.templates, s.classes);
    } else {
        Rng rng(a.common.seed.value_or(0));
        image = rng.uniform_tensor({3, 64, 64}, 0.0f, 1.0f);
        std::vector<ClassInfo> classes;
        for (std::size_t i = 0; i < 8; ++i) classes.push_back({"class" + std::to_string(i), i % 2 == 0, true});
        text = make_text_embeddings(class_templates(8, c.prompt_templates, c.embed_dim, 7), classes);
    }
    const std::string csv = to_csv(profile(image, text, c, w, a.reps));
    out << csv;
    if (!a.out_path.empty()) write_text(a.out_path, csv);
    return kExitOk;
}

int cmd_bench(const ProfileArgs& a, std::ostream& out) {
    require_reps(a.reps);
    ModelConfig c = a.common.config();
    const Interaction mode = a.mode.empty() ? c.interaction : parse_interaction(a.mode);
    const ModelWeights w = ModelWeights::create(c);
    const std::string csv =
        to_csv(benchmark(c, w, mode, a.reps, a.common.seed.value_or(0), a.features, a.features), false);
    out << csv;
    if (!a.out_path.empty()) write_text(a.out_path, csv);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Open-vocabulary panoptic segmentation inference engine and profiler", "eovseg"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic scene");
    add_common(g, gen.common);
    g->add_option("--spec", gen.spec, "scene spec (JSON)")->required()->check(CLI::ExistingFile);
    g->add_option("--out", gen.out, "output directory")->required();

    RunArgs run;
    auto* r = app.add_subcommand("run", "run the pipeline on a scene and report metrics");
    add_common(r, run.common);
    r->add_option("--scene", run.scene, "scene directory")->required();
    r->add_option("--fusion", run.fusion, "fusion mode")->check(CLI::IsMember({"none", "eaf", "sdi", "tdee"}));
    r->add_option("--trace", run.trace, "write intermediates to this directory");
    r->add_option("--weights", run.weights, "weight cache directory (created on first use)");
    r->add_option("--report", run.report, "write the metrics CSV here");
    r->add_option("--resize-short", run.resize_short, "resize so the shorter side has this length first");
    r->add_flag("--gt-as-prediction", run.gt_as_prediction, "evaluate the ground truth against itself");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "run the oracle and invariant suite");
    add_common(v, ver.common);
    v->add_option("--trials", ver.trials, "random instances per check")->check(CLI::PositiveNumber);
    v->add_option("--sabotage", ver.sabotage, "inject a deliberate kernel fault")->check(CLI::IsMember({"softmax"}));

    ProfileArgs prof;
    auto* p = app.add_subcommand("profile", "per-module parameter, MAC and timing report");
    add_common(p, prof.common);
    p->add_option("--mode", prof.mode, "decoder interaction")->check(CLI::IsMember({"dda", "ca"}));
    p->add_option("--reps", prof.reps, "timed repetitions (>= 5)");
    p->add_option("--scene", prof.scene, "scene directory (default: seeded 64x64 input)");
    p->add_option("--out", prof.out_path, "write the CSV here");

    ProfileArgs bench;
    auto* b = app.add_subcommand("bench", "time the decoder interaction in one mode");
    add_common(b, bench.common);
    b->add_option("--mode", bench.mode, "decoder interaction")->check(CLI::IsMember({"dda", "ca"}));
    b->add_option("--reps", bench.reps, "timed repetitions (>= 5)");
    b->add_option("--features", bench.features, "feature map side (H' = W')")->check(CLI::PositiveNumber);
    b->add_option("--out", bench.out_path, "write the CSV here");

    try {
        app.parse(argc, argv);
        if (g->parsed()) return cmd_gen(gen, out);
        if (r->parsed()) return cmd_run(run, out);
        if (v->parsed()) return cmd_verify(ver, out, err);
        if (p->parsed()) return cmd_profile(prof, out);
        return cmd_bench(bench, out);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

}  // namespace eovseg
