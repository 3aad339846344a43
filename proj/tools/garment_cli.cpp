// garment: command-line front end for the clothing-deformation pipeline.
//
// Exit codes: 0 success, 2 configuration/command line, 3 data, 4 numerical.
// Failures print exactly one line to stderr:
//   garment: error category=<config|data|numerical> stage=<name> message="..."

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "garment/errors.hpp"
#include "garment/file_util.hpp"
#include "garment/pipeline.hpp"

namespace fs = std::filesystem;
using namespace garment;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::Data: return 3;
        case ErrorCategory::Numerical: return 4;
    }
    return 1;
}

std::string one_line(std::string s) {
    for (char& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
        if (ch == '"') ch = '\'';
    }
    return s;
}

int fail(const char* category, const std::string& stage, const std::string& message, int code) {
    std::cerr << "garment: error category=" << category << " stage=" << (stage.empty() ? "-" : stage) << " message=\""
              << one_line(message) << "\"\n";
    return code;
}

struct Common {
    std::string config;
    std::string out;
    int jobs = 1;
};

PipelineManifest manifest_of(const Common& c) {
    return load_manifest(c.config, c.out.empty() ? std::nullopt : std::optional<fs::path>(c.out));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clothing deformation pipeline: synth, register, fit-subspace, regress, bake, eval-temporal, retarget"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress the per-stage timing line on stderr");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic sleeve sequence and its manifest");
    std::string synth_config;
    std::string synth_out;
    std::optional<std::uint64_t> seed;
    std::optional<int> frames;
    synth->add_option("--config", synth_config, "Synth parameter file (JSON); defaults are used when omitted")
        ->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Directory receiving the dataset and manifest.json")->required();
    synth->add_option("--seed", seed, "RNG seed; overrides the config file");
    synth->add_option("--frames", frames, "Frame count; overrides the config file")->check(CLI::PositiveNumber);

    auto with_manifest = [](CLI::App* sub, Common& c) {
        sub->add_option("--config", c.config, "Pipeline manifest (JSON)")->required();
        sub->add_option("--out", c.out, "Output directory; overrides the manifest's 'output'");
    };

    // register
    Common reg_c;
    bool sequential = false;
    auto* reg = app.add_subcommand("register", "Register the template to every scan and pose-normalize the results");
    with_manifest(reg, reg_c);
    reg->add_option("--jobs", reg_c.jobs, "Frames registered in parallel; outputs do not depend on it")
        ->check(CLI::PositiveNumber);
    reg->add_flag("--sequential", sequential, "Start frame i from frame i-1's result (implies --jobs 1)");

    // fit-subspace
    Common fit_c;
    std::optional<int> k;
    auto* fit = app.add_subcommand("fit-subspace", "Fit the PCA shape subspace to the pose-normalized registrations");
    with_manifest(fit, fit_c);
    fit->add_option("--k", k, "Retained components; overrides stages.subspace.k")->check(CLI::PositiveNumber);

    // regress
    Common rgr_c;
    RegressOptions rgr_o;
    auto* rgr = app.add_subcommand("regress", "Pose-to-shape linear regression");
    with_manifest(rgr, rgr_c);
    rgr->add_flag("--fit", rgr_o.fit, "Fit on the training frames and save the regressor");
    rgr->add_flag("--predict", rgr_o.predict, "Predict coefficients and posed meshes for every frame");
    rgr->add_flag("--eval", rgr_o.eval, "Report coefficient MSE and per-vertex RMS on train and held-out frames");

    // bake
    Common bake_c;
    std::optional<int> resolution, dilate_rings;
    std::optional<std::string> source;
    auto* bake = app.add_subcommand("bake", "Bake LR and HR normal maps (PNG + mask) per frame");
    with_manifest(bake, bake_c);
    bake->add_option("--jobs", bake_c.jobs, "Frames baked in parallel; outputs do not depend on it")->check(CLI::PositiveNumber);
    bake->add_option("--resolution", resolution, "Square map size; overrides stages.bake.resolution")->check(CLI::PositiveNumber);
    bake->add_option("--dilate", dilate_rings, "Texel rings grown around UV islands")->check(CLI::NonNegativeNumber);
    bake->add_option("--source", source, "Mesh the maps live on")->check(CLI::IsMember({"prediction", "registration"}));

    // eval-temporal
    Common ev_c;
    EvalTemporalOptions ev_o;
    std::string maps;
    auto* ev = app.add_subcommand("eval-temporal", "Data and temporal losses over a baked map sequence");
    with_manifest(ev, ev_c);
    ev->add_option("--maps", maps, "Maps manifest; default <out>/maps/maps.json")->check(CLI::ExistingFile);
    ev->add_option("--generated", ev_o.generated, "Map set treated as generated")->capture_default_str();
    ev->add_option("--target", ev_o.target, "Map set treated as ground truth")->capture_default_str();
    ev->add_option("--space", ev_o.space, "Normal space")->check(CLI::IsMember({"global", "tangent"}))->capture_default_str();

    // retarget
    Common rt_c;
    RetargetOptions rt_o;
    std::string rt_offsets, rt_poses;
    auto* rt = app.add_subcommand("retarget", "Replace the subspace mean by body offsets and re-pose the prediction");
    with_manifest(rt, rt_c);
    rt->add_option("--offsets", rt_offsets, "Per-vertex offsets, one 'dx dy dz' row per clothing vertex")
        ->required()
        ->check(CLI::ExistingFile);
    rt->add_option("--poses", rt_poses, "Pose sequence to drive; default the manifest's")->check(CLI::ExistingFile);

    std::string stage;
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", "", e.what(), 2);
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        if (*synth) {
            stage = "synth";
            SynthConfig sc;
            if (!synth_config.empty()) {
                nlohmann::json doc;
                try {
                    doc = nlohmann::json::parse(read_text_file(synth_config));
                } catch (const nlohmann::json::parse_error& e) {
                    throw ConfigError(synth_config + ": " + e.what());
                }
                sc = synth_config_from_json(doc);
            }
            if (seed) sc.seed = *seed;
            if (frames) sc.frames = *frames;
            sc.validate();
            const fs::path manifest = run_synth(sc, synth_out);
            std::cout << manifest.string() << '\n';
        } else if (*reg) {
            stage = "register";
            run_register(manifest_of(reg_c), {reg_c.jobs, sequential});
        } else if (*fit) {
            stage = "fit-subspace";
            PipelineManifest m = manifest_of(fit_c);
            if (k) m.subspace.k = *k;
            run_fit_subspace(m);
        } else if (*rgr) {
            stage = "regress";
            run_regress(manifest_of(rgr_c), rgr_o);
        } else if (*bake) {
            stage = "bake";
            PipelineManifest m = manifest_of(bake_c);
            if (resolution) m.bake.resolution = *resolution;
            if (dilate_rings) m.bake.dilate = *dilate_rings;
            if (source) m.bake.source = *source;
            run_bake(m, bake_c.jobs);
        } else if (*ev) {
            stage = "eval-temporal";
            if (!maps.empty()) ev_o.maps = maps;
            run_eval_temporal(manifest_of(ev_c), ev_o);
        } else if (*rt) {
            stage = "retarget";
            rt_o.offsets = rt_offsets;
            if (!rt_poses.empty()) rt_o.poses = rt_poses;
            run_retarget(manifest_of(rt_c), rt_o);
        }
    } catch (const Error& e) {
        return fail(category_name(e.category()), stage, e.what(), exit_code(e.category()));
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("data", stage, e.what(), 3);
    } catch (const std::exception& e) {
        return fail("numerical", stage, std::string("unexpected failure: ") + e.what(), 4);
    }
    if (!quiet) {
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "garment: %s finished in %.1f s\n", stage.c_str(), seconds);
    }
    return 0;
}
