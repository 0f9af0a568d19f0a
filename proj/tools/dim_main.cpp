// dim: train / sample / flops / check driver over the C API.
// Exit codes: 0 ok, 1 check or runtime failure, 2 usage error.

#include <cinttypes>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "dim.h"

namespace {

int status_to_exit(dim_status st) {
    if (st == DIM_OK) return 0;
    std::fprintf(stderr, "error: %s\n", dim_last_error());
    return st == DIM_ERR_INVALID_ARGUMENT ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DiM: selective state-space diffusion at desk scale"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dim_version()));

    // train
    auto* train = app.add_subcommand("train", "run a training loop from a config file");
    std::string train_config, resume;
    bool quiet = false;
    train->add_option("-c,--config", train_config, "run config file")->required();
    train->add_option("--resume", resume, "checkpoint to resume from");
    train->add_flag("-q,--quiet", quiet, "suppress progress lines");

    // sample
    auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
    std::string ckpt, out_dir = "samples";
    int count = 8, klass = -1, steps = 250;
    double cfg_scale = 1.5;
    std::uint64_t seed = 0;
    bool latents_only = false, no_ema = false, uncond = false;
    sample->add_option("checkpoint", ckpt, "checkpoint file (.dimc)")->required();
    sample->add_option("-o,--out", out_dir, "output directory");
    sample->add_option("-n,--count", count, "number of samples");
    sample->add_option("--class", klass, "class label");
    sample->add_flag("--uncond", uncond, "unconditional sampling");
    sample->add_option("--cfg-scale", cfg_scale, "guidance scale (1.0 = off)");
    sample->add_option("--steps", steps, "sampling steps");
    sample->add_option("--seed", seed, "rng seed");
    sample->add_flag("--latents-only", latents_only, "skip PPM output");
    sample->add_flag("--no-ema", no_ema, "use raw weights instead of EMA");

    // flops
    auto* flops = app.add_subcommand("flops", "analytic operation-count report");
    std::string arch = "dim", size = "XL", resolutions = "256,512,1024,2048",
                csv_path;
    int patch = 2;
    flops->add_option("--arch", arch, "dim | dit | diffussm | all");
    flops->add_option("--size", size, "S | B | L | XL");
    flops->add_option("--patch", patch, "patch size (2, 4, 8)");
    flops->add_option("--resolutions", resolutions, "comma-separated image sizes");
    flops->add_option("--csv", csv_path, "also write the table as CSV");

    // check
    app.add_subcommand("check", "run the verification suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit 0, usage errors exit 2
    }

    if (train->parsed()) {
        return status_to_exit(dim_train_run(
            train_config.c_str(), resume.empty() ? nullptr : resume.c_str(),
            quiet ? 0 : 1));
    }

    if (sample->parsed()) {
        if (uncond) klass = -1;
        return status_to_exit(dim_sample_run(ckpt.c_str(), out_dir.c_str(),
                                             count, klass, cfg_scale, steps,
                                             seed, latents_only ? 1 : 0,
                                             no_ema ? 0 : 1));
    }

    if (flops->parsed()) {
        if (arch == "all") arch = "dim,dit,diffussm";
        char* markdown = nullptr;
        dim_status st = dim_flops_report(arch.c_str(), size.c_str(), patch,
                                         resolutions.c_str(),
                                         csv_path.empty() ? nullptr : csv_path.c_str(),
                                         &markdown);
        if (st != DIM_OK) return status_to_exit(st);
        std::fputs(markdown, stdout);
        dim_string_free(markdown);
        return 0;
    }

    // check
    int failures = dim_check_run();
    if (failures < 0) {
        std::fprintf(stderr, "error: %s\n", dim_last_error());
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
