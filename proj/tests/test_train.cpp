#include <filesystem>
#include <fstream>

#include "dim/train.hpp"
#include "doctest.h"

using namespace dim;
namespace fs = std::filesystem;

namespace {

RunConfig toy_run(const std::string& out_name) {
    RunConfig cfg;
    cfg.model_size = "micro";
    cfg.layers = 2;
    cfg.hidden = 8;
    cfg.patch = 4;
    cfg.in_channels = 1;
    cfg.num_classes = 2;
    cfg.state_n = 4;
    cfg.conv_k = 3;
    cfg.timesteps = 20;
    cfg.batch_size = 2;
    cfg.steps = 10;
    cfg.learning_rate = 1e-3;
    cfg.log_every = 5;
    cfg.checkpoint_every = 5;
    cfg.dataset = "two_mode_latent";
    cfg.seed = 3;
    cfg.out_dir = (fs::temp_directory_path() / out_name).string();
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("adam: converges on a known quadratic via the model head") {
    // minimize ||head.b - target||^2 through the optimizer plumbing
    ModelConfig mc;
    mc.layers = 1;
    mc.hidden_d = 8;
    mc.patch = 2;
    mc.in_channels = 1;
    mc.ssm_state_n = 2;
    mc.conv_k = 2;
    mc.time_freq_dim = 8;
    Rng rng(1);
    DimModel m = build_model(mc, rng);
    AdamState st = make_adam(m);
    const double target = 3.0;
    for (int i = 0; i < 2000; ++i) {
        DimModel g = model_zeros_like(m);
        for (std::size_t j = 0; j < m.head.b.size(); ++j) {
            g.head.b[j] = 2.0 * (m.head.b[j] - target);
        }
        adam_step(m, g, st, 0.01, 0.0, 0.9, 0.999, 1e-8);
    }
    for (std::size_t j = 0; j < m.head.b.size(); ++j) {
        CHECK(m.head.b[j] == doctest::Approx(target).epsilon(1e-3));
    }
}

TEST_CASE("training smoke run: loss drops from the unit baseline") {
    RunConfig cfg = toy_run("dim_train_smoke");
    cfg.steps = 200;
    cfg.batch_size = 4;
    cfg.learning_rate = 2e-3;
    cfg.checkpoint_every = 200;
    TrainResult r = run_training(cfg);
    CHECK(r.steps_done == 200);
    // untrained baseline is E||eps||^2 = 1; the averaged tail must clearly move
    CHECK(r.mean_loss_last100 < 0.9);
    CHECK(fs::exists(cfg.out_dir + "/metrics.jsonl"));
    CHECK(fs::exists(r.final_checkpoint));

    // metrics are line-delimited json-ish records
    std::string metrics = slurp(cfg.out_dir + "/metrics.jsonl");
    CHECK(metrics.find("\"loss\":") != std::string::npos);
    CHECK(metrics.find("\"grad_norm\":") != std::string::npos);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("checkpoint resume: trajectory is bit-identical (single thread)") {
    // uninterrupted 10-step run, checkpoints at 5 and 10
    RunConfig cfg = toy_run("dim_train_resume");
    TrainResult full = run_training(cfg);
    const std::string full_final = slurp(full.final_checkpoint);

    // simulate an interrupt: keep the step-5 checkpoint, wipe the run dir,
    // resume under the identical config
    const std::string mid_copy =
        (fs::temp_directory_path() / "dim_resume_mid.dimc").string();
    fs::copy_file(cfg.out_dir + "/checkpoint_5.dimc", mid_copy,
                  fs::copy_options::overwrite_existing);
    fs::remove_all(cfg.out_dir);

    TrainResult resumed = run_training(cfg, mid_copy);
    CHECK(resumed.steps_done == 10);
    const std::string resumed_final = slurp(resumed.final_checkpoint);

    CHECK(full_final.size() == resumed_final.size());
    CHECK(full_final == resumed_final);

    fs::remove(mid_copy);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("resume rejects a mismatched config") {
    RunConfig cfg = toy_run("dim_train_mismatch");
    cfg.steps = 5;
    TrainResult r = run_training(cfg);
    RunConfig other = cfg;
    other.learning_rate = 5e-3;
    other.steps = 10;
    CHECK_THROWS_AS(run_training(other, r.final_checkpoint), std::invalid_argument);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("training fails before writing state on a bad dataset/model pair") {
    RunConfig cfg = toy_run("dim_train_badpair");
    cfg.in_channels = 3;  // two_mode_latent is single channel
    CHECK_THROWS_AS(run_training(cfg), std::invalid_argument);
    CHECK_FALSE(fs::exists(cfg.out_dir));
}

TEST_CASE("sampling runner: seeded byte-stable outputs, ema fallback warning") {
    RunConfig cfg = toy_run("dim_train_sample");
    cfg.steps = 5;
    TrainResult r = run_training(cfg);

    SampleRunOptions so;
    so.count = 2;
    so.steps = 10;
    so.cfg_scale = 1.5;
    so.label = 0;
    so.seed = 5;
    const std::string out1 = (fs::temp_directory_path() / "dim_sample_a").string();
    const std::string out2 = (fs::temp_directory_path() / "dim_sample_b").string();
    run_sampling(r.final_checkpoint, out1, so);
    run_sampling(r.final_checkpoint, out2, so);
    CHECK(slurp(out1 + "/samples.dimt") == slurp(out2 + "/samples.dimt"));
    CHECK(slurp(out1 + "/samples.ppm") == slurp(out2 + "/samples.ppm"));

    // cfg_scale = 1 equals the conditional-only path (bitwise on disk)
    SampleRunOptions s1 = so;
    s1.cfg_scale = 1.0;
    const std::string out3 = (fs::temp_directory_path() / "dim_sample_c").string();
    run_sampling(r.final_checkpoint, out3, s1);
    // and differs from the guided run
    CHECK(slurp(out3 + "/samples.dimt") != slurp(out1 + "/samples.dimt"));

    // strip the EMA records to exercise the fallback notice
    Checkpoint ck = load_checkpoint(r.final_checkpoint);
    std::map<std::string, const Tensor*> tensors;
    for (const auto& [name, t] : ck.tensors) {
        if (name.rfind("ema.", 0) != 0) tensors[name] = &t;
    }
    const std::string stripped =
        (fs::temp_directory_path() / "dim_stripped.dimc").string();
    save_checkpoint(stripped, ck.config, ck.step, ck.rng_state, ck.clamp_z0,
                    tensors);
    std::ostringstream log;
    const std::string out4 = (fs::temp_directory_path() / "dim_sample_d").string();
    run_sampling(stripped, out4, so, &log);
    CHECK(log.str().find("warning") != std::string::npos);
    CHECK(log.str().find("EMA") != std::string::npos);

    for (const auto& p : {out1, out2, out3, out4}) fs::remove_all(p);
    fs::remove(stripped);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("video sampling writes per-frame ppm files") {
    RunConfig cfg = toy_run("dim_train_video");
    cfg.dataset = "moving_bar_video";
    cfg.frames = 8;
    cfg.patch = 4;
    cfg.hidden = 8;
    cfg.steps = 2;
    cfg.batch_size = 1;
    cfg.checkpoint_every = 2;
    TrainResult r = run_training(cfg);

    SampleRunOptions so;
    so.count = 1;
    so.steps = 4;
    so.seed = 1;
    const std::string out = (fs::temp_directory_path() / "dim_sample_video").string();
    run_sampling(r.final_checkpoint, out, so);
    CHECK(fs::exists(out + "/samples.dimt"));
    CHECK(fs::exists(out + "/sample_000/frame_00.ppm"));
    CHECK(fs::exists(out + "/sample_000/frame_07.ppm"));
    fs::remove_all(out);
    fs::remove_all(cfg.out_dir);
}
