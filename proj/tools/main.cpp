#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "usdiff/denoiser.hpp"
#include "usdiff/diffusion.hpp"
#include "usdiff/io.hpp"
#include "usdiff/metrics.hpp"
#include "usdiff/phantom.hpp"
#include "usdiff/verify.hpp"

namespace fs = std::filesystem;
using namespace usdiff;

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Configuration or manifest file");
    cmd->add_option("--set", flags.sets, "Override a config key, e.g. --set T=100")
        ->take_all();
    cmd->add_option("--seed", flags.seed, "Seed override");
    cmd->add_option("--out", flags.out, "Output directory override");
}

RunConfig resolve_config(const CommonFlags& flags, const std::string& command) {
    RunConfig cfg;
    if (!flags.config_path.empty()) {
        apply_config_pairs(cfg, load_config_file(flags.config_path));
    }
    KeyValueList overrides;
    for (const std::string& s : flags.sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw IoError("--set expects key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    apply_config_pairs(cfg, overrides);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out = *flags.out;
    cfg.command = command;
    cfg.validate();
    return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    const fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    fs::create_directories(dir / "tensors", ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create output directory: " + cfg.out);
    return dir;
}

std::string dims_of(const ImageGrid& g) {
    return std::to_string(g.height()) + "x" + std::to_string(g.width());
}

std::vector<int> log_spaced_timesteps(int T, int count) {
    std::vector<int> steps;
    if (count <= 0) return steps;
    if (count == 1) {
        steps.push_back(T);
        return steps;
    }
    for (int i = 0; i < count; ++i) {
        const double f = std::pow(static_cast<double>(T),
                                  static_cast<double>(i) / (count - 1));
        steps.push_back(std::clamp(static_cast<int>(std::lround(f)), 1, T));
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

std::vector<int> parse_timestep_list(const std::string& csv, int T) {
    std::vector<int> steps;
    std::string token;
    std::istringstream in(csv);
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        const int t = static_cast<int>(std::stoll(token));
        if (t < 0 || t > T) throw IoError("bmap_timesteps: " + token + " outside 0..T");
        steps.push_back(t);
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

BMapSpec bmap_spec_from(const RunConfig& cfg) {
    BMapSpec spec;
    spec.height = cfg.height;
    spec.width = cfg.width;
    spec.eps_b = cfg.eps_b;
    spec.gamma_kind = cfg.gamma_kind_enum();
    spec.cone = cfg.cone_spec();
    spec.outside_mode = cfg.outside_mode_enum();
    return spec;
}

PhantomSpec phantom_spec_from(const RunConfig& cfg) {
    PhantomSpec spec;
    spec.height = cfg.height;
    spec.width = cfg.width;
    spec.mu_att = cfg.phantom_mu_att;
    spec.background = cfg.phantom_background;
    spec.speckle_sigma = cfg.phantom_speckle_sigma;
    spec.cone = cfg.cone_spec();
    for (int i = 0; i < cfg.phantom_inclusions; ++i) {
        Inclusion inc;
        inc.center_row = cfg.height / 2.0;
        inc.center_col = cfg.width / 2.0;
        inc.radius_row = std::max(2.0, cfg.height / 8.0);
        inc.radius_col = std::max(2.0, cfg.width / 8.0);
        inc.echogenicity = (i % 2 == 0) ? 0.3 : 1.6;  // alternate hypo/hyper
        spec.inclusions.push_back(inc);
    }
    return spec;
}

std::vector<ImageGrid> load_or_generate_dataset(const RunConfig& cfg) {
    if (cfg.dataset.empty()) {
        return phantom_dataset(cfg.dataset_size, phantom_spec_from(cfg),
                               RngStream(cfg.seed).child(0xDA7A).key());
    }
    const auto files = list_image_files(cfg.dataset);
    if (files.empty()) throw IoError("dataset directory has no .pgm/.usdf images: " + cfg.dataset);
    std::vector<ImageGrid> images;
    images.reserve(files.size());
    for (const auto& f : files) {
        ImageGrid img = read_image_any(f);
        if (f.extension() == ".pgm") img = to_signed_range(img);  // PGM is [0,1] on disk
        images.push_back(std::move(img));
    }
    return images;
}

ImageGrid horizontal_contact_sheet(const std::vector<ImageGrid>& panels) {
    const int H = panels.front().height();
    const int W = panels.front().width();
    const int n = static_cast<int>(panels.size());
    ImageGrid sheet(H, n * W + (n - 1), 1.0);  // one white separator column
    for (int p = 0; p < n; ++p) {
        const int c0 = p * (W + 1);
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) sheet.at(r, c0 + c) = panels[static_cast<std::size_t>(p)].at(r, c);
        }
    }
    return sheet;
}

int cmd_bmaps(const RunConfig& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const ScheduleTable sched = alpha_schedule(cfg.alpha_kind_enum(), cfg.T);
    const BMapSpec spec = bmap_spec_from(cfg);
    const BMapStack stack = build_bmap_stack(sched, spec);

    std::vector<int> steps = cfg.bmap_timesteps.empty()
                                 ? log_spaced_timesteps(cfg.T, cfg.snapshots)
                                 : parse_timestep_list(cfg.bmap_timesteps, cfg.T);
    std::vector<std::string> files;
    const double lo_b = 1.0 - cfg.eps_b;
    const double lo_bar = std::pow(1.0 - cfg.eps_b, cfg.T);
    for (int t : steps) {
        const ImageGrid b = (t == 0) ? grid_fill(cfg.height, cfg.width, 1.0) : stack.B_at(t);
        const ImageGrid bar =
            (t == 0) ? grid_fill(cfg.height, cfg.width, 1.0) : stack.B_bar_at(t);
        const std::string tag = std::to_string(t);
        write_pgm(dir / ("bmap_t" + tag + ".pgm"), b, lo_b, 1.0);
        write_pgm(dir / ("bmap_bar_t" + tag + ".pgm"), bar, lo_bar, 1.0);
        write_grid_tensor(dir / "tensors" / ("bmap_t" + tag + ".usdf"), b);
        write_grid_tensor(dir / "tensors" / ("bmap_bar_t" + tag + ".usdf"), bar);
        files.push_back("bmap_t" + tag + ".pgm " + dims_of(b));
        files.push_back("bmap_bar_t" + tag + ".pgm " + dims_of(bar));
        files.push_back("tensors/bmap_t" + tag + ".usdf " + dims_of(b));
        files.push_back("tensors/bmap_bar_t" + tag + ".usdf " + dims_of(bar));
    }
    write_manifest(dir / "manifest.txt", cfg, files);
    std::cout << "bmaps: wrote " << files.size() << " files to " << dir.string() << "\n";
    return 0;
}

int cmd_forward(const RunConfig& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    ImageGrid x0;
    if (cfg.input.empty()) {
        RngStream rng = RngStream(cfg.seed).child(0xF0);
        x0 = phantom_generate(phantom_spec_from(cfg), rng);
    } else {
        x0 = read_image_any(cfg.input);
        if (fs::path(cfg.input).extension() == ".pgm") x0 = to_signed_range(x0);
    }

    RunConfig resolved = cfg;
    resolved.height = x0.height();
    resolved.width = x0.width();
    const ScheduleTable sched = alpha_schedule(resolved.alpha_kind_enum(), resolved.T);
    const BMapStack stack = build_bmap_stack(sched, bmap_spec_from(resolved));

    const std::vector<int> steps = log_spaced_timesteps(resolved.T, std::max(2, resolved.snapshots));
    std::vector<std::string> files;
    std::vector<ImageGrid> panels = {x0};
    const RngStream root = RngStream(resolved.seed).child(0xF1);
    for (int t : steps) {
        RngStream rng = root.child(static_cast<std::uint64_t>(t));
        const ForwardSample sample = forward_closed(x0, t, sched, stack, rng);
        const std::string name = "xt_t" + std::to_string(t) + ".usdf";
        write_grid_tensor(dir / "tensors" / name, sample.x_t);
        files.push_back("tensors/" + name + " " + dims_of(sample.x_t));
        panels.push_back(sample.x_t);
    }
    const ImageGrid sheet = horizontal_contact_sheet(panels);
    write_pgm(dir / "forward_sheet.pgm", sheet, -1.0, 1.0);
    files.push_back("forward_sheet.pgm " + dims_of(sheet));
    write_grid_tensor(dir / "tensors" / "x0.usdf", x0);
    files.push_back("tensors/x0.usdf " + dims_of(x0));

    write_manifest(dir / "manifest.txt", resolved, files);
    std::cout << "forward: wrote " << files.size() << " files to " << dir.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const std::vector<ImageGrid> dataset = load_or_generate_dataset(cfg);

    RunConfig resolved = cfg;
    resolved.height = dataset.front().height();
    resolved.width = dataset.front().width();

    TrainConfig tc;
    tc.T = resolved.T;
    tc.eps_b = resolved.eps_b;
    tc.alpha_kind = resolved.alpha_kind_enum();
    tc.gamma_kind = resolved.gamma_kind_enum();
    tc.cone = resolved.cone_spec();
    tc.outside_mode = resolved.outside_mode_enum();
    tc.batch_size = resolved.batch_size;
    tc.iterations = resolved.iterations;
    tc.lr = resolved.lr;
    tc.hidden_channels = resolved.hidden_channels;
    tc.seed = resolved.seed;

    const TrainResult result = train(tc, dataset);

    resolved.checkpoint = (dir / "checkpoint.ckpt").string();
    save_checkpoint(dir / "checkpoint.ckpt", result.params);
    write_loss_csv(dir / "loss.csv", result.loss_curve);

    std::vector<std::string> files = {
        "checkpoint.ckpt " + std::to_string(result.params.param_count()) + " params",
        "checkpoint.ckpt.manifest -",
        "loss.csv " + std::to_string(result.loss_curve.size()) + " rows",
    };
    write_manifest(dir / "manifest.txt", resolved, files);
    const double final_loss = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
    std::cout << "train: " << result.loss_curve.size() << " iterations, final loss "
              << format_double(final_loss) << ", checkpoint at "
              << (dir / "checkpoint.ckpt").string() << "\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    if (cfg.checkpoint.empty()) throw IoError("sample: no checkpoint given");
    const DenoiserParams params = load_checkpoint(cfg.checkpoint);
    if (params.height() != cfg.height || params.width() != cfg.width ||
        params.timesteps() != cfg.T) {
        throw IoError("sample: checkpoint shape " + std::to_string(params.height()) + "x" +
                      std::to_string(params.width()) + " T=" + std::to_string(params.timesteps()) +
                      " conflicts with config");
    }
    const ScheduleTable sched = alpha_schedule(cfg.alpha_kind_enum(), cfg.T);
    const BMapStack stack = build_bmap_stack(sched, bmap_spec_from(cfg));
    const EpsPredictor predictor = [&params](const ImageGrid& x, int t) {
        return denoiser_forward(params, x, t);
    };

    std::vector<std::string> files;
    // Observers see reverse states x_t for t = T-1 .. 0.
    const std::vector<int> snap_steps =
        cfg.T >= 2 ? log_spaced_timesteps(cfg.T - 1, cfg.snapshots) : std::vector<int>{};
    const std::set<int> snap_set(snap_steps.begin(), snap_steps.end());
    const RngStream root = RngStream(cfg.seed).child(0x5A);
    for (int i = 0; i < cfg.n_samples; ++i) {
        RngStream rng = root.child(static_cast<std::uint64_t>(i));
        SampleObserver observer = nullptr;
        if (i == 0 && !snap_set.empty()) {
            observer = [&](int t, const ImageGrid& state) {
                if (snap_set.count(t) == 0) return;
                const std::string name = "snapshot_t" + std::to_string(t);
                write_pgm(dir / (name + ".pgm"), state, -1.0, 1.0);
                write_grid_tensor(dir / "tensors" / (name + ".usdf"), state);
                files.push_back(name + ".pgm " + dims_of(state));
                files.push_back("tensors/" + name + ".usdf " + dims_of(state));
            };
        }
        const ImageGrid sample = ancestral_sample(predictor, sched, stack, rng, observer);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04d", i);
        write_pgm(dir / (std::string(name) + ".pgm"), sample, -1.0, 1.0);
        write_grid_tensor(dir / "tensors" / (std::string(name) + ".usdf"), sample);
        files.push_back(std::string(name) + ".pgm " + dims_of(sample));
        files.push_back("tensors/" + std::string(name) + ".usdf " + dims_of(sample));
    }
    write_manifest(dir / "manifest.txt", cfg, files);
    std::cout << "sample: wrote " << cfg.n_samples << " samples to " << dir.string() << "\n";
    return 0;
}

struct MetricSummary {
    double mean = 0.0, stddev = 0.0, range = 0.0;
};

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = values.size() > 1 ? std::sqrt(sq / (static_cast<double>(values.size()) - 1.0)) : 0.0;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    s.range = *mx - *mn;
    return s;
}

int cmd_eval(const RunConfig& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const auto files_a = list_image_files(cfg.eval_dir_a);
    const auto files_b = list_image_files(cfg.eval_dir_b);
    if (files_a.empty() || files_b.empty()) {
        throw IoError("eval: both directories must contain .pgm/.usdf images");
    }

    std::map<std::string, fs::path> by_name_b;
    for (const auto& f : files_b) by_name_b[f.filename().string()] = f;

    std::vector<double> psnr_values, ssim_values;
    for (const auto& fa : files_a) {
        const auto it = by_name_b.find(fa.filename().string());
        if (it == by_name_b.end()) continue;
        const ImageGrid a = read_image_any(fa);
        const ImageGrid b = read_image_any(it->second);
        psnr_values.push_back(psnr(a, b, 1.0));
        ssim_values.push_back(ssim(a, b));
    }

    auto load_all = [](const std::vector<fs::path>& files) {
        std::vector<ImageGrid> images;
        images.reserve(files.size());
        for (const auto& f : files) images.push_back(read_image_any(f));
        return images;
    };
    FeatureStats stats_a, stats_b;
    std::string frechet_label;
    if (cfg.embedder == "external-file") {
        if (cfg.features_a.empty() || cfg.features_b.empty()) {
            throw IoError("eval: embedder=external-file needs features_a and features_b");
        }
        auto load_feats = [](const std::string& path, std::size_t n_images) {
            const TensorData t = read_tensor(path);
            if (t.dims.size() != 2) throw IoError(path + ": feature file must be rank 2");
            if (t.dims[0] != n_images) {
                throw IoError(path + ": feature rows do not match image count");
            }
            std::vector<double> rows(t.values.begin(), t.values.end());
            return feature_stats_from_matrix(static_cast<int>(t.dims[0]),
                                             static_cast<int>(t.dims[1]), rows);
        };
        stats_a = load_feats(cfg.features_a, files_a.size());
        stats_b = load_feats(cfg.features_b, files_b.size());
        frechet_label = "frechet_external";
    } else {
        stats_a = feature_embed(load_all(files_a));
        stats_b = feature_embed(load_all(files_b));
        frechet_label = "frechet_pixel_stat";
    }
    const double frechet = frechet_distance(stats_a, stats_b);

    std::string report;
    report += "images_a = " + std::to_string(files_a.size()) + "\n";
    report += "images_b = " + std::to_string(files_b.size()) + "\n";
    report += "paired_count = " + std::to_string(psnr_values.size()) + "\n";
    if (psnr_values.empty()) {
        report += "paired_metrics_error = no filename overlap between directories\n";
    } else {
        const MetricSummary ps = summarize(psnr_values);
        const MetricSummary ss = summarize(ssim_values);
        report += "psnr_mean = " + format_double(ps.mean) + "\n";
        report += "psnr_std = " + format_double(ps.stddev) + "\n";
        report += "psnr_range = " + format_double(ps.range) + "\n";
        report += "ssim_mean = " + format_double(ss.mean) + "\n";
        report += "ssim_std = " + format_double(ss.stddev) + "\n";
        report += "ssim_range = " + format_double(ss.range) + "\n";
    }
    report += frechet_label + " = " + format_double(frechet) + "\n";

    std::ofstream out(dir / "report.txt", std::ios::binary);
    out << report;
    out.close();
    write_manifest(dir / "manifest.txt", cfg, {"report.txt -"});
    std::cout << report;
    return 0;
}

int cmd_verify(const RunConfig& cfg, bool corrupt_posterior, int mc_samples) {
    const fs::path dir = prepare_out_dir(cfg);
    VerifyConfig vc;
    vc.seed = cfg.seed;
    vc.mc_samples = mc_samples;
    vc.corruption = corrupt_posterior ? VerifyCorruption::PosteriorMu : VerifyCorruption::None;
    const std::vector<CheckResult> results = run_verification(vc);
    const std::string report = render_verify_report(results);

    std::ofstream out(dir / "report.txt", std::ios::binary);
    out << report;
    out.close();
    write_manifest(dir / "manifest.txt", cfg, {"report.txt -"});
    std::cout << report;
    return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Depth-weighted diffusion for ultrasound-like image synthesis"};
    app.require_subcommand(1);

    CommonFlags bmaps_flags, forward_flags, train_flags, sample_flags, eval_flags, verify_flags;
    std::string forward_input, sample_checkpoint, eval_dir_a, eval_dir_b;
    bool corrupt_posterior = false;
    int verify_mc_samples = 100000;

    CLI::App* bmaps = app.add_subcommand("bmaps", "Emit B-maps and cumulative products");
    add_common_flags(bmaps, bmaps_flags);

    CLI::App* forward = app.add_subcommand("forward", "Noise an image through the forward process");
    add_common_flags(forward, forward_flags);
    forward->add_option("input", forward_input, "Input image (.pgm or .usdf)");

    CLI::App* train = app.add_subcommand("train", "Train the toy denoiser");
    add_common_flags(train, train_flags);

    CLI::App* sample = app.add_subcommand("sample", "Draw ancestral samples from a checkpoint");
    add_common_flags(sample, sample_flags);
    sample->add_option("checkpoint", sample_checkpoint, "Checkpoint file (.ckpt)");

    CLI::App* eval = app.add_subcommand("eval", "Compare two image directories");
    add_common_flags(eval, eval_flags);
    eval->add_option("dir_a", eval_dir_a, "First image directory")->required();
    eval->add_option("dir_b", eval_dir_b, "Second image directory")->required();

    CLI::App* verify = app.add_subcommand("verify", "Run the numerical oracle suite");
    add_common_flags(verify, verify_flags);
    verify->add_flag("--corrupt-posterior-mu", corrupt_posterior)->group("");
    verify->add_option("--mc-samples", verify_mc_samples)->group("");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bmaps->parsed()) return cmd_bmaps(resolve_config(bmaps_flags, "bmaps"));
        if (forward->parsed()) {
            RunConfig cfg = resolve_config(forward_flags, "forward");
            if (!forward_input.empty()) cfg.input = forward_input;
            return cmd_forward(cfg);
        }
        if (train->parsed()) return cmd_train(resolve_config(train_flags, "train"));
        if (sample->parsed()) {
            RunConfig cfg = resolve_config(sample_flags, "sample");
            if (!sample_checkpoint.empty()) cfg.checkpoint = sample_checkpoint;
            return cmd_sample(cfg);
        }
        if (eval->parsed()) {
            RunConfig cfg = resolve_config(eval_flags, "eval");
            cfg.eval_dir_a = eval_dir_a;
            cfg.eval_dir_b = eval_dir_b;
            return cmd_eval(cfg);
        }
        if (verify->parsed()) {
            return cmd_verify(resolve_config(verify_flags, "verify"), corrupt_posterior,
                              verify_mc_samples);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
