#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "usdiff/grid.hpp"
#include "usdiff/schedule.hpp"

namespace usdiff {

// "USDF" tensor container, version 1:
//   magic "USDF" | version u8 (=1) | rank u8 | dims u32-LE each |
//   payload float32-LE, row-major.
struct TensorData {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

void write_tensor(const std::filesystem::path& path, const std::vector<std::uint32_t>& dims,
                  const std::vector<float>& values);
TensorData read_tensor(const std::filesystem::path& path);

// Grid <-> tensor shims (file precision is 32-bit by design).
void write_grid_tensor(const std::filesystem::path& path, const ImageGrid& grid);
ImageGrid read_grid_tensor(const std::filesystem::path& path);

// 8-bit binary PGM (P5, maxval 255). Values map linearly from [lo, hi] to
// [0, 255], clamped; the map is monotone.
void write_pgm(const std::filesystem::path& path, const ImageGrid& grid, double lo, double hi);
// Returns values in [0, 1].
ImageGrid read_pgm(const std::filesystem::path& path);

// Loads a .pgm (to [0,1]) or rank-2 .usdf file as a grid.
ImageGrid read_image_any(const std::filesystem::path& path);

// Flat `key = value` configuration with `#` comments. Unknown keys are
// rejected; `file.*` entries (manifest bookkeeping) and `command` are
// recognized and carried through untouched.
struct RunConfig {
    std::string command;

    int T = 200;
    double eps_b = 0.04;
    std::string gamma_kind = "square-root";  // square-root | linear
    std::string alpha_kind = "cosine";       // cosine | linear
    int height = 32;
    int width = 32;
    int batch_size = 4;
    double lr = 1e-4;
    int iterations = 2000;
    std::uint64_t seed = 0;
    int hidden_channels = 8;

    bool cone = false;
    double cone_apex_row = -8.0;
    double cone_apex_col = 15.5;
    double cone_half_angle_deg = 30.0;
    double cone_near_radius = 10.0;
    std::string outside_cone_mode = "gamma";  // gamma | one | row-value

    std::string dataset;  // directory of .pgm/.usdf images; empty = phantoms
    int dataset_size = 64;
    std::string out = "out";
    std::string input;       // forward: source image; empty = generated phantom
    std::string checkpoint;  // sample: denoiser checkpoint
    int n_samples = 16;
    int snapshots = 8;

    std::string embedder = "pixel-stat";  // pixel-stat | external-file
    std::string features_a;
    std::string features_b;
    std::string eval_dir_a;
    std::string eval_dir_b;

    double phantom_mu_att = 0.05;
    double phantom_background = 0.65;
    int phantom_inclusions = 3;
    double phantom_speckle_sigma = 1.0;

    std::string bmap_timesteps;  // comma-separated; empty = log-spaced set

    AlphaKind alpha_kind_enum() const;
    GammaKind gamma_kind_enum() const;
    OutsideConeMode outside_mode_enum() const;
    std::optional<ConeSpec> cone_spec() const;
    void validate() const;
};

// key=value pairs in file order (file.* entries preserved).
using KeyValueList = std::vector<std::pair<std::string, std::string>>;

KeyValueList parse_config_text(const std::string& text);
KeyValueList load_config_file(const std::filesystem::path& path);

// Applies pairs onto cfg; throws on unknown keys or unparsable values.
void apply_config_pairs(RunConfig& cfg, const KeyValueList& pairs);

// Serializes the fully resolved config (fixed key order) plus one
// `file.N = name dims` line per emitted artifact. The manifest is itself a
// valid config file, so a run can be reproduced from it directly.
void write_manifest(const std::filesystem::path& path, const RunConfig& cfg,
                    const std::vector<std::string>& file_entries);

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses);

// Repeatable shortest-roundtrip formatting used in all text outputs.
std::string format_double(double v);

class DenoiserParams;

// Checkpoint: concatenated USDF records (one per parameter tensor, in the
// fixed tensor order) at `path`, plus a `<path>.manifest` text file listing
// the net dimensions and each tensor's name and shape.
void save_checkpoint(const std::filesystem::path& path, const DenoiserParams& params);
DenoiserParams load_checkpoint(const std::filesystem::path& path);

std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir);

}  // namespace usdiff
