#include "usdiff/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "usdiff/denoiser.hpp"

namespace usdiff {

namespace {

constexpr char kMagic[4] = {'U', 'S', 'D', 'F'};
constexpr std::uint8_t kVersion = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string encode_tensor(const std::vector<std::uint32_t>& dims,
                          const std::vector<float>& values) {
    std::uint64_t expected = 1;
    for (std::uint32_t d : dims) expected *= d;
    if (expected != values.size()) {
        throw IoError("tensor: payload length does not match dims product");
    }
    std::string out;
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kVersion));
    out.push_back(static_cast<char>(dims.size()));
    for (std::uint32_t d : dims) put_u32_le(out, d);
    for (float f : values) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32_le(out, bits);
    }
    return out;
}

TensorData decode_tensor(std::istream& in, const std::string& context) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError(context + ": bad magic (not a USDF tensor)");
    }
    char version = 0, rank = 0;
    if (!in.get(version) || static_cast<std::uint8_t>(version) != kVersion) {
        throw IoError(context + ": unsupported version");
    }
    if (!in.get(rank) || rank < 0) throw IoError(context + ": bad rank");

    TensorData t;
    std::uint64_t count = 1;
    for (int i = 0; i < rank; ++i) {
        unsigned char buf[4];
        if (!in.read(reinterpret_cast<char*>(buf), 4)) throw IoError(context + ": truncated dims");
        const std::uint32_t d = get_u32_le(buf);
        t.dims.push_back(d);
        count *= d;
    }
    t.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        unsigned char buf[4];
        if (!in.read(reinterpret_cast<char*>(buf), 4)) {
            throw IoError(context + ": truncated payload");
        }
        const std::uint32_t bits = get_u32_le(buf);
        float f;
        std::memcpy(&f, &bits, 4);
        t.values[i] = f;
    }
    return t;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw IoError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw IoError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw IoError("config: key '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw IoError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const std::vector<std::uint32_t>& dims,
                  const std::vector<float>& values) {
    write_file(path, encode_tensor(dims, values));
}

TensorData read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    return decode_tensor(in, path.string());
}

void write_grid_tensor(const std::filesystem::path& path, const ImageGrid& grid) {
    std::vector<float> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = static_cast<float>(grid[i]);
    write_tensor(path,
                 {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())},
                 values);
}

ImageGrid read_grid_tensor(const std::filesystem::path& path) {
    const TensorData t = read_tensor(path);
    if (t.dims.size() != 2) throw IoError(path.string() + ": expected a rank-2 tensor");
    ImageGrid grid(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = t.values[i];
    return grid;
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& grid, double lo, double hi) {
    if (!(hi > lo)) throw ParameterError("write_pgm: hi must exceed lo");
    std::string bytes;
    bytes += "P5\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n255\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = (grid[i] - lo) / (hi - lo);
        const int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        bytes.push_back(static_cast<char>(byte));
    }
    write_file(path, bytes);
}

ImageGrid read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError(path.string() + ": only binary P5 PGM is supported");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (!in || w < 1 || h < 1 || maxval != 255) {
        throw IoError(path.string() + ": bad PGM header");
    }
    in.get();  // the single whitespace after maxval
    std::vector<char> raw(static_cast<std::size_t>(w) * h);
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
        throw IoError(path.string() + ": truncated PGM payload");
    }
    ImageGrid grid(h, w);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = static_cast<unsigned char>(raw[i]) / 255.0;
    }
    return grid;
}

ImageGrid read_image_any(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".usdf") return read_grid_tensor(path);
    throw IoError(path.string() + ": unsupported image extension (expect .pgm or .usdf)");
}

std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError(dir.string() + ": not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".usdf") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

AlphaKind RunConfig::alpha_kind_enum() const {
    if (alpha_kind == "cosine") return AlphaKind::Cosine;
    if (alpha_kind == "linear") return AlphaKind::Linear;
    throw IoError("config: alpha_kind must be cosine or linear");
}

GammaKind RunConfig::gamma_kind_enum() const {
    if (gamma_kind == "square-root") return GammaKind::SquareRoot;
    if (gamma_kind == "linear") return GammaKind::Linear;
    throw IoError("config: gamma_kind must be square-root or linear");
}

OutsideConeMode RunConfig::outside_mode_enum() const {
    if (outside_cone_mode == "gamma") return OutsideConeMode::Gamma;
    if (outside_cone_mode == "one") return OutsideConeMode::One;
    if (outside_cone_mode == "row-value") return OutsideConeMode::RowValue;
    throw IoError("config: outside_cone_mode must be gamma, one or row-value");
}

std::optional<ConeSpec> RunConfig::cone_spec() const {
    if (!cone) return std::nullopt;
    ConeSpec c;
    c.apex_row = cone_apex_row;
    c.apex_col = cone_apex_col;
    c.half_angle_deg = cone_half_angle_deg;
    c.near_radius = cone_near_radius;
    return c;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw IoError("config: " + msg); };
    if (T < 1) fail("T must be >= 1");
    if (!(eps_b > 0.0 && eps_b < 1.0)) fail("eps_b must lie in (0,1)");
    if (height < 1 || width < 1) fail("height/width must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (!(lr > 0.0)) fail("lr must be > 0");
    if (iterations < 0) fail("iterations must be >= 0");
    if (hidden_channels < 4) fail("hidden_channels must be >= 4");
    if (cone && !(cone_half_angle_deg > 0.0 && cone_half_angle_deg < 90.0)) {
        fail("cone_half_angle_deg must lie in (0,90)");
    }
    if (cone && cone_near_radius < 0.0) fail("cone_near_radius must be >= 0");
    if (dataset_size < 1) fail("dataset_size must be >= 1");
    if (n_samples < 0) fail("n_samples must be >= 0");
    if (snapshots < 0) fail("snapshots must be >= 0");
    if (phantom_mu_att < 0.0) fail("phantom_mu_att must be >= 0");
    if (!(phantom_background > 0.0 && phantom_background <= 1.0)) {
        fail("phantom_background must lie in (0,1]");
    }
    if (phantom_inclusions < 0) fail("phantom_inclusions must be >= 0");
    if (!(phantom_speckle_sigma > 0.0)) fail("phantom_speckle_sigma must be > 0");
    if (embedder != "pixel-stat" && embedder != "external-file") {
        fail("embedder must be pixel-stat or external-file");
    }
    alpha_kind_enum();
    gamma_kind_enum();
    outside_mode_enum();
}

KeyValueList parse_config_text(const std::string& text) {
    KeyValueList pairs;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw IoError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return pairs;
}

KeyValueList load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_config_pairs(RunConfig& cfg, const KeyValueList& pairs) {
    for (const auto& [key, value] : pairs) {
        if (key.rfind("file.", 0) == 0) continue;  // manifest bookkeeping
        if (key == "command") cfg.command = value;
        else if (key == "T") cfg.T = static_cast<int>(parse_int(key, value));
        else if (key == "eps_b") cfg.eps_b = parse_real(key, value);
        else if (key == "gamma_kind") cfg.gamma_kind = value;
        else if (key == "alpha_kind") cfg.alpha_kind = value;
        else if (key == "height") cfg.height = static_cast<int>(parse_int(key, value));
        else if (key == "width") cfg.width = static_cast<int>(parse_int(key, value));
        else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
        else if (key == "lr") cfg.lr = parse_real(key, value);
        else if (key == "iterations") cfg.iterations = static_cast<int>(parse_int(key, value));
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "hidden_channels") cfg.hidden_channels = static_cast<int>(parse_int(key, value));
        else if (key == "cone") cfg.cone = parse_bool(key, value);
        else if (key == "cone_apex_row") cfg.cone_apex_row = parse_real(key, value);
        else if (key == "cone_apex_col") cfg.cone_apex_col = parse_real(key, value);
        else if (key == "cone_half_angle_deg") cfg.cone_half_angle_deg = parse_real(key, value);
        else if (key == "cone_near_radius") cfg.cone_near_radius = parse_real(key, value);
        else if (key == "outside_cone_mode") cfg.outside_cone_mode = value;
        else if (key == "dataset") cfg.dataset = value;
        else if (key == "dataset_size") cfg.dataset_size = static_cast<int>(parse_int(key, value));
        else if (key == "out") cfg.out = value;
        else if (key == "input") cfg.input = value;
        else if (key == "checkpoint") cfg.checkpoint = value;
        else if (key == "n_samples") cfg.n_samples = static_cast<int>(parse_int(key, value));
        else if (key == "snapshots") cfg.snapshots = static_cast<int>(parse_int(key, value));
        else if (key == "embedder") cfg.embedder = value;
        else if (key == "features_a") cfg.features_a = value;
        else if (key == "features_b") cfg.features_b = value;
        else if (key == "eval_dir_a") cfg.eval_dir_a = value;
        else if (key == "eval_dir_b") cfg.eval_dir_b = value;
        else if (key == "phantom_mu_att") cfg.phantom_mu_att = parse_real(key, value);
        else if (key == "phantom_background") cfg.phantom_background = parse_real(key, value);
        else if (key == "phantom_inclusions") cfg.phantom_inclusions = static_cast<int>(parse_int(key, value));
        else if (key == "phantom_speckle_sigma") cfg.phantom_speckle_sigma = parse_real(key, value);
        else if (key == "bmap_timesteps") cfg.bmap_timesteps = value;
        else throw IoError("config: unknown key '" + key + "'");
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg,
                    const std::vector<std::string>& file_entries) {
    std::string text;
    auto put = [&text](const std::string& key, const std::string& value) {
        text += key + " = " + value + "\n";
    };
    put("command", cfg.command);
    put("T", std::to_string(cfg.T));
    put("eps_b", format_double(cfg.eps_b));
    put("gamma_kind", cfg.gamma_kind);
    put("alpha_kind", cfg.alpha_kind);
    put("height", std::to_string(cfg.height));
    put("width", std::to_string(cfg.width));
    put("batch_size", std::to_string(cfg.batch_size));
    put("lr", format_double(cfg.lr));
    put("iterations", std::to_string(cfg.iterations));
    put("seed", std::to_string(cfg.seed));
    put("hidden_channels", std::to_string(cfg.hidden_channels));
    put("cone", cfg.cone ? "true" : "false");
    put("cone_apex_row", format_double(cfg.cone_apex_row));
    put("cone_apex_col", format_double(cfg.cone_apex_col));
    put("cone_half_angle_deg", format_double(cfg.cone_half_angle_deg));
    put("cone_near_radius", format_double(cfg.cone_near_radius));
    put("outside_cone_mode", cfg.outside_cone_mode);
    put("dataset", cfg.dataset);
    put("dataset_size", std::to_string(cfg.dataset_size));
    put("out", cfg.out);
    put("input", cfg.input);
    put("checkpoint", cfg.checkpoint);
    put("n_samples", std::to_string(cfg.n_samples));
    put("snapshots", std::to_string(cfg.snapshots));
    put("embedder", cfg.embedder);
    put("features_a", cfg.features_a);
    put("features_b", cfg.features_b);
    put("eval_dir_a", cfg.eval_dir_a);
    put("eval_dir_b", cfg.eval_dir_b);
    put("phantom_mu_att", format_double(cfg.phantom_mu_att));
    put("phantom_background", format_double(cfg.phantom_background));
    put("phantom_inclusions", std::to_string(cfg.phantom_inclusions));
    put("phantom_speckle_sigma", format_double(cfg.phantom_speckle_sigma));
    put("bmap_timesteps", cfg.bmap_timesteps);
    for (std::size_t i = 0; i < file_entries.size(); ++i) {
        put("file." + std::to_string(i), file_entries[i]);
    }
    write_file(path, text);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
    std::string text = "iter,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        text += std::to_string(i) + "," + format_double(losses[i]) + "\n";
    }
    write_file(path, text);
}

void save_checkpoint(const std::filesystem::path& path, const DenoiserParams& params) {
    std::string records;
    std::string manifest;
    manifest += "height = " + std::to_string(params.height()) + "\n";
    manifest += "width = " + std::to_string(params.width()) + "\n";
    manifest += "hidden = " + std::to_string(params.hidden()) + "\n";
    manifest += "T = " + std::to_string(params.timesteps()) + "\n";
    for (const auto& info : params.tensors()) {
        std::vector<std::uint32_t> dims;
        for (int d : info.shape) dims.push_back(static_cast<std::uint32_t>(d));
        std::vector<float> values(info.count);
        for (std::size_t i = 0; i < info.count; ++i) {
            values[i] = static_cast<float>(params.flat()[info.offset + i]);
        }
        records += encode_tensor(dims, values);
        manifest += "tensor = " + info.name;
        for (int d : info.shape) manifest += " " + std::to_string(d);
        manifest += "\n";
    }
    write_file(path, records);
    write_file(std::filesystem::path(path.string() + ".manifest"), manifest);
}

DenoiserParams load_checkpoint(const std::filesystem::path& path) {
    const std::filesystem::path manifest_path(path.string() + ".manifest");
    std::ifstream man(manifest_path);
    if (!man) throw IoError("cannot open checkpoint manifest: " + manifest_path.string());
    int height = 0, width = 0, hidden = 0, T = 0;
    std::string line;
    std::vector<std::string> tensor_names;
    while (std::getline(man, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        std::istringstream ls(t);
        std::string key, eq;
        ls >> key >> eq;
        if (key == "height") ls >> height;
        else if (key == "width") ls >> width;
        else if (key == "hidden") ls >> hidden;
        else if (key == "T") ls >> T;
        else if (key == "tensor") {
            std::string name;
            ls >> name;
            tensor_names.push_back(name);
        }
    }
    DenoiserParams params(height, width, hidden, T);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    const auto infos = params.tensors();
    if (tensor_names.size() != infos.size()) {
        throw IoError("checkpoint manifest lists " + std::to_string(tensor_names.size()) +
                      " tensors, expected " + std::to_string(infos.size()));
    }
    for (std::size_t ti = 0; ti < infos.size(); ++ti) {
        if (tensor_names[ti] != infos[ti].name) {
            throw IoError("checkpoint tensor order mismatch at '" + tensor_names[ti] + "'");
        }
        const TensorData t = decode_tensor(in, path.string() + ":" + infos[ti].name);
        if (t.values.size() != infos[ti].count) {
            throw IoError("checkpoint tensor '" + infos[ti].name + "' has wrong element count");
        }
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            params.flat()[infos[ti].offset + i] = t.values[i];
        }
    }
    return params;
}

}  // namespace usdiff
