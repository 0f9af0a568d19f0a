#include "dim/serialize.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dim {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void check_stream(const std::istream& is, const char* what) {
    if (!is) throw std::runtime_error(std::string(what) + ": truncated or unreadable stream");
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t, bool as_f32) {
    os.write("DIMT", 4);
    os.put(1);  // version
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(os, d);
    os.put(as_f32 ? 0 : 1);
    if (as_f32) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            float f = static_cast<float>(t[i]);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(os, bits);
        }
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double v = t[i];
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(os, bits);
        }
    }
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    check_stream(is, "read_tensor");
    if (std::memcmp(magic, "DIMT", 4) != 0) throw std::runtime_error("read_tensor: bad magic");
    const int version = is.get();
    if (version != 1) throw std::runtime_error("read_tensor: unsupported version " + std::to_string(version));
    const std::uint32_t rank = get_u32(is);
    if (rank == 0 || rank > 8) throw std::runtime_error("read_tensor: implausible rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_u64(is));
    const int dtype = is.get();
    check_stream(is, "read_tensor");
    Tensor t(shape);
    if (dtype == 0) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::uint32_t bits = get_u32(is);
            float f;
            std::memcpy(&f, &bits, 4);
            t[i] = static_cast<double>(f);
        }
    } else if (dtype == 1) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::uint64_t bits = get_u64(is);
            double d;
            std::memcpy(&d, &bits, 8);
            t[i] = d;
        }
    } else {
        throw std::runtime_error("read_tensor: unknown dtype byte");
    }
    check_stream(is, "read_tensor");
    return t;
}

void save_tensor(const std::string& path, const Tensor& t, bool as_f32) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    write_tensor(f, t, as_f32);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path + "'");
    return read_tensor(f);
}

void save_checkpoint(const std::string& path, const RunConfig& cfg,
                     std::uint64_t step,
                     const std::array<std::uint64_t, 6>& rng_state,
                     bool clamp_z0,
                     const std::map<std::string, const Tensor*>& tensors,
                     bool as_f32) {
    nlohmann::json manifest;
    manifest["step"] = step;
    manifest["config"] = serialize_run_config(cfg);
    manifest["clamp_z0"] = clamp_z0;
    // u64 words as hex strings; JSON numbers cannot carry 64 bits
    std::vector<std::string> rng_hex;
    for (std::uint64_t w : rng_state) {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(w));
        rng_hex.push_back(buf);
    }
    manifest["rng_state"] = rng_hex;
    const std::string mtext = manifest.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f.write("DIMC", 4);
    put_u16(f, 1);
    put_u32(f, static_cast<std::uint32_t>(mtext.size()));
    f.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    put_u32(f, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        put_u16(f, static_cast<std::uint16_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(f, *tensor, as_f32);
    }
    if (!f) throw std::runtime_error("short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    check_stream(f, "load_checkpoint");
    if (std::memcmp(magic, "DIMC", 4) != 0) throw std::runtime_error("load_checkpoint: bad magic");
    const std::uint16_t version = get_u16(f);
    if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    const std::uint32_t mlen = get_u32(f);
    std::string mtext(mlen, '\0');
    f.read(mtext.data(), mlen);
    check_stream(f, "load_checkpoint");

    nlohmann::json manifest = nlohmann::json::parse(mtext);
    Checkpoint ck;
    ck.step = manifest.at("step").get<std::uint64_t>();
    ck.config = parse_run_config(manifest.at("config").get<std::string>());
    ck.clamp_z0 = manifest.value("clamp_z0", false);
    auto rng_hex = manifest.at("rng_state").get<std::vector<std::string>>();
    if (rng_hex.size() != ck.rng_state.size()) throw std::runtime_error("load_checkpoint: bad rng state");
    for (std::size_t i = 0; i < rng_hex.size(); ++i) {
        ck.rng_state[i] = std::stoull(rng_hex[i], nullptr, 16);
    }

    const std::uint32_t count = get_u32(f);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t nlen = get_u16(f);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        check_stream(f, "load_checkpoint");
        ck.tensors.emplace(std::move(name), read_tensor(f));
    }
    return ck;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
    auto it = tensors.lower_bound(prefix + ".");
    return it != tensors.end() && it->first.rfind(prefix + ".", 0) == 0;
}

DimModel Checkpoint::materialize(const std::string& prefix) const {
    ModelConfig mc = config.model_config();
    Rng scratch(0);
    DimModel m = build_model(mc, scratch);
    model_for_each_tensor(m, [&](const std::string& name, Tensor& t) {
        auto it = tensors.find(prefix + "." + name);
        if (it == tensors.end()) {
            throw std::runtime_error("checkpoint: missing tensor '" + prefix +
                                     "." + name + "'");
        }
        if (!it->second.same_shape(t)) {
            throw std::runtime_error("checkpoint: shape mismatch for '" +
                                     prefix + "." + name + "'");
        }
        t = it->second;
    });
    return m;
}

namespace {

unsigned char to_byte(double v) {
    double x = (v + 1.0) * 0.5 * 255.0;
    if (x < 0) x = 0;
    if (x > 255) x = 255;
    return static_cast<unsigned char>(std::lround(x));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
        throw std::invalid_argument("write_ppm: image must be [h x w x 1|3]");
    }
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double* px = image.data() + (y * w + x) * c;
            if (c == 3) {
                row[x * 3 + 0] = to_byte(px[0]);
                row[x * 3 + 1] = to_byte(px[1]);
                row[x * 3 + 2] = to_byte(px[2]);
            } else {
                unsigned char g = to_byte(px[0]);
                row[x * 3 + 0] = row[x * 3 + 1] = row[x * 3 + 2] = g;
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("short write to '" + path + "'");
}

Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path + "'");
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a binary PPM: '" + path + "'");
    // header tokens may be separated by comments
    auto next_int = [&]() {
        for (;;) {
            int ch = f.peek();
            if (ch == '#') {
                std::string comment;
                std::getline(f, comment);
            } else if (std::isspace(ch)) {
                f.get();
            } else {
                break;
            }
        }
        std::size_t v;
        f >> v;
        return v;
    };
    const std::size_t w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw std::runtime_error("read_ppm: only maxval 255 supported");
    f.get();  // single whitespace before payload
    std::vector<unsigned char> buf(w * h * 3);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    check_stream(f, "read_ppm");
    Tensor img({h, w, 3});
    for (std::size_t i = 0; i < buf.size(); ++i) {
        img[i] = static_cast<double>(buf[i]) / 255.0 * 2.0 - 1.0;
    }
    return img;
}

void write_ppm_grid(const std::string& path, const std::vector<Tensor>& images,
                    std::size_t cols) {
    if (images.empty()) throw std::invalid_argument("write_ppm_grid: no images");
    const std::size_t h = images[0].dim(0), w = images[0].dim(1),
                      c = images[0].dim(2);
    for (const auto& im : images) {
        if (!im.same_shape(images[0])) throw std::invalid_argument("write_ppm_grid: mixed shapes");
    }
    const std::size_t n = images.size();
    const std::size_t rows = (n + cols - 1) / cols;
    Tensor grid({rows * h, cols * w, c});
    for (auto& v : grid.vec()) v = -1.0;  // background
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t gr = i / cols, gc = i % cols;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    grid[((gr * h + y) * cols * w + gc * w + x) * c + ch] =
                        images[i][(y * w + x) * c + ch];
                }
            }
        }
    }
    write_ppm(path, grid);
}

}  // namespace dim
