#include "dim/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dim {

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.size_tag = size_tag_from_name(model_size);
    if (mc.size_tag == SizeTag::Micro) {
        mc.layers = layers;
        mc.hidden_d = hidden;
    } else {
        ModelConfig ladder = config_for_size(mc.size_tag, patch, in_channels,
                                             num_classes, frames);
        mc.layers = ladder.layers;
        mc.hidden_d = ladder.hidden_d;
    }
    mc.patch = patch;
    mc.in_channels = in_channels;
    mc.num_classes = num_classes;
    mc.frames = frames;
    mc.ssm_state_n = state_n;
    mc.conv_k = conv_k;
    mc.use_class_token = use_class_token;
    mc.use_adaln = use_adaln;
    validate_config(mc);
    return mc;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

Tristate parse_tristate(const std::string& v, const std::string& key) {
    if (v == "auto") return Tristate::Auto;
    return parse_bool(v, key) ? Tristate::On : Tristate::Off;
}

const char* tristate_str(Tristate t) {
    switch (t) {
        case Tristate::Auto: return "auto";
        case Tristate::On: return "on";
        case Tristate::Off: return "off";
    }
    return "auto";
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::size_t to_size(const std::string& v, const std::string& key) {
    try {
        long long n = std::stoll(v);
        if (n < 0) throw std::invalid_argument("negative");
        return static_cast<std::size_t>(n);
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"model.size", [](RunConfig& c, const std::string& v) { c.model_size = v; }},
        {"model.layers", [](RunConfig& c, const std::string& v) { c.layers = to_size(v, "model.layers"); }},
        {"model.hidden", [](RunConfig& c, const std::string& v) { c.hidden = to_size(v, "model.hidden"); }},
        {"model.patch", [](RunConfig& c, const std::string& v) { c.patch = to_size(v, "model.patch"); }},
        {"model.in_channels", [](RunConfig& c, const std::string& v) { c.in_channels = to_size(v, "model.in_channels"); }},
        {"model.num_classes", [](RunConfig& c, const std::string& v) { c.num_classes = to_size(v, "model.num_classes"); }},
        {"model.frames", [](RunConfig& c, const std::string& v) { c.frames = to_size(v, "model.frames"); }},
        {"model.state_n", [](RunConfig& c, const std::string& v) { c.state_n = to_size(v, "model.state_n"); }},
        {"model.conv_k", [](RunConfig& c, const std::string& v) { c.conv_k = to_size(v, "model.conv_k"); }},
        {"model.use_class_token", [](RunConfig& c, const std::string& v) { c.use_class_token = parse_bool(v, "model.use_class_token"); }},
        {"model.use_adaln", [](RunConfig& c, const std::string& v) { c.use_adaln = parse_bool(v, "model.use_adaln"); }},
        {"diffusion.timesteps", [](RunConfig& c, const std::string& v) { c.timesteps = to_size(v, "diffusion.timesteps"); }},
        {"diffusion.beta_start", [](RunConfig& c, const std::string& v) { c.beta_start = to_double(v, "diffusion.beta_start"); }},
        {"diffusion.beta_end", [](RunConfig& c, const std::string& v) { c.beta_end = to_double(v, "diffusion.beta_end"); }},
        {"diffusion.cfg_dropout", [](RunConfig& c, const std::string& v) { c.cfg_dropout = to_double(v, "diffusion.cfg_dropout"); }},
        {"diffusion.clamp_z0", [](RunConfig& c, const std::string& v) { c.clamp_z0 = parse_tristate(v, "diffusion.clamp_z0"); }},
        {"optimizer.learning_rate", [](RunConfig& c, const std::string& v) { c.learning_rate = to_double(v, "optimizer.learning_rate"); }},
        {"optimizer.weight_decay", [](RunConfig& c, const std::string& v) { c.weight_decay = to_double(v, "optimizer.weight_decay"); }},
        {"optimizer.beta1", [](RunConfig& c, const std::string& v) { c.beta1 = to_double(v, "optimizer.beta1"); }},
        {"optimizer.beta2", [](RunConfig& c, const std::string& v) { c.beta2 = to_double(v, "optimizer.beta2"); }},
        {"optimizer.eps", [](RunConfig& c, const std::string& v) { c.adam_eps = to_double(v, "optimizer.eps"); }},
        {"optimizer.batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = to_size(v, "optimizer.batch_size"); }},
        {"optimizer.steps", [](RunConfig& c, const std::string& v) { c.steps = to_size(v, "optimizer.steps"); }},
        {"ema.decay", [](RunConfig& c, const std::string& v) { c.ema_decay = to_double(v, "ema.decay"); }},
        {"dataset.name", [](RunConfig& c, const std::string& v) { c.dataset = v; }},
        {"dataset.mu", [](RunConfig& c, const std::string& v) { c.mu = to_double(v, "dataset.mu"); }},
        {"dataset.sigma", [](RunConfig& c, const std::string& v) { c.sigma = to_double(v, "dataset.sigma"); }},
        {"dataset.dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
        {"dataset.flip", [](RunConfig& c, const std::string& v) { c.flip = parse_tristate(v, "dataset.flip"); }},
        {"run.seed", [](RunConfig& c, const std::string& v) {
             try {
                 c.seed = std::stoull(v);
             } catch (...) {
                 throw std::invalid_argument("config: bad integer for run.seed: '" + v + "'");
             }
         }},
        {"run.out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
        {"run.log_every", [](RunConfig& c, const std::string& v) { c.log_every = to_size(v, "run.log_every"); }},
        {"run.checkpoint_every", [](RunConfig& c, const std::string& v) { c.checkpoint_every = to_size(v, "run.checkpoint_every"); }},
        {"run.checkpoint_f32", [](RunConfig& c, const std::string& v) { c.checkpoint_f32 = parse_bool(v, "run.checkpoint_f32"); }},
    };
    return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": malformed section header");
            }
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        }
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        auto it = setters().find(full);
        if (it == setters().end()) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + full + "'");
        }
        it->second(cfg, value);
    }
    cfg.model_config();  // validate model fields eagerly
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& c) {
    std::ostringstream os;
    os << "[model]\n";
    os << "size = " << c.model_size << "\n";
    os << "layers = " << c.layers << "\n";
    os << "hidden = " << c.hidden << "\n";
    os << "patch = " << c.patch << "\n";
    os << "in_channels = " << c.in_channels << "\n";
    os << "num_classes = " << c.num_classes << "\n";
    os << "frames = " << c.frames << "\n";
    os << "state_n = " << c.state_n << "\n";
    os << "conv_k = " << c.conv_k << "\n";
    os << "use_class_token = " << (c.use_class_token ? "true" : "false") << "\n";
    os << "use_adaln = " << (c.use_adaln ? "true" : "false") << "\n";
    os << "\n[diffusion]\n";
    os << "timesteps = " << c.timesteps << "\n";
    os << "beta_start = " << fmt_double(c.beta_start) << "\n";
    os << "beta_end = " << fmt_double(c.beta_end) << "\n";
    os << "cfg_dropout = " << fmt_double(c.cfg_dropout) << "\n";
    os << "clamp_z0 = " << tristate_str(c.clamp_z0) << "\n";
    os << "\n[optimizer]\n";
    os << "learning_rate = " << fmt_double(c.learning_rate) << "\n";
    os << "weight_decay = " << fmt_double(c.weight_decay) << "\n";
    os << "beta1 = " << fmt_double(c.beta1) << "\n";
    os << "beta2 = " << fmt_double(c.beta2) << "\n";
    os << "eps = " << fmt_double(c.adam_eps) << "\n";
    os << "batch_size = " << c.batch_size << "\n";
    os << "steps = " << c.steps << "\n";
    os << "\n[ema]\n";
    os << "decay = " << fmt_double(c.ema_decay) << "\n";
    os << "\n[dataset]\n";
    os << "name = " << c.dataset << "\n";
    os << "mu = " << fmt_double(c.mu) << "\n";
    os << "sigma = " << fmt_double(c.sigma) << "\n";
    os << "dir = " << c.data_dir << "\n";
    os << "flip = " << tristate_str(c.flip) << "\n";
    os << "\n[run]\n";
    os << "seed = " << c.seed << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    os << "log_every = " << c.log_every << "\n";
    os << "checkpoint_every = " << c.checkpoint_every << "\n";
    os << "checkpoint_f32 = " << (c.checkpoint_f32 ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace dim
