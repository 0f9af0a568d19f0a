#include "dim/efficiency.hpp"

#include <sstream>
#include <stdexcept>

namespace dim {

long long flops_dit(std::size_t l, std::size_t d) {
    if (l < 1 || d < 1) throw std::invalid_argument("flops_dit: dims must be >= 1");
    const unsigned __int128 ll = l, dd = d;
    const unsigned __int128 v = 4 * ll * dd * dd + 2 * ll * ll * dd;
    return static_cast<long long>(v);
}

long long flops_diffussm(std::size_t l, std::size_t d) {
    if (l < 1 || d < 1) throw std::invalid_argument("flops_diffussm: dims must be >= 1");
    const unsigned __int128 v = 15 * static_cast<unsigned __int128>(l) * d * d;
    return static_cast<long long>((v + 1) / 2);  // 7.5 L D^2, half-up
}

long long flops_dim(std::size_t l, std::size_t d, std::size_t n) {
    if (l < 1 || d < 1 || n < 1) throw std::invalid_argument("flops_dim: dims must be >= 1");
    return static_cast<long long>(8ull * n * l * d);
}

CostModel count_model_ops(const ModelConfig& cfg, const PatchGrid& grid) {
    const long long l = static_cast<long long>(grid.total_tokens());
    const long long rows = l + 1;  // class slot rides through the blocks
    const long long d = static_cast<long long>(cfg.hidden_d);
    const long long di = static_cast<long long>(cfg.d_inner());
    const long long n = static_cast<long long>(cfg.ssm_state_n);
    const long long r = static_cast<long long>(cfg.delta_rank_eff());
    const long long k = static_cast<long long>(cfg.conv_k);
    const long long td = static_cast<long long>(cfg.token_dim());
    const long long f = static_cast<long long>(cfg.time_freq_dim);
    const long long nl = static_cast<long long>(cfg.layers);

    CostModel cm;
    cm.arch = "dim";
    cm.seq_len = grid.total_tokens();
    cm.hidden = cfg.hidden_d;
    cm.layers = cfg.layers;
    cm.state_n = cfg.ssm_state_n;

    auto macs = [](long long m) { return 2 * m; };

    cm.terms.push_back({"embedder.patch_proj", macs(l * td * d)});
    cm.terms.push_back({"embedder.time_mlp", macs(f * d + d * d)});
    cm.terms.push_back({"blocks.cond_mod", macs(nl * d * 3 * d)});
    cm.terms.push_back({"blocks.in_proj", macs(nl * 2 * rows * d * 2 * di)});
    cm.terms.push_back({"blocks.conv", macs(nl * 2 * rows * di * k)});
    cm.terms.push_back({"blocks.x_proj", macs(nl * 2 * rows * di * (r + 2 * n))});
    cm.terms.push_back({"blocks.delta_proj", macs(nl * 2 * rows * r * di)});
    // recurrence: 2 MACs per (token, channel, state) plus 1 for the C
    // contraction, per direction
    cm.terms.push_back({"blocks.scan", macs(nl * 2 * 3 * rows * di * n)});
    cm.terms.push_back({"blocks.gate_mul", macs(nl * 2 * rows * di)});
    cm.terms.push_back({"blocks.out_proj", macs(nl * rows * di * d)});
    cm.terms.push_back({"blocks.norm", macs(nl * rows * 2 * d)});
    cm.terms.push_back({"final.mod", macs(d * 2 * d)});
    cm.terms.push_back({"final.head", macs(l * d * td)});
    return cm;
}

CostModel count_model_ops(const DimModel& m, const PatchGrid& grid) {
    return count_model_ops(m.cfg, grid);
}

long long scan_ops(const CostModel& cm) {
    for (const auto& t : cm.terms) {
        if (t.label == "blocks.scan") return t.ops;
    }
    return 0;
}

static std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

static double arch_gflops(const std::string& arch, std::size_t l,
                          std::size_t d, std::size_t layers) {
    long long per_block = 0;
    if (arch == "dim") per_block = flops_dim(l, d);
    else if (arch == "dit") per_block = flops_dit(l, d);
    else if (arch == "diffussm") per_block = flops_diffussm(l, d);
    else throw std::invalid_argument("unknown arch '" + arch + "' (expected dim, dit or diffussm)");
    return static_cast<double>(per_block) * static_cast<double>(layers) / 1e9;
}

FlopsReport gflops_report(const std::vector<std::string>& archs, SizeTag size,
                          std::size_t patch,
                          const std::vector<std::size_t>& resolutions) {
    if (resolutions.empty()) throw std::invalid_argument("gflops_report: empty resolution list");
    if (archs.empty()) throw std::invalid_argument("gflops_report: empty arch list");
    ModelConfig cfg = config_for_size(size == SizeTag::Micro ? SizeTag::XL : size,
                                      patch, 4, 1000);
    const std::size_t d = cfg.hidden_d, layers = cfg.layers;

    auto seq_len_for = [&](std::size_t res) {
        if (res % 8 != 0) throw std::invalid_argument("gflops_report: resolution must be divisible by 8");
        const std::size_t latent = res / 8;
        if (latent % patch != 0) throw std::invalid_argument("gflops_report: latent not divisible by patch");
        const std::size_t side = latent / patch;
        return side * side;
    };

    std::ostringstream md, csv;
    md << "| arch |";
    csv << "arch";
    for (std::size_t res : resolutions) {
        md << " " << res << "x" << res << " Gflops |";
        csv << "," << res;
    }
    md << " note |\n|---|";
    for (std::size_t i = 0; i < resolutions.size(); ++i) md << "---|";
    md << "---|\n";
    csv << "\n";

    char buf[64];
    for (const auto& arch : archs) {
        md << "| " << arch << " |";
        csv << csv_field(arch);
        double first = 0, last = 0;
        for (std::size_t i = 0; i < resolutions.size(); ++i) {
            const std::size_t l = seq_len_for(resolutions[i]);
            const double g = arch_gflops(arch, l, d, layers);
            if (i == 0) first = g;
            last = g;
            std::snprintf(buf, sizeof(buf), "%.2f", g);
            md << " " << buf << " |";
            csv << "," << buf;
        }
        // growth note over the sweep: linear architectures track the token
        // count, attention outgrows it
        std::string note;
        if (resolutions.size() > 1 && first > 0) {
            const double growth = last / first;
            const double tokens_growth =
                static_cast<double>(seq_len_for(resolutions.back())) /
                static_cast<double>(seq_len_for(resolutions.front()));
            note = growth > 1.5 * tokens_growth
                       ? "superlinear in L; largest size exceeds practical budgets"
                       : "linear in L; largest size stays in budget";
        }
        md << " " << note << " |\n";
        csv << "\n";
    }
    md << "\nper-block analytic counts x " << layers
       << " layers, D=" << d << ", patch=" << patch
       << ", latent = resolution/8; multiply-add counted as 2 operations.\n"
       << "The 8NLD form counts one scan direction's fused recurrence (3 ops) "
          "plus readout (1 op) per (L, 2D, N) element; the concrete walker's "
          "bidirectional MAC count is exactly 3x that figure.\n";

    FlopsReport rep;
    rep.markdown = md.str();
    rep.csv = csv.str();
    return rep;
}

}  // namespace dim
