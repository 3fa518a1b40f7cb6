#include "swapgt/config.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swapgt {

namespace {

[[noreturn]] void bad_key(const std::string& key) {
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        bad_value(key, v);
    }
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size() || x < 0) throw std::invalid_argument(v);
        return static_cast<std::size_t>(x);
    } catch (const std::exception&) {
        bad_value(key, v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v);
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(parse_size(key, trim(field)));
    if (out.empty()) bad_value(key, v);
    return out;
}

void apply_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "features") cfg.feature_path = value;
    else if (key == "edges") cfg.edge_path = value;
    else if (key == "labels") cfg.label_path = value;
    else if (key == "sbm.blocks") {
        const std::size_t b = parse_size(key, value);
        const std::size_t sz = cfg.sbm.block_sizes.empty() ? 50 : cfg.sbm.block_sizes[0];
        cfg.sbm.block_sizes.assign(b, sz);
    } else if (key == "sbm.block_size") {
        const std::size_t sz = parse_size(key, value);
        if (cfg.sbm.block_sizes.empty()) cfg.sbm.block_sizes.assign(1, sz);
        for (auto& s : cfg.sbm.block_sizes) s = sz;
    } else if (key == "sbm.block_sizes") cfg.sbm.block_sizes = parse_size_list(key, value);
    else if (key == "sbm.intra_prob") cfg.sbm.intra_prob = parse_double(key, value);
    else if (key == "sbm.inter_prob") cfg.sbm.inter_prob = parse_double(key, value);
    else if (key == "sbm.feature_dim") cfg.sbm.feature_dim = parse_size(key, value);
    else if (key == "sbm.mean_separation") cfg.sbm.mean_separation = parse_double(key, value);
    else if (key == "sbm.noise") cfg.sbm.noise = parse_double(key, value);
    else if (key == "k") cfg.k = parse_size(key, value);
    else if (key == "ppr_steps") cfg.ppr_steps = parse_size(key, value);
    else if (key == "ppr_beta") cfg.ppr_beta = parse_double(key, value);
    else if (key == "swap_p") cfg.swap_p = parse_double(key, value);
    else if (key == "swap_t") cfg.swap_t = parse_size(key, value);
    else if (key == "aug_s") cfg.aug_s = parse_size(key, value);
    else if (key == "resample_each_epoch") cfg.resample_each_epoch = parse_bool(key, value);
    else if (key == "hidden_dim") cfg.hidden_dim = parse_size(key, value);
    else if (key == "ffn_dim") cfg.ffn_dim = parse_size(key, value);
    else if (key == "layers") cfg.layers = parse_size(key, value);
    else if (key == "heads") cfg.heads = parse_size(key, value);
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "lambda") cfg.lambda = parse_double(key, value);
    else if (key == "dropout") cfg.dropout = parse_double(key, value);
    else if (key == "share_encoder") cfg.share_encoder = parse_bool(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
    else if (key == "max_epochs") cfg.max_epochs = parse_size(key, value);
    else if (key == "patience") cfg.patience = parse_size(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_size(key, value);
    else if (key == "runs") cfg.runs = parse_size(key, value);
    else if (key == "base_seed") cfg.base_seed = parse_size(key, value);
    else if (key == "split") cfg.split = parse_split(value);
    else if (key == "variant") cfg.variant = parse_variant(value);
    else bad_key(key);
}

void apply_line(TrainConfig& cfg, const std::string& raw, const std::string& where) {
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config: expected key=value at " + where + ": '" + line + "'");
    apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

} // namespace

TrainConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        apply_line(cfg, line, "line " + std::to_string(lineno));
    }
    for (const auto& ov : overrides) apply_line(cfg, ov, "override '" + ov + "'");
    return cfg;
}

TrainConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), overrides);
}

std::string render_config(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "dataset=" << cfg.dataset << "\n";
    if (cfg.uses_files()) {
        out << "features=" << cfg.feature_path << "\n";
        out << "edges=" << cfg.edge_path << "\n";
        out << "labels=" << cfg.label_path << "\n";
    } else {
        out << "sbm.block_sizes=";
        for (std::size_t i = 0; i < cfg.sbm.block_sizes.size(); ++i)
            out << (i ? "," : "") << cfg.sbm.block_sizes[i];
        out << "\n";
        out << "sbm.intra_prob=" << cfg.sbm.intra_prob << "\n";
        out << "sbm.inter_prob=" << cfg.sbm.inter_prob << "\n";
        out << "sbm.feature_dim=" << cfg.sbm.feature_dim << "\n";
        out << "sbm.mean_separation=" << cfg.sbm.mean_separation << "\n";
        out << "sbm.noise=" << cfg.sbm.noise << "\n";
    }
    out << "k=" << cfg.k << "\n";
    out << "ppr_steps=" << cfg.ppr_steps << "\n";
    out << "ppr_beta=" << cfg.ppr_beta << "\n";
    out << "swap_p=" << cfg.swap_p << "\n";
    out << "swap_t=" << cfg.swap_t << "\n";
    out << "aug_s=" << cfg.aug_s << "\n";
    out << "resample_each_epoch=" << (cfg.resample_each_epoch ? "true" : "false") << "\n";
    out << "hidden_dim=" << cfg.hidden_dim << "\n";
    out << "ffn_dim=" << cfg.ffn_dim << "\n";
    out << "layers=" << cfg.layers << "\n";
    out << "heads=" << cfg.heads << "\n";
    out << "alpha=" << cfg.alpha << "\n";
    out << "lambda=" << cfg.lambda << "\n";
    out << "dropout=" << cfg.dropout << "\n";
    out << "share_encoder=" << (cfg.share_encoder ? "true" : "false") << "\n";
    out << "learning_rate=" << cfg.learning_rate << "\n";
    out << "weight_decay=" << cfg.weight_decay << "\n";
    out << "max_epochs=" << cfg.max_epochs << "\n";
    out << "patience=" << cfg.patience << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "runs=" << cfg.runs << "\n";
    out << "base_seed=" << cfg.base_seed << "\n";
    out << "split=" << split_name(cfg.split) << "\n";
    out << "variant=" << variant_name(cfg.variant) << "\n";
    return out.str();
}

std::uint64_t tokenizer_digest(const TrainConfig& cfg) {
    const EffectiveConfig eff = apply_variant(cfg);
    std::uint64_t h = mix64(0x70c3);
    auto fold = [&h](std::uint64_t v) { h = mix64(h ^ v); };
    auto fold_double = [&](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        fold(bits);
    };
    fold(eff.table_k);
    fold(static_cast<std::uint64_t>(eff.mode));
    fold(eff.s);
    fold(cfg.ppr_steps);
    fold_double(cfg.ppr_beta);
    fold_double(cfg.swap_p);
    fold(cfg.swap_t);
    fold(cfg.k);
    return h;
}

} // namespace swapgt
