#include "zsol/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

#include "zsol/detail/bytes.hpp"
#include "zsol/errors.hpp"

namespace zsol {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t to_uint(std::string_view v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"contrastive_epochs", [](RunConfig& c, std::string_view v) { c.train.contrastive_epochs = to_uint(v); }},
        {"mse_epochs", [](RunConfig& c, std::string_view v) { c.train.mse_epochs = to_uint(v); }},
        {"batch_size", [](RunConfig& c, std::string_view v) { c.train.batch_size = to_uint(v); }},
        {"seed", [](RunConfig& c, std::string_view v) { c.train.seed = to_uint(v); }},
        {"lr", [](RunConfig& c, std::string_view v) { c.train.optimizer.lr = to_double(v); }},
        {"lr_decay", [](RunConfig& c, std::string_view v) { c.train.optimizer.decay_factor = to_double(v); }},
        {"lr_decay_every", [](RunConfig& c, std::string_view v) { c.train.optimizer.decay_every = to_uint(v); }},
        {"weight_decay", [](RunConfig& c, std::string_view v) { c.train.optimizer.weight_decay = to_double(v); }},
        {"beta1", [](RunConfig& c, std::string_view v) { c.train.optimizer.beta1 = to_double(v); }},
        {"beta2", [](RunConfig& c, std::string_view v) { c.train.optimizer.beta2 = to_double(v); }},
        {"eps", [](RunConfig& c, std::string_view v) { c.train.optimizer.eps = to_double(v); }},
        {"positive_threshold", [](RunConfig& c, std::string_view v) { c.train.positive_threshold = to_double(v); }},
        {"gt_sigma", [](RunConfig& c, std::string_view v) { c.train.gt_sigma = to_double(v); }},
        {"target_sigma", [](RunConfig& c, std::string_view v) { c.train.target_sigma = to_double(v); }},
        {"target_norm",
         [](RunConfig& c, std::string_view v) {
             if (v == "peak") c.train.target_norm = KernelNorm::unit_peak;
             else if (v == "mass") c.train.target_norm = KernelNorm::unit_mass;
             else throw std::invalid_argument("target_norm must be 'peak' or 'mass'");
         }},
        {"temperature", [](RunConfig& c, std::string_view v) { c.temperature = to_double(v); }},
        {"init_noise", [](RunConfig& c, std::string_view v) { c.init_noise = to_double(v); }},
    };
    return table;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw DataError("config line " + std::to_string(line_no) + ": unknown key '" +
                            std::string(key) + "'");
        }
        try {
            it->second(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw DataError("config line " + std::to_string(line_no) + " (" + std::string(key) +
                            "): " + e.what());
        }
    }
    try {
        cfg.train.validate();
        if (!(cfg.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
        if (cfg.init_noise < 0.0) throw std::invalid_argument("init_noise must be >= 0");
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(detail::read_file(path));
}

std::string format_run_config(const RunConfig& cfg) {
    const auto& t = cfg.train;
    const auto& o = t.optimizer;
    std::string out;
    char buf[128];
    auto num = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
        out += buf;
    };
    auto count = [&](const char* key, std::uint64_t v) {
        out += std::string(key) + " = " + std::to_string(v) + "\n";
    };
    count("contrastive_epochs", t.contrastive_epochs);
    count("mse_epochs", t.mse_epochs);
    count("batch_size", t.batch_size);
    count("seed", t.seed);
    num("lr", o.lr);
    num("lr_decay", o.decay_factor);
    count("lr_decay_every", o.decay_every);
    num("weight_decay", o.weight_decay);
    num("beta1", o.beta1);
    num("beta2", o.beta2);
    num("eps", o.eps);
    num("positive_threshold", t.positive_threshold);
    num("gt_sigma", t.gt_sigma);
    out += std::string("target_norm = ") + (t.target_norm == KernelNorm::unit_peak ? "peak" : "mass") + "\n";
    num("target_sigma", t.target_sigma);
    num("temperature", cfg.temperature);
    num("init_noise", cfg.init_noise);
    return out;
}

}  // namespace zsol
