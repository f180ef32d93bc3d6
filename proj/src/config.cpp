#include "bdr/config.hpp"

#include "bdr/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace bdr {

namespace {

enum class FieldType { integer, real, keyword, text };

struct FieldSpec {
    const char* key;  // fully qualified "section.key"
    FieldType type;
    const char* default_value;
    double min = 0.0;                  // for numeric types: inclusive lower bound
    bool strict_min = false;           // require value > min instead of >=
    const char* keywords = nullptr;    // for keyword type: "a|b|c"
    const char* constraint_msg = nullptr;  // overrides the generated message
};

// The schema: every key the tool understands, with defaults.
const FieldSpec kSchema[] = {
    {"problem.name", FieldType::keyword, "linear_gaussian", 0, false,
     "linear_gaussian|image|diffusion"},
    {"problem.linear_gaussian.d", FieldType::integer, "50", 1},
    {"problem.linear_gaussian.m", FieldType::integer, "50", 1},
    {"problem.linear_gaussian.seed_w", FieldType::integer, "1", 0},
    {"problem.linear_gaussian.prior_lambda0", FieldType::real, "1", 0, true},
    {"problem.linear_gaussian.prior_theta", FieldType::real, "2", 0},
    {"problem.linear_gaussian.prior_tau", FieldType::real, "1e-6", 0},
    {"problem.linear_gaussian.noise_lambda0", FieldType::real, "500", 0, true},
    {"problem.linear_gaussian.noise_theta", FieldType::real, "1", 0},
    {"problem.linear_gaussian.noise_tau", FieldType::real, "1e-6", 0},
    {"problem.linear_gaussian.g_file", FieldType::text, ""},
    {"problem.linear_gaussian.prior_cov_file", FieldType::text, ""},
    {"problem.linear_gaussian.noise_cov_file", FieldType::text, ""},
    {"problem.image.grid", FieldType::integer, "32", 2},
    {"problem.image.sigma_blob", FieldType::real, "3", 0, true},
    {"problem.image.param_mask", FieldType::text, "x1,x2,gamma"},
    {"problem.diffusion.beta", FieldType::real, "1", 0},
    {"problem.diffusion.dt", FieldType::real, "0.01", 0, true},
    {"problem.diffusion.d", FieldType::integer, "100", 1},
    {"problem.diffusion.m", FieldType::integer, "100", 1},
    {"problem.diffusion.sigma_noise", FieldType::real, "0.1", 0, true},
    {"problem.diffusion.parameterization", FieldType::keyword, "path", 0, false,
     "path|increment"},
    {"diagnostics.n", FieldType::integer, "1000", 1, false, nullptr,
     "diagnostics.n must be a positive integer"},
    {"diagnostics.whiten", FieldType::keyword, "auto", 0, false, "auto|on|off"},
    {"cmi.n", FieldType::integer, "1000", 1},
    {"cmi.l", FieldType::integer, "100", 1},
    {"cmi.inner_mode", FieldType::keyword, "fresh", 0, false, "fresh|fixed|mean"},
    {"mcmc.chain_length", FieldType::integer, "20000", 1},
    {"mcmc.burn_in_fraction", FieldType::real, "0.2", 0},
    {"mcmc.target_acceptance", FieldType::real, "0.234", 0, true},
    {"select.cost", FieldType::keyword, "linear", 0, false, "linear|quadratic"},
    {"select.ax", FieldType::real, "1", 0},
    {"select.ay", FieldType::real, "1", 0},
    {"select.eps", FieldType::real, "1", 0, true, nullptr,
     "select.eps: select_dims requires eps' > 0"},
    {"experiment.n", FieldType::integer, "0", 0},
    {"experiment.seeds", FieldType::integer, "3", 1},
};

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

const FieldSpec* find_spec(const std::string& key) {
    for (const auto& spec : kSchema)
        if (key == spec.key) return &spec;
    return nullptr;
}

bool keyword_allowed(const FieldSpec& spec, const std::string& value) {
    std::string options(spec.keywords);
    std::size_t pos = 0;
    while (pos <= options.size()) {
        std::size_t bar = options.find('|', pos);
        if (bar == std::string::npos) bar = options.size();
        if (options.substr(pos, bar - pos) == value) return true;
        pos = bar + 1;
    }
    return false;
}

void check_value(const FieldSpec& spec, const std::string& value, int line,
                 std::vector<ConfigIssue>& errors) {
    const auto fail = [&](const std::string& generated) {
        errors.push_back({line, spec.constraint_msg ? spec.constraint_msg : generated});
    };
    switch (spec.type) {
        case FieldType::integer: {
            long long v = 0;
            try {
                std::size_t used = 0;
                v = std::stoll(value, &used);
                if (used != value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(std::string(spec.key) + ": expected an integer, got '" + value + "'");
                return;
            }
            if (spec.strict_min ? !(v > spec.min) : !(v >= spec.min))
                fail(std::string(spec.key) + ": must be " + (spec.strict_min ? "> " : ">= ") +
                     std::to_string(static_cast<long long>(spec.min)));
            break;
        }
        case FieldType::real: {
            double v = 0;
            try {
                std::size_t used = 0;
                v = std::stod(value, &used);
                if (used != value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(std::string(spec.key) + ": expected a real number, got '" + value + "'");
                return;
            }
            if (spec.strict_min ? !(v > spec.min) : !(v >= spec.min))
                fail(std::string(spec.key) + ": must be " + (spec.strict_min ? "> " : ">= ") +
                     std::to_string(spec.min));
            break;
        }
        case FieldType::keyword:
            if (!keyword_allowed(spec, value))
                fail(std::string(spec.key) + ": '" + value + "' is not one of " + spec.keywords);
            break;
        case FieldType::text:
            break;
    }
}

}  // namespace

const std::string& ValidatedConfig::get(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("unknown config key requested: " + key);
    return it->second;
}

double ValidatedConfig::get_real(const std::string& key) const { return std::stod(get(key)); }

long long ValidatedConfig::get_int(const std::string& key) const { return std::stoll(get(key)); }

bool ValidatedConfig::has(const std::string& key) const { return values.count(key) != 0; }

std::string ValidatedConfig::render() const {
    std::ostringstream out;
    std::string current_section;
    for (const auto& spec : kSchema) {
        const std::string key(spec.key);
        const std::size_t dot = key.rfind('.');
        const std::string section = key.substr(0, dot);
        const std::string name = key.substr(dot + 1);
        if (section != current_section) {
            if (!current_section.empty()) out << "\n";
            out << "[" << section << "]\n";
            current_section = section;
        }
        out << name << " = " << values.at(key) << "  # " << provenance.at(key) << "\n";
    }
    return out.str();
}

std::string ConfigResult::error_text() const {
    std::ostringstream out;
    for (const auto& issue : errors) {
        if (issue.line > 0) out << "line " << issue.line << ": ";
        out << issue.message << "\n";
    }
    return out.str();
}

ConfigResult validate_config_text(const std::string& text) {
    ConfigResult result;
    ValidatedConfig cfg;
    cfg.source_ = text;
    for (const auto& spec : kSchema) {
        cfg.values[spec.key] = spec.default_value;
        cfg.provenance[spec.key] = "default";
    }

    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // Strip whole-line and trailing comments.
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;

        if (stripped.front() == '[') {
            if (stripped.back() != ']') {
                result.errors.push_back({lineno, "unterminated section header"});
                continue;
            }
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) result.errors.push_back({lineno, "empty section name"});
            continue;
        }

        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            result.errors.push_back({lineno, "expected 'key = value': " + stripped});
            continue;
        }
        const std::string name = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const std::string key = section.empty() ? name : section + "." + name;
        const FieldSpec* spec = find_spec(key);
        if (!spec) {
            result.errors.push_back({lineno, "unknown key: " + key});
            continue;
        }
        check_value(*spec, value, lineno, result.errors);
        cfg.values[key] = value;
        cfg.provenance[key] = "file line " + std::to_string(lineno);
    }

    if (result.errors.empty()) result.config = std::move(cfg);
    return result;
}

ConfigResult validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigResult result;
        result.errors.push_back({0, "cannot open config file: " + path.string()});
        return result;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return validate_config_text(buffer.str());
}

ValidatedConfig load_config(const std::filesystem::path& path) {
    ConfigResult result = validate_config(path);
    if (!result.ok()) throw ConfigError("invalid config " + path.string() + ":\n" + result.error_text());
    return *std::move(result.config);
}

}  // namespace bdr
