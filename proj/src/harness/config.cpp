#include "droplab/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "droplab/errors.hpp"

namespace droplab::harness {

using nlohmann::json;

std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::exit_time: return "exit_time";
        case ExperimentKind::coupling: return "coupling";
        case ExperimentKind::spectral_sweep: return "spectral_sweep";
        case ExperimentKind::profile_sweep: return "profile_sweep";
        case ExperimentKind::norm_scaling: return "norm_scaling";
        case ExperimentKind::simulate: return "simulate";
    }
    return "unknown";
}

ExperimentKind kind_from_name(const std::string& s) {
    for (auto k : {ExperimentKind::exit_time, ExperimentKind::coupling,
                   ExperimentKind::spectral_sweep, ExperimentKind::profile_sweep,
                   ExperimentKind::norm_scaling, ExperimentKind::simulate})
        if (kind_name(k) == s) return k;
    throw Error("unknown experiment kind '" + s + "'");
}

namespace {

// ---- minimal TOML reader (flat tables, scalars and 1-D arrays) ----

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

json parse_toml_value(const std::string& raw) {
    const std::string v = strip(raw);
    if (v.empty()) throw Error("toml: empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw Error("toml: unterminated string " + v);
        return v.substr(1, v.size() - 2);
    }
    if (v.front() == '[') {
        if (v.back() != ']') throw Error("toml: unterminated array " + v);
        json arr = json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::size_t pos = 0;
        int depth = 0;
        std::string item;
        for (char c : inner) {
            if (c == '[') ++depth;
            if (c == ']') --depth;
            if (c == ',' && depth == 0) {
                if (!strip(item).empty()) arr.push_back(parse_toml_value(item));
                item.clear();
            } else {
                item += c;
            }
            ++pos;
        }
        if (!strip(item).empty()) arr.push_back(parse_toml_value(item));
        return arr;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        std::size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos &&
            v.find("inf") == std::string::npos && v.find("nan") == std::string::npos) {
            const long long i = std::stoll(v, &used);
            if (used == v.size()) return i;
        }
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (...) {
    }
    throw Error("toml: cannot parse value '" + v + "'");
}

}  // namespace

json parse_toml_subset(const std::string& text) {
    json root = json::object();
    json* table = &root;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside strings
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line = line.substr(0, i);
                break;
            }
        }
        const std::string s = strip(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw Error("toml line " + std::to_string(lineno) + ": bad table");
            const std::string name = strip(s.substr(1, s.size() - 2));
            table = &root[name];
            if (table->is_null()) *table = json::object();
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("toml line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = strip(s.substr(0, eq));
        (*table)[key] = parse_toml_value(s.substr(eq + 1));
    }
    return root;
}

namespace {

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void get_if(const json& j, const char* key, std::array<double, 2>& out) {
    if (j.contains(key)) {
        auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != 2) throw Error(std::string("config: ") + key + " wants 2 entries");
        out = {v[0], v[1]};
    }
}

}  // namespace

json ExperimentConfig::to_json() const {
    json j;
    j["kind"] = kind_name(kind);
    j["seed"] = seed;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["model"] = {{"eps", model.eps},          {"eps_list", model.eps_list},
                  {"rho_phys", model.rho_phys}, {"delta", model.delta},
                  {"grid_n", model.grid_n},     {"xi0", model.xi0}};
    j["noise"] = {{"mu_cut", noise.mu_cut},
                  {"decay", noise.decay},
                  {"calibrate", noise.calibrate},
                  {"exponent", noise.exponent},
                  {"prefactor", noise.prefactor}};
    j["sde"] = {{"dt", sde.dt}, {"kappa", sde.kappa}, {"amplitude_cap", sde.amplitude_cap}};
    j["exit_time"] = {{"paths", exit_time.paths},
                      {"horizon_exponent", exit_time.horizon_exponent},
                      {"horizon_cap", exit_time.horizon_cap},
                      {"tube_c0", exit_time.tube_c0},
                      {"tube_m", exit_time.tube_m},
                      {"l2_radius_k", exit_time.l2_radius_k},
                      {"init_nu", exit_time.init_nu},
                      {"diag_cadence", exit_time.diag_cadence},
                      {"record_stride", exit_time.record_stride},
                      {"write_paths", exit_time.write_paths},
                      {"projection_transport", exit_time.projection_transport}};
    j["coupling"] = {{"seeds", coupling.seeds},
                     {"horizon", coupling.horizon},
                     {"drift_mode", coupling.drift_mode},
                     {"init_nu", coupling.init_nu},
                     {"diag_cadence", coupling.diag_cadence},
                     {"scale_factor", coupling.scale_factor},
                     {"projection_transport", coupling.projection_transport}};
    j["sweep"] = {{"rho_list", sweep.rho_list},
                  {"r_max_pad", sweep.r_max_pad},
                  {"eigen_count", sweep.eigen_count},
                  {"eigen_tol", sweep.eigen_tol}};
    j["simulate"] = {{"horizon", simulate.horizon},
                     {"record_stride", simulate.record_stride},
                     {"checkpoint_every", simulate.checkpoint_every},
                     {"resume", simulate.resume}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("kind")) c.kind = kind_from_name(j.at("kind").get<std::string>());
    get_if(j, "seed", c.seed);
    get_if(j, "threads", c.threads);
    get_if(j, "out_dir", c.out_dir);
    if (j.contains("model")) {
        const json& m = j.at("model");
        get_if(m, "eps", c.model.eps);
        get_if(m, "eps_list", c.model.eps_list);
        get_if(m, "rho_phys", c.model.rho_phys);
        get_if(m, "delta", c.model.delta);
        get_if(m, "grid_n", c.model.grid_n);
        get_if(m, "xi0", c.model.xi0);
    }
    if (j.contains("noise")) {
        const json& m = j.at("noise");
        get_if(m, "mu_cut", c.noise.mu_cut);
        get_if(m, "decay", c.noise.decay);
        get_if(m, "calibrate", c.noise.calibrate);
        get_if(m, "exponent", c.noise.exponent);
        get_if(m, "prefactor", c.noise.prefactor);
    }
    if (j.contains("sde")) {
        const json& m = j.at("sde");
        get_if(m, "dt", c.sde.dt);
        get_if(m, "kappa", c.sde.kappa);
        get_if(m, "amplitude_cap", c.sde.amplitude_cap);
    }
    if (j.contains("exit_time")) {
        const json& m = j.at("exit_time");
        get_if(m, "paths", c.exit_time.paths);
        get_if(m, "horizon_exponent", c.exit_time.horizon_exponent);
        get_if(m, "horizon_cap", c.exit_time.horizon_cap);
        get_if(m, "tube_c0", c.exit_time.tube_c0);
        get_if(m, "tube_m", c.exit_time.tube_m);
        get_if(m, "l2_radius_k", c.exit_time.l2_radius_k);
        get_if(m, "init_nu", c.exit_time.init_nu);
        get_if(m, "diag_cadence", c.exit_time.diag_cadence);
        get_if(m, "record_stride", c.exit_time.record_stride);
        get_if(m, "write_paths", c.exit_time.write_paths);
        get_if(m, "projection_transport", c.exit_time.projection_transport);
    }
    if (j.contains("coupling")) {
        const json& m = j.at("coupling");
        get_if(m, "seeds", c.coupling.seeds);
        get_if(m, "horizon", c.coupling.horizon);
        get_if(m, "drift_mode", c.coupling.drift_mode);
        get_if(m, "init_nu", c.coupling.init_nu);
        get_if(m, "diag_cadence", c.coupling.diag_cadence);
        get_if(m, "scale_factor", c.coupling.scale_factor);
        get_if(m, "projection_transport", c.coupling.projection_transport);
    }
    if (j.contains("sweep")) {
        const json& m = j.at("sweep");
        get_if(m, "rho_list", c.sweep.rho_list);
        get_if(m, "r_max_pad", c.sweep.r_max_pad);
        get_if(m, "eigen_count", c.sweep.eigen_count);
        get_if(m, "eigen_tol", c.sweep.eigen_tol);
    }
    if (j.contains("simulate")) {
        const json& m = j.at("simulate");
        get_if(m, "horizon", c.simulate.horizon);
        get_if(m, "record_stride", c.simulate.record_stride);
        get_if(m, "checkpoint_every", c.simulate.checkpoint_every);
        get_if(m, "resume", c.simulate.resume);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
        j = json::parse(text);
    else
        j = parse_toml_subset(text);
    return ExperimentConfig::from_json(j);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& dir,
                    const std::vector<std::string>& outputs) {
    json m;
    m["schema_version"] = 1;
    m["code_version"] = DROPLAB_VERSION;
    m["config"] = cfg.to_json();
    m["rng"] = {{"generator", "philox4x32-10"},
                {"keying", "(seed) -> key; counter = (stream, path, step, draw_pair)"},
                {"seed", cfg.seed}};
    m["outputs"] = outputs;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/manifest.json");
    out << m.dump(2) << "\n";
}

}  // namespace droplab::harness
