#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwave/grid.hpp"
#include "dwave/timeseries.hpp"

namespace dwave {

// Deterministic float formatting (shortest round-trip form would vary by
// library; fixed %.17g is byte-stable).
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io: cannot open " + path.string());
    out << text;
}

// NodeField CSV "i,j,value" with a JSON sidecar {N, h, dirichlet_zero}.
inline void write_node_field(const std::filesystem::path& csv_path, const NodeField& f,
                             bool dirichlet_zero, bool sidecar = true) {
    std::ostringstream out;
    out << "i,j,value\n";
    for (int i = 0; i <= f.mesh.n + 1; ++i)
        for (int j = 0; j <= f.mesh.n + 1; ++j)
            out << i << ',' << j << ',' << fmt(f(i, j)) << '\n';
    write_text(csv_path, out.str());

    if (!sidecar) return;
    nlohmann::json side;
    side["N"] = f.mesh.n;
    side["h"] = f.mesh.h;
    side["dirichlet_zero"] = dirichlet_zero;
    std::filesystem::path sp = csv_path;
    sp.replace_extension(".json");
    write_text(sp, side.dump(2) + "\n");
}

inline NodeField read_node_field(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw Error("io: cannot open " + csv_path.string());
    std::string line;
    std::getline(in, line); // header
    std::vector<std::tuple<int, int, double>> entries;
    int nmax = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int i, j;
        double v;
        if (std::sscanf(line.c_str(), "%d,%d,%lf", &i, &j, &v) != 3)
            throw Error("io: malformed row '" + line + "' in " + csv_path.string());
        entries.emplace_back(i, j, v);
        nmax = std::max(nmax, std::max(i, j));
    }
    Mesh m(nmax - 1);
    NodeField f(m);
    for (auto [i, j, v] : entries) f(i, j) = v;
    return f;
}

// TimeSeries: one CSV per snapshot plus an index JSON.
inline void write_time_series(const std::filesystem::path& dir, const std::string& stem,
                              const TimeSeries& s, int stride = 1) {
    std::filesystem::create_directories(dir);
    nlohmann::json index;
    index["N"] = s.mesh.n;
    index["t0"] = s.t0;
    index["dt"] = s.dt;
    index["stride"] = stride;
    nlohmann::json files = nlohmann::json::array();
    for (int n = 0; n < s.steps(); n += stride) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%06d.csv", stem.c_str(), n);
        write_node_field(dir / name, s[n], false, false);
        files.push_back({{"step", n}, {"t", s.time(n)}, {"file", name}});
    }
    index["snapshots"] = files;
    write_text(dir / (stem + "_index.json"), index.dump(2) + "\n");
}

// Flat key = value configuration files; '#' starts a comment.
struct Config {
    std::map<std::string, std::string> kv;
    mutable std::map<std::string, std::string> resolved; // echoed into the manifest

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("config: cannot open " + path.string());
        Config c;
        std::string line;
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                auto a = s.find_first_not_of(" \t\r");
                auto b = s.find_last_not_of(" \t\r");
                return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
            };
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (!key.empty()) c.kv[key] = val;
        }
        return c;
    }

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    std::string get(const std::string& key, const std::string& dflt) const {
        auto it = kv.find(key);
        std::string v = (it == kv.end()) ? dflt : it->second;
        resolved[key] = v;
        return v;
    }
    double get(const std::string& key, double dflt) const {
        return std::stod(get(key, fmt(dflt)));
    }
    int get(const std::string& key, int dflt) const {
        return std::stoi(get(key, std::to_string(dflt)));
    }
    std::vector<int> get_int_list(const std::string& key, const std::string& dflt) const {
        std::string v = get(key, dflt);
        std::vector<int> out;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.push_back(std::stoi(tok));
        return out;
    }
    std::vector<double> get_double_list(const std::string& key, const std::string& dflt) const {
        std::string v = get(key, dflt);
        std::vector<double> out;
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.push_back(std::stod(tok));
        return out;
    }

    // every key the run touched, defaults included
    nlohmann::json manifest(const std::string& command, std::uint64_t seed) const {
        nlohmann::json j;
        j["command"] = command;
        j["seed"] = seed;
        for (const auto& [k, v] : resolved) j["config"][k] = v;
        for (const auto& [k, v] : kv)
            if (!resolved.count(k)) j["unused"][k] = v;
        return j;
    }
};

} // namespace dwave
