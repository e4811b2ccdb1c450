// RunConfig: the knobs of every module, loadable from a UTF-8 "key = value"
// file ('#' starts a comment) and serialisable back for run snapshots.
//
//   scsa.tau_min  scsa.tau_max  scsa.theta_min  scsa.theta_max
//   igsr.beta  igsr.radius  igsr.k_min  igsr.k_scale
//   router.rho_min  router.input_dim  router.hidden1  router.hidden2  router.alpha
//   fusion.scale_vectors (true|false)  fusion.unroll (topological|index_reorder)
//   paths.model  paths.lexicon
#pragma once

#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>

#include "dualcomp/fusion.hpp"
#include "dualcomp/pipeline.hpp"
#include "dualcomp/router.hpp"

namespace dualcomp {

struct RunConfig {
    PipelineConfig pipeline;
    RouterDims router_dims;
    double alpha = 0.5;
    std::string model_path;
    std::string lexicon_path;
};

inline void validate(const RunConfig& c) {
    validate(c.pipeline);
    if (c.router_dims.input < 1 || c.router_dims.hidden1 < 1 || c.router_dims.hidden2 < 1)
        throw ConfigError("router dimensions must be positive");
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw ConfigError("router.alpha must lie in [0,1]");
}

namespace detail {

[[nodiscard]] inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
[[nodiscard]] T parse_number(std::string_view v, const std::string& where) {
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(where + ": cannot parse '" + std::string(v) + "' as a number");
    return out;
}

// Shortest representation that parses back to the same double.
[[nodiscard]] inline std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

[[nodiscard]] inline bool parse_bool(std::string_view v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where + ": expected true or false, got '" + std::string(v) + "'");
}

}  // namespace detail

inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value, const std::string& where) {
    using detail::parse_number;
    auto& p = c.pipeline;
    if (key == "scsa.tau_min") p.scsa.tau_min = parse_number<double>(value, where);
    else if (key == "scsa.tau_max") p.scsa.tau_max = parse_number<double>(value, where);
    else if (key == "scsa.theta_min") p.scsa.theta_min = parse_number<int>(value, where);
    else if (key == "scsa.theta_max") p.scsa.theta_max = parse_number<int>(value, where);
    else if (key == "igsr.beta") p.igsr.beta = parse_number<double>(value, where);
    else if (key == "igsr.radius") p.igsr.radius = parse_number<int>(value, where);
    else if (key == "igsr.k_min") p.igsr.k_min = parse_number<int>(value, where);
    else if (key == "igsr.k_scale") p.igsr.k_scale = parse_number<double>(value, where);
    else if (key == "router.rho_min") p.rho_min = parse_number<double>(value, where);
    else if (key == "router.input_dim") c.router_dims.input = parse_number<int>(value, where);
    else if (key == "router.hidden1") c.router_dims.hidden1 = parse_number<int>(value, where);
    else if (key == "router.hidden2") c.router_dims.hidden2 = parse_number<int>(value, where);
    else if (key == "router.alpha") c.alpha = parse_number<double>(value, where);
    else if (key == "fusion.scale_vectors") p.scale_vectors = detail::parse_bool(value, where);
    else if (key == "fusion.unroll") p.unroll = fusion::parse_unroll_mode(value);
    else if (key == "paths.model") c.model_path = std::string(value);
    else if (key == "paths.lexicon") c.lexicon_path = std::string(value);
    else throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
}

[[nodiscard]] inline RunConfig parse_config(std::istream& in, const std::string& what = "config") {
    RunConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const std::string where = what + ":" + std::to_string(lineno);
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
        apply_setting(c, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)), where);
    }
    validate(c);
    return c;
}

[[nodiscard]] inline std::string format_config(const RunConfig& c) {
    using detail::shortest;
    std::ostringstream o;
    const auto& p = c.pipeline;
    o << "scsa.tau_min = " << shortest(p.scsa.tau_min) << '\n'
      << "scsa.tau_max = " << shortest(p.scsa.tau_max) << '\n'
      << "scsa.theta_min = " << p.scsa.theta_min << '\n'
      << "scsa.theta_max = " << p.scsa.theta_max << '\n'
      << "igsr.beta = " << shortest(p.igsr.beta) << '\n'
      << "igsr.radius = " << p.igsr.radius << '\n'
      << "igsr.k_min = " << p.igsr.k_min << '\n'
      << "igsr.k_scale = " << shortest(p.igsr.k_scale) << '\n'
      << "router.rho_min = " << shortest(p.rho_min) << '\n'
      << "router.input_dim = " << c.router_dims.input << '\n'
      << "router.hidden1 = " << c.router_dims.hidden1 << '\n'
      << "router.hidden2 = " << c.router_dims.hidden2 << '\n'
      << "router.alpha = " << shortest(c.alpha) << '\n'
      << "fusion.scale_vectors = " << (p.scale_vectors ? "true" : "false") << '\n'
      << "fusion.unroll = " << fusion::to_string(p.unroll) << '\n';
    if (!c.model_path.empty()) o << "paths.model = " << c.model_path << '\n';
    if (!c.lexicon_path.empty()) o << "paths.lexicon = " << c.lexicon_path << '\n';
    return o.str();
}

}  // namespace dualcomp
