#include "forge/config.hpp"

#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "forge/body_io.hpp"
#include "text_util.hpp"

namespace forge {

namespace {

std::string join(const std::vector<std::string>& problems) {
    std::string msg;
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

OracleSpec OracleSpec::parse(const std::string& text) {
    OracleSpec spec;
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("expected analytic:<image>, reference:<amplitude> or remote:<endpoint>");
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    if (kind == "analytic") {
        spec.kind = Kind::analytic;
        spec.target = rest;
        if (rest.empty()) throw std::invalid_argument("analytic oracle needs a target image path");
    } else if (kind == "reference") {
        spec.kind = Kind::reference;
        if (!text::parse_double(rest, spec.amplitude) || !(spec.amplitude >= 0.0))
            throw std::invalid_argument("reference oracle amplitude must be a non-negative number");
    } else if (kind == "remote") {
        spec.kind = Kind::remote;
        spec.target = rest;
        if (rest.empty()) throw std::invalid_argument("remote oracle needs an endpoint");
    } else {
        throw std::invalid_argument("unknown oracle kind '" + kind + "'");
    }
    return spec;
}

std::string OracleSpec::to_string() const {
    switch (kind) {
        case Kind::analytic: return "analytic:" + target;
        case Kind::reference: return "reference:" + text::format_double(amplitude);
        case Kind::remote: return "remote:" + target;
    }
    return {};
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

bool RunConfig::runs(Stage s) const {
    for (Stage x : stages)
        if (x == s) return true;
    return false;
}

namespace {

using Setter = std::function<std::string(std::string_view, RunConfig&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
    std::string key;
    Setter set;
    Getter get;
};

std::string parse_into(std::string_view v, double& out) {
    return text::parse_double(v, out) ? "" : "'" + std::string(v) + "' is not a number";
}

template <typename Int>
std::string parse_into(std::string_view v, Int& out) {
    return text::parse_int(v, out) ? "" : "'" + std::string(v) + "' is not an integer";
}

std::string parse_bool(std::string_view v, bool& out) {
    if (v == "true") return out = true, "";
    if (v == "false") return out = false, "";
    return "'" + std::string(v) + "' is not true or false";
}

std::string parse_pair(std::string_view v, double& lo, double& hi) {
    const auto parts = text::split_ws(v);
    if (parts.size() != 2 || !text::parse_double(parts[0], lo) || !text::parse_double(parts[1], hi))
        return "'" + std::string(v) + "' is not two numbers";
    return "";
}

std::string fmt(double v) { return text::format_double(v); }
std::string fmt_pair(double a, double b) { return fmt(a) + " " + fmt(b); }

template <typename Member>
Field num_field(const std::string& key, Member member) {
    return {key, [member](std::string_view v, RunConfig& c) { return parse_into(v, member(c)); },
            [member](const RunConfig& c) {
                auto& m = member(const_cast<RunConfig&>(c));
                if constexpr (std::is_floating_point_v<std::remove_reference_t<decltype(m)>>)
                    return fmt(m);
                else
                    return std::to_string(m);
            }};
}

std::vector<Field> run_fields() {
    std::vector<Field> f;
    f.push_back({"body", [](std::string_view v, RunConfig& c) { return c.body = v, std::string(); },
                 [](const RunConfig& c) { return c.body; }});
    f.push_back(num_field("humanoid_segments", [](RunConfig& c) -> int& { return c.humanoid_segments; }));
    f.push_back({"pose_library", [](std::string_view v, RunConfig& c) { return c.pose_library = v, std::string(); },
                 [](const RunConfig& c) { return c.pose_library; }});
    f.push_back({"oracle",
                 [](std::string_view v, RunConfig& c) -> std::string {
                     try {
                         OracleSpec s = OracleSpec::parse(std::string(v));
                         s.timeout_ms = c.oracle.timeout_ms;
                         s.condition_id = c.oracle.condition_id;
                         c.oracle = s;
                         return "";
                     } catch (const std::invalid_argument& e) {
                         return e.what();
                     }
                 },
                 [](const RunConfig& c) { return c.oracle.to_string(); }});
    f.push_back(num_field("oracle_timeout_ms", [](RunConfig& c) -> int& { return c.oracle.timeout_ms; }));
    f.push_back({"condition", [](std::string_view v, RunConfig& c) { return c.oracle.condition_id = v, std::string(); },
                 [](const RunConfig& c) { return c.oracle.condition_id; }});
    f.push_back({"output", [](std::string_view v, RunConfig& c) { return c.output = v, std::string(); },
                 [](const RunConfig& c) { return c.output; }});
    f.push_back({"seed",
                 [](std::string_view v, RunConfig& c) {
                     std::uint64_t s = 0;
                     std::string err = parse_into(v, s);
                     if (err.empty()) c.seed = s;
                     return err;
                 },
                 [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }});
    f.push_back({"stages",
                 [](std::string_view v, RunConfig& c) -> std::string {
                     std::vector<Stage> stages;
                     for (auto name : text::split_ws(v)) {
                         try {
                             const Stage s = parse_stage(std::string(name));
                             if (s == Stage::done) return "'done' is not a trainable stage";
                             stages.push_back(s);
                         } catch (const std::invalid_argument& e) {
                             return e.what();
                         }
                     }
                     for (std::size_t i = 1; i < stages.size(); ++i)
                         if (static_cast<int>(stages[i]) <= static_cast<int>(stages[i - 1]))
                             return "stages must appear in the order geometry, appearance, animation without repeats";
                     c.stages = std::move(stages);
                     return "";
                 },
                 [](const RunConfig& c) {
                     std::string s;
                     for (Stage x : c.stages) s += (s.empty() ? "" : " ") + std::string(stage_name(x));
                     return s;
                 }});
    f.push_back(num_field("render_width", [](RunConfig& c) -> int& { return c.training.render_width; }));
    f.push_back(num_field("render_height", [](RunConfig& c) -> int& { return c.training.render_height; }));
    f.push_back(num_field("albedo_width", [](RunConfig& c) -> int& { return c.training.albedo_width; }));
    f.push_back(num_field("albedo_height", [](RunConfig& c) -> int& { return c.training.albedo_height; }));
    f.push_back(num_field("checkpoint_every", [](RunConfig& c) -> int& { return c.training.checkpoint_every; }));
    f.push_back(num_field("log_every", [](RunConfig& c) -> int& { return c.training.log_every; }));
    return f;
}

std::vector<Field> schedule_fields() {
    std::vector<Field> f;
    f.push_back(num_field("num_steps", [](RunConfig& c) -> int& { return c.training.schedule.num_steps; }));
    f.push_back(num_field("beta_start", [](RunConfig& c) -> double& { return c.training.schedule.beta_start; }));
    f.push_back(num_field("beta_end", [](RunConfig& c) -> double& { return c.training.schedule.beta_end; }));
    f.push_back(num_field("t_min", [](RunConfig& c) -> double& { return c.training.schedule.t_min_fraction; }));
    f.push_back(num_field("t_max", [](RunConfig& c) -> double& { return c.training.schedule.t_max_fraction; }));
    f.push_back({"weighting",
                 [](std::string_view v, RunConfig& c) -> std::string {
                     if (v == "constant") return c.training.schedule.weighting = Weighting::constant, "";
                     if (v == "one_minus_alpha_bar")
                         return c.training.schedule.weighting = Weighting::one_minus_alpha_bar, "";
                     return "'" + std::string(v) + "' is not constant or one_minus_alpha_bar";
                 },
                 [](const RunConfig& c) {
                     return std::string(c.training.schedule.weighting == Weighting::constant ? "constant"
                                                                                             : "one_minus_alpha_bar");
                 }});
    return f;
}

std::vector<Field> stage_fields(Stage stage) {
    auto sc = [stage](RunConfig& c) -> StageConfig& { return c.training.stage(stage); };
    std::vector<Field> f;
    f.push_back(num_field("iterations", [sc](RunConfig& c) -> int& { return sc(c).iterations; }));
    f.push_back(num_field("lr_psi_v", [sc](RunConfig& c) -> double& { return sc(c).lr_psi_v; }));
    f.push_back(num_field("lr_psi_a", [sc](RunConfig& c) -> double& { return sc(c).lr_psi_a; }));
    f.push_back(num_field("lambda_n", [sc](RunConfig& c) -> double& { return sc(c).noise_weights.lambda_n; }));
    f.push_back(num_field("lambda_v", [sc](RunConfig& c) -> double& { return sc(c).noise_weights.lambda_v; }));
    f.push_back(num_field("lambda_a", [sc](RunConfig& c) -> double& { return sc(c).noise_weights.lambda_a; }));
    f.push_back(num_field("head_probability", [sc](RunConfig& c) -> double& { return sc(c).head_probability; }));
    for (const bool head : {false, true}) {
        const std::string p = head ? "head_" : "body_";
        auto view = [sc, head](RunConfig& c) -> ViewRange& { return head ? sc(c).head_view : sc(c).body_view; };
        f.push_back({p + "azimuth",
                     [view](std::string_view v, RunConfig& c) {
                         return parse_pair(v, view(c).azimuth_min, view(c).azimuth_max);
                     },
                     [view](const RunConfig& c) {
                         const ViewRange& r = view(const_cast<RunConfig&>(c));
                         return fmt_pair(r.azimuth_min, r.azimuth_max);
                     }});
        f.push_back({p + "elevation",
                     [view](std::string_view v, RunConfig& c) {
                         return parse_pair(v, view(c).elevation_min, view(c).elevation_max);
                     },
                     [view](const RunConfig& c) {
                         const ViewRange& r = view(const_cast<RunConfig&>(c));
                         return fmt_pair(r.elevation_min, r.elevation_max);
                     }});
        f.push_back({p + "distance",
                     [view](std::string_view v, RunConfig& c) {
                         return parse_pair(v, view(c).distance_min, view(c).distance_max);
                     },
                     [view](const RunConfig& c) {
                         const ViewRange& r = view(const_cast<RunConfig&>(c));
                         return fmt_pair(r.distance_min, r.distance_max);
                     }});
        f.push_back(num_field(p + "fov", [view](RunConfig& c) -> double& { return view(c).fov_y_deg; }));
    }
    f.push_back({"losses",
                 [sc](std::string_view v, RunConfig& c) -> std::string {
                     EnabledLosses l{false, false};
                     for (auto name : text::split_ws(v)) {
                         if (name == "geometry")
                             l.geometry = true;
                         else if (name == "appearance")
                             l.appearance = true;
                         else
                             return "unknown loss '" + std::string(name) + "'";
                     }
                     sc(c).enabled_losses = l;
                     return "";
                 },
                 [sc](const RunConfig& c) {
                     const EnabledLosses& l = sc(const_cast<RunConfig&>(c)).enabled_losses;
                     std::string s;
                     if (l.geometry) s += "geometry";
                     if (l.appearance) s += s.empty() ? "appearance" : " appearance";
                     return s;
                 }});
    f.push_back({"perturbation",
                 [sc](std::string_view v, RunConfig& c) -> std::string {
                     if (v == "adaptive") return sc(c).perturbation.mode = PerturbationMode::adaptive, "";
                     if (v == "fixed") return sc(c).perturbation.mode = PerturbationMode::fixed, "";
                     return "'" + std::string(v) + "' is not adaptive or fixed";
                 },
                 [sc](const RunConfig& c) {
                     return std::string(sc(const_cast<RunConfig&>(c)).perturbation.mode == PerturbationMode::adaptive
                                            ? "adaptive"
                                            : "fixed");
                 }});
    f.push_back(num_field("fixed_lambda_v", [sc](RunConfig& c) -> double& { return sc(c).perturbation.fixed_lambda_v; }));
    f.push_back(num_field("fixed_lambda_a", [sc](RunConfig& c) -> double& { return sc(c).perturbation.fixed_lambda_a; }));
    f.push_back(num_field("clip_norm", [sc](RunConfig& c) -> double& { return sc(c).clip_norm; }));
    f.push_back({"color_geometry_grad",
                 [sc](std::string_view v, RunConfig& c) { return parse_bool(v, sc(c).color_geometry_grad); },
                 [sc](const RunConfig& c) {
                     return std::string(sc(const_cast<RunConfig&>(c)).color_geometry_grad ? "true" : "false");
                 }});
    return f;
}

const std::vector<std::pair<std::string, std::vector<Field>>>& sections() {
    static const std::vector<std::pair<std::string, std::vector<Field>>> s = {
        {"run", run_fields()},
        {"schedule", schedule_fields()},
        {"geometry", stage_fields(Stage::geometry)},
        {"appearance", stage_fields(Stage::appearance)},
        {"animation", stage_fields(Stage::animation)},
    };
    return s;
}

constexpr std::string_view kHeader = "forge-config 1";

}  // namespace

std::vector<std::string> config_problems(const RunConfig& c, bool check_paths) {
    std::vector<std::string> out;
    if (!c.seed) out.push_back("run.seed: required");
    if (c.stages.empty()) out.push_back("run.stages: at least one stage is required");
    if (c.humanoid_segments < 4) out.push_back("run.humanoid_segments: must be >= 4");
    if (c.output.empty()) out.push_back("run.output: must not be empty");
    if (c.oracle.timeout_ms <= 0) out.push_back("run.oracle_timeout_ms: must be positive");
    const TrainingConfig& t = c.training;
    if (t.render_width <= 0 || t.render_height <= 0) out.push_back("run.render_width/render_height: must be positive");
    if (t.albedo_width <= 0 || t.albedo_height <= 0) out.push_back("run.albedo_width/albedo_height: must be positive");
    if (t.checkpoint_every < 0) out.push_back("run.checkpoint_every: must be >= 0");
    if (t.log_every < 0) out.push_back("run.log_every: must be >= 0");
    const ScheduleConfig& s = t.schedule;
    if (s.num_steps < 1) out.push_back("schedule.num_steps: must be >= 1");
    if (!(s.beta_start > 0.0 && s.beta_end < 1.0 && s.beta_start <= s.beta_end))
        out.push_back("schedule.beta_start/beta_end: need 0 < beta_start <= beta_end < 1");
    if (!(s.t_min_fraction >= 0.0 && s.t_min_fraction <= s.t_max_fraction && s.t_max_fraction <= 1.0))
        out.push_back("schedule.t_min/t_max: need 0 <= t_min <= t_max <= 1");
    for (Stage st : {Stage::geometry, Stage::appearance, Stage::animation}) {
        auto p = t.stage(st).check(stage_name(st));
        out.insert(out.end(), p.begin(), p.end());
    }
    if (c.runs(Stage::animation) && c.pose_library.empty())
        out.push_back("run.pose_library: required when the animation stage is enabled");
    if (check_paths) {
        auto need = [&](const std::string& key, const std::string& path) {
            if (!std::filesystem::is_regular_file(c.resolve(path)))
                out.push_back(key + ": file not found: " + c.resolve(path).string());
        };
        if (c.body != "test-humanoid") need("run.body", c.body);
        if (c.runs(Stage::animation) && !c.pose_library.empty() && c.pose_library != "demo")
            need("run.pose_library", c.pose_library);
        if (c.oracle.kind == OracleSpec::Kind::analytic) need("run.oracle", c.oracle.target);
    }
    return out;
}

RunConfig parse_config(const std::string& content, const std::string& source, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    cfg.base_dir = base_dir;
    std::vector<std::string> problems;
    text::LineReader reader(content, source);
    std::string_view line;
    if (!reader.next(line) || line != kHeader)
        throw ConfigError({source + ": missing '" + std::string(kHeader) + "' header"});

    const std::vector<Field>* fields = nullptr;
    std::string section;
    std::set<std::string> seen;
    while (reader.next(line)) {
        if (line.front() == '[') {
            if (line.back() != ']') {
                problems.push_back(reader.where() + ": malformed section header");
                fields = nullptr;
                continue;
            }
            section = std::string(line.substr(1, line.size() - 2));
            fields = nullptr;
            for (const auto& [name, f] : sections())
                if (name == section) fields = &f;
            if (!fields) problems.push_back(reader.where() + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back(reader.where() + ": expected key = value");
            continue;
        }
        const std::string key(text::trim(line.substr(0, eq)));
        const std::string_view value = text::trim(line.substr(eq + 1));
        if (section.empty()) {
            problems.push_back(reader.where() + ": " + key + ": key outside any section");
            continue;
        }
        if (!fields) continue;  // already reported the section
        const std::string qualified = section + "." + key;
        const Field* field = nullptr;
        for (const auto& f : *fields)
            if (f.key == key) field = &f;
        if (!field) {
            problems.push_back(reader.where() + ": " + qualified + ": unknown key");
            continue;
        }
        if (!seen.insert(qualified).second) {
            problems.push_back(reader.where() + ": " + qualified + ": duplicate key");
            continue;
        }
        if (value.empty() && key != "pose_library" && key != "condition" && key != "losses") {
            problems.push_back(reader.where() + ": " + qualified + ": empty value");
            continue;
        }
        if (std::string err = field->set(value, cfg); !err.empty())
            problems.push_back(reader.where() + ": " + qualified + ": " + err);
    }
    if (problems.empty()) problems = config_problems(cfg, false);
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::string content;
    try {
        content = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError({e.what()});
    }
    RunConfig cfg = parse_config(content, path.string(), std::filesystem::absolute(path).parent_path());
    auto problems = config_problems(cfg, true);
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

std::string serialize_config(const RunConfig& config) {
    std::ostringstream out;
    out << kHeader << "\n";
    bool first = true;
    for (const auto& [name, fields] : sections()) {
        out << (first ? "" : "\n") << "[" << name << "]\n";
        first = false;
        for (const auto& f : fields) {
            const std::string v = f.get(config);
            if (v.empty() && f.key == "seed") continue;
            out << f.key << " = " << v << "\n";
        }
    }
    return out.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string config_hash(const RunConfig& config) { return sha256_hex(serialize_config(config)); }

}  // namespace forge
