#include "rach/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rach::cli {

ConfigError::ConfigError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::None:
            return "none";
        case PolicyKind::Static:
            return "static";
        case PolicyKind::FullState:
            return "full_state";
        case PolicyKind::Estimated:
            return "estimated";
    }
    return "?";
}

PolicyKind parse_policy(const std::string& name) {
    for (const auto k : {PolicyKind::None, PolicyKind::Static, PolicyKind::FullState, PolicyKind::Estimated}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ConfigError("unknown barring policy '" + name + "' (expected none, static, full_state or estimated)");
}

namespace {

int line_of(const YAML::Node& node) {
    const auto mark = node.Mark();
    return mark.is_null() ? 0 : mark.line + 1;
}

template <typename T>
T convert(const YAML::Node& node, const std::string& where) {
    if (!node.IsScalar()) {
        throw ConfigError(where + ": expected a scalar", line_of(node));
    }
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + ": cannot read '" + node.Scalar() + "'", line_of(node));
    }
}

template <typename T>
std::vector<T> convert_list(const YAML::Node& node, const std::string& where) {
    if (node.IsScalar()) {
        return {convert<T>(node, where)};
    }
    if (!node.IsSequence()) {
        throw ConfigError(where + ": expected a list", line_of(node));
    }
    std::vector<T> out;
    for (const auto& item : node) {
        out.push_back(convert<T>(item, where));
    }
    return out;
}

// Reads keys from one mapping and rejects the ones nobody asked for.
class MapReader {
public:
    MapReader(const YAML::Node& node, std::string where) : node_(node), where_(std::move(where)) {
        if (!node_.IsMap()) {
            throw ConfigError(where_ + ": expected a mapping", line_of(node_));
        }
    }

    YAML::Node child(const std::string& key) {
        known_.insert(key);
        return node_[key];
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (const auto n = child(key)) {
            out = convert<T>(n, path(key));
        }
    }

    template <typename T>
    void read_list(const std::string& key, std::vector<T>& out) {
        if (const auto n = child(key)) {
            out = convert_list<T>(n, path(key));
        }
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    void finish() const {
        for (const auto& kv : node_) {
            const auto key = kv.first.Scalar();
            if (!known_.contains(key)) {
                throw ConfigError("unknown key '" + path(key) + "'", line_of(kv.first));
            }
        }
    }

    int line() const { return line_of(node_); }

private:
    YAML::Node node_;
    std::string where_;
    std::set<std::string> known_;
};

template <typename F>
void checked(int line, F&& f) {
    try {
        f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what(), line);
    }
}

void read_traffic(MapReader& top, ScenarioFile& cfg) {
    const auto node = top.child("traffic");
    if (!node) {
        return;
    }
    MapReader r(node, "traffic");
    r.read("devices", cfg.traffic.devices);
    r.read("window_s", cfg.traffic.window_s);
    r.read("alpha", cfg.traffic.alpha);
    r.read("beta", cfg.traffic.beta);
    r.finish();
    checked(r.line(), [&] { cfg.traffic.validate(); });
}

void read_classes(MapReader& top, ScenarioFile& cfg) {
    const auto node = top.child("classes");
    if (!node) {
        return;
    }
    if (!node.IsSequence() || node.size() == 0) {
        throw ConfigError("classes: expected a non-empty list", line_of(node));
    }
    cfg.classes.clear();
    for (std::size_t i = 0; i < node.size(); ++i) {
        MapReader r(node[i], "classes[" + std::to_string(i) + "]");
        ClassEntry c;
        c.name = "class" + std::to_string(i);
        r.read("name", c.name);
        r.read("share", c.share);
        if (const auto band = r.child("band")) {
            const auto v = convert_list<int>(band, r.path("band"));
            if (v.size() != 2) {
                throw ConfigError(r.path("band") + ": expected [first, last]", line_of(band));
            }
            c.band = bccr::PriorityRange{v[0], v[1]};
        }
        r.finish();
        cfg.classes.push_back(c);
    }
}

void read_barring(MapReader& top, ScenarioFile& cfg) {
    const auto node = top.child("barring");
    if (!node) {
        return;
    }
    MapReader r(node, "barring");
    if (const auto p = r.child("policy")) {
        try {
            cfg.barring.policy = parse_policy(convert<std::string>(p, "barring.policy"));
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), line_of(p));
        }
    }
    r.read_list("probabilities", cfg.barring.probabilities);
    r.read("static_scale", cfg.barring.static_scale);
    r.read("collision_weight", cfg.barring.estimator.collision_weight);
    r.read("success_weight", cfg.barring.estimator.success_weight);
    r.read("gain", cfg.barring.estimator.gain);
    if (const auto table = r.child("table")) {
        if (!table.IsSequence()) {
            throw ConfigError("barring.table: expected a list", line_of(table));
        }
        cfg.barring.table.clear();
        for (std::size_t i = 0; i < table.size(); ++i) {
            MapReader row(table[i], "barring.table[" + std::to_string(i) + "]");
            BarringTableRow t;
            row.read("devices", t.devices);
            row.read_list("probabilities", t.probabilities);
            row.finish();
            if (t.probabilities.empty()) {
                throw ConfigError(row.path("probabilities") + " is required", row.line());
            }
            cfg.barring.table.push_back(t);
        }
    }
    r.finish();
    checked(r.line(), [&] {
        cfg.barring.estimator.validate();
        auto all = cfg.barring.probabilities;
        for (const auto& t : cfg.barring.table) {
            all.insert(all.end(), t.probabilities.begin(), t.probabilities.end());
        }
        for (const double p : all) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument("barring probabilities must lie in [0, 1]");
            }
        }
        if (!(cfg.barring.static_scale > 0.0)) {
            throw std::invalid_argument("barring.static_scale must be > 0");
        }
    });
}

void read_sweep(MapReader& top, ScenarioFile& cfg) {
    const auto node = top.child("sweep");
    if (!node) {
        return;
    }
    MapReader r(node, "sweep");
    r.read_list("devices", cfg.sweep.devices);
    r.read_list("slots", cfg.sweep.slots);
    r.read_list("r_over_r3", cfg.sweep.r_over_r3);
    if (const auto p = r.child("policy")) {
        cfg.sweep.policies.clear();
        for (const auto& name : convert_list<std::string>(p, "sweep.policy")) {
            try {
                cfg.sweep.policies.push_back(parse_policy(name));
            } catch (const ConfigError& e) {
                throw ConfigError(e.what(), line_of(p));
            }
        }
    }
    r.finish();
}

void read_sections(MapReader& top, ScenarioFile& cfg) {
    if (const auto node = top.child("resources")) {
        MapReader r(node, "resources");
        r.read("msg1_total", cfg.resources.msg1_total);
        r.read("msg3", cfg.resources.msg3);
        r.finish();
        checked(r.line(), [&] { cfg.resources.validate(); });
    }
    if (const auto node = top.child("bccr")) {
        MapReader r(node, "bccr");
        r.read("slots", cfg.bccr.slots);
        r.read("r_over_r3", cfg.bccr.r_over_r3);
        r.finish();
    }
    if (const auto node = top.child("analyze")) {
        MapReader r(node, "analyze");
        r.read("n_min", cfg.analyze.n_min);
        r.read("n_max", cfg.analyze.n_max);
        r.read_list("slots", cfg.analyze.slots);
        r.read_list("r_over_r3", cfg.analyze.r_over_r3);
        r.finish();
    }
    if (const auto node = top.child("validate")) {
        MapReader r(node, "validate");
        r.read("n_min", cfg.validate.n_min);
        r.read("n_max", cfg.validate.n_max);
        r.read("n_step", cfg.validate.n_step);
        r.read_list("slots", cfg.validate.slots);
        r.read("trials", cfg.validate.trials);
        r.read("tolerance", cfg.validate.tolerance);
        r.finish();
    }
    if (const auto node = top.child("prioritize")) {
        MapReader r(node, "prioritize");
        r.read("slots", cfg.prioritize.slots);
        r.read("static_scale", cfg.prioritize.static_scale);
        r.read("acb_prio_barring", cfg.prioritize.acb_prio_barring);
        r.read("acb_max_barring", cfg.prioritize.acb_max_barring);
        r.read("match_tolerance", cfg.prioritize.match_tolerance);
        r.read("max_iterations", cfg.prioritize.max_iterations);
        r.read("search_horizon_slots", cfg.prioritize.search_horizon_slots);
        r.finish();
    }
    if (const auto node = top.child("timing")) {
        MapReader r(node, "timing");
        r.read("crs_duration_s", cfg.timing.crs_duration_s);
        r.read("propagation_speed", cfg.timing.propagation_speed);
        r.read_list("transmit_ratios", cfg.timing.transmit_ratios);
        r.finish();
    }
    if (const auto node = top.child("output")) {
        MapReader r(node, "output");
        r.read("trace", cfg.output.trace);
        r.read("samples", cfg.output.samples);
        r.finish();
    }
}

// Shortest text that reads back to the same double.
std::string number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

YAML::Node number_list(const std::vector<double>& v) {
    YAML::Node n(YAML::NodeType::Sequence);
    for (const double x : v) {
        n.push_back(number(x));
    }
    return n;
}

template <typename T>
YAML::Node int_list(const std::vector<T>& v) {
    YAML::Node n(YAML::NodeType::Sequence);
    for (const auto x : v) {
        n.push_back(x);
    }
    return n;
}

}  // namespace

void ScenarioFile::check() const {
    if (replications < 1) {
        throw ConfigError("replications must be >= 1");
    }
    if (workers < 1) {
        throw ConfigError("workers must be >= 1");
    }
    if (preambles < 1) {
        throw ConfigError("preambles must be >= 1");
    }
    if (priority != "uniform" && priority != "bands") {
        throw ConfigError("priority must be 'uniform' or 'bands'");
    }
    std::set<std::string> names;
    double total = 0.0;
    for (const auto& c : classes) {
        if (c.name.empty() || !names.insert(c.name).second) {
            throw ConfigError("class names must be non-empty and unique");
        }
        total += c.share;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("class shares must sum to 1");
    }
    if (bccr.slots < 0 || bccr.slots > 16) {
        throw ConfigError("bccr.slots must lie in [0, 16]");
    }
    for (const int k : analyze.slots) {
        if (k < 0 || k > 16) {
            throw ConfigError("analyze.slots must lie in [0, 16]");
        }
    }
    for (const int k : validate.slots) {
        if (k < 0 || k > 16) {
            throw ConfigError("validate.slots must lie in [0, 16]");
        }
    }
    if (analyze.n_min < 0 || analyze.n_max < analyze.n_min) {
        throw ConfigError("analyze grid needs 0 <= n_min <= n_max");
    }
    if (validate.n_min < 0 || validate.n_max < validate.n_min || validate.n_step < 1) {
        throw ConfigError("validate grid needs 0 <= n_min <= n_max and n_step >= 1");
    }
    if (validate.trials < 1 || !(validate.tolerance > 0.0)) {
        throw ConfigError("validate needs trials >= 1 and tolerance > 0");
    }
    const auto& p = prioritize;
    if (p.slots < 1 || p.slots > 16 || !(p.static_scale > 0.0) || !(p.match_tolerance > 0.0) ||
        p.max_iterations < 1 || p.search_horizon_slots < 1 || !(p.acb_prio_barring >= 0.0 && p.acb_prio_barring < 1.0) ||
        !(p.acb_max_barring > 0.0 && p.acb_max_barring < 1.0)) {
        throw ConfigError("prioritize settings out of range");
    }
    for (const double ratio : timing.transmit_ratios) {
        try {
            timing::TimingConfig{timing.crs_duration_s, ratio, timing.propagation_speed}.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("timing: ") + e.what());
        }
    }
    for (const auto& point : sweep_points(*this)) {
        build_scenario(*this, point, seed);
    }
}

ScenarioFile parse_config(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ": " + e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
    }
    ScenarioFile cfg;
    if (!root || root.IsNull()) {
        cfg.check();
        return cfg;
    }
    MapReader top(root, "");
    top.read("seed", cfg.seed);
    top.read("replications", cfg.replications);
    top.read("workers", cfg.workers);
    top.read("preambles", cfg.preambles);
    top.read("priority", cfg.priority);
    top.read("prach_period_s", cfg.prach_period_s);
    top.read("msg3_delay_slots", cfg.msg3_delay_slots);
    top.read("msg4_delay_slots", cfg.msg4_delay_slots);
    top.read("backoff_window", cfg.backoff_window);
    top.read("horizon_slots", cfg.horizon_slots);
    if (const auto cap = top.child("retry_cap"); cap && !cap.IsNull()) {
        cfg.retry_cap = convert<std::int64_t>(cap, "retry_cap");
    }
    read_traffic(top, cfg);
    read_classes(top, cfg);
    read_barring(top, cfg);
    read_sweep(top, cfg);
    read_sections(top, cfg);
    top.finish();
    cfg.check();
    return cfg;
}

ScenarioFile load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    // Output files carry their configuration on a comment line.
    static const std::string marker = "# config: ";
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind(marker, 0) == 0) {
            return parse_config(line.substr(marker.size()), path.string());
        }
        if (line.empty() || line[0] != '#') {
            break;
        }
    }
    return parse_config(text, path.string());
}

std::string to_yaml_line(const ScenarioFile& cfg) {
    YAML::Node root(YAML::NodeType::Map);
    root["seed"] = cfg.seed;
    root["replications"] = cfg.replications;
    root["workers"] = cfg.workers;

    YAML::Node traffic(YAML::NodeType::Map);
    traffic["devices"] = cfg.traffic.devices;
    traffic["window_s"] = number(cfg.traffic.window_s);
    traffic["alpha"] = number(cfg.traffic.alpha);
    traffic["beta"] = number(cfg.traffic.beta);
    root["traffic"] = traffic;

    root["preambles"] = cfg.preambles;
    YAML::Node resources(YAML::NodeType::Map);
    resources["msg1_total"] = number(cfg.resources.msg1_total);
    resources["msg3"] = number(cfg.resources.msg3);
    root["resources"] = resources;

    YAML::Node bccr(YAML::NodeType::Map);
    bccr["slots"] = cfg.bccr.slots;
    bccr["r_over_r3"] = number(cfg.bccr.r_over_r3);
    root["bccr"] = bccr;
    root["priority"] = cfg.priority;

    YAML::Node classes(YAML::NodeType::Sequence);
    for (const auto& c : cfg.classes) {
        YAML::Node n(YAML::NodeType::Map);
        n["name"] = c.name;
        n["share"] = number(c.share);
        if (c.band) {
            n["band"] = int_list(std::vector<int>{c.band->first, c.band->last});
        }
        classes.push_back(n);
    }
    root["classes"] = classes;

    YAML::Node barring(YAML::NodeType::Map);
    barring["policy"] = to_string(cfg.barring.policy);
    barring["probabilities"] = number_list(cfg.barring.probabilities);
    YAML::Node table(YAML::NodeType::Sequence);
    for (const auto& t : cfg.barring.table) {
        YAML::Node row(YAML::NodeType::Map);
        row["devices"] = t.devices;
        row["probabilities"] = number_list(t.probabilities);
        table.push_back(row);
    }
    barring["table"] = table;
    barring["static_scale"] = number(cfg.barring.static_scale);
    barring["collision_weight"] = number(cfg.barring.estimator.collision_weight);
    barring["success_weight"] = number(cfg.barring.estimator.success_weight);
    barring["gain"] = number(cfg.barring.estimator.gain);
    root["barring"] = barring;

    root["prach_period_s"] = number(cfg.prach_period_s);
    root["msg3_delay_slots"] = cfg.msg3_delay_slots;
    root["msg4_delay_slots"] = cfg.msg4_delay_slots;
    root["backoff_window"] = cfg.backoff_window;
    root["retry_cap"] = cfg.retry_cap ? YAML::Node(*cfg.retry_cap) : YAML::Node(YAML::NodeType::Null);
    root["horizon_slots"] = cfg.horizon_slots;

    YAML::Node sweep(YAML::NodeType::Map);
    sweep["devices"] = int_list(cfg.sweep.devices);
    sweep["slots"] = int_list(cfg.sweep.slots);
    sweep["r_over_r3"] = number_list(cfg.sweep.r_over_r3);
    YAML::Node policies(YAML::NodeType::Sequence);
    for (const auto p : cfg.sweep.policies) {
        policies.push_back(to_string(p));
    }
    sweep["policy"] = policies;
    root["sweep"] = sweep;

    YAML::Node analyze(YAML::NodeType::Map);
    analyze["n_min"] = cfg.analyze.n_min;
    analyze["n_max"] = cfg.analyze.n_max;
    analyze["slots"] = int_list(cfg.analyze.slots);
    analyze["r_over_r3"] = number_list(cfg.analyze.r_over_r3);
    root["analyze"] = analyze;

    YAML::Node validate(YAML::NodeType::Map);
    validate["n_min"] = cfg.validate.n_min;
    validate["n_max"] = cfg.validate.n_max;
    validate["n_step"] = cfg.validate.n_step;
    validate["slots"] = int_list(cfg.validate.slots);
    validate["trials"] = cfg.validate.trials;
    validate["tolerance"] = number(cfg.validate.tolerance);
    root["validate"] = validate;

    YAML::Node prio(YAML::NodeType::Map);
    prio["slots"] = cfg.prioritize.slots;
    prio["static_scale"] = number(cfg.prioritize.static_scale);
    prio["acb_prio_barring"] = number(cfg.prioritize.acb_prio_barring);
    prio["acb_max_barring"] = number(cfg.prioritize.acb_max_barring);
    prio["match_tolerance"] = number(cfg.prioritize.match_tolerance);
    prio["max_iterations"] = cfg.prioritize.max_iterations;
    prio["search_horizon_slots"] = cfg.prioritize.search_horizon_slots;
    root["prioritize"] = prio;

    YAML::Node timing(YAML::NodeType::Map);
    timing["crs_duration_s"] = number(cfg.timing.crs_duration_s);
    timing["propagation_speed"] = number(cfg.timing.propagation_speed);
    timing["transmit_ratios"] = number_list(cfg.timing.transmit_ratios);
    root["timing"] = timing;

    YAML::Node output(YAML::NodeType::Map);
    output["trace"] = cfg.output.trace;
    output["samples"] = cfg.output.samples;
    root["output"] = output;

    YAML::Emitter out;
    out << YAML::Flow << root;
    return out.c_str();
}

std::vector<SweepPoint> sweep_points(const ScenarioFile& cfg) {
    const auto devices = cfg.sweep.devices.empty() ? std::vector<std::int64_t>{cfg.traffic.devices} : cfg.sweep.devices;
    const auto slots = cfg.sweep.slots.empty() ? std::vector<int>{cfg.bccr.slots} : cfg.sweep.slots;
    const auto ratios = cfg.sweep.r_over_r3.empty() ? std::vector<double>{cfg.bccr.r_over_r3} : cfg.sweep.r_over_r3;
    const auto policies =
        cfg.sweep.policies.empty() ? std::vector<PolicyKind>{cfg.barring.policy} : cfg.sweep.policies;
    std::vector<SweepPoint> out;
    for (const auto n : devices) {
        for (const auto p : policies) {
            for (const auto k : slots) {
                for (const auto r : ratios) {
                    out.push_back({n, k, r, p});
                }
            }
        }
    }
    return out;
}

sim::Scenario build_scenario(const ScenarioFile& cfg, const SweepPoint& point, std::uint64_t seed) {
    sim::Scenario s;
    s.traffic = cfg.traffic;
    s.traffic.devices = point.devices;
    s.preambles = cfg.preambles;
    s.resources = cfg.resources;
    s.prach_period_s = cfg.prach_period_s;
    s.msg3_delay_slots = cfg.msg3_delay_slots;
    s.msg4_delay_slots = cfg.msg4_delay_slots;
    s.backoff_window = cfg.backoff_window;
    s.retry_cap = cfg.retry_cap;
    s.horizon_slots = cfg.horizon_slots;
    s.seed = seed;
    s.record_trace = cfg.output.trace;

    s.classes.clear();
    for (const auto& c : cfg.classes) {
        s.classes.push_back({c.name, c.share});
    }

    if (point.slots < 0 || point.slots > 16) {
        throw ConfigError("BCCR slot count must lie in [0, 16]");
    }
    if (point.slots > 0) {
        if (!(point.r_over_r3 >= 0.0)) {
            throw ConfigError("r_over_r3 must be >= 0");
        }
        s.bccr = BccrConfig::with_slots(point.slots, point.r_over_r3 * cfg.resources.msg3);
        const int levels = s.bccr->levels;
        if (cfg.priority == "uniform") {
            s.priority = bccr::UniformRandom{levels};
        } else {
            const auto with_band = std::count_if(cfg.classes.begin(), cfg.classes.end(),
                                                 [](const ClassEntry& c) { return c.band.has_value(); });
            bccr::ClassBand band{levels, {}};
            const auto n = static_cast<int>(cfg.classes.size());
            if (with_band == 0) {
                // Even split, first class on the smallest (strongest) values.
                if (levels < n) {
                    throw ConfigError("priority bands need at least one level per class");
                }
                for (int i = 0; i < n; ++i) {
                    band.bands[class_id(i)] = {i * levels / n, (i + 1) * levels / n - 1};
                }
            } else if (with_band == n) {
                for (int i = 0; i < n; ++i) {
                    band.bands[class_id(i)] = *cfg.classes[static_cast<std::size_t>(i)].band;
                }
            } else {
                throw ConfigError("give a priority band to every class or to none");
            }
            s.priority = band;
        }
    }

    switch (point.policy) {
        case PolicyKind::None:
            s.barring = barring::StaticPolicy{{0.0}};
            break;
        case PolicyKind::Static: {
            const auto row = std::find_if(cfg.barring.table.begin(), cfg.barring.table.end(),
                                          [&](const BarringTableRow& t) { return t.devices == point.devices; });
            if (row != cfg.barring.table.end()) {
                s.barring = barring::StaticPolicy{row->probabilities};
            } else if (!cfg.barring.probabilities.empty()) {
                s.barring = barring::StaticPolicy{cfg.barring.probabilities};
            } else {
                s.barring = barring::StaticPolicy{{barring::default_static_barring(
                    point.devices, cfg.preambles, cfg.traffic.window_s, cfg.prach_period_s,
                    cfg.barring.static_scale)}};
            }
            break;
        }
        case PolicyKind::FullState:
            s.barring = barring::FullStatePolicy{};
            break;
        case PolicyKind::Estimated:
            s.barring = barring::EstimatedPolicy{cfg.barring.estimator};
            break;
    }

    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

}  // namespace rach::cli
