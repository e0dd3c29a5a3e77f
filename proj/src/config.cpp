#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "twpa/experiment.hpp"

namespace twpa {

namespace pt = boost::property_tree;

const char* to_string(AnalysisKind kind) noexcept {
    switch (kind) {
        case AnalysisKind::gain: return "gain";
        case AnalysisKind::noise: return "noise";
        case AnalysisKind::poly: return "poly";
        case AnalysisKind::cyclo: return "cyclo";
    }
    return "?";
}

std::filesystem::path ExperimentConfig::mask_path() const {
    if (analysis.mask.empty() || analysis.mask.is_absolute() || source.empty()) {
        return analysis.mask;
    }
    return source.parent_path() / analysis.mask;
}

bool ValidationResult::ok() const noexcept {
    return config.has_value() &&
           std::none_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
               return d.severity == Diagnostic::Severity::error;
           });
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// Maps "section/key" to the line it was read from, for error messages.
class LineIndex {
public:
    explicit LineIndex(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::string section;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            const std::string t = trim(line);
            if (t.empty() || t[0] == ';' || t[0] == '#') {
                continue;
            }
            if (t.front() == '[' && t.back() == ']') {
                section = trim(t.substr(1, t.size() - 2));
                lines_[section] = n;
                sections_.push_back(section);
                continue;
            }
            if (const auto eq = t.find('='); eq != std::string::npos) {
                lines_[section + "/" + trim(t.substr(0, eq))] = n;
            }
        }
    }

    [[nodiscard]] std::string where(const std::string& section, const std::string& key) const {
        auto it = lines_.find(key.empty() ? section : section + "/" + key);
        std::string loc = it == lines_.end() ? std::string{} : "line " + std::to_string(it->second) + ": ";
        return loc + "[" + section + "] " + key;
    }

    [[nodiscard]] const std::vector<std::string>& sections() const noexcept { return sections_; }

private:
    std::map<std::string, int> lines_;
    std::vector<std::string> sections_;
};

class FieldReader {
public:
    FieldReader(const LineIndex& lines, std::string section) : lines_(lines), section_(std::move(section)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(lines_.where(section_, key) + ": " + what);
    }

    double number(const std::string& key, const std::string& value) const {
        const std::string v = trim(value);
        double out = 0.0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
        if (r.ec != std::errc{} || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
            fail(key, "expected a number, got '" + v + "'");
        }
        return out;
    }

    long integer(const std::string& key, const std::string& value) const {
        const std::string v = trim(value);
        long out = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
        if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
            fail(key, "expected an integer, got '" + v + "'");
        }
        return out;
    }

    bool boolean(const std::string& key, const std::string& value) const {
        const std::string v = trim(value);
        if (v == "true" || v == "yes" || v == "1" || v == "on") {
            return true;
        }
        if (v == "false" || v == "no" || v == "0" || v == "off") {
            return false;
        }
        fail(key, "expected true or false, got '" + v + "'");
    }

    /// "a, b, c" or "start:step:stop" (inclusive).
    std::vector<double> numbers(const std::string& key, const std::string& value) const {
        const std::string v = trim(value);
        std::vector<double> out;
        if (v.find(':') != std::string::npos) {
            std::vector<double> parts;
            std::istringstream in(v);
            std::string tok;
            while (std::getline(in, tok, ':')) {
                parts.push_back(number(key, tok));
            }
            if (parts.size() != 3 || parts[1] == 0.0 || (parts[2] - parts[0]) / parts[1] < 0.0) {
                fail(key, "range must be start:step:stop with a step toward stop");
            }
            const double span = (parts[2] - parts[0]) / parts[1];
            const auto count = static_cast<long>(std::floor(span + 1e-9));
            if (count > 1000000) {
                fail(key, "range has too many points");
            }
            for (long i = 0; i <= count; ++i) {
                // strip accumulated rounding so 0.1:0.1:0.5 yields 0.3, not 0.30000000000000004
                char buf[32];
                const auto r = std::to_chars(buf, buf + sizeof buf, parts[0] + static_cast<double>(i) * parts[1],
                                             std::chars_format::general, 12);
                double x = 0.0;
                std::from_chars(buf, r.ptr, x);
                out.push_back(x);
            }
            return out;
        }
        std::istringstream in(v);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            if (!trim(tok).empty()) {
                out.push_back(number(key, tok));
            }
        }
        if (out.empty()) {
            fail(key, "empty list");
        }
        return out;
    }

private:
    const LineIndex& lines_;
    std::string section_;
};

using Setter = void (*)(const FieldReader&, const std::string&, const std::string&, CaseConfig&);

const std::map<std::string, Setter>& case_fields() {
    static const std::map<std::string, Setter> fields = {
        {"circuit.cells", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) {
             const long n = r.integer(k, v);
             if (n < 1) {
                 r.fail(k, "must be at least 1");
             }
             c.circuit.cells = static_cast<std::size_t>(n);
         }},
        {"circuit.critical_current", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.circuit.critical_current = r.number(k, v); }},
        {"circuit.capacitance", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.circuit.capacitance = r.number(k, v); }},
        {"circuit.bias", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.circuit.bias = r.number(k, v); }},
        {"circuit.source_impedance", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.circuit.source_impedance = r.number(k, v); }},
        {"circuit.load_impedance", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.circuit.load_impedance = r.number(k, v); }},
        {"drive.pump_frequency", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.drive.pump_frequency = r.number(k, v); }},
        {"drive.pump_power_dbm", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) {
             c.drive.pump_power_dbm = r.numbers(k, v);
             c.drive.pump_current.clear();
         }},
        {"drive.pump_current", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) {
             c.drive.pump_current = r.numbers(k, v);
             c.drive.pump_power_dbm.clear();
         }},
        {"drive.signal_power_dbm", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) { c.drive.signal_power_dbm = r.number(k, v); }},
        {"analysis.coefficients", [](const FieldReader& r, const std::string& k, const std::string& v, CaseConfig& c) {
             const auto a = r.numbers(k, v);
             if (a.size() != 5) {
                 r.fail(k, "expected five coefficients a0..a4");
             }
             std::copy(a.begin(), a.end(), c.coefficients.begin());
         }},
    };
    return fields;
}

void apply_analysis(const FieldReader& r, const std::string& key, const std::string& v,
                    AnalysisConfig& a) {
    if (key == "kind") {
        const std::string k = trim(v);
        if (k == "gain") {
            a.kind = AnalysisKind::gain;
        } else if (k == "noise") {
            a.kind = AnalysisKind::noise;
        } else if (k == "poly") {
            a.kind = AnalysisKind::poly;
        } else if (k == "cyclo") {
            a.kind = AnalysisKind::cyclo;
        } else {
            r.fail(key, "unknown analysis kind '" + k + "' (gain, noise, poly, cyclo)");
        }
    } else if (key == "harmonics") {
        a.harmonics = static_cast<int>(r.integer(key, v));
    } else if (key == "time_samples") {
        a.time_samples = static_cast<int>(r.integer(key, v));
    } else if (key == "signal_start") {
        a.signal_start = r.number(key, v);
    } else if (key == "signal_stop") {
        a.signal_stop = r.number(key, v);
    } else if (key == "signal_step") {
        a.signal_step = r.number(key, v);
    } else if (key == "mask") {
        a.mask = trim(v);
    } else if (key == "offset_start") {
        a.offset_start = r.number(key, v);
    } else if (key == "offset_stop") {
        a.offset_stop = r.number(key, v);
    } else if (key == "points_per_decade") {
        a.points_per_decade = static_cast<int>(r.integer(key, v));
    } else if (key == "nodes") {
        a.nodes.clear();
        for (double n : r.numbers(key, v)) {
            if (n != std::floor(n)) {
                r.fail(key, "node indices must be integers");
            }
            a.nodes.push_back(static_cast<long>(n));
        }
    } else if (key == "thermal") {
        a.thermal = r.boolean(key, v);
    } else if (key == "temperature") {
        a.temperature = r.number(key, v);
    } else if (key == "carrier_amplitudes") {
        a.carrier_amplitudes = r.numbers(key, v);
    } else if (key == "monte_carlo") {
        a.monte_carlo = r.boolean(key, v);
    } else if (key == "mc_offsets") {
        a.mc_offsets = r.numbers(key, v);
    } else if (key == "mc_seed") {
        const std::string s = trim(v);
        std::uint64_t seed = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            r.fail(key, "expected an unsigned 64-bit integer");
        }
        a.mc.seed = seed;
    } else if (key == "mc_runs") {
        a.mc.runs = static_cast<int>(r.integer(key, v));
    } else if (key == "mc_segments") {
        a.mc.segments = static_cast<std::size_t>(std::max(0L, r.integer(key, v)));
    } else if (key == "mc_segment_length") {
        a.mc.segment_length = static_cast<std::size_t>(std::max(0L, r.integer(key, v)));
    } else if (key == "mc_sample_rate") {
        a.mc.sample_rate = r.number(key, v);
    } else {
        r.fail(key, "unknown key");
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& source) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    const LineIndex lines(text);

    ExperimentConfig cfg;
    cfg.source = source;
    cfg.name = source.empty() ? "experiment" : source.stem().string();
    CaseConfig base;
    base.name = "main";
    std::vector<std::pair<std::string, const pt::ptree*>> case_sections;
    std::set<std::string> seen;

    for (const auto& section : lines.sections()) {
        static const std::set<std::string> known = {"experiment", "circuit", "drive", "analysis", "output"};
        if (!known.count(section) && !(section.rfind("case ", 0) == 0 && !trim(section.substr(5)).empty())) {
            throw ConfigError(lines.where(section, "") + "unknown section");
        }
    }
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) {
            throw ConfigError("'" + section + "' must be inside a section");
        }
        const FieldReader reader(lines, section);
        if (section == "experiment") {
            for (const auto& [key, v] : body) {
                if (key != "name") {
                    reader.fail(key, "unknown key");
                }
                cfg.name = trim(v.data());
            }
        } else if (section == "circuit" || section == "drive") {
            for (const auto& [key, v] : body) {
                const auto it = case_fields().find(section + "." + key);
                if (it == case_fields().end()) {
                    reader.fail(key, "unknown key");
                }
                it->second(reader, key, v.data(), base);
                seen.insert(section + "." + key);
            }
        } else if (section == "analysis") {
            for (const auto& [key, v] : body) {
                if (key == "coefficients") {
                    case_fields().at("analysis.coefficients")(reader, key, v.data(), base);
                } else {
                    apply_analysis(reader, key, v.data(), cfg.analysis);
                }
                seen.insert("analysis." + key);
            }
        } else if (section == "output") {
            for (const auto& [key, v] : body) {
                if (key != "directory") {
                    reader.fail(key, "unknown key");
                }
                cfg.output_directory = trim(v.data());
            }
        } else if (section.rfind("case ", 0) == 0 && !trim(section.substr(5)).empty()) {
            case_sections.emplace_back(section, &body);
        } else {
            throw ConfigError(lines.where(section, "") + "unknown section");
        }
    }

    for (const auto& [section, body] : case_sections) {
        CaseConfig c = base;
        c.name = trim(section.substr(5));
        const FieldReader reader(lines, section);
        for (const auto& [key, v] : *body) {
            const auto it = case_fields().find(key);
            if (it == case_fields().end()) {
                reader.fail(key, "unknown key (expected circuit.*, drive.* or analysis.coefficients)");
            }
            it->second(reader, key, v.data(), c);
        }
        for (const auto& other : cfg.cases) {
            if (other.name == c.name) {
                reader.fail("", "duplicate case name");
            }
        }
        cfg.cases.push_back(std::move(c));
    }
    if (cfg.cases.empty()) {
        cfg.cases.push_back(base);
    }

    // required fields, checked after case overrides are merged
    auto require = [&](bool present, const std::string& field) {
        if (!present) {
            throw ConfigError("missing field " + field);
        }
    };
    const bool circuit_kind =
        cfg.analysis.kind == AnalysisKind::gain || cfg.analysis.kind == AnalysisKind::noise;
    require(seen.count("analysis.kind") > 0, "analysis.kind");
    for (const auto& c : cfg.cases) {
        if (circuit_kind) {
            require(c.circuit.cells > 0, "circuit.cells" + (cfg.cases.size() > 1 ? " (case " + c.name + ")" : std::string{}));
            require(!c.drive.pump_power_dbm.empty() || !c.drive.pump_current.empty(),
                    "drive.pump_power_dbm or drive.pump_current");
        }
    }
    if (cfg.analysis.kind != AnalysisKind::gain) {
        require(!cfg.analysis.mask.empty(), "analysis.mask");
    }
    if (cfg.analysis.kind == AnalysisKind::poly || cfg.analysis.kind == AnalysisKind::cyclo) {
        require(!cfg.analysis.carrier_amplitudes.empty(), "analysis.carrier_amplitudes");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

std::vector<Diagnostic> check_config(const ExperimentConfig& cfg) {
    std::vector<Diagnostic> out;
    auto error = [&](std::string m) { out.push_back({Diagnostic::Severity::error, std::move(m)}); };
    auto warn = [&](std::string m) { out.push_back({Diagnostic::Severity::warning, std::move(m)}); };
    const AnalysisConfig& a = cfg.analysis;
    const bool circuit_kind = a.kind == AnalysisKind::gain || a.kind == AnalysisKind::noise;

    if (a.harmonics < 3) {
        error("analysis.harmonics must be at least 3");
    }
    if (a.time_samples < 4 * a.harmonics + 1) {
        error("analysis.time_samples must be at least 4 * harmonics + 1");
    }

    for (const auto& c : cfg.cases) {
        const std::string tag = "case " + c.name + ": ";
        const auto& ci = c.circuit;
        if (c.drive.pump_frequency <= 0.0) {
            error(tag + "drive.pump_frequency must be positive");
        }
        if (!circuit_kind) {
            PolynomialAmp amp{c.coefficients};
            try {
                amp.validate();
            } catch (const std::exception& e) {
                error(tag + e.what());
            }
            continue;
        }
        if (ci.critical_current <= 0.0 || ci.capacitance <= 0.0) {
            error(tag + "critical current and capacitance must be positive");
            continue;
        }
        if (ci.source_impedance <= 0.0 || ci.load_impedance <= 0.0) {
            error(tag + "terminations must be positive");
        }
        if (std::abs(ci.bias) >= ci.critical_current) {
            error(tag + "bias exceeds critical current");
            continue;
        }
        const bool dbm = !c.drive.pump_power_dbm.empty();
        const auto& levels = dbm ? c.drive.pump_power_dbm : c.drive.pump_current;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (i > 0 && !(levels[i] > levels[i - 1])) {
                error(tag + "pump levels must be strictly ascending");
                break;
            }
        }
        for (double level : levels) {
            const double line = dbm ? power_dbm_to_current_amplitude(level, ci.source_impedance)
                                    : 0.5 * level;
            if (!dbm && level < 0.0) {
                error(tag + "pump current must be non-negative");
                continue;
            }
            const double reach = (std::abs(ci.bias) + line) / ci.critical_current;
            if (reach >= kPumpWarningFraction) {
                std::ostringstream m;
                m << tag << "pump " << (dbm ? fmt(level) + " dBm" : fmt(level) + " A")
                  << " brings |bias| + I_p to " << std::round(reach * 100.0) / 100.0
                  << " I_c, near the -73 dBm critical region; convergence risk";
                warn(m.str());
            }
        }
        if (a.kind == AnalysisKind::gain) {
            const double top = (a.harmonics + 0.5) * c.drive.pump_frequency;
            if (!(a.signal_start > 0.0 && a.signal_stop >= a.signal_start && a.signal_step > 0.0)) {
                error(tag + "signal grid must satisfy 0 < signal_start <= signal_stop, signal_step > 0");
            } else if (a.signal_stop >= top) {
                error(tag + "signal_stop lies above the retained harmonics");
            }
        }
        if (a.kind == AnalysisKind::noise) {
            const long n = static_cast<long>(ci.cells);
            for (long node : a.nodes) {
                if (node > n || node < -(n + 1)) {
                    error(tag + "node " + std::to_string(node) + " outside 0.." + std::to_string(n));
                }
            }
        }
    }

    if (a.kind != AnalysisKind::gain) {
        if (!(a.offset_start > 0.0 && a.offset_stop >= a.offset_start && a.points_per_decade >= 1)) {
            error("offset grid must satisfy 0 < offset_start <= offset_stop, points_per_decade >= 1");
        }
        try {
            (void)PhaseNoiseMask::load(cfg.mask_path());
        } catch (const std::exception& e) {
            error(std::string("analysis.mask: ") + e.what());
        }
        if (a.thermal && a.temperature <= 0.0) {
            error("analysis.temperature must be positive");
        }
    }
    if (a.kind == AnalysisKind::poly || a.kind == AnalysisKind::cyclo) {
        for (double v : a.carrier_amplitudes) {
            if (v < 0.0) {
                error("carrier amplitudes must be non-negative");
            }
        }
    }
    if (a.monte_carlo) {
        if (a.kind != AnalysisKind::poly) {
            error("monte_carlo is only available for poly analyses");
        } else if (a.mc_offsets.empty()) {
            error("analysis.mc_offsets must list the offsets to estimate");
        } else if (a.mc.segments < 64 || a.mc.runs < 1 || a.mc.segment_length < 16) {
            error("Monte-Carlo needs mc_segments >= 64, mc_runs >= 1, mc_segment_length >= 16");
        } else {
            for (const auto& c : cfg.cases) {
                const double fs = a.mc.sample_rate > 0.0 ? a.mc.sample_rate : 20.0 * c.drive.pump_frequency;
                if (!(fs > 4.0 * kPolyDegree * c.drive.pump_frequency)) {
                    error("case " + c.name + ": aliasing guard: mc_sample_rate must exceed 16 f_p");
                }
            }
        }
    }
    return out;
}

ValidationResult validate_config(const std::filesystem::path& path) {
    ValidationResult res;
    try {
        res.config = load_config(path);
    } catch (const ConfigError& e) {
        res.diagnostics.push_back({Diagnostic::Severity::error, e.what()});
        return res;
    }
    res.diagnostics = check_config(*res.config);
    return res;
}

std::string format_config(const ExperimentConfig& cfg) {
    std::ostringstream o;
    auto list = [](const auto& xs) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            s += (i ? ", " : "") + fmt(static_cast<double>(xs[i]));
        }
        return s;
    };
    const AnalysisConfig& a = cfg.analysis;
    o << "[experiment]\nname = " << cfg.name << "\n\n";
    o << "[analysis]\n";
    o << "kind = " << to_string(a.kind) << "\n";
    o << "harmonics = " << a.harmonics << "\n";
    o << "time_samples = " << a.time_samples << "\n";
    if (a.kind == AnalysisKind::gain) {
        o << "signal_start = " << fmt(a.signal_start) << "\n";
        o << "signal_stop = " << fmt(a.signal_stop) << "\n";
        o << "signal_step = " << fmt(a.signal_step) << "\n";
    } else {
        o << "mask = " << std::filesystem::absolute(cfg.mask_path()).lexically_normal().string() << "\n";
        o << "offset_start = " << fmt(a.offset_start) << "\n";
        o << "offset_stop = " << fmt(a.offset_stop) << "\n";
        o << "points_per_decade = " << a.points_per_decade << "\n";
    }
    if (a.kind == AnalysisKind::noise) {
        if (!a.nodes.empty()) {
            o << "nodes = " << list(a.nodes) << "\n";
        }
        o << "thermal = " << (a.thermal ? "true" : "false") << "\n";
        o << "temperature = " << fmt(a.temperature) << "\n";
    }
    if (a.kind == AnalysisKind::poly || a.kind == AnalysisKind::cyclo) {
        o << "carrier_amplitudes = " << list(a.carrier_amplitudes) << "\n";
    }
    if (a.kind == AnalysisKind::poly) {
        o << "monte_carlo = " << (a.monte_carlo ? "true" : "false") << "\n";
        if (a.monte_carlo) {
            o << "mc_offsets = " << list(a.mc_offsets) << "\n";
            o << "mc_seed = " << a.mc.seed << "\n";
            o << "mc_runs = " << a.mc.runs << "\n";
            o << "mc_segments = " << a.mc.segments << "\n";
            o << "mc_segment_length = " << a.mc.segment_length << "\n";
            o << "mc_sample_rate = " << fmt(a.mc.sample_rate) << "\n";
        }
    }
    o << "\n[output]\ndirectory = " << cfg.output_directory.string() << "\n";
    const bool circuit_kind = a.kind == AnalysisKind::gain || a.kind == AnalysisKind::noise;
    for (const auto& c : cfg.cases) {
        o << "\n[case " << c.name << "]\n";
        if (circuit_kind) {
            o << "circuit.cells = " << c.circuit.cells << "\n";
            o << "circuit.critical_current = " << fmt(c.circuit.critical_current) << "\n";
            o << "circuit.capacitance = " << fmt(c.circuit.capacitance) << "\n";
            o << "circuit.bias = " << fmt(c.circuit.bias) << "\n";
            o << "circuit.source_impedance = " << fmt(c.circuit.source_impedance) << "\n";
            o << "circuit.load_impedance = " << fmt(c.circuit.load_impedance) << "\n";
        }
        o << "drive.pump_frequency = " << fmt(c.drive.pump_frequency) << "\n";
        if (circuit_kind) {
            if (!c.drive.pump_power_dbm.empty()) {
                o << "drive.pump_power_dbm = " << list(c.drive.pump_power_dbm) << "\n";
            } else {
                o << "drive.pump_current = " << list(c.drive.pump_current) << "\n";
            }
            o << "drive.signal_power_dbm = " << fmt(c.drive.signal_power_dbm) << "\n";
        } else {
            o << "analysis.coefficients = " << list(c.coefficients) << "\n";
        }
    }
    return o.str();
}

}  // namespace twpa
