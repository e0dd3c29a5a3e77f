#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "twpa/experiment.hpp"
#include "twpa/hb.hpp"
#include "twpa/noise.hpp"

namespace twpa {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string num(double v) {
    if (std::isinf(v)) {
        return v < 0 ? "-inf" : "inf";
    }
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, r.ptr);
}

std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct Csv {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

class Writer {
public:
    Writer(fs::path dir, const ExperimentConfig& cfg) : dir_(std::move(dir)), cfg_(cfg) {}

    void write(const std::string& name, const Csv& csv) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out << "# twpa " << TWPA_VERSION << "\n";
        out << "# experiment: " << cfg_.name << "\n";
        out << "# analysis: " << to_string(cfg_.analysis.kind) << "\n";
        for (const auto& [k, v] : csv.meta) {
            out << "# " << k << ": " << v << "\n";
        }
        for (std::size_t i = 0; i < csv.header.size(); ++i) {
            out << (i ? "," : "") << csv.header[i];
        }
        out << "\n";
        for (const auto& row : csv.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                out << (i ? "," : "") << row[i];
            }
            out << "\n";
        }
        if (!out) {
            throw std::runtime_error("error writing " + path.string());
        }
        files_.push_back(path);
    }

    [[nodiscard]] const std::vector<fs::path>& files() const noexcept { return files_; }

private:
    fs::path dir_;
    const ExperimentConfig& cfg_;
    std::vector<fs::path> files_;
};

LadderNetwork build_network(const CircuitConfig& c) {
    return LadderNetwork::uniform(c.cells, c.critical_current, c.capacitance, c.bias,
                                  c.source_impedance, c.load_impedance);
}

HarmonicBasis build_basis(const AnalysisConfig& a, double f0) {
    HarmonicBasis b;
    b.fundamental = f0;
    b.num_harmonics = a.harmonics;
    b.time_samples = a.time_samples;
    return b;
}

struct Level {
    double norton;    // A
    std::string tag;  // for file names and the sweep column
    double value;     // as configured
};

std::vector<Level> pump_levels(const CaseConfig& c) {
    std::vector<Level> out;
    if (!c.drive.pump_power_dbm.empty()) {
        for (double p : c.drive.pump_power_dbm) {
            out.push_back({2.0 * power_dbm_to_current_amplitude(p, c.circuit.source_impedance),
                           shortest(p) + "dBm", p});
        }
    } else {
        for (double i : c.drive.pump_current) {
            out.push_back({i, shortest(i) + "A", i});
        }
    }
    return out;
}

std::string level_column(const CaseConfig& c) {
    return c.drive.pump_power_dbm.empty() ? "pump_current_a" : "pump_power_dbm";
}

/// Drops offsets that land on the pump sideband grid.
std::vector<double> usable_offsets(std::vector<double> offsets, double f0,
                                   std::vector<Diagnostic>& diags) {
    std::vector<double> out;
    for (double f : offsets) {
        try {
            check_offset(f0, f);
            out.push_back(f);
        } catch (const DegenerateOffsetError&) {
            diags.push_back({Diagnostic::Severity::warning,
                             "offset " + shortest(f) + " Hz skipped: coincides with a pump sideband"});
        }
    }
    return out;
}

json circuit_json(const CaseConfig& c) {
    return {{"cells", c.circuit.cells},
            {"critical_current_a", c.circuit.critical_current},
            {"capacitance_f", c.circuit.capacitance},
            {"bias_a", c.circuit.bias}};
}

json run_circuit_case(const ExperimentConfig& cfg, const CaseConfig& c, Writer& w,
                      std::vector<Diagnostic>& diags, int& status) {
    const AnalysisConfig& a = cfg.analysis;
    const LadderNetwork net = build_network(c.circuit);
    const HarmonicBasis basis = build_basis(a, c.drive.pump_frequency);
    const auto levels = pump_levels(c);
    std::vector<double> norton;
    for (const auto& l : levels) {
        norton.push_back(l.norton);
    }
    const SweepResult sweep = continuation_sweep(net, basis, norton);

    json jc = {{"name", c.name}, {"circuit", circuit_json(c)}, {"levels", json::array()}};
    if (sweep.failure) {
        status = 2;
        const double last = sweep.last_converged_amplitude;
        std::ostringstream m;
        m << "case " << c.name << ": " << *sweep.failure << "; last converged Norton amplitude "
          << shortest(last) << " A";
        if (last > 0.0) {
            m << " (" << num(current_amplitude_to_power_dbm(0.5 * last, c.circuit.source_impedance))
              << " dBm)";
        }
        diags.push_back({Diagnostic::Severity::error, m.str()});
        jc["failure"] = *sweep.failure;
        jc["last_converged_norton_a"] = last;
    }

    const std::size_t n_last = c.circuit.cells;
    std::vector<std::size_t> nodes;
    if (a.nodes.empty()) {
        nodes = {0, n_last};
    } else {
        for (long n : a.nodes) {
            nodes.push_back(static_cast<std::size_t>(n < 0 ? static_cast<long>(n_last) + 1 + n : n));
        }
    }
    std::vector<double> offsets;
    if (a.kind == AnalysisKind::noise) {
        offsets = usable_offsets(log_offset_grid(a.offset_start, a.offset_stop, a.points_per_decade),
                                 c.drive.pump_frequency, diags);
        const auto mask = PhaseNoiseMask::load(cfg.mask_path());
        const auto src = source_phase_noise(mask, c.drive.pump_frequency, a.harmonics, offsets);
        Csv csv;
        csv.meta = {{"case", c.name}, {"curve", "pump source"}};
        csv.header = {"offset_hz", "ssb_dbc_hz", level_column(c)};
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            csv.rows.push_back({num(offsets[i]), num(src[i]), "source"});
        }
        w.write(c.name + "_noise_source.csv", csv);
    }

    for (std::size_t li = 0; li < sweep.states.size(); ++li) {
        const HarmonicState& st = sweep.states[li];
        const Level& lv = levels[li];
        const PowerBalance pb = power_balance(st);
        jc["levels"].push_back({{"level", lv.value},
                                {"norton_a", lv.norton},
                                {"newton_iterations", st.newton_iterations()},
                                {"residual_a", st.residual_norm()},
                                {"max_junction_phase_rad", st.max_junction_phase()},
                                {"power_balance_error", pb.relative_error()}});
        if (a.kind == AnalysisKind::gain) {
            std::vector<double> freqs;
            const auto count = static_cast<long>(std::floor((a.signal_stop - a.signal_start) / a.signal_step + 1e-9));
            for (long i = 0; i <= count; ++i) {
                const double f = a.signal_start + static_cast<double>(i) * a.signal_step;
                const long ms = std::lround(f / c.drive.pump_frequency);
                try {
                    check_offset(c.drive.pump_frequency, f - static_cast<double>(ms) * c.drive.pump_frequency);
                    freqs.push_back(f);
                } catch (const DegenerateOffsetError&) {
                    diags.push_back({Diagnostic::Severity::warning,
                                     "signal " + shortest(f) + " Hz skipped: coincides with a pump sideband"});
                }
            }
            const auto gain = signal_gain(st, freqs);
            Csv csv;
            csv.meta = {{"case", c.name},
                        {"pump_norton_amplitude_a", shortest(lv.norton)},
                        {"signal_power_dbm", shortest(c.drive.signal_power_dbm)}};
            csv.header = {"frequency_hz", "gain_db", level_column(c)};
            for (const auto& g : gain) {
                csv.rows.push_back({num(g.frequency), num(g.gain_db), shortest(lv.value)});
            }
            w.write(c.name + "_gain_" + lv.tag + ".csv", csv);
        } else {
            const auto mask = PhaseNoiseMask::load(cfg.mask_path());
            NoiseOptions no;
            no.include_thermal = a.thermal;
            no.temperature = a.temperature;
            const auto spectra = phase_noise_spectra(st, mask, offsets, nodes, no);
            for (const auto& sp : spectra) {
                Csv csv;
                csv.meta = {{"case", c.name},
                            {"node", std::to_string(sp.node)},
                            {"pump_norton_amplitude_a", shortest(lv.norton)}};
                csv.header = {"offset_hz", "ssb_dbc_hz", level_column(c)};
                for (std::size_t i = 0; i < offsets.size(); ++i) {
                    csv.rows.push_back({num(offsets[i]), num(sp.ssb_dbc[i]), shortest(lv.value)});
                }
                w.write(c.name + "_noise_" + lv.tag + "_node" + std::to_string(sp.node) + ".csv", csv);
            }
        }
    }
    return jc;
}

std::string coeff_text(const std::array<double, 5>& a) {
    std::string s;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (i ? " " : "") + shortest(a[i]);
    }
    return s;
}

json run_poly_case(const ExperimentConfig& cfg, const CaseConfig& c, Writer& w,
                   std::vector<Diagnostic>& diags, std::uint64_t seed) {
    const AnalysisConfig& a = cfg.analysis;
    const PolynomialAmp amp{c.coefficients};
    const double f0 = c.drive.pump_frequency;
    const auto mask = PhaseNoiseMask::load(cfg.mask_path());
    const auto offsets =
        usable_offsets(log_offset_grid(a.offset_start, a.offset_stop, a.points_per_decade), f0, diags);
    json jc = {{"name", c.name}, {"coefficients", c.coefficients}, {"amplitudes", json::array()}};

    {
        const auto in = poly_input_phase_noise({1.0, f0}, mask, offsets);
        Csv csv;
        csv.meta = {{"case", c.name}, {"curve", "input"}};
        csv.header = {"offset_hz", "ssb_dbc_hz", "carrier_amplitude"};
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            csv.rows.push_back({num(offsets[i]), num(in[i]), "input"});
        }
        w.write(c.name + "_" + to_string(a.kind) + "_input.csv", csv);
    }

    for (double v : a.carrier_amplitudes) {
        const Carrier carrier{v, f0};
        const std::string tag = "v" + shortest(v);
        json jv = {{"amplitude", v}};
        if (a.kind == AnalysisKind::poly) {
            const auto out = poly_output_phase_noise(amp, carrier, mask, offsets);
            Csv csv;
            csv.meta = {{"case", c.name}, {"coefficients", coeff_text(c.coefficients)}};
            csv.header = {"offset_hz", "ssb_dbc_hz", "carrier_amplitude"};
            for (std::size_t i = 0; i < offsets.size(); ++i) {
                csv.rows.push_back({num(offsets[i]), num(out[i]), shortest(v)});
            }
            w.write(c.name + "_poly_" + tag + ".csv", csv);

            if (a.monte_carlo && v > 0.0) {
                MonteCarloOptions mo = a.mc;
                mo.seed = seed;
                const auto mc = monte_carlo_phase_noise(amp, carrier, mask, a.mc_offsets, mo);
                Csv m;
                m.meta = {{"case", c.name},
                          {"coefficients", coeff_text(c.coefficients)},
                          {"seed", std::to_string(seed)},
                          {"runs", std::to_string(mo.runs)},
                          {"segments", std::to_string(mo.segments)},
                          {"segment_length", std::to_string(mo.segment_length)},
                          {"duration_s", num(mc.duration)}};
                m.header = {"offset_hz", "ssb_dbc_hz", "ci_half_width_db", "carrier_amplitude"};
                for (std::size_t i = 0; i < mc.offsets.size(); ++i) {
                    m.rows.push_back({num(mc.offsets[i]), num(mc.ssb_dbc[i]),
                                      num(mc.ci_half_width_db[i]), shortest(v)});
                }
                w.write(c.name + "_mc_" + tag + ".csv", m);
            }
        } else {
            const auto rep = cyclo_overlap_report(amp, carrier, mask, offsets);
            Csv csv;
            csv.meta = {{"case", c.name}, {"coefficients", coeff_text(c.coefficients)}};
            csv.header = {"offset_hz", "total_dbc_hz"};
            json weights = json::object();
            for (const auto& r : rep.replicas) {
                csv.header.push_back("replica" + std::to_string(r.harmonic) + "_dbc_hz");
                csv.meta.emplace_back("replica" + std::to_string(r.harmonic) + "_weight", num(r.weight));
                weights[std::to_string(r.harmonic)] = r.weight;
            }
            csv.header.push_back("dominant_harmonic");
            csv.header.push_back("carrier_amplitude");
            for (std::size_t i = 0; i < offsets.size(); ++i) {
                std::vector<std::string> row{num(offsets[i]), num(rep.total_dbc[i])};
                for (const auto& r : rep.replicas) {
                    row.push_back(num(r.contribution_dbc[i]));
                }
                row.push_back(std::to_string(rep.dominant[i]));
                row.push_back(shortest(v));
                csv.rows.push_back(std::move(row));
            }
            w.write(c.name + "_cyclo_" + tag + ".csv", csv);
            jv["replica_weights"] = weights;
        }
        jc["amplitudes"].push_back(jv);
    }
    return jc;
}

const char* severity(Diagnostic::Severity s) {
    return s == Diagnostic::Severity::error ? "error" : "warning";
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts) {
    ExperimentConfig cfg = cfg_in;
    if (opts.output_directory) {
        cfg.output_directory = *opts.output_directory;
    }
    if (opts.seed) {
        cfg.analysis.mc.seed = *opts.seed;
    }

    RunSummary summary;
    summary.diagnostics = check_config(cfg);
    for (const auto& d : summary.diagnostics) {
        if (d.severity == Diagnostic::Severity::error) {
            throw ConfigError(d.message);
        }
    }
    summary.directory = cfg.output_directory;
    fs::create_directories(summary.directory);
    Writer w(summary.directory, cfg);

    json report = {{"experiment", cfg.name},
                   {"analysis", to_string(cfg.analysis.kind)},
                   {"version", TWPA_VERSION},
                   {"cases", json::array()}};
    int status = 0;
    for (const auto& c : cfg.cases) {
        if (cfg.analysis.kind == AnalysisKind::gain || cfg.analysis.kind == AnalysisKind::noise) {
            report["cases"].push_back(run_circuit_case(cfg, c, w, summary.diagnostics, status));
        } else {
            report["cases"].push_back(run_poly_case(cfg, c, w, summary.diagnostics, cfg.analysis.mc.seed));
        }
    }
    summary.status = status;
    {
        std::vector<Diagnostic> unique;
        for (auto& d : summary.diagnostics) {
            if (std::none_of(unique.begin(), unique.end(),
                             [&](const Diagnostic& u) { return u.message == d.message; })) {
                unique.push_back(std::move(d));
            }
        }
        summary.diagnostics = std::move(unique);
    }

    std::ostringstream manifest;
    manifest << "# twpa " << TWPA_VERSION << " run manifest; re-run with: twpa run manifest.cfg\n";
    for (const auto& d : summary.diagnostics) {
        manifest << "# " << severity(d.severity) << ": " << d.message << "\n";
    }
    manifest << "\n" << format_config(cfg);
    {
        std::ofstream out(summary.directory / "manifest.cfg", std::ios::binary);
        out << manifest.str();
    }

    report["status"] = status;
    report["diagnostics"] = json::array();
    for (const auto& d : summary.diagnostics) {
        report["diagnostics"].push_back({{"severity", severity(d.severity)}, {"message", d.message}});
    }
    report["files"] = json::array();
    for (const auto& f : w.files()) {
        report["files"].push_back(f.filename().string());
    }
    {
        std::ofstream out(summary.directory / "summary.json", std::ios::binary);
        out << report.dump(2) << "\n";
    }
    summary.files = w.files();
    summary.files.push_back(summary.directory / "manifest.cfg");
    summary.files.push_back(summary.directory / "summary.json");
    return summary;
}

}  // namespace twpa
