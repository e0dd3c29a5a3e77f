#include "twpa/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twpa {

JosephsonJunction::JosephsonJunction(double critical_current)
    : critical_current_(critical_current),
      zero_bias_inductance_(kFluxQuantum / (2.0 * kPi * critical_current)) {
    if (!(critical_current > 0.0)) {
        throw ModelDomainError("critical current must be positive");
    }
}

UnitCell::UnitCell(JosephsonJunction jj, double capacitance)
    : junction(jj), shunt_capacitance(capacitance) {
    if (!(capacitance > 0.0)) {
        throw ModelDomainError("shunt capacitance must be positive");
    }
}

LadderNetwork::LadderNetwork(std::vector<UnitCell> cells, double source_impedance,
                             double load_impedance, double dc_bias_current)
    : cells_(std::move(cells)),
      source_impedance_(source_impedance),
      load_impedance_(load_impedance),
      dc_bias_current_(dc_bias_current) {
    if (cells_.empty()) {
        throw ModelDomainError("ladder needs at least one cell");
    }
    if (!(source_impedance_ > 0.0) || !(load_impedance_ > 0.0)) {
        throw ModelDomainError("terminations must be positive resistances");
    }
    if (std::abs(dc_bias_current_) >= min_critical_current()) {
        throw ModelDomainError("bias exceeds critical current");
    }
}

LadderNetwork LadderNetwork::uniform(std::size_t n_cells, double critical_current,
                                     double capacitance, double dc_bias_current,
                                     double source_impedance, double load_impedance) {
    const UnitCell cell(JosephsonJunction(critical_current), capacitance);
    return LadderNetwork(std::vector<UnitCell>(n_cells, cell), source_impedance, load_impedance,
                         dc_bias_current);
}

double LadderNetwork::min_critical_current() const noexcept {
    double ic = std::numeric_limits<double>::infinity();
    for (const auto& c : cells_) {
        ic = std::min(ic, c.junction.critical_current());
    }
    return ic;
}

double DriveSpec::norton_pump_amplitude(double source_impedance) const {
    if (pump_current_amplitude) {
        return *pump_current_amplitude;
    }
    if (pump_power_dbm) {
        return 2.0 * power_dbm_to_current_amplitude(*pump_power_dbm, source_impedance);
    }
    return 0.0;
}

void DriveSpec::validate() const {
    if (!(pump_frequency > 0.0)) {
        throw ModelDomainError("pump frequency must be positive");
    }
    if (pump_power_dbm.has_value() == pump_current_amplitude.has_value()) {
        throw ModelDomainError("give exactly one of pump power or pump current amplitude");
    }
    if (signal_frequency != 0.0) {
        if (!(signal_frequency > 0.0)) {
            throw ModelDomainError("signal frequency must be positive");
        }
        const double ratio = signal_frequency / pump_frequency;
        if (std::abs(ratio - std::round(ratio)) < 1e-12) {
            throw ModelDomainError("signal frequency coincides with a pump harmonic");
        }
    }
}

double jj_inductance(double current, const JosephsonJunction& jj) {
    const double x = current / jj.critical_current();
    if (!(std::abs(x) < 1.0)) {
        throw ModelDomainError("junction driven at or past critical current");
    }
    return jj.zero_bias_inductance() / std::sqrt(1.0 - x * x);
}

double junction_current_from_phase(double phase, const JosephsonJunction& jj) noexcept {
    return jj.critical_current() * std::sin(phase);
}

double characteristic_impedance(const UnitCell& cell, double bias) {
    return std::sqrt(jj_inductance(bias, cell.junction) / cell.shunt_capacitance);
}

double cutoff_frequency(const UnitCell& cell, double bias) {
    return 1.0 / (kPi * std::sqrt(jj_inductance(bias, cell.junction) * cell.shunt_capacitance));
}

double power_dbm_to_current_amplitude(double p_dbm, double z) {
    if (!(z > 0.0)) {
        throw ModelDomainError("impedance must be positive");
    }
    return std::sqrt(2.0 * std::pow(10.0, (p_dbm - 30.0) / 10.0) / z);
}

double current_amplitude_to_power_dbm(double amplitude, double z) {
    return 10.0 * std::log10(0.5 * amplitude * amplitude * z) + 30.0;
}

}  // namespace twpa
