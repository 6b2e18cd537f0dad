"""Class-A amplifier energy model.

An ideal class-A stage driven at back-off equal to the signal's peak-to-mean
ratio runs at efficiency 0.5/PAR (PAR linear, so the constant-envelope limit
hits the 50% ceiling). DC draw and the savings from peak reduction follow by
algebra; the saving-gain figure of merit is defined on the dB difference of
the two peak ratios. Linear-domain and dB-domain quantities are kept apart
explicitly to prevent silent unit bugs.
"""
from __future__ import annotations

from dataclasses import dataclass

from .metrics import PaprValue

__all__ = [
    "PowerReport",
    "amplifier_efficiency",
    "dc_power",
    "power_savings",
    "saving_gain",
    "make_power_report",
    "power_report_json",
]


def amplifier_efficiency(par: PaprValue) -> float:
    """0.5 / PAR with PAR in the linear domain; result in (0, 0.5]."""
    if par.linear < 1.0:
        raise ValueError("peak ratio must be >= 1")
    return 0.5 / par.linear


def dc_power(p_out_avg: float, par: PaprValue) -> float:
    """DC draw 2 * P_out_avg * PAR (watts, same unit as the input)."""
    if p_out_avg <= 0:
        raise ValueError("average output power must be positive")
    return 2.0 * p_out_avg * par.linear


def power_savings(p_out_avg: float, par_initial: PaprValue, par_final: PaprValue) -> float:
    """DC power saved by reducing the peak ratio: 2 * P_out * (PAR_i - PAR_f)."""
    if p_out_avg <= 0:
        raise ValueError("average output power must be positive")
    if par_final.linear > par_initial.linear:
        raise ValueError("final peak ratio exceeds the initial one; swap the arguments?")
    return 2.0 * p_out_avg * (par_initial.linear - par_final.linear)


def saving_gain(par_initial: PaprValue, par_final: PaprValue) -> float:
    """Figure of merit 2 * (PAR_initial_dB - PAR_final_dB)."""
    return 2.0 * (par_initial.db - par_final.db)


@dataclass(frozen=True)
class PowerReport:
    """Before/after energy summary for one peak-reduction outcome.

    ``ibo_db`` documents the drive back-off at the final operating point and
    drives no computation.
    """

    p_out_avg: float
    par_initial: PaprValue
    par_final: PaprValue
    efficiency_initial: float
    efficiency_final: float
    p_dc_initial: float
    p_dc_final: float
    p_savings: float
    saving_gain_db: float
    ibo_db: float

    def __post_init__(self):
        for eff in (self.efficiency_initial, self.efficiency_final):
            if not 0.0 < eff <= 0.5:
                raise ValueError("class-A efficiency must lie in (0, 0.5]")
        for dc in (self.p_dc_initial, self.p_dc_final):
            if dc < 2.0 * self.p_out_avg - 1e-12:
                raise ValueError("DC draw cannot undercut twice the average output power")
        expected_gain = 2.0 * (self.par_initial.db - self.par_final.db)
        if abs(self.saving_gain_db - expected_gain) > 1e-12:
            raise ValueError("saving gain must equal twice the dB reduction")


def make_power_report(p_out_avg: float, par_initial: PaprValue, par_final: PaprValue) -> PowerReport:
    return PowerReport(
        p_out_avg=p_out_avg,
        par_initial=par_initial,
        par_final=par_final,
        efficiency_initial=amplifier_efficiency(par_initial),
        efficiency_final=amplifier_efficiency(par_final),
        p_dc_initial=dc_power(p_out_avg, par_initial),
        p_dc_final=dc_power(p_out_avg, par_final),
        p_savings=power_savings(p_out_avg, par_initial, par_final),
        saving_gain_db=saving_gain(par_initial, par_final),
        ibo_db=par_final.db,
    )


def power_report_json(report: PowerReport) -> dict:
    """JSON-ready dict with every field unit-annotated in its key."""
    return {
        "p_out_avg_watts": report.p_out_avg,
        "par_initial_linear": report.par_initial.linear,
        "par_initial_db": report.par_initial.db,
        "par_final_linear": report.par_final.linear,
        "par_final_db": report.par_final.db,
        "efficiency_initial_ratio": report.efficiency_initial,
        "efficiency_final_ratio": report.efficiency_final,
        "p_dc_initial_watts": report.p_dc_initial,
        "p_dc_final_watts": report.p_dc_final,
        "p_savings_watts": report.p_savings,
        "saving_gain_db_difference_basis": report.saving_gain_db,
        "ibo_db": report.ibo_db,
    }
