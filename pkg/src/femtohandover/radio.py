"""RF propagation for the macrocell and the in-vehicle femtocell.

Both loss formulas are implemented exactly as printed, including the
36.55 dB leading constant of the macrocell model (the textbook Hata value
is 69.55; pass ``constant=69.55`` to get it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InputError

MACRO_CONSTANT_DB = 36.55


@dataclass(frozen=True)
class MacroPathParams:
    f_c_m: float = 2000.0  # MHz
    h_b: float = 30.0  # m
    h_m: float = 1.5  # m
    d: float = 1.0  # km
    L_sh: float = 8.0  # dB, added as a constant
    L_pen: float = 0.0  # dB

    def __post_init__(self):
        for name in ("f_c_m", "h_b", "h_m", "d"):
            v = getattr(self, name)
            if not v > 0:
                raise InputError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class FemtoPathParams:
    f_c_f: float = 2000.0  # MHz
    N_pl: float = 30.0  # dB per decade of distance
    d_1: float = 10.0  # m
    n_walls: int = 0

    def __post_init__(self):
        for name in ("f_c_f", "N_pl", "d_1"):
            v = getattr(self, name)
            if not v > 0:
                raise InputError(f"{name} must be positive, got {v!r}")
        if self.n_walls < 0 or int(self.n_walls) != self.n_walls:
            raise InputError(f"n_walls must be a nonnegative integer, got {self.n_walls!r}")


def ms_height_correction(f_c_m: float, h_m: float) -> float:
    """Mobile antenna height correction a(h_m) in dB."""
    if not (f_c_m > 0 and h_m > 0):
        raise InputError(f"frequency and MS height must be positive, got {f_c_m!r}, {h_m!r}")
    lf = math.log10(f_c_m)
    return 1.1 * (lf - 0.7) * h_m - (1.56 * lf - 0.8)


def macro_path_loss(p: MacroPathParams, constant: float = MACRO_CONSTANT_DB) -> float:
    """Macrocell path loss in dB (distance in km)."""
    lb = math.log10(p.h_b)
    return (
        constant
        + 26.16 * math.log10(p.f_c_m)
        - 3.82 * lb
        - ms_height_correction(p.f_c_m, p.h_m)
        + (44.9 - 6.55 * lb) * math.log10(p.d)
        + p.L_sh
        + p.L_pen
    )


def femto_path_loss(p: FemtoPathParams) -> float:
    """Indoor femtocell path loss in dB (distance in m); walls enter as 4*n**2."""
    return 20.0 * math.log10(p.f_c_f) + p.N_pl * math.log10(p.d_1) + 4.0 * p.n_walls**2 - 28.0


def received_power(tx_power: float, loss: float) -> float:
    """Received power in dBm."""
    return tx_power - loss


class Trigger(str, Enum):
    STAY = "stay"
    HANDOVER = "handover"


def trigger_check(serving_rx: float, best_neighbor_rx: float,
                  hysteresis: float = 3.0, threshold: float = -90.0) -> Trigger:
    """Margin rule: leave only a weak serving cell for a clearly better neighbor."""
    if hysteresis < 0:
        raise InputError(f"hysteresis must be nonnegative, got {hysteresis!r}")
    if serving_rx < threshold and best_neighbor_rx > serving_rx + hysteresis:
        return Trigger.HANDOVER
    return Trigger.STAY


@dataclass(frozen=True)
class RadioConfig:
    macro_tx_dbm: float = 43.0
    fap_tx_dbm: float = 20.0
    macro: MacroPathParams = MacroPathParams()
    femto: FemtoPathParams = FemtoPathParams()
    macro_constant: float = MACRO_CONSTANT_DB
    hysteresis: float = 3.0
    threshold: float = -90.0


def walk_out_trigger(radio: RadioConfig, fap_distances_m, macro_distance_km: float) -> float | None:
    """First FAP distance at which an MS walking away from its FAP should hand over.

    The FAP link is the serving cell and the macro BS the neighbor; returns
    None if no sampled distance fires the trigger.
    """
    macro_loss = macro_path_loss(
        MacroPathParams(radio.macro.f_c_m, radio.macro.h_b, radio.macro.h_m, macro_distance_km,
                        radio.macro.L_sh, radio.macro.L_pen),
        radio.macro_constant,
    )
    macro_rx = received_power(radio.macro_tx_dbm, macro_loss)
    for d1 in fap_distances_m:
        fp = FemtoPathParams(radio.femto.f_c_f, radio.femto.N_pl, d1, radio.femto.n_walls)
        fap_rx = received_power(radio.fap_tx_dbm, femto_path_loss(fp))
        if trigger_check(fap_rx, macro_rx, radio.hysteresis, radio.threshold) is Trigger.HANDOVER:
            return d1
    return None
