"""Where a passenger walking away from the in-vehicle FAP triggers femto-to-macro handover.

Prints the trigger distance and writes the resulting F2M step trace.
"""

import argparse

import numpy as np

from femtohandover.handover import format_trace, trace_procedure
from femtohandover.radio import (FemtoPathParams, MacroPathParams, RadioConfig, femto_path_loss, macro_path_loss,
                                 received_power, walk_out_trigger)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--macro-km", type=float, default=0.5, help="distance to the macro BS")
    ap.add_argument("--walls", type=int, default=1)
    ap.add_argument("--trace", default="-")
    args = ap.parse_args()

    radio = RadioConfig(femto=FemtoPathParams(n_walls=args.walls))
    mp = radio.macro
    macro_rx = received_power(radio.macro_tx_dbm, macro_path_loss(
        MacroPathParams(mp.f_c_m, mp.h_b, mp.h_m, args.macro_km, mp.L_sh, mp.L_pen), radio.macro_constant))
    print(f"macro rx at {args.macro_km} km: {macro_rx:.2f} dBm")
    distances = np.round(np.arange(1.0, 500.0, 0.5), 3)
    for d1 in (1, 10, 50, 100):
        fp = FemtoPathParams(radio.femto.f_c_f, radio.femto.N_pl, d1, radio.femto.n_walls)
        print(f"  FAP rx at {d1:>3} m: {received_power(radio.fap_tx_dbm, femto_path_loss(fp)):.2f} dBm")
    hit = walk_out_trigger(radio, distances, args.macro_km)
    if hit is None:
        print("no handover trigger within 500 m")
        return
    print(f"F2M triggers at {hit:g} m from the FAP")
    lines = format_trace(trace_procedure("F2M"))
    if args.trace == "-":
        print("\n".join(lines))
    else:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in lines))


if __name__ == "__main__":
    main()
