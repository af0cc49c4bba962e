"""LOS gain along the track between two FSO APs and the simulated switch delay."""

import argparse
import math

from femtohandover.config import FsoConfig
from femtohandover.fso import (FsoBackhaul, FsoSwitchProfile, SwitchMessage, deliver_switch_message,
                               execute_link_switch, los_channel_gain, received_optical_power, track_link)
from femtohandover.kernel import EventKind, RunContext


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spacing", type=float, default=200.0)
    args = ap.parse_args()
    fso = FsoConfig()
    base = fso.link()
    print(f"{'x (m)':>7} {'H serving':>11} {'H target':>11} {'P_r serving (W)':>16}")
    for x in (5, 25, 50, 75, 99, 101, 125, 150, 195):
        hs = los_channel_gain(track_link(base, x, fso.lateral_offset))
        ht = los_channel_gain(track_link(base, args.spacing - x, fso.lateral_offset))
        print(f"{x:7.0f} {hs:11.3e} {ht:11.3e} {received_optical_power(base.P_t, hs):16.3e}")

    ctx = RunContext()
    link = FsoBackhaul(serving_ap=0)
    done = []
    ctx.on(EventKind.MESSAGE_DELIVERY,
           lambda c, ev: deliver_switch_message(c, ev.payload) and done.append(c.clock))
    execute_link_switch(link, 1, FsoSwitchProfile(), ctx)
    ctx.run_until()
    for step in link.trace:
        print("\t".join(str(x) for x in step[:4]) + f"\t{step[4]:.3f}")
    print(f"link switch completed after {done[0] * 1000.0:g} ms (profile total {FsoSwitchProfile().total_ms:g} ms)")


if __name__ == "__main__":
    main()
