import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from femtohandover.cac import (DEFAULT_CLASSES, CellLedger, ReleaseCause, Scheme, TrafficClass, admit_group)
from femtohandover.errors import ConfigError, InputError, StateError
from ledger_fuzz import FUZZ_CLASSES, LedgerWalk, priority_counterexamples, run_sequences, violations

ADAPT, FIXED = 1, 2  # 2 Mbps with xi 0.5, and 1 Mbps non-adaptive
UNIT = (TrafficClass(1, 1.0),)


def filled(c_total, grants, classes=DEFAULT_CLASSES, **kw):
    """Ledger holding calls of the given (class_id, granted) pairs, restoration off."""
    led = CellLedger(c_total, classes, auto_restore=False, **kw)
    for i, (cid, g) in enumerate(grants):
        assert led.admit_handover_call(cid, f"c{i}")
        led.allocations[f"c{i}"].granted = g
    return led


def reserve(led, amount_calls, now=0.0):
    """Turn unit calls into reservations by releasing them with a mobility cause."""
    for i in range(amount_calls):
        led.admit_new_call(FIXED, f"r{i}")
        led.release_call(f"r{i}", ReleaseCause.OUTBOUND_M2F, now)


def test_releasable_examples():
    assert filled(10, [(ADAPT, 2.0)], classes=(DEFAULT_CLASSES[0], TrafficClass(3, 1.0, True, 0.5))
                  ).releasable_bandwidth() == 1.0
    two = CellLedger(10, (DEFAULT_CLASSES[0], TrafficClass(3, 1.0, True, 0.5)))
    two.admit_new_call(1, "a")
    two.admit_new_call(3, "b")
    assert two.releasable_bandwidth() == pytest.approx(1.5)
    assert two.nominal_releasable() == pytest.approx(1.5)
    assert filled(6, [(FIXED, 1.0)] * 3).releasable_bandwidth() == 0
    assert filled(6, [(ADAPT, 1.2)]).releasable_bandwidth() == pytest.approx(0.2)


def test_new_call_examples():
    led = CellLedger(6, DEFAULT_CLASSES)
    for i in range(5):
        led.admit_new_call(FIXED, i)
    reserve(led, 0)
    led.release_call(4, ReleaseCause.OUTBOUND_M2F, 0.0)
    led.admit_new_call(FIXED, 4)
    assert (led.occupied, led.vacant) == (5, 1)
    assert not led.admit_new_call(FIXED, "x")

    led = CellLedger(6, DEFAULT_CLASSES)
    for i in range(4):
        led.admit_new_call(FIXED, i)
    reserve(led, 1)
    assert (led.occupied, led.vacant) == (4, 1)
    assert led.admit_new_call(FIXED, "x")
    assert led.occupied == 5

    big = CellLedger(6, (TrafficClass(9, 6.0), TrafficClass(2, 1.0)))
    for i in range(3):
        big.admit_new_call(2, i)
    assert not big.admit_new_call(9, "x")


def test_handover_uses_reserved_pool_first():
    led = CellLedger(6, DEFAULT_CLASSES)
    for i in range(5):
        led.admit_new_call(FIXED, i)
    led.release_call(4, ReleaseCause.OUTBOUND_M2M, 0.0)
    led.admit_new_call(FIXED, 4)
    adm = led.admit_handover_call(FIXED, "h")
    assert adm and adm.degradations == {} and adm.reserved_used == 1.0
    assert led.vacant == 0 and led.occupied == 6


def shortfall_oracle(c_total, grants, classes, vacant, need):
    """Brute-force: smallest total degradation that admits ``need``, or None."""
    occupied = math.fsum(g for _, g in grants)
    margins = [g - classes[c].floor for c, g in grants if classes[c].qos_adaptive]
    room = c_total - occupied
    best = None
    steps = 200
    # Exhaustive grid over how much to take from the margins in total.
    for k in range(steps + 1):
        take = math.fsum(margins) * k / steps
        if need <= room + take + 1e-12:
            best = take
            break
    return best


def test_shortfall_example_matches_brute_force():
    # Adaptive margin 1.5 (one undegraded 2 Mbps call, one at 1.5) plus 2 Mbps fixed: occupied 5.5.
    grants = [(ADAPT, 2.0), (ADAPT, 1.5), (FIXED, 1.0), (FIXED, 1.0)]
    led = filled(6, grants)
    assert led.occupied == 5.5 and led.vacant == 0 and led.releasable_bandwidth() == 1.5
    adm = led.admit_handover_call(ADAPT, "h")
    assert adm
    assert sum(adm.degradations.values()) == pytest.approx(1.5)
    classes = {c.class_id: c for c in DEFAULT_CLASSES}
    assert shortfall_oracle(6, grants, classes, 0.0, 2.0) == pytest.approx(1.5, abs=0.01)
    assert led.occupied == pytest.approx(6.0)
    assert not violations(led)


def test_partial_degradation_is_proportional_to_margin():
    grants = [(ADAPT, 2.0), (ADAPT, 1.5), (FIXED, 1.0), (FIXED, 1.0)]
    led = filled(6.5, grants)  # free 1.0, shortfall 1.0 out of margin 1.5
    adm = led.admit_handover_call(ADAPT, "h")
    cuts = [adm.degradations[k] for k in ("c0", "c1")]
    assert cuts == pytest.approx([1.0 * 1.0 / 1.5, 1.0 * 0.5 / 1.5])


def test_full_cell_without_adaptive_drops():
    led = filled(6, [(FIXED, 1.0)] * 6)
    assert not led.admit_handover_call(FIXED, "h")
    assert not led.can_admit_handover(FIXED)


def test_unknown_class_and_call():
    led = CellLedger()
    with pytest.raises(ConfigError):
        led.admit_new_call(99, "x")
    with pytest.raises(ConfigError):
        led.admit_handover_call(99, "x")
    with pytest.raises(StateError):
        led.release_call("ghost", ReleaseCause.NORMAL_END)
    led.admit_new_call(1, "a")
    with pytest.raises(StateError):
        led.admit_new_call(1, "a")


def test_invalid_construction():
    with pytest.raises(InputError):
        CellLedger(0)
    with pytest.raises(InputError):
        CellLedger(6, reservation_time=-1)
    with pytest.raises(InputError):
        TrafficClass(1, 1.0, qos_adaptive=False, xi=0.5)
    with pytest.raises(InputError):
        TrafficClass(1, 0.0)


def test_release_reservations():
    led = CellLedger(6, DEFAULT_CLASSES, reservation_time=10)
    led.admit_new_call(FIXED, "a")
    rel = led.release_call("a", ReleaseCause.OUTBOUND_M2F, now=3.0)
    assert led.vacant == 1 and rel.reservation.expires_at == 13.0
    led.admit_new_call(FIXED, "b")
    assert led.release_call("b", ReleaseCause.NORMAL_END).reservation is None
    assert led.vacant == 1


def test_staggered_expiry():
    led = CellLedger(6, DEFAULT_CLASSES, reservation_time=10)
    led.admit_new_call(FIXED, "a")
    led.admit_new_call(ADAPT, "b")
    ra = led.release_call("a", ReleaseCause.FEMTOCELL_LEFT, 0.0).reservation
    rb = led.release_call("b", ReleaseCause.OUTBOUND_M2M, 4.0).reservation
    assert (ra.expires_at, rb.expires_at) == (10.0, 14.0)
    free0 = led.free
    led.expire_reservation(ra)
    assert led.vacant == 2.0 and led.free == free0 + 1
    led.expire_reservation(ra)  # already gone: no-op
    assert led.vacant == 2.0
    led.expire_reservation(rb)
    assert led.vacant == 0


def test_expiry_then_new_call():
    led = filled(6, [(FIXED, 1.0)] * 6)
    led.release_call("c0", ReleaseCause.OUTBOUND_M2F, 0.0)
    assert not led.admit_new_call(FIXED, "n")
    led.expire_reservation(led.reservations[0])
    assert led.admit_new_call(FIXED, "n")


def test_zero_reservation_time_reserves_nothing():
    led = CellLedger(6, DEFAULT_CLASSES, reservation_time=0)
    led.admit_new_call(FIXED, "a")
    assert led.release_call("a", ReleaseCause.OUTBOUND_M2F).reservation is None
    assert led.vacant == 0


def test_restore_examples():
    # Full 5.5 Mbps cell: one adaptive call degraded by 0.5 and four unit calls.
    led = filled(5.5, [(ADAPT, 1.5)] + [(FIXED, 1.0)] * 4)
    assert led.free == 0
    led.auto_restore = True
    led.release_call("c1", ReleaseCause.NORMAL_END)
    assert led.allocations["c0"].granted == 2.0
    assert led.free == pytest.approx(0.5)

    assert filled(3.5, [(ADAPT, 1.5), (ADAPT, 2.0)]).restore_degraded() == 0.0

    led = filled(3.7, [(ADAPT, 1.6), (ADAPT, 1.8)])
    assert led.free == pytest.approx(0.3)
    assert led.restore_degraded() == pytest.approx(0.3)
    assert [led.allocations[k].granted for k in ("c0", "c1")] == pytest.approx([1.8, 1.9])


def test_restore_never_touches_reservations():
    led = filled(6, [(ADAPT, 1.0), (FIXED, 1.0), (FIXED, 1.0), (FIXED, 1.0)])
    led.release_call("c1", ReleaseCause.OUTBOUND_M2M, 0.0)
    led.release_call("c2", ReleaseCause.OUTBOUND_M2M, 0.0)
    # free = 6 - 2 - 2 = 2 regardless of the 2 reserved.
    assert led.restore_degraded() == pytest.approx(1.0)
    assert led.vacant == 2


def test_baseline_ledger():
    led = CellLedger.for_scheme(Scheme.BASELINE, 6, DEFAULT_CLASSES, 10)
    assert led.reservation_time == 0 and not led.allow_degradation
    led.admit_new_call(ADAPT, "a")
    assert led.releasable_bandwidth() == 0
    assert led.release_call("a", ReleaseCause.FEMTOCELL_LEFT).reservation is None


def test_baseline_regions_coincide():
    rng = np.random.default_rng(4)
    base = CellLedger.for_scheme("baseline", 6, FUZZ_CLASSES)
    walk = LedgerWalk(rng, base)
    for _ in range(3000):
        walk.step()
        for cid in walk.ids:
            assert base.can_admit_new(cid) == base.can_admit_handover(cid)


def test_degenerate_proposed_equals_baseline():
    flat = tuple(TrafficClass(c.class_id, c.beta_r, c.qos_adaptive, 0.0) for c in FUZZ_CLASSES)
    a = CellLedger(6, flat, reservation_time=0)
    b = CellLedger.for_scheme("baseline", 6, flat)
    wa, wb = LedgerWalk(np.random.default_rng(9), a), LedgerWalk(np.random.default_rng(9), b)
    for _ in range(3000):
        wa.step()
        wb.step()
        assert {k: v.granted for k, v in a.allocations.items()} == {k: v.granted for k, v in b.allocations.items()}
        for cid in wa.ids:
            assert a.can_admit_handover(cid) == b.can_admit_handover(cid)
            assert a.can_admit_new(cid) == b.can_admit_new(cid)


def test_group_admission_descending_and_partial():
    led = CellLedger(4, DEFAULT_CLASSES, allow_degradation=False)
    admitted, dropped = admit_group(led, [("s", FIXED, 1.0), ("b", ADAPT, 2.0), ("m", FIXED, 1.0),
                                          ("z", FIXED, 1.0)])
    assert admitted == ["b", "m", "s"] and dropped == ["z"]
    assert all(not a.confirmed for a in led.allocations.values())


def test_snapshot_reflects_state():
    led = CellLedger(6, DEFAULT_CLASSES, cell_id=3)
    led.admit_new_call(ADAPT, "a")
    snap = led.snapshot()
    assert (snap.cell_id, snap.occupied, snap.vacant, snap.releasable, snap.counts) == (3, 2.0, 0.0, 1.0, {1: 1, 2: 0})


def test_ledger_fuzz_small():
    ops, bad = run_sequences(2000, seed=21)
    assert ops > 10_000 and bad == 0


def test_priority_property_small():
    checked, bad = priority_counterexamples(1000, seed=22)
    assert checked == 4000 and bad == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([1, 2, 3, 4]), st.booleans()), min_size=1, max_size=30),
       st.floats(2.0, 12.0))
def test_grants_never_exceed_capacity(ops, cap):
    led = CellLedger(cap, FUZZ_CLASSES)
    for i, (cid, handover) in enumerate(ops):
        (led.admit_handover_call if handover else led.admit_new_call)(cid, i)
        assert not violations(led)
        assert led.occupied <= cap + 1e-9
