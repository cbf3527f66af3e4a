#!/usr/bin/env python3
"""
Test the subframe simulation loop: trivial cases, a hand-computed slot
table, run/step equivalence, determinism and conservation
"""

import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.config import config_from_dict
from core.errors import ConfigError
from core.models import FrameType
from core.core.sim_engine import PURPOSE_D2D_ACCESS, Simulation, draw_stream, run, step
from core.utils import time_to_slot

# D2D power high enough that any concurrent PDU fails even at MCS 0
SATURATING_DBM = 60.0


def small_config(strategy=None, stream=None, fading='flat', report_delay=0, seed=0):
    data = {
        'stream': {'gop_size': 4, 'frame_rate': 30.0, 'packets_per_i': 30,
                   'packets_per_diff': 5, 'duration': 1.0},
        'strategy': {'kind': 'FP', 'rho': 0.0},
        'fading': {'label': fading},
        'mac': {'report_delay': report_delay},
        'seed': seed,
    }
    data['stream'].update(stream or {})
    data['strategy'].update(strategy or {})
    return config_from_dict(data)


def test_no_d2d_no_loss():
    result = run(small_config())
    assert result.lost == 0
    assert result.quality.p_det == 1.0
    assert result.quality.d2d_rel_throughput == 0.0
    assert result.quality.metric == 'proxy'
    print("✓ FP rho=0 on a flat channel loses nothing")


def test_saturating_d2d_loses_everything():
    config = small_config(strategy={'rho': 1.0, 'power_dbm': SATURATING_DBM})
    result = run(config)
    assert result.delivered == 0
    assert result.quality.p_det == 0.0
    assert result.quality.d2d_rel_throughput == 1.0
    assert result.quality.efficiency is None
    print("✓ FP rho=1 with saturating power loses everything")


def test_hand_computed_slot_table():
    """
    Two GoPs of IPP, one packet per frame, a frame every 2 slots, 12 slots.

    slot  0  1  2  3  4  5  6  7  8  9 10 11
    mode  L  L  H  H  H  H  L  L  H  H  H  H
    pkt   0     1     2     3     4     5
    d2d   -  -  x  x  x  x  -  -  x  x  x  x

    I packets 0 and 3 go out in LOW mode and survive; DIFF packets 1, 2, 4, 5
    collide with the D2D pair and are lost.
    """
    config = small_config(
        strategy={'kind': 'FDTP', 'rho_i': 0.0, 'rho_d': 1.0, 'dci_delay': 0, 'power_dbm': SATURATING_DBM},
        stream={'gop_size': 3, 'gop_pattern': 'IPP', 'frame_rate': 500.0,
                'packets_per_i': 1, 'packets_per_diff': 1, 'duration': 0.012},
    )
    sim = Simulation(config)
    assert sim.total_slots == 12
    result = sim.run(seed=123)

    video = [(r.packet_index, r.slot, r.delivered) for r in result.loss_trace.video]
    assert video == [(0, 0, True), (1, 2, False), (2, 4, False), (3, 6, True), (4, 8, False), (5, 10, False)]

    transmitted = [d.slot for d in result.loss_trace.d2d if d.transmitted]
    assert transmitted == [2, 3, 4, 5, 8, 9, 10, 11]
    assert all(d.succeeded == d.transmitted for d in result.loss_trace.d2d)

    assert result.quality.p_det == 2 / 6
    assert result.quality.d2d_rel_throughput == 8 / 12
    assert abs(result.quality.efficiency - 1.0) < 1e-12
    assert [(g.damaged_frames, g.i_frame_lost) for g in result.quality.per_gop] == [(2, False), (2, False)]
    assert result.timeline_summary == {'HIGH/DIFF': 4, 'HIGH/IDLE': 4, 'LOW/I': 2, 'LOW/IDLE': 2}
    print("✓ Hand-computed slot table")


def test_step_matches_run_prefix():
    config = small_config(strategy={'kind': 'FDTP', 'rho_i': 0.2, 'rho_d': 0.7}, fading='low', report_delay=4)
    sim = Simulation(config)
    full = sim.run(seed=9)

    state = sim.initial_state(seed=9)
    for n in (1, 2, 3):
        state = step(state)
        assert state.slot == n
        assert state.video == [r for r in full.loss_trace.video if r.slot < n]
        assert state.d2d == full.loss_trace.d2d[:n]

    while not state.done:
        state = step(state)
    assert sim.finish(state).result_hash == full.result_hash
    print("✓ Step-by-step run equals run()")


def test_determinism():
    config = small_config(strategy={'kind': 'FDTP', 'rho_d': 0.6}, fading='high', report_delay=4)
    hashes = {Simulation(config).run(seed=42).result_hash for _ in range(5)}
    assert len(hashes) == 1
    assert run(small_config(strategy={'kind': 'FDTP', 'rho_d': 0.6}, fading='high', report_delay=4, seed=42)).result_hash in hashes
    print("✓ Same config and seed, same loss trace")


def test_seed_changes_only_draws():
    config = small_config(strategy={'kind': 'FP', 'rho': 0.5}, fading='low')
    sim = Simulation(config)
    a, b = sim.initial_state(seed=1), sim.initial_state(seed=2)

    assert a.scheduler.packets is b.scheduler.packets
    assert list(a.access_draws) != list(b.access_draws)

    ra, rb = sim.run(1), sim.run(2)
    assert [r.packet_index for r in sorted(ra.loss_trace.video, key=lambda r: r.packet_index)] == \
        [r.packet_index for r in sorted(rb.loss_trace.video, key=lambda r: r.packet_index)]
    assert ra.result_hash != rb.result_hash
    print("✓ Seeds only change the random draws")


def test_preambles_follow_transmission_order():
    config = small_config(strategy={'kind': 'FDTP', 'rho_i': 0.0, 'rho_d': 0.5, 'dci_delay': 1})
    sim = Simulation(config)
    state = sim.initial_state(seed=4)
    while not state.done:
        state = step(state)
    assert state.scheduler.backlog_empty

    sent = state.scheduler.preambles
    assert [e.frame_type for e in sent] == [e.frame_type for e in sim.preambles]
    assert all(a.time >= b.time - 1e-12 for a, b in zip(sent, sim.preambles))

    # the first packet after each type change waits dci_delay slots
    run_starts = [e.packet_index for k, e in enumerate(sim.packet_map.entries)
                  if k == 0 or e.frame_type is not sim.packet_map.entries[k - 1].frame_type]
    sent_slot = {r.packet_index: r.slot for r in state.video}
    announced = [round(e.time / config.slot_len) for e in sent]
    assert len(run_starts) == len(announced)
    assert all(sent_slot[idx] >= a + 1 for idx, a in zip(run_starts, announced))
    print("✓ Preambles follow the transmission order")


def test_mode_soundness_with_backlog():
    """
    An I-frame still queued when the next frame is released.

    Four slots at CQI 0 before the first report arrives keep the I packets
    in the backlog past the release of frame 1. The D2D pair must stay in
    LOW mode until the last of them is out.
    """
    for dci_delay in (0, 1, 2):
        config = small_config(
            strategy={'kind': 'FDTP', 'rho_i': 0.0, 'rho_d': 1.0, 'dci_delay': dci_delay},
            stream={'gop_size': 8, 'frame_rate': 300.0, 'packets_per_i': 30, 'duration': 0.1},
            report_delay=4,
        )
        sim = Simulation(config)
        result = sim.run(seed=0)
        entries = sim.packet_map.entries

        d2d_slots = {d.slot for d in result.loss_trace.d2d if d.transmitted}
        i_records = [r for r in result.loss_trace.video if entries[r.packet_index].frame_type is FrameType.I]
        first_diff = next(e for e in entries if e.frame_type is not FrameType.I)
        first_i_frame = [r for r in i_records if entries[r.packet_index].frame_index == 0]

        assert max(r.slot for r in first_i_frame) >= time_to_slot(first_diff.release_time, config.slot_len)
        assert not any(r.slot in d2d_slots for r in i_records), f"dci_delay={dci_delay}"
        assert all(r.delivered for r in i_records)
        assert not any(g.i_frame_lost for g in result.quality.per_gop)
        assert 'HIGH/I' not in result.timeline_summary
    print("✓ LOW mode covers a backlogged I-frame")


def test_conservation():
    config = small_config(strategy={'kind': 'FDTP', 'rho_i': 0.3, 'rho_d': 0.9}, fading='high', report_delay=4)
    sim = Simulation(config)
    for seed in range(5):
        result = sim.run(seed)
        assert result.delivered + result.lost == len(sim.packet_map)
        assert sorted(r.packet_index for r in result.loss_trace.video) == list(range(len(sim.packet_map)))
        slots = [r.slot for r in result.loss_trace.video]
        assert slots == sorted(slots)
    print("✓ Delivered + lost = total packets")


def test_throughput_bounded_by_high_mode():
    config = small_config(strategy={'kind': 'FDTP', 'rho_i': 0.0, 'rho_d': 1.0}, fading='low')
    result = Simulation(config).run(seed=3)
    high_slots = sum(n for key, n in result.timeline_summary.items() if key.startswith('HIGH/'))
    assert sum(result.timeline_summary.values()) == result.loss_trace.total_slots
    assert result.quality.d2d_rel_throughput <= high_slots / result.loss_trace.total_slots
    print("✓ Throughput bounded by HIGH-mode share")


def test_draw_stream_is_counter_based():
    long = draw_stream(7, PURPOSE_D2D_ACCESS, 1000)
    short = draw_stream(7, PURPOSE_D2D_ACCESS, 10)
    assert list(long[:10]) == list(short)
    assert list(draw_stream(7, 2, 10)) != list(short)
    print("✓ Draws depend only on (seed, purpose, index)")


def test_bler_hook_uses_own_stream():
    """Switching the BLER model on never moves the D2D access draws"""
    hard = small_config(strategy={'kind': 'FP', 'rho': 0.4}, fading='low', report_delay=4)
    soft = config_from_dict({**{'mac': {'report_delay': 4, 'bler_slope_db': 1.0}},
                             'stream': {'gop_size': 4, 'frame_rate': 30.0, 'packets_per_i': 30,
                                        'packets_per_diff': 5, 'duration': 1.0},
                             'strategy': {'kind': 'FP', 'rho': 0.4},
                             'fading': {'label': 'low'}})
    a, b = Simulation(hard).run(5), Simulation(soft).run(5)
    assert [d.transmitted for d in a.loss_trace.d2d] == [d.transmitted for d in b.loss_trace.d2d]
    print("✓ BLER draws keep the access draws in place")


def test_config_errors_before_slot_zero():
    bad = [
        {'strategy': {'rho': 1.5}},
        {'radio': {'earfcn': 17999}},
        {'stream': {'gop_pattern': 'PPPI', 'gop_size': 4}},
        {'mac': {'mcs_table': '/nonexistent/mcs.csv'}},
        {'slot_len': 0.0},
    ]
    for data in bad:
        try:
            Simulation(config_from_dict(data))
            assert False, f"expected ConfigError for {data}"
        except ConfigError:
            pass
    print("✓ Config errors raised before slot 0")


def test_leftover_backlog_counts_as_lost():
    """A stream that cannot drain before the end leaves packets never sent"""
    config = small_config(strategy={'rho': 1.0, 'power_dbm': SATURATING_DBM},
                          stream={'gop_size': 1, 'gop_pattern': 'I', 'frame_rate': 1000.0,
                                  'packets_per_i': 3, 'packets_per_diff': 1, 'duration': 0.005})
    result = Simulation(config).run(0)
    unsent = [r for r in result.loss_trace.video if r.slot == result.loss_trace.total_slots]
    # slot 0 only carries the I preamble
    assert len(unsent) == 15 - 4
    assert not any(r.delivered for r in unsent)
    print("✓ Unsent packets counted as lost")


if __name__ == "__main__":
    test_no_d2d_no_loss()
    test_saturating_d2d_loses_everything()
    test_hand_computed_slot_table()
    test_step_matches_run_prefix()
    test_determinism()
    test_seed_changes_only_draws()
    test_preambles_follow_transmission_order()
    test_mode_soundness_with_backlog()
    test_conservation()
    test_throughput_bounded_by_high_mode()
    test_draw_stream_is_counter_based()
    test_bler_hook_uses_own_stream()
    test_config_errors_before_slot_zero()
    test_leftover_backlog_counts_as_lost()
    print("\n✅ All simulation engine tests passed!")
