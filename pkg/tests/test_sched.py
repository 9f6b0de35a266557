from collections import Counter

import pytest

from dbemem.errors import ConfigError
from dbemem.geometry import (BlockCoord, ImageGeometry, Interleave, SliceLayout,
                             build_geometry)
from dbemem.membank import Purpose
from dbemem.predwindow import WindowSpec
from dbemem.sched import (Scheduler, output_timeline, plan_baseline, plan_type1,
                          plan_type2, preset_baseline, preset_by_name,
                          preset_type1, preset_type2, total_frame_cycles)


def make_plan(width=640, height=64, cols=1):
    return build_geometry(ImageGeometry(width, height), SliceLayout(cols, 1),
                          Interleave.COLUMN_MAJOR)


def slot_records(sp):
    return sp.writes + sp.display_reads + [r for r, _ in sp.fetches]


def test_preset_structure():
    b = preset_baseline()
    assert (b.line_delay, b.line_buffers, b.banks_per_buffer) == ("one_line", 3, 1)
    assert not b.forwarding and not b.reconvert_on_fetch
    t1 = preset_type1()
    assert (t1.line_delay, t1.line_buffers, t1.banks_per_buffer) == ("half_line", 2, 1)
    assert t1.forwarding and not t1.reconvert_on_fetch
    t2 = preset_type2()
    assert (t2.line_delay, t2.line_buffers, t2.banks_per_buffer) == ("half_line", 2, 2)
    assert t2.forwarding and t2.reconvert_on_fetch
    with pytest.raises(ConfigError):
        preset_by_name("type3")


def test_latency_cycles():
    plan = make_plan(3840, 2160)
    assert preset_baseline().latency_cycles(plan) == 1920
    assert preset_type1().latency_cycles(plan) == 960
    assert preset_type2().latency_cycles(plan) == 960


def test_baseline_ping_pong_alternates():
    plan = make_plan()
    sched = Scheduler(preset_baseline(), WindowSpec(), plan)
    n = sched.slots_per_blockline

    def lower_write_target(slot):
        sp = sched.slot_plan(slot)
        return [r.buffer for r in sp.writes if r.buffer != "upper"][0]

    assert lower_write_target(5) == "lower0"
    assert lower_write_target(n + 5) == "lower1"
    assert lower_write_target(2 * n + 5) == "lower0"


def test_writes_always_offset_zero():
    plan = make_plan()
    for preset in (preset_baseline(), preset_type1(), preset_type2()):
        sched = Scheduler(preset, WindowSpec(), plan)
        for slot in (0, 7, 100, 200):
            sp = sched.slot_plan(slot)
            assert len(sp.writes) == 2
            assert all(r.cycle == sp.cycle_base for r in sp.writes)


def test_display_reads_on_odd_offsets():
    plan = make_plan()
    for preset in (preset_baseline(), preset_type1(), preset_type2()):
        sched = Scheduler(preset, WindowSpec(), plan)
        for k in range(0, sched.total_display_words, 97):
            assert sched.display_read_cycle(k) % 4 in (1, 3)


def test_type1_slot_shape_first_half():
    """In the busy half, the lower buffer carries exactly the designated
    pattern: write at 4K, output reads at 4K+1 and 4K+3, fetch at 4K+2."""
    plan = make_plan()
    sched = Scheduler(preset_type1(), WindowSpec(), plan)
    n = sched.slots_per_blockline
    for slot in range(2 * n + 5, 2 * n + 30):
        sp = sched.slot_plan(slot)
        lower = sorted((r.cycle - sp.cycle_base, r.purpose)
                       for r in slot_records(sp) if r.buffer == "lower0")
        assert lower == [(0, Purpose.WRITE_BLOCK_ROW), (1, Purpose.OUTPUT_READ),
                         (2, Purpose.PREDICT_FETCH), (3, Purpose.OUTPUT_READ)]


def test_type1_single_fetch_per_slot():
    plan = make_plan()
    sched = Scheduler(preset_type1(), WindowSpec(), plan)
    n = sched.slots_per_blockline
    for slot in range(2 * n, 3 * n):
        sp = sched.slot_plan(slot)
        assert len(sp.fetches) <= 1
        for rec, _ in sp.fetches:
            assert rec.cycle - sp.cycle_base == 2


def test_type2_bank_loads():
    """Every bank obeys the port law with room to spare: at most 4 accesses
    per slot (never two on one cycle), and on average at least two free
    cycles per bank per slot over a steady blockline."""
    plan = make_plan()
    sched = Scheduler(preset_type2(), WindowSpec(), plan)
    n = sched.slots_per_blockline
    free_total = 0
    samples = 0
    for slot in range(2 * n, 3 * n):
        sp = sched.slot_plan(slot)
        per_bank = Counter()
        per_cycle = Counter()
        for r in slot_records(sp):
            per_bank[(r.buffer, r.bank_id)] += 1
            per_cycle[(r.buffer, r.bank_id, r.cycle)] += 1
        assert all(v == 1 for v in per_cycle.values())   # port law
        for buf in ("upper", "lower0"):
            for bank in (0, 1):
                used = per_bank.get((buf, bank), 0)
                assert used <= 4
                assert 4 - used >= 1
                free_total += 4 - used
                samples += 1
    assert free_total / samples >= 2.0


def test_type2_fetches_every_cycle_offsets():
    # streaming fetches may land on any offset, unlike the refill presets
    plan = make_plan()
    sched = Scheduler(preset_type2(), WindowSpec(), plan)
    n = sched.slots_per_blockline
    offsets = set()
    for slot in range(2 * n, 3 * n):
        sp = sched.slot_plan(slot)
        for rec, _ in sp.fetches:
            offsets.add(rec.cycle - sp.cycle_base)
    assert len(offsets) >= 3


def test_plan_api_wrappers():
    plan = make_plan()
    b = BlockCoord(0, 10, 2, 0)
    for fn in (plan_baseline, plan_type2):
        sp = fn(b, plan)
        assert sp.block.block_x == 10
        assert len(sp.writes) == 2
    sp = plan_type1(b, plan, phase="first_half")
    assert len(sp.fetches) == 1
    with pytest.raises(ConfigError):
        plan_type1(b, plan, phase="second_half")
    cycles = sp.cycles()
    assert len(cycles) == 4
    assert any(r.purpose is Purpose.WRITE_BLOCK_ROW for r in cycles[0])


def test_output_timeline_rate_law():
    plan = make_plan(256, 64)
    preset = preset_baseline()
    events = list(output_timeline(preset, plan))
    d = preset.latency_cycles(plan)
    assert d == 256 * 2 // 4
    assert events[0] == (d, 0, 0)
    for i in range(1, len(events)):
        assert events[i][0] == events[i - 1][0] + 1   # exactly 4 px/cycle
    assert len(events) == 256 * 64 // 4
    assert events[-1][0] == total_frame_cycles(preset, plan) - 1


def test_total_frame_cycles():
    plan = make_plan(3840, 2160)
    assert total_frame_cycles(preset_baseline(), plan) == 3840 * 2160 // 4 + 1920
    assert total_frame_cycles(preset_type1(), plan) == 3840 * 2160 // 4 + 960


def test_warmup_fills_tail_slots():
    # the next blockline's left prev words are fetched while the right-edge
    # clip leaves the fetch cycle idle
    plan = make_plan()
    sched = Scheduler(preset_type1(), WindowSpec(), plan)
    n = sched.slots_per_blockline
    tail_words = []
    for slot in range(3 * n - sched.warmup_count, 3 * n):
        sp = sched.slot_plan(slot)
        for rec, d in sp.fetches:
            tail_words.append((d.line_y, d.word_local))
    bl = 2
    assert tail_words == [(2 * bl + 1, j) for j in range(sched.warmup_count)]
