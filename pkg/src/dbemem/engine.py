"""The cycle loop: applies schedules to the memory models, serves prediction
windows, and verifies every transaction against the golden oracle.

The outer loop advances in 4-cycle block slots; bank commits happen per
cycle inside a slot.  Violations never abort a run, so one simulation can
fully characterize a broken configuration.
"""

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .geometry import (BLOCK_W, CYCLES_PER_SLOT, PIXELS_PER_WORD, GeometryPlan,
                       ImageGeometry, Interleave, SliceLayout, build_geometry)
from .membank import Purpose, SramBankModel
from .oracle import GoldenOracle, ycocg_frame
from .predwindow import FETCH, RESIDENT, ReconBufferState, SECTIONS, WindowSpec
from .sched import ArchPreset, STREAMING, Scheduler, total_frame_cycles

DETAIL_LIMIT = 16  # violation samples kept per class


def _ycocg_cols(px: np.ndarray) -> np.ndarray:
    """Vectorized lossless RGB -> YCoCg over an (n, 3) array."""
    r = px[:, 0]
    g = px[:, 1]
    b = px[:, 2]
    out = np.empty_like(px)
    co = r - b
    t = b + (co >> 1)
    cg = g - t
    out[:, 0] = t + (cg >> 1)
    out[:, 1] = co
    out[:, 2] = cg
    return out


@dataclass
class FaultSpec:
    """Deterministic perturbation for negative testing."""
    kind: str                 # noop | flip_word | capacity_override |
                              # line_buffers_override | banks_override |
                              # delay_override | fetch_budget_override
    buffer: str | None = None
    word_index: int | None = None
    cycle: int | None = None
    value: int | str | None = None

    def __post_init__(self):
        kinds = ("noop", "flip_word", "capacity_override", "line_buffers_override",
                 "banks_override", "delay_override", "fetch_budget_override")
        if self.kind not in kinds:
            raise ConfigError(f"unknown fault kind {self.kind!r}")


@dataclass
class SimConfig:
    image: ImageGeometry
    slices: SliceLayout
    preset: ArchPreset
    window: WindowSpec = field(default_factory=WindowSpec)
    clock_hz: float = 200e6
    throughput_ppc: int = 4
    seed: int = 0
    interleave: Interleave = Interleave.COLUMN_MAJOR
    sram_read_latency: int = 0   # sensitivity knob: 1 models registered outputs
    collect_trace: bool = False
    collect_display: bool = False
    faults: list = field(default_factory=list)

    def __post_init__(self):
        if self.throughput_ppc * CYCLES_PER_SLOT != 16:
            raise ConfigError("throughput x 4 cycles must equal the 16-px block")
        if self.clock_hz <= 0:
            raise ConfigError("clock must be positive")
        if self.sram_read_latency not in (0, 1):
            raise ConfigError("sram_read_latency must be 0 or 1")


@dataclass
class ViolationLog:
    conflicts: int = 0
    hazards: int = 0
    underflows: int = 0
    availability_misses: int = 0
    output_mismatches: int = 0
    prediction_mismatches: int = 0
    details: dict = field(default_factory=dict)

    def total(self) -> int:
        return (self.conflicts + self.hazards + self.underflows
                + self.availability_misses + self.output_mismatches
                + self.prediction_mismatches)

    def passed(self) -> bool:
        return self.total() == 0

    def as_dict(self) -> dict:
        return {"conflicts": self.conflicts, "hazards": self.hazards,
                "underflows": self.underflows,
                "availability_misses": self.availability_misses,
                "output_mismatches": self.output_mismatches,
                "prediction_mismatches": self.prediction_mismatches}


@dataclass
class EngineResult:
    violations: ViolationLog
    latency_cycles: int
    total_cycles: int
    peak_recon_per_column: list
    recon_capacity: int
    windows_served: int
    pixels_served: int
    assembly_peak_pixels: int
    preset: ArchPreset
    plan: GeometryPlan
    config: SimConfig
    trace_rows: list = field(default_factory=list)
    violation_rows: list = field(default_factory=list)
    display_events: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations.passed()


class _ColumnState:
    """Per-slice-column runtime state.

    The fetch stage is a small word-wide register file in front of the
    prediction datapath: slot index is line_y mod 4, and a per-word line tag
    guards against stale data (lines two blocklines apart share a slot, but
    their service windows never overlap).
    """

    def __init__(self, spec, preset, capacity, n_words):
        self.recon = ReconBufferState(spec, preset.residency, capacity)
        self.stage_vals = np.zeros((4, n_words, PIXELS_PER_WORD, 3),
                                   dtype=np.int32)
        self.stage_line = np.full((4, n_words), -1, dtype=np.int64)
        self.history = deque(maxlen=2)  # (block_x, rgb_rows, yco_rows)


def apply_faults_to_preset(preset: ArchPreset, faults) -> ArchPreset:
    for f in faults:
        if f.kind == "capacity_override":
            preset = replace(preset, capacity_pixels=f.value)
        elif f.kind == "line_buffers_override":
            preset = replace(preset, line_buffers=f.value)
        elif f.kind == "banks_override":
            preset = replace(preset, banks_per_buffer=f.value)
        elif f.kind == "delay_override":
            preset = replace(preset, line_delay=f.value)
        elif f.kind == "fetch_budget_override":
            preset = replace(preset, fetch_words_per_slot=f.value)
    return preset


class Engine:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.preset = apply_faults_to_preset(cfg.preset, cfg.faults)
        self.plan = build_geometry(cfg.image, cfg.slices, cfg.interleave)
        self.spec = cfg.window
        self.sched = Scheduler(self.preset, self.spec, self.plan,
                               read_latency=cfg.sram_read_latency)
        self.oracle = GoldenOracle(cfg.seed, cfg.image.bit_depth)
        self.capacity = self.preset.capacity_for(self.spec)
        self.banks = {}
        for buf in self.preset.buffer_names():
            for bk in range(self.preset.banks_per_buffer):
                self.banks[(buf, bk)] = SramBankModel(buf, bk)
        self.cols = [_ColumnState(self.spec, self.preset, self.capacity,
                                  self.plan.words_per_line)
                     for _ in range(cfg.slices.columns)]
        self.log = ViolationLog()
        self.trace_rows = []
        self.violation_rows = []
        self.display_events = []
        self._flip_faults = sorted(
            [f for f in cfg.faults if f.kind == "flip_word"],
            key=lambda f: f.cycle)
        self._next_display_k = 0
        # per-section span metadata: each span splits into a left part (the
        # section's route) and, with forwarding, the previously-decoded block
        self._parts = {}
        routes = self.preset.residency.routes
        fwd_on = self.preset.residency.forwarding_enabled
        for s in SECTIONS:
            lo, hi = self.spec.span(s)
            parts = []
            if s != "prev" and fwd_on and hi >= -BLOCK_W:
                split = max(lo, -BLOCK_W)
                if split > lo:
                    parts.append((lo, split - 1, routes[s]))
                parts.append((split, hi, "forwarded"))
            else:
                parts.append((lo, hi, routes[s]))
            self._parts[s] = parts
        self._stage_words_static = self._stage_words()

    def _stage_words(self) -> int:
        words = self.sched.warmup_count + 1
        if self.preset.fetch_kind == STREAMING:
            for s, (lo, hi, route) in (
                    ("prev", self._parts["prev"][0]),
                    ("row1", self._parts["row1"][0])):
                if route == FETCH:
                    words += (hi - lo) // PIXELS_PER_WORD + 2
        return words

    # -- bookkeeping helpers -------------------------------------------------

    def _trace(self, rec, granted=True):
        if self.cfg.collect_trace and granted:
            self.trace_rows.append(
                (rec.cycle, rec.slice_col, rec.buffer, rec.bank_id, rec.op,
                 rec.word_index, rec.purpose.value, rec.block_id))

    def _note(self, cls, item):
        self.log.details.setdefault(cls, [])
        if len(self.log.details[cls]) < DETAIL_LIMIT:
            self.log.details[cls].append(item)

    def _drain_bank_violations(self):
        tracing = self.cfg.collect_trace
        for bank in self.banks.values():
            for v in bank.conflicts:
                self.log.conflicts += 1
                self._note("conflicts", v)
                if tracing:
                    self.violation_rows.append(
                        (v.cycle, -1, v.buffer, v.bank_id, "conflict",
                         v.second_word, v.second_purpose.value, v.block_id))
            for v in bank.hazards:
                self.log.hazards += 1
                self._note("hazards", v)
                if tracing:
                    self.violation_rows.append(
                        (v.cycle, -1, v.buffer, v.bank_id, "hazard",
                         v.word_index, Purpose.WRITE_BLOCK_ROW.value,
                         v.block_id))
            for v in bank.underflows:
                self.log.underflows += 1
                self._note("underflows", v)
                if tracing:
                    self.violation_rows.append(
                        (v.cycle, -1, v.buffer, v.bank_id, "underflow",
                         v.word_index, v.purpose.value, -1))
            bank.conflicts.clear()
            bank.hazards.clear()
            bank.underflows.clear()

    # -- main loop -------------------------------------------------------------

    def run(self) -> EngineResult:
        plan = self.plan
        w, h = plan.image.width, plan.image.height
        rgb = self.oracle.golden_frame(w, h)
        yco = ycocg_frame(rgb)
        self._rgb, self._yco = rgb, yco
        total_slots = plan.total_blocklines * self.sched.slots_per_blockline
        total_cycles = total_frame_cycles(self.preset, plan)
        windows_served = 0
        pixels_served = 0

        for slot in range(total_slots):
            base = CYCLES_PER_SLOT * slot
            b = self.sched.block_at_slot(slot)
            col = self.cols[b.slice_col]
            sp = self.sched.slot_plan(slot)
            # book block row-writes (values from the golden decode)
            y0 = 2 * b.blockline
            x0 = plan.slice_base_x(b.slice_col) + BLOCK_W * b.block_x
            write_booked = []
            for rec in sp.writes:
                row_y = y0 if rec.buffer == "upper" else y0 + 1
                vals = rgb[row_y, x0:x0 + BLOCK_W]
                bank = self.banks[(rec.buffer, rec.bank_id)]
                if bank.request_access(rec, values=vals, line_y=row_y):
                    write_booked.append(rec)
                    self._trace(rec)
            # book display reads
            for rec in sp.display_reads:
                if self.banks[(rec.buffer, rec.bank_id)].request_access(rec):
                    self._trace(rec)
            # book prediction fetches
            fetch_booked = []
            for rec, demand in sp.fetches:
                bank = self.banks[(rec.buffer, rec.bank_id)]
                if bank.request_access(rec):
                    fetch_booked.append((rec, demand))
                    self._trace(rec)
            self._commit_slot(base, write_booked,
                              [rec for rec, _ in fetch_booked])
            # route fetched words into the column's word stage
            for rec, demand in fetch_booked:
                bank = self.banks[(rec.buffer, rec.bank_id)]
                vals, written, tag = bank.peek_word(rec.word_index)
                if written and tag == demand.line_y:
                    cstate = self.cols[demand.slice_col]
                    s = demand.line_y & 3
                    cstate.stage_vals[s, demand.word_local] = vals
                    cstate.stage_line[s, demand.word_local] = demand.line_y
            # slide the window and verify availability for this block
            self._advance_window(b, col)
            served, misses, mismatches = self._serve_window(b, col)
            windows_served += 1
            pixels_served += served
            self.log.availability_misses += misses
            self.log.prediction_mismatches += mismatches
            # record the decoded block for forwarding / admission
            col.history.append((b.block_x,
                                rgb[y0:y0 + 2, x0:x0 + BLOCK_W],
                                yco[y0:y0 + 2, x0:x0 + BLOCK_W]))
            self._drain_bank_violations()

        # display-only tail after the last decode slot
        slot = total_slots
        while self._next_display_k < self.sched.total_display_words:
            base = CYCLES_PER_SLOT * slot
            for k in self.sched.display_words_in(base, base + CYCLES_PER_SLOT):
                rec = self.sched.display_record(k)
                if self.banks[(rec.buffer, rec.bank_id)].request_access(rec):
                    self._trace(rec)
            self._commit_slot(base)
            self._drain_bank_violations()
            slot += 1

        peak = [c.recon.peak_occupancy for c in self.cols]
        return EngineResult(
            violations=self.log,
            latency_cycles=self.sched.latency,
            total_cycles=total_cycles,
            peak_recon_per_column=peak,
            recon_capacity=self.capacity,
            windows_served=windows_served,
            pixels_served=pixels_served,
            assembly_peak_pixels=self._stage_words_static * PIXELS_PER_WORD,
            preset=self.preset,
            plan=plan,
            config=self.cfg,
            trace_rows=self.trace_rows,
            violation_rows=self.violation_rows,
            display_events=self.display_events,
        )

    def _commit_slot(self, base, write_recs=(), fetch_recs=()):
        flips = [f for f in self._flip_faults
                 if base <= f.cycle < base + CYCLES_PER_SLOT]
        for cyc in range(base, base + CYCLES_PER_SLOT):
            for f in flips:
                if f.cycle == cyc:
                    self._apply_flip(f)
            for bank in self.banks.values():
                if not bank.has_booking(cyc):
                    continue
                result = bank.commit_cycle(cyc)
                if result is None:
                    continue
                rec, vals = result
                if rec.purpose is Purpose.OUTPUT_READ and rec.op == "read":
                    self._check_display_word(rec, vals)
            if cyc == base:
                # new data in place: arm the required-read checks against the
                # overwrites that follow (display once per word, plus any
                # prediction fetch scheduled on current contents)
                for rec in write_recs:
                    self.banks[(rec.buffer, rec.bank_id)].register_required_reads(
                        rec.word_index, 1, "output")
                for rec in fetch_recs:
                    if rec.cycle > cyc:
                        self.banks[(rec.buffer, rec.bank_id)] \
                            .register_required_reads(rec.word_index, 1, "fetch")

    def _apply_flip(self, f):
        for (buf, bk), bank in self.banks.items():
            if buf == f.buffer:
                bank.values[f.word_index] ^= 1

    def _check_display_word(self, rec, vals):
        k = self._next_display_k
        self._next_display_k += 1
        wpl = self.sched.words_per_image_line
        y, i = divmod(k, wpl)
        exp_cycle = self.sched.display_read_cycle(k)
        if rec.cycle != exp_cycle:
            raise AssertionError(
                f"display word {k} read at {rec.cycle}, expected {exp_cycle}")
        if vals is None:
            return  # underflow already recorded by the bank
        x = i * PIXELS_PER_WORD
        golden = self._rgb[y, x:x + PIXELS_PER_WORD]
        if not np.array_equal(vals, golden):
            bad = int(np.any(vals != golden, axis=1).sum())
            self.log.output_mismatches += bad
            self._note("output_mismatches", (k, y, x, bad))
        if self.cfg.collect_display:
            self.display_events.append(
                (rec.cycle + self.sched.read_lead, y, x, vals.copy()))

    # -- window service ----------------------------------------------------------

    def _advance_window(self, b, col):
        plan = self.plan
        left = plan.slice_base_x(b.slice_col) + BLOCK_W * b.block_x
        base_x = plan.slice_base_x(b.slice_col)
        if b.block_x == 0:
            col.recon.clear()
            col.history.clear()
            if not plan.is_first_blockline_of_slice(b.blockline):
                self._admit_prev(b, col, left, base_x, full=True)
            return
        col.recon.slide()
        if not plan.is_first_blockline_of_slice(b.blockline):
            self._admit_prev(b, col, left, base_x, full=False)
        # rows: without forwarding the previous block becomes resident now; with
        # forwarding it is served from the pipe this slot and stored at the next
        routes = self.preset.residency.routes
        if self.preset.residency.forwarding_enabled:
            if len(col.history) == 2:
                bx2, rgb2, yco2 = col.history[0]
                for section, row in (("row0", 0), ("row1", 1)):
                    if routes[section] == RESIDENT:
                        col.recon.admit_run(section, -2 * BLOCK_W, yco2[row])
        elif col.history:
            bx1, rgb1, yco1 = col.history[-1]
            for section, row in (("row0", 0), ("row1", 1)):
                if routes[section] == RESIDENT:
                    col.recon.admit_run(section, -BLOCK_W, yco1[row])

    def _admit_prev(self, b, col, left, base_x, full):
        if self.preset.residency.routes["prev"] != RESIDENT:
            return
        lo, hi = self.spec.span("prev")
        prev_y = 2 * b.blockline - 1
        r0 = max(lo, base_x - left) if full else hi - BLOCK_W + 1
        stage_line = col.stage_line[prev_y & 3]
        stage_vals = col.stage_vals[prev_y & 3]
        r = r0
        while r <= hi:
            x = left + r
            if x < base_x:
                r += 1
                continue
            if x >= base_x + self.plan.slice_width:
                break
            wloc = (x - base_x) // PIXELS_PER_WORD
            j = (x - base_x) % PIXELS_PER_WORD
            n = PIXELS_PER_WORD - j
            if r + n - 1 > hi:
                n = hi - r + 1
            if stage_line[wloc] == prev_y:
                col.recon.admit_run("prev", r, stage_vals[wloc, j:j + n])
            r += n

    def _serve_window(self, b, col):
        """Serve every unclipped window pixel by exactly one path and compare
        the value against the oracle.  Returns (served, misses, mismatches)."""
        plan = self.plan
        left = plan.slice_base_x(b.slice_col) + BLOCK_W * b.block_x
        base_x = plan.slice_base_x(b.slice_col)
        hi_x = base_x + plan.slice_width - 1
        first = plan.is_first_blockline_of_slice(b.blockline)
        served = misses = mismatches = 0
        y0 = 2 * b.blockline
        streaming = self.preset.fetch_kind == STREAMING
        for section in SECTIONS:
            if section == "prev":
                if first:
                    continue
                y = y0 - 1
                golden = self._rgb
            else:
                y = y0 if section == "row0" else y0 + 1
                golden = self._yco
            lo_s = self.spec.span(section)[0]
            store = col.recon.sections[section]
            for (plo, phi, route) in self._parts[section]:
                xa = max(left + plo, base_x)
                xb = min(left + phi, hi_x)
                if xb < xa:
                    continue
                m = xb - xa + 1
                want = golden[y, xa:xb + 1]
                n_miss = n_bad = 0
                if route == RESIDENT:
                    i0 = xa - left - lo_s
                    vmask = store.valid[i0:i0 + m]
                    vals = store.values[i0:i0 + m]
                    if vmask.all():
                        n_bad = int((vals != want).any(axis=1).sum())
                    else:
                        n_miss = int(m - vmask.sum())
                        n_bad = int((vals[vmask] != want[vmask])
                                    .any(axis=1).sum())
                elif route == "forwarded":
                    hist_ok = col.history and \
                        col.history[-1][0] == b.block_x - 1
                    if hist_ok:
                        yrow = col.history[-1][2][0 if section == "row0" else 1]
                        offs = xa - (left - BLOCK_W)
                        n_bad = int((yrow[offs:offs + m] != want)
                                    .any(axis=1).sum())
                    else:
                        n_miss = m
                elif route == FETCH and streaming and section != "row0":
                    n_miss, n_bad = self._serve_fetched(
                        col, section, y, xa, xb, base_x, want)
                else:
                    n_miss = m
                served += m - n_miss - n_bad
                misses += n_miss
                mismatches += n_bad
                if n_miss:
                    self._note("availability_misses",
                               (b.global_block_index, section, n_miss))
                if n_bad:
                    self._note("prediction_mismatches",
                               (b.global_block_index, section, n_bad))
        return served, misses, mismatches

    def _serve_fetched(self, col, section, y, xa, xb, base_x, want):
        """Serve a contiguous span from the fetch stage (streaming presets)."""
        wa = (xa - base_x) // PIXELS_PER_WORD
        wb = (xb - base_x) // PIXELS_PER_WORD
        s = y & 3
        tags = col.stage_line[s, wa:wb + 1]
        p0 = (xa - base_x) - wa * PIXELS_PER_WORD
        m = xb - xa + 1
        if (tags == y).all():
            flat = col.stage_vals[s, wa:wb + 1].reshape(-1, 3)[p0:p0 + m]
            if section == "prev":
                got = flat
            else:
                if not self.preset.reconvert_on_fetch:
                    return m, 0
                got = _ycocg_cols(flat)
            return 0, int((got != want).any(axis=1).sum())
        # some words missing: serve word by word
        n_miss = n_bad = 0
        reconv = self.preset.reconvert_on_fetch
        for w in range(wa, wb + 1):
            x0 = max(xa, base_x + w * PIXELS_PER_WORD)
            x1 = min(xb, base_x + (w + 1) * PIXELS_PER_WORD - 1)
            cnt = x1 - x0 + 1
            if col.stage_line[s, w] != y or (section != "prev" and not reconv):
                n_miss += cnt
                continue
            j = x0 - base_x - w * PIXELS_PER_WORD
            px = col.stage_vals[s, w, j:j + cnt]
            got = px if section == "prev" else _ycocg_cols(px)
            n_bad += int((got != want[x0 - xa:x0 - xa + cnt]).any(axis=1).sum())
        return n_miss, n_bad


def run_simulation(cfg: SimConfig) -> EngineResult:
    """Deterministic full run; violations are reported, never raised."""
    return Engine(cfg).run()


def inject_fault(cfg: SimConfig, fault: FaultSpec) -> EngineResult:
    """Re-run the config with one extra perturbation."""
    cfg2 = replace(cfg, faults=list(cfg.faults) + [fault])
    return run_simulation(cfg2)


def verify_prediction(served, oracle: GoldenOracle) -> tuple[int, int]:
    """Check served window pixels against the oracle in their tagged space.

    `served` holds (x, y, ColorSpace, (c0, c1, c2) or None); None counts as
    an availability miss.  Returns (misses, mismatches).
    """
    from .oracle import ColorSpace, ycocg_from_rgb
    misses = mismatches = 0
    for x, y, space, value in served:
        if value is None:
            misses += 1
            continue
        golden = oracle.golden_rgb(x, y)
        if space is ColorSpace.YCOCG:
            golden = ycocg_from_rgb(golden)
        if tuple(value) != golden.components():
            mismatches += 1
    return misses, mismatches


def verify_output(events, oracle: GoldenOracle, width: int, height: int,
                  latency: int) -> int:
    """Check a display event stream against the golden frame.

    Events are (emission_cycle, y, x, word_values) in word granularity; word
    k of the raster must start emitting at latency + 2k, which enforces both
    strict raster order and the constant 4 px/cycle rate.  Returns the
    mismatched-pixel count; ordering violations raise.
    """
    mismatches = 0
    frame = oracle.golden_frame(width, height)
    k = 0
    for cycle, y, x, vals in events:
        if (y, x) != divmod(k * PIXELS_PER_WORD, width):
            raise AssertionError(
                f"display event ({y},{x}) out of raster order (word {k})")
        if cycle != latency + 2 * k:
            raise AssertionError(
                f"word {k} emitted at cycle {cycle}, rate law wants {latency + 2 * k}")
        golden = frame[y, x:x + vals.shape[0]]
        mismatches += int(np.any(vals != golden, axis=1).sum())
        k += 1
    if k != width * height // PIXELS_PER_WORD:
        raise AssertionError(f"display stream ended after {k} words")
    return mismatches
