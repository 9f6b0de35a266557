"""Per-cycle access plans for the three architecture presets.

Slot discipline (4 cycles per 8x2 block at 4 px/cycle):

  offset 0      block row-writes (upper word -> upper buffer, lower word ->
                the active lower buffer)
  offsets 1, 3  display output reads; the display consumes one word per two
                cycles and each word is read one cycle before its first
                pixel is emitted, which always lands on an odd offset
  offset 2      the designated prediction-fetch cycle for refill presets

The streaming preset (type2) may place prediction fetches on any free
(bank, cycle); with the even/odd bank split the demand of roughly two words
per slot fits without conflicts, which is exactly what the split buys.
"""

from dataclasses import dataclass, field

from .errors import ConfigError
from .geometry import (BLOCK_W, CYCLES_PER_SLOT, BlockCoord, GeometryPlan,
                       Interleave, PIXELS_PER_WORD)
from .membank import AccessRecord, Purpose
from .predwindow import (FETCH, ResidencyPolicy, WindowSpec, policy_forwarding,
                         policy_full_resident, policy_streaming)

ONE_LINE = "one_line"
HALF_LINE = "half_line"

REFILL = "refill"          # fixed fetch cycle per slot, feeds the resident window
STREAMING = "streaming"    # fetch on any free lower-bank cycle, serve on demand


@dataclass(frozen=True)
class ArchPreset:
    name: str
    line_delay: str
    line_buffers: int
    banks_per_buffer: int
    fetch_kind: str
    fetch_words_per_slot: int
    forwarding: bool
    reconvert_on_fetch: bool
    residency: ResidencyPolicy
    capacity_pixels: int | None = None  # None -> the policy's count under the window spec

    def __post_init__(self):
        if self.line_delay not in (ONE_LINE, HALF_LINE):
            raise ConfigError(f"unknown line delay {self.line_delay!r}")
        if self.line_buffers not in (2, 3):
            raise ConfigError("line_buffers must be 2 or 3")
        if self.banks_per_buffer not in (1, 2):
            raise ConfigError("banks_per_buffer must be 1 or 2")
        if self.fetch_kind not in (REFILL, STREAMING):
            raise ConfigError(f"unknown fetch kind {self.fetch_kind!r}")

    def capacity_for(self, spec: WindowSpec) -> int:
        if self.capacity_pixels is not None:
            return self.capacity_pixels
        return self.residency.resident_count(spec)

    def latency_cycles(self, plan: GeometryPlan) -> int:
        width = plan.image.width
        return width // 2 if self.line_delay == ONE_LINE else width // 4

    def lower_buffers(self) -> list[str]:
        return [f"lower{i}" for i in range(self.line_buffers - 1)]

    def buffer_names(self) -> list[str]:
        return ["upper"] + self.lower_buffers()

    def buffer_for_line(self, y: int) -> str:
        """Which physical buffer holds image line y."""
        if y % 2 == 0:
            return "upper"
        if self.line_buffers == 3:
            # ping-pong: lower buffers alternate roles every blockline
            return f"lower{(y // 2) % 2}"
        return "lower0"

    def bank_for_word(self, local_word: int) -> int:
        return local_word % self.banks_per_buffer if self.banks_per_buffer > 1 else 0


def preset_baseline() -> ArchPreset:
    return ArchPreset("baseline", ONE_LINE, 3, 1, REFILL, 1,
                      forwarding=False, reconvert_on_fetch=False,
                      residency=policy_full_resident())


def preset_type1() -> ArchPreset:
    return ArchPreset("type1", HALF_LINE, 2, 1, REFILL, 1,
                      forwarding=True, reconvert_on_fetch=False,
                      residency=policy_forwarding())


def preset_type2() -> ArchPreset:
    return ArchPreset("type2", HALF_LINE, 2, 2, STREAMING, 0,
                      forwarding=True, reconvert_on_fetch=True,
                      residency=policy_streaming())


PRESETS = {"baseline": preset_baseline, "type1": preset_type1, "type2": preset_type2}


def preset_by_name(name: str) -> ArchPreset:
    try:
        return PRESETS[name.lower()]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")


@dataclass
class FetchDemand:
    """One line-buffer word the prediction path needs this slot."""
    line_y: int
    word_local: int            # word index within the slice column
    section: str               # which window section it feeds
    slice_col: int
    min_offset: int = 0        # 1 when the word is written at this slot's offset 0


@dataclass
class BlockSlotPlan:
    block: BlockCoord
    cycle_base: int
    writes: list = field(default_factory=list)      # AccessRecord
    fetches: list = field(default_factory=list)     # (AccessRecord, FetchDemand)
    display_reads: list = field(default_factory=list)

    def cycles(self):
        """Accesses grouped by cycle offset 0..3 (spec-shaped view)."""
        out = [[] for _ in range(CYCLES_PER_SLOT)]
        for rec in self.writes + [r for r, _ in self.fetches] + self.display_reads:
            out[rec.cycle - self.cycle_base].append(rec)
        return out


class Scheduler:
    """Pure per-slot access-plan generator shared by the engine and tests."""

    def __init__(self, preset: ArchPreset, spec: WindowSpec, plan: GeometryPlan,
                 read_latency: int = 0):
        self.preset = preset
        self.spec = spec
        self.plan = plan
        self.n_words = plan.words_per_line
        self.cols = plan.slices.columns
        self.slots_per_blockline = self.cols * self.n_words
        self.latency = preset.latency_cycles(plan)
        # display words are read ahead of emission through the output register;
        # registered SRAM outputs cost two extra lead cycles (stays on odd
        # offsets, clear of the write and fetch cycles)
        self.read_lead = 1 + 2 * read_latency
        self.words_per_image_line = plan.image.width // PIXELS_PER_WORD
        self.total_display_words = self.words_per_image_line * plan.image.height
        prev_hi = spec.prev_line_span[1]
        self.prev_hi_words = prev_hi // PIXELS_PER_WORD  # floor
        self.warmup_count = min(self.prev_hi_words + 1, self.n_words) \
            if prev_hi >= 0 else 0
        self._span = {s: spec.span(s) for s in ("prev", "row0", "row1")}
        # buffer-for-line repeats with period 4 (ping-pong included)
        self._buf_of = [preset.buffer_for_line(y) for y in range(4)]

    # -- decode order ------------------------------------------------------

    def block_at_slot(self, global_slot: int) -> BlockCoord:
        bl = global_slot // self.slots_per_blockline
        within = global_slot % self.slots_per_blockline
        if self.plan.interleave is Interleave.ROUND_ROBIN:
            c = within % self.cols
            bx = within // self.cols
        else:
            c = within // self.n_words
            bx = within % self.n_words
        return BlockCoord(c, bx, bl, global_slot)

    # -- writes --------------------------------------------------------------

    def write_records(self, b: BlockCoord, cycle_base: int) -> list[AccessRecord]:
        base = self.plan.partition_bases[b.slice_col]
        word = base + b.block_x
        bank = self.preset.bank_for_word(b.block_x)
        y0 = 2 * b.blockline
        recs = []
        for y in (y0, y0 + 1):
            recs.append(AccessRecord(
                cycle=cycle_base, buffer=self._buf_of[y % 4],
                bank_id=bank, op="write", word_index=word,
                purpose=Purpose.WRITE_BLOCK_ROW,
                block_id=b.global_block_index, slice_col=b.slice_col))
        return recs

    # -- prediction fetches ----------------------------------------------------

    def fetch_demands(self, b: BlockCoord) -> list[FetchDemand]:
        """Line-buffer words the window pipeline wants during this slot.

        Refill presets top up the resident previous-line span (one entering
        word per slot, plus the next blockline's left words during the tail
        slots, where the right-edge clip leaves the fetch cycle idle).
        The streaming preset additionally pulls the entering word of every
        fetch-routed section.
        """
        demands: list[FetchDemand] = []
        bl, bx, col = b.blockline, b.block_x, b.slice_col
        first = self.plan.is_first_blockline_of_slice(bl)

        def entering_word(section: str) -> int | None:
            # one new word slides into the next block's span per slot
            if bx + 1 >= self.n_words:
                return None
            lo, hi = self._span[section]
            if section != "prev" and self.preset.residency.forwarding_enabled:
                # the forwarded block needs no fetch, so the fetched sub-span
                # ends one block earlier
                hi = min(hi, -BLOCK_W - 1)
                if hi < lo:
                    return None
            w = (PIXELS_PER_WORD * (bx + 1) + hi) // PIXELS_PER_WORD
            return w if 0 <= w < self.n_words else None

        if not first:
            w = entering_word("prev")
            if w is not None:
                demands.append(FetchDemand(2 * bl - 1, w, "prev", col))
        if self.preset.fetch_kind == STREAMING:
            # the streaming fetch datapath (with its reconvert unit) hangs off
            # the lower buffer pair, so only the lower row can stream
            if self.preset.residency.routes["row1"] == FETCH:
                w = entering_word("row1")
                if w is not None and w <= bx:
                    demands.append(FetchDemand(2 * bl + 1, w, "row1", col,
                                               min_offset=1 if w == bx else 0))
        # tail warmup for the next blockline's previous line: the right-edge
        # clip frees exactly enough fetch cycles at the end of each blockline
        nxt = bl + 1
        if (self.warmup_count and nxt < self.plan.total_blocklines
                and not self.plan.is_first_blockline_of_slice(nxt)):
            j = bx - (self.n_words - self.warmup_count)
            if 0 <= j < self.warmup_count:
                demands.append(FetchDemand(2 * bl + 1, j, "prev", col,
                                           min_offset=1 if j == bx else 0))
        return demands

    def fetch_records(self, b: BlockCoord, cycle_base: int, occupied) -> list:
        """Place this slot's fetch demands.

        `occupied` maps (buffer, bank) -> set of taken offsets.  Refill
        presets book the designated offset 2 (a second word in the same slot
        lands on the same cycle and shows up as a conflict, which is the
        point of the over-budget experiment).  Streaming picks the first
        free cycle on the word's bank.
        """
        out = []
        demands = self.fetch_demands(b)
        if self.preset.fetch_kind == REFILL and self.preset.fetch_words_per_slot > 1:
            demands = self._overbudget(demands, b)
        for d in demands:
            buf = self._buf_of[d.line_y % 4]
            bank = self.preset.bank_for_word(d.word_local)
            word = self.plan.partition_bases[d.slice_col] + d.word_local
            if self.preset.fetch_kind == REFILL:
                offset = 2
            else:
                taken = occupied.setdefault((buf, bank), set())
                free = [o for o in range(d.min_offset, CYCLES_PER_SLOT)
                        if o not in taken]
                offset = free[0] if free else CYCLES_PER_SLOT - 1
            occupied.setdefault((buf, bank), set()).add(offset)
            rec = AccessRecord(
                cycle=cycle_base + offset, buffer=buf, bank_id=bank, op="read",
                word_index=word, purpose=Purpose.PREDICT_FETCH,
                block_id=b.global_block_index, slice_col=d.slice_col)
            out.append((rec, d))
        return out

    def _overbudget(self, demands, b):
        """Pad the demand list up to fetch_words_per_slot with extra
        previous-line words (the "second fetch per slot" experiment)."""
        extra = []
        want = self.preset.fetch_words_per_slot
        base = demands[0] if demands else None
        if base is None:
            return demands
        w = base.word_local
        while len(demands) + len(extra) < want:
            w = (w + 1) % self.n_words
            extra.append(FetchDemand(base.line_y, w, base.section, base.slice_col))
        return demands + extra

    # -- display output reads --------------------------------------------------

    def display_read_cycle(self, k: int) -> int:
        """Raster display word k is read read_lead cycles before emission."""
        return self.latency + 2 * k - self.read_lead

    def display_words_in(self, c0: int, c1: int):
        """Raster word indices whose read cycle falls in [c0, c1)."""
        # latency + 2k - lead in [c0, c1)
        k0 = max(0, -(-(c0 + self.read_lead - self.latency) // 2))
        k1 = -(-(c1 + self.read_lead - self.latency) // 2)
        k1 = min(max(k1, 0), self.total_display_words)
        return range(k0, max(k0, k1))

    def display_record(self, k: int) -> AccessRecord:
        y = k // self.words_per_image_line
        i = k % self.words_per_image_line
        col = (i * PIXELS_PER_WORD) // self.plan.slice_width
        local = i - col * self.n_words
        word = self.plan.partition_bases[col] + local
        buf = self._buf_of[y % 4]
        bank = self.preset.bank_for_word(local)
        return AccessRecord(
            cycle=self.display_read_cycle(k), buffer=buf, bank_id=bank,
            op="read", word_index=word, purpose=Purpose.OUTPUT_READ,
            block_id=-1, slice_col=col)

    # -- whole-slot view ---------------------------------------------------------

    def slot_plan(self, global_slot: int) -> BlockSlotPlan:
        b = self.block_at_slot(global_slot)
        base = CYCLES_PER_SLOT * global_slot
        plan = BlockSlotPlan(block=b, cycle_base=base)
        plan.writes = self.write_records(b, base)
        occupied: dict = {}
        for rec in plan.writes:
            occupied.setdefault((rec.buffer, rec.bank_id), set()).add(0)
        for k in self.display_words_in(base, base + CYCLES_PER_SLOT):
            rec = self.display_record(k)
            plan.display_reads.append(rec)
            occupied.setdefault((rec.buffer, rec.bank_id), set()).add(rec.cycle - base)
        plan.fetches = self.fetch_records(b, base, occupied)
        return plan


def plan_baseline(b: BlockCoord, plan: GeometryPlan,
                  spec: WindowSpec | None = None) -> BlockSlotPlan:
    sched = Scheduler(preset_baseline(), spec or WindowSpec(), plan)
    return sched.slot_plan(_slot_of(sched, b))


def plan_type1(b: BlockCoord, plan: GeometryPlan, phase: str | None = None,
               spec: WindowSpec | None = None) -> BlockSlotPlan:
    sched = Scheduler(preset_type1(), spec or WindowSpec(), plan)
    slot = _slot_of(sched, b)
    expect = "first_half" if b.block_x < plan.blocks_per_blockline // 2 \
        else "second_half"
    if phase is not None and phase != expect:
        raise ConfigError(f"block_x {b.block_x} is in the {expect} of the blockline")
    return sched.slot_plan(slot)


def plan_type2(b: BlockCoord, plan: GeometryPlan,
               spec: WindowSpec | None = None) -> BlockSlotPlan:
    sched = Scheduler(preset_type2(), spec or WindowSpec(), plan)
    return sched.slot_plan(_slot_of(sched, b))


def _slot_of(sched: Scheduler, b: BlockCoord) -> int:
    base = b.blockline * sched.slots_per_blockline
    if sched.plan.interleave is Interleave.ROUND_ROBIN:
        return base + b.block_x * sched.cols + b.slice_col
    return base + b.slice_col * sched.n_words + b.block_x


def output_timeline(preset: ArchPreset, plan: GeometryPlan):
    """Display emission events: (cycle, y, x0) means pixels x0..x0+3 of line y
    leave the decoder at that cycle.  Starts at the preset's latency and runs
    at exactly 4 px/cycle."""
    d = preset.latency_cycles(plan)
    width, height = plan.image.width, plan.image.height
    cycle = d
    for y in range(height):
        for x0 in range(0, width, 4):
            yield (cycle, y, x0)
            cycle += 1


def total_frame_cycles(preset: ArchPreset, plan: GeometryPlan) -> int:
    return plan.image.width * plan.image.height // 4 + preset.latency_cycles(plan)
