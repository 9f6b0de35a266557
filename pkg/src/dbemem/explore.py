"""Minimal-residency explorer.

Searches the routing space (which window sections stay in the
reconstruction buffer versus ride the forwarding or fetch paths) and keeps
the smallest assignment whose fetch traffic can actually be placed on the
single-port banks over one steady-state blockline.  This makes the preset
pixel counts auditable instead of asserted.
"""

from dataclasses import dataclass
from itertools import product

from .errors import ConfigError, InfeasibleError
from .geometry import ImageGeometry, SliceLayout, build_geometry
from .predwindow import FETCH, RESIDENT, ResidencyPolicy, SECTIONS, WindowSpec
from .sched import ArchPreset, HALF_LINE, REFILL, STREAMING, Scheduler

NONE = "none"


@dataclass(frozen=True)
class FetchBudget:
    """Fetch opportunities per block slot.

    kind "refill": a fixed number of designated fetch cycles that top up the
    resident window (they provide no per-need service).  kind "streaming":
    fetches may take any free cycle on the lower-buffer banks and serve
    window needs directly.  Budgets are ordered none < refill < streaming
    for the monotonicity properties.
    """
    kind: str = REFILL
    words_per_slot: int = 1
    banks_per_buffer: int = 1

    def __post_init__(self):
        if self.kind not in (NONE, REFILL, STREAMING):
            raise ConfigError(f"unknown budget kind {self.kind!r}")

    def rank(self) -> tuple:
        order = {NONE: 0, REFILL: 1, STREAMING: 2}
        return (order[self.kind], self.words_per_slot, self.banks_per_buffer)


@dataclass
class ExplorerResult:
    resident_count: int
    resident_positions: dict
    routes: dict
    forwarding: bool
    reconvert: bool

    def coordinates(self):
        out = []
        for section, rels in self.resident_positions.items():
            row = {"prev": -1, "row0": 0, "row1": 1}[section]
            out.extend((r, row) for r in rels)
        return out


def _candidate_routes(spec: WindowSpec, budget: FetchBudget, forwarding: bool,
                      reconvert: bool):
    """Route assignments to try, cheapest (fewest resident pixels) first.

    The streaming fetch path reaches the lower-buffer lines only (previous
    line and current lower row); the lower row's pixels are YCoCg-tagged, so
    streaming them additionally needs the reconvert unit.
    """
    if budget.kind != STREAMING:
        yield {s: RESIDENT for s in SECTIONS}
        return
    prev_opts = [FETCH, RESIDENT]
    row1_opts = [FETCH, RESIDENT] if reconvert else [RESIDENT]
    combos = []
    for p, r1 in product(prev_opts, row1_opts):
        routes = {"prev": p, "row0": RESIDENT, "row1": r1}
        combos.append(routes)

    def count(routes):
        pol = ResidencyPolicy(routes=dict(routes), forwarding_enabled=forwarding)
        return pol.resident_count(spec)

    yield from sorted(combos, key=count)


def _schedule_feasible(spec: WindowSpec, routes: dict, budget: FetchBudget,
                       forwarding: bool, reconvert: bool,
                       slice_words: int) -> bool:
    """Place one steady-state blockline of traffic and check the port law."""
    if budget.kind == NONE:
        lo, hi = spec.prev_line_span
        if hi >= lo:
            # the resident previous-line span can never be refilled
            raise InfeasibleError(
                "previous-line span needs a fetch path but the budget has none")
        return True
    policy = ResidencyPolicy(routes=dict(routes), forwarding_enabled=forwarding,
                             reconvert_on_fetch=reconvert)
    preset = ArchPreset(
        name="explorer", line_delay=HALF_LINE, line_buffers=2,
        banks_per_buffer=budget.banks_per_buffer,
        fetch_kind=REFILL if budget.kind == REFILL else STREAMING,
        fetch_words_per_slot=min(budget.words_per_slot, 1),
        forwarding=forwarding, reconvert_on_fetch=reconvert, residency=policy)
    image = ImageGeometry(slice_words * 8, 8)
    plan = build_geometry(image, SliceLayout(1, 1))
    sched = Scheduler(preset, spec, plan)
    # blockline 1 is steady state: it has a previous line and a successor
    slots = range(sched.slots_per_blockline, 2 * sched.slots_per_blockline)
    for slot in slots:
        sp = sched.slot_plan(slot)
        seen = {}
        for rec in sp.writes + sp.display_reads + [r for r, _ in sp.fetches]:
            key = (rec.buffer, rec.bank_id, rec.cycle)
            if key in seen:
                return False
            seen[key] = rec
    return True


def minimal_resident_set(spec: WindowSpec, budget: FetchBudget,
                         forwarding: bool = False, reconvert: bool = False,
                         slice_words: int = 20) -> ExplorerResult:
    """Smallest resident set that still serves every window pixel.

    Brute-forces the section routing against the budget's placeable fetch
    schedule; pixels that are neither forwarded nor fetch-covered must be
    resident.  Raises InfeasibleError when even full residency cannot be
    sustained (no refill path for the previous-line span).
    """
    if slice_words * 8 < spec.prev_line_span[1] + 8:
        slice_words = spec.prev_line_span[1] // 8 + 2
    best = None
    for routes in _candidate_routes(spec, budget, forwarding, reconvert):
        if not _schedule_feasible(spec, routes, budget, forwarding, reconvert,
                                  slice_words):
            continue
        policy = ResidencyPolicy(routes=dict(routes),
                                 forwarding_enabled=forwarding,
                                 reconvert_on_fetch=reconvert)
        positions = policy.resident_positions(spec)
        count = sum(len(v) for v in positions.values())
        if best is None or count < best.resident_count:
            best = ExplorerResult(count, positions, dict(routes), forwarding,
                                  reconvert)
        break  # candidates are ordered cheapest-first
    if best is None:
        # nothing placeable even with everything resident
        raise InfeasibleError("no routing satisfies the schedule")
    return best


def preset_budget(preset: ArchPreset) -> FetchBudget:
    kind = STREAMING if preset.fetch_kind == STREAMING else REFILL
    return FetchBudget(kind=kind,
                       words_per_slot=max(preset.fetch_words_per_slot, 1),
                       banks_per_buffer=preset.banks_per_buffer)
