"""Buffer/throughput accounting, report and trace serialization, config parsing.

Reports are JSON documents whose keys match the SimReport fields; traces are
CSV with the fixed header ``cycle,slice,buffer,bank,op,word,purpose,block``.
Config files are strict: unknown keys are errors.
"""

import json
import math
from dataclasses import dataclass, field

from .engine import EngineResult, FaultSpec, SimConfig
from .errors import ConfigError
from .geometry import (Chroma, ImageGeometry, Interleave, LINE_WORDS,
                       SliceLayout, WORD_BITS)
from .predwindow import RESIDENT, ResidencyPolicy, SECTIONS, WindowSpec
from .sched import ArchPreset, ONE_LINE, preset_by_name

BITS_PER_PIXEL = 30          # accounting convention: 3 x 10-bit components
TRACE_HEADER = "cycle,slice,buffer,bank,op,word,purpose,block"


@dataclass
class SimReport:
    preset: str
    image: str
    slice_columns: int
    line_buffer_bits_total: int
    recon_pixels_per_slice: int
    recon_bits_per_slice: int
    recon_bits_total: int
    recon_bytes_total: float
    recon_bytes_per_slice_rounded: int
    violations: dict
    latency_cycles: int
    total_cycles: int
    mpixels_per_sec: float
    fps: float
    reductions_vs_baseline: dict
    passed: bool
    footnotes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "preset": self.preset,
            "image": self.image,
            "slice_columns": self.slice_columns,
            "line_buffer_bits_total": self.line_buffer_bits_total,
            "recon_pixels_per_slice": self.recon_pixels_per_slice,
            "recon_bits_per_slice": self.recon_bits_per_slice,
            "recon_bits_total": self.recon_bits_total,
            "recon_bytes_total": self.recon_bytes_total,
            "recon_bytes_per_slice_rounded": self.recon_bytes_per_slice_rounded,
            "violations": dict(self.violations),
            "latency_cycles": self.latency_cycles,
            "total_cycles": self.total_cycles,
            "mpixels_per_sec": self.mpixels_per_sec,
            "fps": self.fps,
            "reductions_vs_baseline": dict(self.reductions_vs_baseline),
            "passed": self.passed,
            "footnotes": dict(self.footnotes),
        }


def line_buffer_bits(preset: ArchPreset) -> int:
    return preset.line_buffers * LINE_WORDS * WORD_BITS


def buffer_accounting(preset: ArchPreset, columns: int,
                      spec: WindowSpec | None = None,
                      recon_pixels: int | None = None) -> dict:
    """Static buffer sizes and reductions versus the baseline preset."""
    spec = spec or WindowSpec()
    px = recon_pixels if recon_pixels is not None else preset.capacity_for(spec)
    base_px = spec.total_pixels()
    lb = line_buffer_bits(preset)
    lb_base = 3 * LINE_WORDS * WORD_BITS
    bits_slice = px * BITS_PER_PIXEL
    return {
        "line_buffer_bits_total": lb,
        "recon_pixels_per_slice": px,
        "recon_bits_per_slice": bits_slice,
        "recon_bits_total": columns * bits_slice,
        "recon_bytes_total": columns * bits_slice / 8,
        "recon_bytes_per_slice_rounded": math.ceil(bits_slice / 8),
        "reductions_vs_baseline": {
            "line_buffer_pct": round(100.0 * (1 - lb / lb_base), 2),
            "recon_pct": round(100.0 * (1 - px / base_px), 2),
        },
    }


def throughput_metrics(clock_hz: float, throughput_ppc: int,
                       width: int, height: int) -> dict:
    if clock_hz <= 0 or throughput_ppc <= 0 or width <= 0 or height <= 0:
        raise ConfigError("throughput metrics need positive inputs")
    mpix = clock_hz * throughput_ppc / 1e6
    fps = clock_hz * throughput_ppc / (width * height)
    return {"mpixels_per_sec": round(mpix, 2), "fps": round(fps, 2)}


def build_report(result: EngineResult) -> SimReport:
    cfg = result.config
    plan = result.plan
    cols = plan.slices.columns
    px = max(result.peak_recon_per_column)
    acct = buffer_accounting(result.preset, cols, cfg.window, recon_pixels=px)
    thr = throughput_metrics(cfg.clock_hz, cfg.throughput_ppc,
                             plan.image.width, plan.image.height)
    footnotes = {
        "recon_capacity_pixels": result.recon_capacity,
        "recon_extra_sign_bits_per_slice": 2 * px,
        "per_slice_byte_rounding_delta":
            cols * acct["recon_bytes_per_slice_rounded"]
            - acct["recon_bytes_total"],
        "fetch_stage_peak_pixels": result.assembly_peak_pixels,
        "chroma": plan.image.chroma.value,
    }
    return SimReport(
        preset=result.preset.name,
        image=f"{plan.image.width}x{plan.image.height}",
        slice_columns=cols,
        line_buffer_bits_total=acct["line_buffer_bits_total"],
        recon_pixels_per_slice=px,
        recon_bits_per_slice=acct["recon_bits_per_slice"],
        recon_bits_total=acct["recon_bits_total"],
        recon_bytes_total=acct["recon_bytes_total"],
        recon_bytes_per_slice_rounded=acct["recon_bytes_per_slice_rounded"],
        violations=result.violations.as_dict(),
        latency_cycles=result.latency_cycles,
        total_cycles=result.total_cycles,
        mpixels_per_sec=thr["mpixels_per_sec"],
        fps=thr["fps"],
        reductions_vs_baseline=acct["reductions_vs_baseline"],
        passed=result.passed,
        footnotes=footnotes,
    )


def emit_report(report: SimReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(report_to_text(report))


def report_to_text(report: SimReport) -> str:
    return json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"


def parse_report(text: str) -> dict:
    return json.loads(text)


def emit_trace(result: EngineResult, path) -> None:
    """One row per granted access plus one row per violation, cycle-ordered,
    so replaying the file reproduces the run's violation tallies."""
    rows = list(result.trace_rows) + list(result.violation_rows)
    rows.sort(key=lambda r: r[0])
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


def parse_trace(text: str):
    lines = text.strip().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ConfigError("trace file missing the expected header")
    out = []
    for line in lines[1:]:
        cyc, sl, buf, bank, op, word, purpose, block = line.split(",")
        out.append((int(cyc), int(sl), buf, int(bank), op, int(word),
                    purpose, int(block)))
    return out


# -- config files ---------------------------------------------------------------

_IMAGE_KEYS = {"width", "height", "chroma", "bit_depth"}
_SLICE_KEYS = {"columns", "rows"}
_TOP_KEYS = {"image", "slices", "arch", "clock_mhz", "throughput_ppc", "seed",
             "window_spec", "faults", "interleave", "sram_read_latency",
             "trace", "collect_display"}
_ARCH_KEYS = {"name", "line_delay", "line_buffers", "banks_per_buffer",
              "fetch_kind", "fetch_words_per_slot", "forwarding",
              "reconvert_on_fetch", "residency", "capacity_pixels"}
_WINDOW_KEYS = {"prev_line_span", "cur_row0_span", "cur_row1_span"}
_FAULT_KEYS = {"kind", "buffer", "word_index", "cycle", "value"}


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def parse_config(text: str) -> SimConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _check_keys(raw, _TOP_KEYS, "config")
    img_raw = raw.get("image")
    if not isinstance(img_raw, dict):
        raise ConfigError("config needs an image object")
    _check_keys(img_raw, _IMAGE_KEYS, "image")
    image = ImageGeometry(
        width=int(img_raw["width"]), height=int(img_raw["height"]),
        chroma=Chroma(str(img_raw.get("chroma", "444"))),
        bit_depth=int(img_raw.get("bit_depth", 10)))
    sl_raw = raw.get("slices", {"columns": 1, "rows": 1})
    _check_keys(sl_raw, _SLICE_KEYS, "slices")
    slices = SliceLayout(columns=int(sl_raw.get("columns", 1)),
                         rows=int(sl_raw.get("rows", 1)))
    preset = _parse_arch(raw.get("arch", "baseline"))
    window = _parse_window(raw.get("window_spec"))
    faults = [_parse_fault(f) for f in raw.get("faults", [])]
    interleave = Interleave(raw.get("interleave", "column_major"))
    return SimConfig(
        image=image, slices=slices, preset=preset, window=window,
        clock_hz=float(raw.get("clock_mhz", 200.0)) * 1e6,
        throughput_ppc=int(raw.get("throughput_ppc", 4)),
        seed=int(raw.get("seed", 0)),
        interleave=interleave,
        sram_read_latency=int(raw.get("sram_read_latency", 0)),
        collect_trace=bool(raw.get("trace", False)),
        collect_display=bool(raw.get("collect_display", False)),
        faults=faults)


def _parse_arch(raw) -> ArchPreset:
    if isinstance(raw, str):
        return preset_by_name(raw)
    if not isinstance(raw, dict):
        raise ConfigError("arch must be a preset name or an object")
    _check_keys(raw, _ARCH_KEYS, "arch")
    res_raw = raw.get("residency", {s: RESIDENT for s in SECTIONS})
    _check_keys(res_raw, set(SECTIONS), "arch.residency")
    routes = {s: res_raw.get(s, RESIDENT) for s in SECTIONS}
    policy = ResidencyPolicy(
        routes=routes,
        forwarding_enabled=bool(raw.get("forwarding", False)),
        reconvert_on_fetch=bool(raw.get("reconvert_on_fetch", False)))
    return ArchPreset(
        name=str(raw.get("name", "custom")),
        line_delay=str(raw.get("line_delay", ONE_LINE)),
        line_buffers=int(raw.get("line_buffers", 3)),
        banks_per_buffer=int(raw.get("banks_per_buffer", 1)),
        fetch_kind=str(raw.get("fetch_kind", "refill")),
        fetch_words_per_slot=int(raw.get("fetch_words_per_slot", 1)),
        forwarding=bool(raw.get("forwarding", False)),
        reconvert_on_fetch=bool(raw.get("reconvert_on_fetch", False)),
        residency=policy,
        capacity_pixels=raw.get("capacity_pixels"))


def _parse_window(raw) -> WindowSpec:
    if raw is None:
        return WindowSpec()
    _check_keys(raw, _WINDOW_KEYS, "window_spec")

    def span(key, default):
        v = raw.get(key, default)
        if not (isinstance(v, (list, tuple)) and len(v) == 2):
            raise ConfigError(f"{key} must be a [lo, hi] pair")
        return (int(v[0]), int(v[1]))

    return WindowSpec(prev_line_span=span("prev_line_span", (-8, 32)),
                      cur_row0_span=span("cur_row0_span", (-33, -1)),
                      cur_row1_span=span("cur_row1_span", (-32, -1)))


def _parse_fault(raw) -> FaultSpec:
    if not isinstance(raw, dict):
        raise ConfigError("each fault must be an object")
    _check_keys(raw, _FAULT_KEYS, "fault")
    return FaultSpec(kind=str(raw.get("kind", "noop")),
                     buffer=raw.get("buffer"),
                     word_index=raw.get("word_index"),
                     cycle=raw.get("cycle"),
                     value=raw.get("value"))
