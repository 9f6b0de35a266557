"""Image/slice/block geometry, decode order, and line-buffer word addressing.

The image is tiled by 8x2 blocks; decoding works on two lines at a time
(a blockline).  Line buffers are 480-word x 256-bit SRAMs holding 8 pixels
per word, partitioned equally among the active slice columns.
"""

from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError, RangeError

BLOCK_W = 8
BLOCK_H = 2
LINE_WORDS = 480          # words per line buffer
WORD_BITS = 256           # 8 pixels x 32-bit slot
PIXELS_PER_WORD = 8
CYCLES_PER_SLOT = 4       # 16 px per block at 4 px/cycle


class Chroma(Enum):
    C444 = "444"
    C422 = "422"


class Interleave(Enum):
    ROUND_ROBIN = "round_robin"
    COLUMN_MAJOR = "column_major"


@dataclass(frozen=True)
class ImageGeometry:
    width: int
    height: int
    chroma: Chroma = Chroma.C444
    bit_depth: int = 10

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"image {self.width}x{self.height} must be positive")
        if self.height % BLOCK_H:
            raise ConfigError(f"height {self.height} not divisible by block height {BLOCK_H}")
        if not 8 <= self.bit_depth <= 12:
            raise ConfigError(f"bit_depth {self.bit_depth} outside [8, 12]")


@dataclass(frozen=True)
class SliceLayout:
    columns: int = 1
    rows: int = 1

    def __post_init__(self):
        if self.columns not in (1, 2, 4):
            raise ConfigError(f"slice columns must be 1, 2 or 4, got {self.columns}")
        if self.rows < 1:
            raise ConfigError(f"slice rows must be >= 1, got {self.rows}")


@dataclass(frozen=True)
class BlockCoord:
    slice_col: int
    block_x: int            # block index within the slice column (8-px units)
    blockline: int          # global blockline index (2-px-row units)
    global_block_index: int # position in decode order


@dataclass(frozen=True)
class WordAddress:
    buffer_id: str          # "upper" or "lower" role; sched maps to a physical buffer
    bank_id: int
    word_index: int         # absolute index into the 480-word line space
    partition_base: int


@dataclass(frozen=True)
class PixelRect:
    x0: int
    x1: int  # inclusive
    y0: int
    y1: int  # inclusive


@dataclass(frozen=True)
class GeometryPlan:
    image: ImageGeometry
    slices: SliceLayout
    slice_width: int
    slice_height: int
    blocks_per_blockline: int   # per slice column
    words_per_line: int         # per slice column (== blocks_per_blockline)
    partition_bases: tuple[int, ...]
    total_blocklines: int
    blocklines_per_slice: int
    cycles_per_slot: int = CYCLES_PER_SLOT
    interleave: Interleave = Interleave.ROUND_ROBIN
    _slice_bases: tuple[int, ...] = field(default=(), repr=False)

    @property
    def total_blocks(self) -> int:
        return self.image.width * self.image.height // (BLOCK_W * BLOCK_H)

    def slice_base_x(self, slice_col: int) -> int:
        return slice_col * self.slice_width

    def is_first_blockline_of_slice(self, blockline: int) -> bool:
        return blockline % self.blocklines_per_slice == 0


def build_geometry(image: ImageGeometry, slices: SliceLayout,
                   interleave: Interleave = Interleave.ROUND_ROBIN) -> GeometryPlan:
    """Validate the grid and derive per-column block counts and partition bases."""
    if image.width % (BLOCK_W * slices.columns):
        raise ConfigError(
            f"width {image.width} not divisible by {BLOCK_W} x {slices.columns} columns")
    slice_width = image.width // slices.columns
    words = slice_width // PIXELS_PER_WORD
    region = LINE_WORDS // slices.columns
    if words > region:
        raise ConfigError(
            f"slice width {slice_width} needs {words} words; partition holds {region}")
    if image.height % (BLOCK_H * slices.rows):
        raise ConfigError(
            f"height {image.height} not divisible by {BLOCK_H} x {slices.rows} rows")
    slice_height = image.height // slices.rows
    bases = tuple(c * region for c in range(slices.columns))
    return GeometryPlan(
        image=image,
        slices=slices,
        slice_width=slice_width,
        slice_height=slice_height,
        blocks_per_blockline=words,
        words_per_line=words,
        partition_bases=bases,
        total_blocklines=image.height // BLOCK_H,
        blocklines_per_slice=slice_height // BLOCK_H,
        interleave=interleave,
        _slice_bases=tuple(c * slice_width for c in range(slices.columns)),
    )


def block_to_pixels(b: BlockCoord, plan: GeometryPlan) -> PixelRect:
    """Pixel rectangle covered by one 8x2 block."""
    if not 0 <= b.slice_col < plan.slices.columns:
        raise RangeError(f"slice column {b.slice_col} out of range")
    if not 0 <= b.block_x < plan.blocks_per_blockline:
        raise RangeError(f"block_x {b.block_x} out of range")
    if not 0 <= b.blockline < plan.total_blocklines:
        raise RangeError(f"blockline {b.blockline} out of range")
    x0 = plan.slice_base_x(b.slice_col) + BLOCK_W * b.block_x
    y0 = BLOCK_H * b.blockline
    return PixelRect(x0, x0 + BLOCK_W - 1, y0, y0 + BLOCK_H - 1)


def pixel_to_word(x: int, line_role: str, plan: GeometryPlan, slice_col: int,
                  banks_per_buffer: int = 1) -> WordAddress:
    """Map a pixel x to its line-buffer word.

    Words are block-aligned, so with a bank split the bank index is the
    parity of the local word index (equivalently of the writing block).
    """
    if line_role not in ("upper", "lower"):
        raise ConfigError(f"line_role must be 'upper' or 'lower', got {line_role!r}")
    base_x = plan.slice_base_x(slice_col)
    if not base_x <= x < base_x + plan.slice_width:
        raise RangeError(f"x={x} outside slice column {slice_col}")
    local_word = (x - base_x) // PIXELS_PER_WORD
    bank = local_word % banks_per_buffer if banks_per_buffer > 1 else 0
    partition_base = plan.partition_bases[slice_col]
    return WordAddress(
        buffer_id=line_role,
        bank_id=bank,
        word_index=partition_base + local_word,
        partition_base=partition_base,
    )


def decode_order(plan: GeometryPlan):
    """Deterministic stream of BlockCoord covering the image exactly once.

    Within a blockline, round_robin visits the slice columns one block slot
    each; column_major finishes one column's blockline before the next.
    Blocklines advance in raster order either way.
    """
    idx = 0
    cols = plan.slices.columns
    nblk = plan.blocks_per_blockline
    for bl in range(plan.total_blocklines):
        if plan.interleave is Interleave.ROUND_ROBIN:
            for bx in range(nblk):
                for c in range(cols):
                    yield BlockCoord(c, bx, bl, idx)
                    idx += 1
        else:
            for c in range(cols):
                for bx in range(nblk):
                    yield BlockCoord(c, bx, bl, idx)
                    idx += 1
