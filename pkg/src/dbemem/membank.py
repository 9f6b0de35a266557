"""Single-port SRAM bank and D-FF register-file models with access checking.

Each bank grants at most one access (read or write) per cycle.  Violations
are recorded as data, never raised, so one run can tally every conflict,
overwrite hazard, and underflow in a broken configuration.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError
from .geometry import LINE_WORDS, PIXELS_PER_WORD


class Purpose(Enum):
    WRITE_BLOCK_ROW = "WriteBlockRow"
    OUTPUT_READ = "OutputRead"
    PREDICT_FETCH = "PredictFetch"


@dataclass(frozen=True)
class AccessRecord:
    cycle: int
    buffer: str
    bank_id: int
    op: str                  # "read" | "write"
    word_index: int
    purpose: Purpose
    block_id: int
    slice_col: int = 0


@dataclass(frozen=True)
class ConflictViolation:
    cycle: int
    buffer: str
    bank_id: int
    first_purpose: Purpose
    second_purpose: Purpose
    first_word: int
    second_word: int
    block_id: int


@dataclass(frozen=True)
class HazardViolation:
    """A word was overwritten while reads of the old data were still pending."""
    cycle: int
    buffer: str
    bank_id: int
    word_index: int
    pending_output_reads: int
    pending_fetch_reads: int
    block_id: int


@dataclass(frozen=True)
class UnderflowViolation:
    """A read targeted a word that was never written."""
    cycle: int
    buffer: str
    bank_id: int
    word_index: int
    purpose: Purpose


class SramBankModel:
    """One single-port bank of a 480-word line buffer.

    Contents are per-word 8x3 component arrays plus writer metadata.  The
    hazard checker flags writes that land before the registered number of
    output/fetch reads of the previous contents has completed.
    """

    def __init__(self, buffer: str, bank_id: int, depth: int = LINE_WORDS,
                 read_latency: int = 0):
        self.buffer = buffer
        self.bank_id = bank_id
        self.depth = depth
        self.read_latency = read_latency
        self.values = np.zeros((LINE_WORDS, PIXELS_PER_WORD, 3), dtype=np.int32)
        self.written = np.zeros(LINE_WORDS, dtype=bool)
        self.writer_block = np.full(LINE_WORDS, -1, dtype=np.int64)
        self.write_cycle = np.full(LINE_WORDS, -1, dtype=np.int64)
        self.line_tag = np.full(LINE_WORDS, -1, dtype=np.int64)
        self.pending_output = np.zeros(LINE_WORDS, dtype=np.int32)
        self.pending_fetch = np.zeros(LINE_WORDS, dtype=np.int32)
        self._booked: dict[int, tuple] = {}
        self.frontier = 0
        self.conflicts: list[ConflictViolation] = []
        self.hazards: list[HazardViolation] = []
        self.underflows: list[UnderflowViolation] = []
        self.granted_log: list[AccessRecord] = []

    def request_access(self, rec: AccessRecord, values=None, line_y: int = -1) -> bool:
        """Book one access.  Returns False (and records a conflict) when the
        cycle already carries an access on this bank."""
        if rec.cycle < self.frontier:
            raise ConfigError(
                f"access at cycle {rec.cycle} behind frontier {self.frontier}")
        if rec.word_index >= LINE_WORDS or rec.word_index < 0:
            raise ConfigError(f"word {rec.word_index} outside 0..{LINE_WORDS - 1}")
        prior = self._booked.get(rec.cycle)
        if prior is not None:
            first = prior[0]
            self.conflicts.append(ConflictViolation(
                cycle=rec.cycle, buffer=self.buffer, bank_id=self.bank_id,
                first_purpose=first.purpose, second_purpose=rec.purpose,
                first_word=first.word_index, second_word=rec.word_index,
                block_id=rec.block_id))
            return False
        self._booked[rec.cycle] = (rec, values, line_y)
        return True

    def register_required_reads(self, word_index: int, count: int,
                                kind: str = "output") -> None:
        if count < 0:
            raise ConfigError("required read count must be >= 0")
        if kind == "output":
            self.pending_output[word_index] += count
        elif kind == "fetch":
            self.pending_fetch[word_index] += count
        else:
            raise ConfigError(f"unknown required-read kind {kind!r}")

    def commit_cycle(self, cycle: int):
        """Apply the booked access for `cycle`, if any.

        Returns (record, values) for a granted read, (record, None) for a
        write, or None when the cycle is idle.  Hazards and underflows are
        appended to the bank's violation lists.
        """
        if cycle < self.frontier:
            raise ConfigError(f"commit at {cycle} behind frontier {self.frontier}")
        self.frontier = cycle + 1
        entry = self._booked.pop(cycle, None)
        if entry is None:
            return None
        rec, values, line_y = entry
        w = rec.word_index
        if rec.op == "write":
            if self.pending_output[w] > 0 or self.pending_fetch[w] > 0:
                self.hazards.append(HazardViolation(
                    cycle=cycle, buffer=self.buffer, bank_id=self.bank_id,
                    word_index=w,
                    pending_output_reads=int(self.pending_output[w]),
                    pending_fetch_reads=int(self.pending_fetch[w]),
                    block_id=rec.block_id))
                self.pending_output[w] = 0
                self.pending_fetch[w] = 0
            self.values[w] = values
            self.written[w] = True
            self.writer_block[w] = rec.block_id
            self.write_cycle[w] = cycle
            self.line_tag[w] = line_y
            self.granted_log.append(rec)
            return (rec, None)
        # read path
        if not self.written[w]:
            self.underflows.append(UnderflowViolation(
                cycle=cycle, buffer=self.buffer, bank_id=self.bank_id,
                word_index=w, purpose=rec.purpose))
            self.granted_log.append(rec)
            return (rec, None)
        if rec.purpose is Purpose.OUTPUT_READ and self.pending_output[w] > 0:
            self.pending_output[w] -= 1
        elif rec.purpose is Purpose.PREDICT_FETCH and self.pending_fetch[w] > 0:
            self.pending_fetch[w] -= 1
        self.granted_log.append(rec)
        return (rec, self.values[w].copy())

    def has_booking(self, cycle: int) -> bool:
        return cycle in self._booked

    def peek_word(self, word_index: int):
        """Direct content inspection (fault injection and tests only)."""
        return self.values[word_index], bool(self.written[word_index]), \
            int(self.line_tag[word_index])


class DffFileModel:
    """Register-file storage: unlimited same-cycle ports, bounded capacity."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.contents: dict = {}
        self.peak_occupancy = 0

    @property
    def occupancy(self) -> int:
        return len(self.contents)

    def store(self, tag, value) -> bool:
        """Returns False when the file is full and the entry was rejected."""
        if tag not in self.contents and len(self.contents) >= self.capacity:
            return False
        self.contents[tag] = value
        self.peak_occupancy = max(self.peak_occupancy, len(self.contents))
        return True

    def load(self, tag):
        return self.contents.get(tag)

    def evict(self, tag) -> None:
        self.contents.pop(tag, None)
