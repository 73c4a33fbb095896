"""Named weight tensors and the CNWF binary container.

CNWF v1 layout, all integers little-endian:

    magic "CNWF" | u32 version=1 | u32 entry_count
    per entry: u16 name_len | name (UTF-8) | u8 frozen | u8 rank
               | rank x u32 dims | dims-product x f32 data (little-endian)
    trailer: u32 CRC-32 over all preceding bytes

A save->load round trip is bit-identical; the loader rejects bad magic,
unknown versions, truncation, and checksum mismatches.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .arch import ArchitectureSpec
from .tensor import FLOAT, Tensor

MAGIC = b"CNWF"
VERSION = 1


class WeightsFormatError(ValueError):
    """A weights file is malformed, corrupt, or of an unsupported version."""


class BindError(ValueError):
    """Loaded weights do not match the architecture they were bound to."""


@dataclass
class WeightEntry:
    name: str
    frozen: bool
    tensor: Tensor


class ModelWeights:
    """Ordered name -> tensor map with a frozen flag per entry."""

    def __init__(self, entries: list[WeightEntry] | None = None):
        self._entries: dict[str, WeightEntry] = {}
        for e in entries or []:
            self.add(e)

    def add(self, entry: WeightEntry) -> None:
        if entry.name in self._entries:
            raise WeightsFormatError(f"duplicate weight entry {entry.name!r}")
        t = np.ascontiguousarray(np.asarray(entry.tensor, dtype=FLOAT))
        self._entries[entry.name] = WeightEntry(entry.name, bool(entry.frozen), t)

    def set(self, name: str, frozen: bool, tensor: Tensor) -> None:
        self._entries.pop(name, None)
        self.add(WeightEntry(name, frozen, tensor))

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def entry(self, name: str) -> WeightEntry:
        if name not in self._entries:
            raise KeyError(f"no weight entry named {name!r}")
        return self._entries[name]

    def get(self, name: str) -> Tensor:
        return self.entry(name).tensor

    def entries(self) -> list[WeightEntry]:
        return list(self._entries.values())

    def merged_with(self, other: "ModelWeights") -> "ModelWeights":
        """Union of two weight sets; entries in ``other`` win on a name clash."""
        merged = ModelWeights(self.entries())
        for e in other.entries():
            merged._entries[e.name] = e
        return merged

    def backbone_digest(self) -> str:
        """SHA-256 over the frozen entries (sorted by name, shape-tagged, raw bytes).

        Computed before and after training to assert the backbone never moved.
        """
        h = hashlib.sha256()
        for name in sorted(self._entries):
            e = self._entries[name]
            if not e.frozen:
                continue
            h.update(name.encode())
            h.update(repr(e.tensor.shape).encode())
            h.update(np.ascontiguousarray(e.tensor, dtype="<f4").tobytes())
        return h.hexdigest()


def save_weights(weights: ModelWeights, path) -> None:
    """Write CNWF v1 with a trailing CRC-32."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(weights))
    for e in weights.entries():
        name = e.name.encode("utf-8")
        if len(name) > 0xFFFF:
            raise WeightsFormatError(f"entry name too long: {e.name!r}")
        t = np.ascontiguousarray(e.tensor, dtype="<f4")
        blob += struct.pack("<H", len(name))
        blob += name
        blob += struct.pack("<BB", 1 if e.frozen else 0, t.ndim)
        blob += struct.pack(f"<{t.ndim}I", *t.shape)
        blob += t.tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(blob)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightsFormatError("truncated weights file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_weights(path) -> ModelWeights:
    """Read and checksum-verify a CNWF file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 12:
        raise WeightsFormatError("truncated weights file")
    body, (crc_stored,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise WeightsFormatError("checksum mismatch: file is corrupt")
    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise WeightsFormatError("bad magic: not a CNWF file")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise WeightsFormatError(f"unsupported CNWF version {version}")
    weights = ModelWeights()
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        frozen, rank = r.unpack("<BB")
        dims = r.unpack(f"<{rank}I") if rank else ()
        n_elems = 1
        for d in dims:
            if d < 1:
                raise WeightsFormatError(f"entry {name!r}: dimension {d} < 1")
            n_elems *= d
        raw = r.take(4 * n_elems)
        tensor = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(FLOAT)
        weights.add(WeightEntry(name, bool(frozen), tensor))
    if r.pos != len(body):
        raise WeightsFormatError(f"{len(body) - r.pos} trailing bytes after last entry")
    return weights


@dataclass
class BindReport:
    """Outcome of matching a weight set against an architecture's slots."""

    matched: list[str]
    missing: list[str]
    extra: list[str]
    mismatched: list[str]  # "name: file shape vs expected shape"

    @property
    def ok(self) -> bool:
        return not self.mismatched and not self.extra

    @property
    def complete(self) -> bool:
        return self.ok and not self.missing


def bind_check(spec: ArchitectureSpec, weights: ModelWeights) -> BindReport:
    """Compare a weight set's entries to the architecture's expected slots.

    Shape or frozen-flag disagreement and unknown names are mismatches; a
    backbone-only file simply reports the head slots as missing.
    """
    slots = {s.name: s for s in spec.weight_slots()}
    matched, missing, extra, mismatched = [], [], [], []
    for name, slot in slots.items():
        if name not in weights:
            missing.append(name)
    for e in weights.entries():
        slot = slots.get(e.name)
        if slot is None:
            extra.append(e.name)
        elif tuple(e.tensor.shape) != slot.shape:
            mismatched.append(f"{e.name}: file {tuple(e.tensor.shape)} vs expected {slot.shape}")
        elif e.frozen != slot.frozen:
            mismatched.append(f"{e.name}: frozen flag {e.frozen} vs expected {slot.frozen}")
        else:
            matched.append(e.name)
    return BindReport(matched, missing, extra, mismatched)


def require_bound(spec: ArchitectureSpec, weights: ModelWeights, require_all: bool = True) -> None:
    """Raise BindError unless the weights bind cleanly (and fully, if asked)."""
    report = bind_check(spec, weights)
    problems = list(report.mismatched)
    if report.extra:
        problems.append(f"unknown entries: {', '.join(report.extra)}")
    if require_all and report.missing:
        problems.append(f"missing entries: {', '.join(report.missing)}")
    if problems:
        raise BindError("; ".join(problems))


def random_backbone(spec: ArchitectureSpec, seed: int) -> ModelWeights:
    """Randomly initialized frozen backbone weights for the spec's conv slots.

    Kernels draw from a normal with std sqrt(2 / fan_in) (fan_in = c*k*k),
    which keeps activation magnitudes near the input's through ReLU
    stacks; biases start at zero.
    """
    from .seeding import derived_rng

    weights = ModelWeights()
    for slot in spec.backbone_slots():
        if slot.name.endswith(".kernels"):
            fan_in = slot.shape[1] * slot.shape[2] * slot.shape[3]
            rng = derived_rng(seed, "backbone", slot.name)
            t = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=slot.shape).astype(FLOAT)
        else:
            t = np.zeros(slot.shape, dtype=FLOAT)
        weights.add(WeightEntry(slot.name, True, t))
    return weights
