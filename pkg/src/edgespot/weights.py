"""Binary serialization for weight bundles and tensor containers.

Both formats share one little-endian record layout designed for trivial
parsing on microcontroller-class targets:

    magic          4 bytes  ("ESW1" weight bundle, "EST1" tensor container)
    record count   u32
    per record:
        name length   u16
        name          UTF-8 bytes
        rank          u8
        extents       rank x u32
        payload       float32[product(extents)]
    checksum       u32, CRC-32 over every preceding byte

Weight bundles carry one record per layer tensor plus two bookkeeping
records: ``meta.config`` = [variant code, tau] (0 = edgespot, 1 = bcresnet)
and, for the edgespot variant, ``pcen.params`` = [alpha, r, delta, s].
Serialization is deterministic: records are written in canonical plan order
and no floating-point text round-trips occur.
"""

from __future__ import annotations

import io
import os
import struct
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ModelConfig, VARIANT_BCRESNET, VARIANT_EDGESPOT, plan_records
from .errors import BundleError, ParameterError
from .frontend import PcenParams

BUNDLE_MAGIC = b"ESW1"
TENSOR_MAGIC = b"EST1"
_VARIANT_CODES = {VARIANT_EDGESPOT: 0.0, VARIANT_BCRESNET: 1.0}
_CODE_VARIANTS = {v: k for k, v in _VARIANT_CODES.items()}

# Multiplier/increment of Knuth's MMIX linear congruential generator; state
# advances mod 2**64 and each draw maps the top 24 bits to [0, 1).
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
_LCG_MASK = (1 << 64) - 1


@dataclass
class WeightBundle:
    """Validated, immutable-by-convention set of named float32 payloads."""

    config: ModelConfig
    records: dict

    @property
    def pcen(self) -> Optional[PcenParams]:
        raw = self.records.get("pcen.params")
        if raw is None:
            return None
        a, r, d, s = (float(v) for v in raw)
        return PcenParams(alpha=a, r=r, delta=d, s=s)

    def tensor(self, name: str) -> np.ndarray:
        try:
            return self.records[name]
        except KeyError:
            raise BundleError(f"bundle has no record '{name}'") from None


def validate_bundle(bundle: WeightBundle) -> None:
    """Check record completeness, shapes, and parameter domains."""
    expected = plan_records(bundle.config)
    seen = set()
    for spec in expected:
        if spec.name not in bundle.records:
            raise BundleError(f"missing weight record '{spec.name}'")
        arr = bundle.records[spec.name]
        if tuple(arr.shape) != tuple(spec.shape):
            raise BundleError(
                f"record '{spec.name}' has shape {tuple(arr.shape)}, "
                f"expected {tuple(spec.shape)}"
            )
        seen.add(spec.name)
    for name in bundle.records:
        if name != "meta.config" and name not in seen:
            raise BundleError(f"unknown weight record '{name}'")
        arr = bundle.records[name]
        if not np.all(np.isfinite(arr)):
            raise BundleError(f"record '{name}' contains non-finite values")
        if name.endswith(".var") and np.any(arr < 0):
            raise BundleError(f"record '{name}' has negative variance entries")
    if bundle.config.has_pcen:
        try:
            bundle.pcen  # PcenParams enforces the frontend's domain bounds
        except ParameterError as exc:
            raise BundleError(f"pcen.params out of domain: {exc}") from exc


def _encode_records(magic: bytes, records: dict) -> bytes:
    buf = io.BytesIO()
    buf.write(magic)
    buf.write(struct.pack("<I", len(records)))
    for name, arr in records.items():
        raw = np.ascontiguousarray(arr, dtype="<f4")
        name_b = name.encode("utf-8")
        if len(name_b) > 0xFFFF:
            raise BundleError(f"record name too long: {name!r}")
        if raw.ndim > 0xFF:
            raise BundleError(f"record rank too large: {name!r}")
        buf.write(struct.pack("<H", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<B", raw.ndim))
        buf.write(struct.pack(f"<{raw.ndim}I", *raw.shape))
        buf.write(raw.tobytes())
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    """Bounds-checked cursor over an in-memory byte blob."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.blob):
            raise BundleError(
                f"truncated file: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.blob) - self.pos}"
            )
        out = self.blob[self.pos: self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def _decode_records(blob: bytes, magic: bytes) -> dict:
    if len(blob) < len(magic) + 8:
        raise BundleError(f"file too short to be a valid container ({len(blob)} bytes)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise BundleError("checksum mismatch: file is corrupt or truncated")
    r = _Reader(body)
    got_magic = r.take(4)
    if got_magic != magic:
        raise BundleError(f"bad magic {got_magic!r}; expected {magic!r}")
    count = r.u32()
    records = {}
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8", errors="strict")
        rank = r.u8()
        shape = tuple(r.u32() for _ in range(rank))
        n = 1
        for ext in shape:
            if ext == 0:
                raise BundleError(f"record '{name}' has a zero extent")
            n *= ext
        data = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape)
        if name in records:
            raise BundleError(f"duplicate record '{name}'")
        records[name] = np.ascontiguousarray(data, dtype=np.float32)
    if r.pos != len(body):
        raise BundleError(f"{len(body) - r.pos} trailing bytes after last record")
    return records


def save_bundle(bundle: WeightBundle, sink) -> int:
    """Serialize a validated bundle; returns bytes written."""
    validate_bundle(bundle)
    ordered = {"meta.config": bundle.records["meta.config"]}
    for spec in plan_records(bundle.config):
        ordered[spec.name] = bundle.records[spec.name]
    blob = _encode_records(BUNDLE_MAGIC, ordered)
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        with open(os.fspath(sink), "wb") as fh:
            fh.write(blob)
    return len(blob)


def load_bundle(source, expected: Optional[ModelConfig] = None) -> WeightBundle:
    """Read, checksum, and fully validate a weight bundle."""
    if hasattr(source, "read"):
        blob = source.read()
    else:
        with open(os.fspath(source), "rb") as fh:
            blob = fh.read()
    records = _decode_records(blob, BUNDLE_MAGIC)
    meta = records.get("meta.config")
    if meta is None or meta.shape != (2,):
        raise BundleError("missing or malformed 'meta.config' record")
    code, tau = float(meta[0]), float(meta[1])
    if code not in _CODE_VARIANTS:
        raise BundleError(f"unknown variant code {code}")
    if tau != int(tau):
        raise BundleError(f"non-integer tau {tau}")
    cfg = ModelConfig(_CODE_VARIANTS[code], int(tau))
    if expected is not None and (expected.variant, expected.tau) != (cfg.variant, cfg.tau):
        raise BundleError(
            f"bundle is {cfg.variant}-{cfg.tau}, expected "
            f"{expected.variant}-{expected.tau}"
        )
    bundle = WeightBundle(config=cfg, records=records)
    validate_bundle(bundle)
    return bundle


class Lcg:
    """64-bit linear congruential generator with an explicit float rule.

    Integer-only state transitions plus a fixed top-24-bit conversion keep
    generated bundles bit-identical across platforms.
    """

    def __init__(self, seed: int):
        self.state = seed & _LCG_MASK

    def uniform(self) -> float:
        self.state = (self.state * LCG_MULT + LCG_INC) & _LCG_MASK
        return (self.state >> 40) / 16777216.0

    def fill(self, count: int, lo: float, hi: float) -> np.ndarray:
        out = np.empty(count, dtype=np.float64)
        span = hi - lo
        state = self.state
        for i in range(count):
            state = (state * LCG_MULT + LCG_INC) & _LCG_MASK
            out[i] = lo + span * ((state >> 40) / 16777216.0)
        self.state = state
        return out.astype(np.float32)


def random_bundle(cfg: ModelConfig, seed: int) -> WeightBundle:
    """Deterministic pseudo-random bundle for fixtures and smoke tests.

    Weights and biases are uniform in (-0.1, 0.1).  Norm scale and variance
    records are offset to 1 +/- 0.1 so statistics stay valid and activations
    keep a usable magnitude; energy-normalization scalars use the common
    defaults alpha=0.98, r=0.5, delta=2.0, s=0.025.
    """
    rng = Lcg(seed)
    meta = np.array([_VARIANT_CODES[cfg.variant], float(cfg.tau)], dtype=np.float32)
    records = {"meta.config": meta}
    for spec in plan_records(cfg):
        if spec.name == "meta.config":
            continue
        if spec.name == "pcen.params":
            records[spec.name] = np.array([0.98, 0.5, 2.0, 0.025], dtype=np.float32)
            continue
        n = 1
        for ext in spec.shape:
            n *= ext
        vals = rng.fill(n, -0.1, 0.1)
        if spec.name.endswith((".gamma", ".var")):
            vals = vals + np.float32(1.0)
        records[spec.name] = vals.reshape(spec.shape)
    bundle = WeightBundle(config=cfg, records=records)
    validate_bundle(bundle)
    return bundle


def save_tensors(sink, tensors: dict) -> int:
    """Write named float32 arrays as a tensor container; returns bytes."""
    blob = _encode_records(TENSOR_MAGIC, dict(tensors))
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        with open(os.fspath(sink), "wb") as fh:
            fh.write(blob)
    return len(blob)


def load_tensors(source) -> dict:
    """Read a tensor container back into a name -> array mapping."""
    if hasattr(source, "read"):
        blob = source.read()
    else:
        with open(os.fspath(source), "rb") as fh:
            blob = fh.read()
    return _decode_records(blob, TENSOR_MAGIC)
