"""Smart-meter measurement datasets.

Builds the day x slot x channel tensor from long-format records, serializes
it to CSV, simulates random missing data, generates synthetic load tensors,
and pre-fills single-user multi-measurement tensors through the power
identity ``P = U * I * cos_phi``.

CSV format (UTF-8, header ``day,slot,channel,value``): one row per tensor
position, ``day`` and ``slot`` 1-based integers, ``channel`` a string, and
``value`` a decimal float or empty for a missing observation.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .tensor_ops import as_mask, as_tensor, cp_reconstruct, fro_norm

LAYOUT_MULTI_USER = "multi_user_single_measurement"
LAYOUT_MULTI_MEASUREMENT = "single_user_multi_measurement"
LAYOUTS = (LAYOUT_MULTI_USER, LAYOUT_MULTI_MEASUREMENT)

ELECTRICAL_CHANNELS = ("P", "U", "I", "cos_phi")
CSV_HEADER = ("day", "slot", "channel", "value")

# Divisors smaller than this are treated as zero when inverting P = U*I*cos_phi.
DIVISOR_GUARD = 1e-6
# cos_phi results may exceed 1 by at most this before the slot is deemed inconsistent.
COS_PHI_SLACK = 1e-6


class DataError(ValueError):
    """Malformed records, files, or dataset preconditions."""


def derive_seed(seed: int, *labels) -> int:
    """Stable child seed from a root seed and a label path (SHA-256 based).

    Labeled derivation keeps independent consumers (mask draws, generators,
    solver inits) from perturbing each other when one of them is added or
    removed.
    """
    text = str(int(seed)) + "".join(f"/{part}" for part in labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class MeterRecord:
    """One meter reading; ``value=None`` records an explicitly missing position."""

    day: int
    slot: int
    channel: str
    value: float | None


@dataclass(frozen=True, eq=False)
class TensorDataset:
    """A measurement tensor with its observation mask and axis labels.

    ``tensor`` holds zeros at unobserved positions; ``layout`` tags whether
    the channel axis carries users (single measurement each) or the four
    electrical parameters of one user.
    """

    tensor: np.ndarray
    mask: np.ndarray
    day_labels: tuple[int, ...]
    slot_labels: tuple[int, ...]
    channel_labels: tuple[str, ...]
    layout: str

    def __post_init__(self):
        t = as_tensor(self.tensor)
        m = as_mask(self.mask, t.shape)
        object.__setattr__(self, "tensor", t)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "day_labels", tuple(self.day_labels))
        object.__setattr__(self, "slot_labels", tuple(self.slot_labels))
        object.__setattr__(self, "channel_labels", tuple(str(c) for c in self.channel_labels))
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        labels = (self.day_labels, self.slot_labels, self.channel_labels)
        if tuple(len(l) for l in labels) != t.shape:
            raise ValueError("axis label lengths must match tensor dims")
        if self.layout == LAYOUT_MULTI_MEASUREMENT and set(self.channel_labels) != set(
            ELECTRICAL_CHANNELS
        ):
            raise ValueError(
                f"{LAYOUT_MULTI_MEASUREMENT} requires channels {ELECTRICAL_CHANNELS}"
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.tensor.shape

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())


def infer_layout(channel_labels) -> str:
    """Multi-measurement when the channels are exactly the four electrical ones."""
    if set(channel_labels) == set(ELECTRICAL_CHANNELS):
        return LAYOUT_MULTI_MEASUREMENT
    return LAYOUT_MULTI_USER


def build_tensor(records, layout: str, dims=None) -> TensorDataset:
    """Assemble a dataset from records; absent positions become unobserved.

    Duplicate ``(day, slot, channel)`` keys and out-of-range indices are
    rejected. For the multi-measurement layout, observed values must satisfy
    ``cos_phi`` in [-1, 1] and nonnegative ``U`` and ``I``.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    records = list(records)

    chan_order: dict[str, int] = {}
    for r in records:
        chan_order.setdefault(r.channel, len(chan_order))

    if dims is None:
        if not records:
            raise DataError("cannot infer dims from an empty record set")
        dims = (
            max(r.day for r in records),
            max(r.slot for r in records),
            len(chan_order),
        )
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    if len(chan_order) > dims[2]:
        raise DataError(f"records name {len(chan_order)} channels, dims allow {dims[2]}")
    channels = list(chan_order) + [
        f"channel_{k + 1}" for k in range(len(chan_order), dims[2])
    ]

    tensor = np.zeros(dims)
    mask = np.zeros(dims, dtype=bool)
    if records:
        days = np.fromiter((r.day for r in records), dtype=np.int64, count=len(records))
        slots = np.fromiter((r.slot for r in records), dtype=np.int64, count=len(records))
        chans = np.fromiter(
            (chan_order[r.channel] for r in records), dtype=np.int64, count=len(records)
        )
        bad = (days < 1) | (days > dims[0]) | (slots < 1) | (slots > dims[1])
        if bad.any():
            r = records[int(np.argmax(bad))]
            raise DataError(
                f"record day={r.day}, slot={r.slot}, channel={r.channel!r} "
                f"is outside dims {dims}"
            )
        lin = np.ravel_multi_index((days - 1, slots - 1, chans), dims)
        uniq, counts = np.unique(lin, return_counts=True)
        if counts.max(initial=0) > 1:
            d, s, c = np.unravel_index(uniq[int(np.argmax(counts > 1))], dims)
            raise DataError(
                f"duplicate record for day={d + 1}, slot={s + 1}, channel={channels[c]!r}"
            )
        observed = np.fromiter(
            (r.value is not None for r in records), dtype=bool, count=len(records)
        )
        values = np.fromiter(
            (r.value if r.value is not None else 0.0 for r in records),
            dtype=np.float64,
            count=len(records),
        )
        if not np.all(np.isfinite(values)):
            r = records[int(np.argmax(~np.isfinite(values)))]
            raise DataError(
                f"non-finite value for day={r.day}, slot={r.slot}, channel={r.channel!r}"
            )
        tensor.flat[lin[observed]] = values[observed]
        mask.flat[lin[observed]] = True

    ds = TensorDataset(
        tensor=tensor,
        mask=mask,
        day_labels=tuple(range(1, dims[0] + 1)),
        slot_labels=tuple(range(1, dims[1] + 1)),
        channel_labels=tuple(channels),
        layout=layout,
    )
    if layout == LAYOUT_MULTI_MEASUREMENT:
        _check_electrical_ranges(ds)
    return ds


def _check_electrical_ranges(ds: TensorDataset) -> None:
    for name, lo, hi in (("cos_phi", -1.0, 1.0), ("U", 0.0, None), ("I", 0.0, None)):
        c = ds.channel_labels.index(name)
        vals = ds.tensor[:, :, c][ds.mask[:, :, c]]
        if vals.size and (vals.min(initial=np.inf) < lo or (hi is not None and vals.max() > hi)):
            raise DataError(f"observed {name} values fall outside the valid range")


def simulate_missing(ds: TensorDataset, rate: float, seed: int) -> TensorDataset:
    """Hide exactly ``round(rate * N)`` uniformly chosen positions.

    Requires a fully observed dataset; the input is left untouched and keeps
    serving as ground truth. Deterministic per seed.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"missing rate must lie in [0, 1), got {rate}")
    if not ds.fully_observed:
        raise ValueError("simulate_missing requires a fully observed dataset")
    n = ds.tensor.size
    drop = np.random.default_rng(seed).choice(n, size=int(round(rate * n)), replace=False)
    mask = np.ones(n, dtype=bool)
    mask[drop] = False
    mask = mask.reshape(ds.dims)
    return replace(ds, tensor=np.where(mask, ds.tensor, 0.0), mask=mask)


@dataclass(frozen=True, eq=False)
class PrefillResult:
    """Pre-filled dataset plus counts of filled and skipped slots."""

    dataset: TensorDataset
    filled: int
    skipped_small_divisor: int
    skipped_inconsistent: int


def prefill_electrical(ds: TensorDataset) -> PrefillResult:
    """Restore single missing channels from ``P = U * I * cos_phi``.

    Only (day, slot) cells with exactly one of the four channels missing are
    touched; the missing value is solved from the other three and marked
    observed. Divisions by magnitudes below ``DIVISOR_GUARD`` are skipped,
    as are cos_phi results beyond ``1 + COS_PHI_SLACK`` (results within the
    slack are clamped to [-1, 1]). Applying the operation twice equals
    applying it once.
    """
    if ds.layout != LAYOUT_MULTI_MEASUREMENT:
        raise ValueError("prefill_electrical requires the single-user multi-measurement layout")
    tensor = ds.tensor.copy()
    mask = ds.mask.copy()
    ix = {name: ds.channel_labels.index(name) for name in ELECTRICAL_CHANNELS}
    p, u, i, c = (tensor[:, :, ix[n]] for n in ELECTRICAL_CHANNELS)
    mp, mu_, mi, mc = (mask[:, :, ix[n]] for n in ELECTRICAL_CHANNELS)

    single = (mp.astype(int) + mu_.astype(int) + mi.astype(int) + mc.astype(int)) == 3
    filled = skipped_div = skipped_inc = 0

    sel = single & ~mp
    p[sel] = u[sel] * i[sel] * c[sel]
    mp[sel] = True
    filled += int(sel.sum())

    for target, t_mask, num, d1, d2 in ((u, mu_, p, i, c), (i, mi, p, u, c)):
        sel = single & ~t_mask
        den = d1 * d2
        ok = sel & (np.abs(den) >= DIVISOR_GUARD)
        target[ok] = num[ok] / den[ok]
        t_mask[ok] = True
        filled += int(ok.sum())
        skipped_div += int((sel & ~ok).sum())

    sel = single & ~mc
    den = u * i
    ok = sel & (np.abs(den) >= DIVISOR_GUARD)
    val = np.zeros_like(c)
    val[ok] = p[ok] / den[ok]
    within = ok & (np.abs(val) <= 1.0 + COS_PHI_SLACK)
    c[within] = np.clip(val[within], -1.0, 1.0)
    mc[within] = True
    filled += int(within.sum())
    skipped_div += int((sel & ~ok).sum())
    skipped_inc += int((ok & ~within).sum())

    out = replace(ds, tensor=tensor, mask=mask)
    return PrefillResult(out, filled, skipped_div, skipped_inc)


# ---------------------------------------------------------------------------
# synthetic generators


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for :func:`synth_load_tensor`.

    ``noise`` is the standard deviation of additive Gaussian noise relative
    to the RMS of the clean tensor; ``periodic`` injects smooth double-peak
    daily profiles into the slot-mode factor. ``weight_decay`` scales
    component r by ``weight_decay ** r``, yielding a few dominant load
    patterns plus progressively weaker ones (1.0 keeps all components at
    comparable energy).
    """

    dims: tuple[int, int, int]
    rank: int = 3
    noise: float = 0.0
    periodic: bool = True
    weight_decay: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if not 0 < self.weight_decay <= 1:
            raise ValueError("weight_decay must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class SynthResult:
    """Generated dataset plus the ground-truth factors and clean tensor."""

    dataset: TensorDataset
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    clean: np.ndarray


def _smooth_profile(rng: np.random.Generator, slots: int, periodic: bool) -> np.ndarray:
    """Positive slot profile: optional morning/evening peaks plus low-order Fourier jitter."""
    s = np.arange(slots) / slots
    prof = np.full(slots, rng.uniform(0.25, 0.6))
    if periodic:
        for center, width, height in (
            (rng.uniform(0.25, 0.40), rng.uniform(0.05, 0.09), rng.uniform(0.5, 1.0)),
            (rng.uniform(0.70, 0.85), rng.uniform(0.06, 0.12), rng.uniform(0.7, 1.3)),
        ):
            prof = prof + height * np.exp(-(((s - center) / width) ** 2))
    for h in range(1, 4):
        prof = prof + 0.06 * rng.standard_normal() * np.cos(
            2 * np.pi * h * s + rng.uniform(0, 2 * np.pi)
        )
    return np.maximum(prof, 0.05)


def synth_load_tensor(spec: SynthSpec, seed: int) -> SynthResult:
    """Random nonnegative CP load tensor with daily structure in the slot mode."""
    rng = np.random.default_rng(seed)
    days, slots, chans = spec.dims
    u_day = rng.uniform(0.7, 1.3, (days, spec.rank))
    if spec.periodic:
        u_slot = np.column_stack(
            [_smooth_profile(rng, slots, periodic=True) for _ in range(spec.rank)]
        )
    else:
        u_slot = rng.uniform(0.2, 1.2, (slots, spec.rank))
    u_chan = rng.uniform(0.2, 1.0, (chans, spec.rank))
    if spec.weight_decay < 1.0:
        u_chan = u_chan * spec.weight_decay ** np.arange(spec.rank)[None, :]
    clean = cp_reconstruct((u_day, u_slot, u_chan))

    tensor = clean
    if spec.noise > 0:
        rms = fro_norm(clean) / math.sqrt(clean.size)
        tensor = clean + spec.noise * rms * rng.standard_normal(spec.dims)

    ds = TensorDataset(
        tensor=tensor,
        mask=np.ones(spec.dims, dtype=bool),
        day_labels=tuple(range(1, days + 1)),
        slot_labels=tuple(range(1, slots + 1)),
        channel_labels=tuple(f"user_{k + 1:03d}" for k in range(chans)),
        layout=LAYOUT_MULTI_USER,
    )
    return SynthResult(dataset=ds, factors=(u_day, u_slot, u_chan), clean=clean)


def synth_electrical_tensor(days: int, slots: int, seed: int) -> TensorDataset:
    """Single-user P/U/I/cos_phi tensor consistent with the power identity.

    Voltage, current, and power factor follow smooth daily profiles with
    mild day-to-day variation; active power is their exact product, so the
    identity ``P = U * I * cos_phi`` holds at every cell.
    """
    if days < 1 or slots < 1:
        raise ValueError("days and slots must be positive")
    rng = np.random.default_rng(seed)
    day_scale = rng.uniform(0.85, 1.15, days)

    volts = 230.0 + 3.0 * np.outer(
        rng.uniform(0.5, 1.5, days), _smooth_profile(rng, slots, periodic=False) - 0.5
    )
    amps = np.outer(day_scale, 0.4 + 6.0 * _smooth_profile(rng, slots, periodic=True))
    amps = amps * (1.0 + 0.05 * rng.standard_normal((days, slots)))
    amps = np.maximum(amps, 0.05)
    cos_phi = np.clip(
        0.78 + 0.15 * (_smooth_profile(rng, slots, periodic=False) - 0.4)[None, :]
        + 0.02 * rng.standard_normal((days, slots)),
        0.5,
        0.999,
    )
    power = volts * amps * cos_phi

    tensor = np.stack([power, volts, amps, cos_phi], axis=2)
    return TensorDataset(
        tensor=tensor,
        mask=np.ones(tensor.shape, dtype=bool),
        day_labels=tuple(range(1, days + 1)),
        slot_labels=tuple(range(1, slots + 1)),
        channel_labels=ELECTRICAL_CHANNELS,
        layout=LAYOUT_MULTI_MEASUREMENT,
    )


# ---------------------------------------------------------------------------
# CSV serialization


def load_csv(path) -> list[MeterRecord]:
    """Read long-format records; empty value fields mark missing positions."""
    records: list[MeterRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                day, slot = int(row[0]), int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: day and slot must be integers") from None
            channel = row[2].strip()
            if not channel:
                raise DataError(f"{path}:{lineno}: empty channel name")
            raw = row[3].strip()
            if raw == "":
                value: float | None = None
            else:
                try:
                    value = float(raw)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad value {raw!r}") from None
                if not math.isfinite(value):
                    raise DataError(f"{path}:{lineno}: non-finite value {raw!r}")
            records.append(MeterRecord(day, slot, channel, value))
    return records


def save_csv(ds: TensorDataset, path) -> None:
    """Write the full position grid in day-major order; missing values are empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for di, day in enumerate(ds.day_labels):
            for si, slot in enumerate(ds.slot_labels):
                for ci, chan in enumerate(ds.channel_labels):
                    value = repr(float(ds.tensor[di, si, ci])) if ds.mask[di, si, ci] else ""
                    writer.writerow((day, slot, chan, value))


def load_dataset(path, layout: str | None = None, dims=None) -> TensorDataset:
    """Load a CSV file into a dataset; layout defaults to channel-set inference."""
    records = load_csv(path)
    if layout is None:
        chans = {r.channel for r in records}
        layout = infer_layout(chans)
    return build_tensor(records, layout=layout, dims=dims)


# ---------------------------------------------------------------------------
# per-channel standardization (multi-measurement tensors mix units)


def standardize_channels(ds: TensorDataset) -> tuple[TensorDataset, np.ndarray, np.ndarray]:
    """Subtract each channel's observed mean and divide by its observed std.

    Near-constant channels (std below 1e-12) are shifted only. Returns the
    scaled dataset and the per-channel means and stds for inversion.
    """
    chans = ds.dims[2]
    means = np.zeros(chans)
    stds = np.ones(chans)
    for c in range(chans):
        vals = ds.tensor[:, :, c][ds.mask[:, :, c]]
        if vals.size:
            means[c] = vals.mean()
            std = vals.std()
            stds[c] = std if std > 1e-12 else 1.0
    scaled = np.where(ds.mask, (ds.tensor - means[None, None, :]) / stds[None, None, :], 0.0)
    return replace(ds, tensor=scaled), means, stds


def destandardize_channels(tensor: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    """Invert :func:`standardize_channels` on a completed tensor."""
    return tensor * stds[None, None, :] + means[None, None, :]
