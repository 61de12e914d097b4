"""Recording data model and file I/O.

Two on-disk layouts are supported:

``csv``
    One row per time sample, one column per channel, with an optional single
    header row carrying the channel labels.
``raw_f32le``
    Channel-interleaved little-endian 32-bit floats, no header.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import (
    EmptyRecording,
    InvalidRecording,
    MalformedRow,
    NonFiniteSample,
    UnreadableFile,
)

FORMATS = ("csv", "raw_f32le")


@dataclass(frozen=True, eq=False)
class Recording:
    """Multichannel signal, shape ``(n_samples, n_channels)``."""

    samples: np.ndarray
    sample_rate_hz: float
    channel_labels: tuple = field(default=())

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise EmptyRecording(f"recording needs at least one sample and channel, got shape {x.shape}")
        bad = np.argwhere(~np.isfinite(x))
        if len(bad):
            raise NonFiniteSample(int(bad[0, 0]), int(bad[0, 1]))
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise InvalidRecording("sample_rate_hz must be positive")
        labels = tuple(str(s) for s in self.channel_labels) or tuple(
            f"ch{i}" for i in range(x.shape[1])
        )
        if len(labels) != x.shape[1]:
            raise InvalidRecording(
                f"{len(labels)} channel labels for {x.shape[1]} channels"
            )
        if len(set(labels)) != len(labels):
            raise InvalidRecording("channel labels must be distinct")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray) -> "Recording":
        return Recording(samples, self.sample_rate_hz, self.channel_labels)

    def select_channels(self, labels: Sequence[str]) -> "Recording":
        missing = [lab for lab in labels if lab not in self.channel_labels]
        if missing:
            raise InvalidRecording(f"unknown channels: {missing}")
        idx = [self.channel_labels.index(lab) for lab in labels]
        return Recording(self.samples[:, idx], self.sample_rate_hz, tuple(labels))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_recording(path, format="csv", sample_rate_hz=None, channel_labels=None):
    """Load a recording from ``path``.

    Parameters
    ----------
    path : str or Path
    format : {"csv", "raw_f32le"}
    sample_rate_hz : float
    channel_labels : sequence of str, optional
        Required for ``raw_f32le`` (it fixes the channel count). For CSV
        files it overrides the header row.

    Returns
    -------
    Recording
    """
    if format not in FORMATS:
        raise UnreadableFile(f"unknown format {format!r}; expected one of {FORMATS}")
    if sample_rate_hz is None:
        raise InvalidRecording("sample_rate_hz is required")
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc

    if format == "raw_f32le":
        if not channel_labels:
            raise InvalidRecording("raw_f32le needs channel_labels to fix the channel count")
        n_ch = len(channel_labels)
        if len(payload) % 4:
            raise MalformedRow(f"{path}: size {len(payload)} is not a multiple of 4 bytes")
        values = np.frombuffer(payload, dtype="<f4")
        if values.size == 0:
            raise EmptyRecording(f"{path} is empty")
        if values.size % n_ch:
            raise MalformedRow(
                f"{path}: {values.size} values do not divide into {n_ch} channels"
            )
        samples = values.reshape(-1, n_ch).astype(np.float64)
        bad = np.argwhere(~np.isfinite(samples))
        if len(bad):
            raise NonFiniteSample(int(bad[0, 0]), int(bad[0, 1]))
        return Recording(samples, sample_rate_hz, tuple(channel_labels))

    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"{path} is not UTF-8 text") from exc
    rows = [r for r in csv.reader(text.splitlines()) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyRecording(f"{path} has no rows")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise EmptyRecording(f"{path} has a header but no samples")
    n_ch = len(header) if header is not None else len(rows[0])
    samples = np.empty((len(rows), n_ch))
    for i, row in enumerate(rows):
        if len(row) != n_ch:
            raise MalformedRow(f"{path}: row {i} has {len(row)} columns, expected {n_ch}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise MalformedRow(f"{path}: row {i}, column {j}: {cell!r} is not a number") from None
            if not math.isfinite(v):
                raise NonFiniteSample(i, j)
            samples[i, j] = v
    labels = tuple(channel_labels) if channel_labels else tuple(header or ())
    return Recording(samples, sample_rate_hz, labels)


def save_recording(rec: Recording, path, format="csv") -> None:
    """Write ``rec`` in one of the supported layouts (CSV always gets a header)."""
    path = Path(path)
    if format == "raw_f32le":
        path.write_bytes(rec.samples.astype("<f4").tobytes())
    elif format == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(rec.channel_labels)
            for row in rec.samples:
                w.writerow([f"{v:.9g}" for v in row])
    else:
        raise UnreadableFile(f"unknown format {format!r}")


def guess_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "raw_f32le"
