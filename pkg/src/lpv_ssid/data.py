"""Input-output series: CSV I/O, z-score scaling, chronological splits and a
synthetic two-tank benchmark.

CSV layout: header ``y1,...,ym,u1,...,ur`` followed by comma-separated
decimal rows. Files are written with ``%.17g`` so reading them back is exact.
"""

import re
import warnings
from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    pass


class RaggedRow(DataError):
    pass


class BadHeader(DataError):
    pass


class NonNumericCell(DataError):
    pass


class SegmentTooShort(DataError):
    pass


@dataclass
class RawSeries:
    outputs: np.ndarray
    inputs: np.ndarray
    sample_time: float = 1.0
    output_names: list = field(default_factory=list)
    input_names: list = field(default_factory=list)

    def __post_init__(self):
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float).T).T
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float).T).T
        if self.outputs.shape[0] != self.inputs.shape[0]:
            raise DataError(
                f"outputs have {self.outputs.shape[0]} rows but inputs have {self.inputs.shape[0]}"
            )
        if not (np.all(np.isfinite(self.outputs)) and np.all(np.isfinite(self.inputs))):
            raise DataError("series contains non-finite entries")
        if not self.output_names:
            self.output_names = [f"y{i + 1}" for i in range(self.m)]
        if not self.input_names:
            self.input_names = [f"u{i + 1}" for i in range(self.r)]

    @property
    def K(self):
        return self.outputs.shape[0]

    @property
    def m(self):
        return self.outputs.shape[1]

    @property
    def r(self):
        return self.inputs.shape[1]

    def slice(self, start, stop):
        return RawSeries(self.outputs[start:stop], self.inputs[start:stop], self.sample_time,
                         list(self.output_names), list(self.input_names))


_NAME = re.compile(r"^([yu])(\d+)$")


def load_csv(path):
    """Read a ``y1..ym,u1..ur`` CSV. Errors name the offending line."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise BadHeader(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    ys, us = [], []
    for h in header:
        mt = _NAME.match(h)
        if mt is None:
            raise BadHeader(f"{path}: line 1: column {h!r} is not of the form yN or uN")
        (ys if mt.group(1) == "y" else us).append(int(mt.group(2)))
    m, r = len(ys), len(us)
    expected = [f"y{i + 1}" for i in range(m)] + [f"u{i + 1}" for i in range(r)]
    if header != expected or m == 0 or r == 0:
        raise BadHeader(f"{path}: line 1: expected header {','.join(expected) or 'y1,u1'}, got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != m + r:
            raise RaggedRow(f"{path}: line {lineno}: {len(cells)} cells, header has {m + r}")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise NonNumericCell(f"{path}: line {lineno}: non-numeric cell in {line!r}") from None
        if not all(np.isfinite(vals)):
            raise NonNumericCell(f"{path}: line {lineno}: non-finite value in {line!r}")
        rows.append(vals)
    body = np.array(rows, dtype=float).reshape(-1, m + r)
    return RawSeries(body[:, :m], body[:, m:])


def save_csv(series, path):
    header = [f"y{i + 1}" for i in range(series.m)] + [f"u{i + 1}" for i in range(series.r)]
    body = np.hstack([series.outputs, series.inputs])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in body:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


@dataclass
class Normalizer:
    y_mean: np.ndarray
    y_std: np.ndarray
    u_mean: np.ndarray
    u_std: np.ndarray

    def apply(self, series):
        return RawSeries((series.outputs - self.y_mean) / self.y_std,
                         (series.inputs - self.u_mean) / self.u_std,
                         series.sample_time, list(series.output_names), list(series.input_names))

    def invert(self, series):
        return RawSeries(series.outputs * self.y_std + self.y_mean,
                         series.inputs * self.u_std + self.u_mean,
                         series.sample_time, list(series.output_names), list(series.input_names))

    def invert_outputs(self, Y):
        return np.asarray(Y) * self.y_std + self.y_mean

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("y_mean", "y_std", "u_mean", "u_std")}

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.array(d[k], dtype=float) for k in ("y_mean", "y_std", "u_mean", "u_std")))


def _stats(a):
    mu = a.mean(axis=0)
    sd = a.std(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1])
    bad = ~(sd > 0)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} constant channel(s); using std = 1", stacklevel=3)
        sd = np.where(bad, 1.0, sd)
    return mu, sd


def zscore_fit(series, fit_range=None):
    """Per-channel mean and sample std (ddof=1) over ``fit_range`` rows."""
    sl = slice(None) if fit_range is None else slice(*fit_range)
    Y, U = series.outputs[sl], series.inputs[sl]
    if Y.shape[0] == 0:
        raise DataError("empty fit range")
    return Normalizer(*_stats(Y), *_stats(U))


def zscore_apply(norm, series):
    return norm.apply(series)


def zscore_invert(norm, series):
    return norm.invert(series)


def split_sizes(K, fractions):
    """Floor each leading segment; the remainder goes to the last one."""
    fr = np.asarray(fractions, dtype=float)
    if np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must be positive and sum to 1, got {fractions}")
    sizes = [int(np.floor(K * f + 1e-9)) for f in fr[:-1]]
    sizes.append(K - sum(sizes))
    return sizes


def chrono_split(series, fractions=(0.6, 0.2, 0.2), min_len=1):
    """Contiguous train/val/test segments in time order."""
    sizes = split_sizes(series.K, fractions)
    out, start = [], 0
    for name, size in zip(("train", "val", "test"), sizes):
        if size < min_len:
            raise SegmentTooShort(f"{name} segment has {size} rows, fewer than {min_len}")
        out.append(series.slice(start, start + size))
        start += size
    return tuple(out)


def input_signal(steps, kind="prbs", seed=0, low=0.0, high=1.0, hold=(10, 60), freqs=8):
    """Excitation signal: piecewise-constant random levels or a random-phase multisine."""
    rng = np.random.default_rng(seed)
    if kind == "prbs":
        u = np.empty(steps)
        k = 0
        while k < steps:
            d = int(rng.integers(hold[0], hold[1] + 1))
            u[k : k + d] = rng.uniform(low, high)
            k += d
        return u
    if kind == "multisine":
        t = np.arange(steps)
        f = np.linspace(1.0 / steps, 0.05, freqs)
        ph = rng.uniform(0, 2 * np.pi, freqs)
        s = np.sin(2 * np.pi * f[:, None] * t[None, :] + ph[:, None]).sum(axis=0)
        s = (s - s.min()) / (s.max() - s.min())
        return low + (high - low) * s
    raise ValueError(f"unknown input kind {kind!r}")


def tank_levels(u, a1=0.5, a2=0.4, b=1.0, Ts=0.2, h0=(0.0, 0.0)):
    """Euler-discretized cascaded tanks driven by ``u``; returns levels (K, 2).

        h1+ = h1 + Ts (-a1 sqrt(h1) + b u)
        h2+ = h2 + Ts ( a1 sqrt(h1) - a2 sqrt(h2))

    Levels are clamped at zero. Row k holds the levels before input u[k].
    """
    h1, h2 = float(h0[0]), float(h0[1])
    H = np.empty((len(u), 2))
    for k, uk in enumerate(u):
        H[k] = h1, h2
        q1 = a1 * np.sqrt(h1)
        h1, h2 = (
            max(h1 + Ts * (-q1 + b * uk), 0.0),
            max(h2 + Ts * (q1 - a2 * np.sqrt(h2)), 0.0),
        )
    return H


def synth_two_tank(steps, u=None, noise_std=0.0, seed=0, a1=0.5, a2=0.4, b=1.0, Ts=0.2,
                   h0=(0.0, 0.0), input_kind="prbs"):
    """Two-tank benchmark series: input flow ``u``, output lower level plus noise.

    ``u`` defaults to a seeded piecewise-constant signal in [0, 1].
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    ss = np.random.SeedSequence(seed).spawn(2)
    if u is None:
        u = input_signal(steps, input_kind, seed=ss[0])
    u = np.broadcast_to(np.asarray(u, dtype=float).reshape(-1), (steps,)).copy()
    H = tank_levels(u, a1, a2, b, Ts, h0)
    y = H[:, 1] + noise_std * np.random.default_rng(ss[1]).standard_normal(steps)
    return RawSeries(y[:, None], u[:, None], Ts)
