"""Uniformly sampled measurement records of the load bus."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from loadsysid.errors import ToolkitError

COLUMNS = ("v", "theta", "p", "q")


@dataclass
class MeasurementSeries:
    """Sampled V, theta, P, Q of the identified load.

    ``data`` holds the absolute columns (N, 4) in the order v, theta, p, q.
    After detrending, ``deltas`` holds the mean-removed columns and
    ``means`` the removed per-column means.
    """

    ts: float
    time: np.ndarray
    data: np.ndarray
    detrended: bool = False
    deltas: np.ndarray | None = None
    means: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(COLUMNS):
            raise ToolkitError(f"data must be (N, {len(COLUMNS)})")
        if len(self.time) != len(self.data):
            raise ToolkitError("time and data lengths differ")
        if len(self.time) > 1:
            steps = np.diff(self.time)
            if not np.allclose(steps, self.ts, rtol=0.0, atol=1e-9 * max(self.ts, 1.0)):
                raise ToolkitError("time grid is not uniform at ts")

    def __len__(self):
        return len(self.time)

    def column(self, name):
        return self.data[:, COLUMNS.index(name)]

    def delta(self, name):
        if not self.detrended:
            raise ToolkitError("series is not detrended")
        return self.deltas[:, COLUMNS.index(name)]

    @property
    def v(self):
        return self.column("v")

    @property
    def theta(self):
        return self.column("theta")

    @property
    def p(self):
        return self.column("p")

    @property
    def q(self):
        return self.column("q")

    def window(self, t_start, t_end):
        """Sub-series on [t_start, t_end); metadata is carried over."""
        mask = (self.time >= t_start - 1e-12) & (self.time < t_end - 1e-12)
        if not mask.any():
            raise ToolkitError(f"empty window [{t_start}, {t_end})")
        return MeasurementSeries(
            ts=self.ts,
            time=self.time[mask],
            data=self.data[mask],
            meta=dict(self.meta),
        )

    def voltage_phasor(self):
        return self.v * np.exp(1j * self.theta)

    def current_phasor(self):
        """Load current drawn, from S = V conj(I)."""
        s = self.p + 1j * self.q
        return np.conj(s / self.voltage_phasor())


def detrend(series):
    """Remove per-column means; records them and sets the detrended flag."""
    if len(series) == 0:
        raise ToolkitError("cannot detrend an empty series")
    means = series.data.mean(axis=0)
    deltas = series.data - means
    return MeasurementSeries(
        ts=series.ts,
        time=series.time.copy(),
        data=series.data.copy(),
        detrended=True,
        deltas=deltas,
        means=means,
        meta=dict(series.meta),
    )
