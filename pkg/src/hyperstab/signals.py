"""Uniformly sampled vector signals with optional derivative channels.

Evaluation between samples is cubic: Hermite when a derivative channel is
present, 4-point Lagrange otherwise.  Reads that land within 1e-9 of a sample
snap to it, so delay reads aligned with the grid are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass
class SampledSignal:
    t0: float
    dt: float
    values: np.ndarray                 # (nsamples, ncomp)
    derivatives: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.ndim != 2:
            raise InputError("signal values must be a (nsamples, ncomp) array")
        if self.derivatives is not None:
            self.derivatives = np.asarray(self.derivatives, dtype=float)
            if self.derivatives.shape != self.values.shape:
                raise InputError("derivative channel shape mismatch")
        if self.dt <= 0:
            raise InputError("dt must be positive")

    @property
    def nsamples(self):
        return self.values.shape[0]

    @property
    def ncomp(self):
        return self.values.shape[1]

    @property
    def t1(self):
        return self.t0 + (self.nsamples - 1) * self.dt

    def times(self):
        return self.t0 + self.dt * np.arange(self.nsamples)

    def _locate(self, s):
        x = (np.asarray(s, dtype=float) - self.t0) / self.dt
        if np.any(x < -1e-6) or np.any(x > self.nsamples - 1 + 1e-6):
            raise InputError(
                f"evaluation outside signal support [{self.t0}, {self.t1}]")
        i = np.clip(np.floor(x).astype(int), 0, self.nsamples - 2)
        return i, x - i

    def eval(self, s):
        """Values at times ``s`` (scalar or array); shape (..., ncomp)."""
        scalar = np.isscalar(s)
        i, f = self._locate(np.atleast_1d(s))
        if self.derivatives is not None:
            out = _hermite(self.values, self.derivatives, self.dt, i, f, 0)
        else:
            out = _lagrange4(self.values, i, f, self.nsamples)
        return out[0] if scalar else out

    def eval_derivative(self, s):
        scalar = np.isscalar(s)
        i, f = self._locate(np.atleast_1d(s))
        if self.derivatives is not None:
            out = _hermite(self.values, self.derivatives, self.dt, i, f, 1)
        else:
            # derivative of the local cubic
            out = _lagrange4(self.values, i, f, self.nsamples, derivative=True)
            out = out / self.dt
        return out[0] if scalar else out

    def to_csv(self, path):
        t = self.times()
        cols = [t] + [self.values[:, j] for j in range(self.ncomp)]
        header = ["t"] + [f"v{j + 1}" for j in range(self.ncomp)]
        if self.derivatives is not None:
            cols += [self.derivatives[:, j] for j in range(self.ncomp)]
            header += [f"dv{j + 1}" for j in range(self.ncomp)]
        data = np.column_stack(cols)
        np.savetxt(path, data, delimiter=",", header=",".join(header),
                   comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if header[0] != "t":
            raise InputError(f"{path}: first CSV column must be t")
        names = header[1:]
        nv = sum(1 for h in names if h.startswith("v"))
        nd = sum(1 for h in names if h.startswith("dv"))
        t = data[:, 0]
        if len(t) < 2:
            raise InputError(f"{path}: need at least two samples")
        dt = t[1] - t[0]
        if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(dt, 1.0):
            raise InputError(f"{path}: samples are not uniform")
        values = data[:, 1:1 + nv]
        derivs = data[:, 1 + nv:1 + nv + nd] if nd else None
        return cls(float(t[0]), float(dt), values, derivs)


def _hermite(values, derivs, dt, i, f, order):
    y0, y1 = values[i], values[i + 1]
    d0, d1 = derivs[i] * dt, derivs[i + 1] * dt
    f = f[:, None]
    snap_lo = f < 1e-9
    snap_hi = f > 1 - 1e-9
    f2 = f * f
    f3 = f2 * f
    if order == 0:
        out = ((2 * f3 - 3 * f2 + 1) * y0 + (f3 - 2 * f2 + f) * d0
               + (-2 * f3 + 3 * f2) * y1 + (f3 - f2) * d1)
        out = np.where(snap_lo, y0, out)
        out = np.where(snap_hi, y1, out)
    else:
        out = ((6 * f2 - 6 * f) * y0 + (3 * f2 - 4 * f + 1) * d0
               + (-6 * f2 + 6 * f) * y1 + (3 * f2 - 2 * f) * d1) / dt
        out = np.where(snap_lo, derivs[i], out)
        out = np.where(snap_hi, derivs[i + 1], out)
    return out


def _lagrange4(values, i, f, nsamples, derivative=False):
    # shift the 4-point stencil inward at the edges
    base = np.clip(i - 1, 0, nsamples - 4)
    t = (i - base) + f          # local coordinate in [0, 3]
    t = t[:, None]
    ys = [values[base + k] for k in range(4)]
    # Lagrange basis on nodes 0,1,2,3
    if not derivative:
        c0 = -(t - 1) * (t - 2) * (t - 3) / 6.0
        c1 = t * (t - 2) * (t - 3) / 2.0
        c2 = -t * (t - 1) * (t - 3) / 2.0
        c3 = t * (t - 1) * (t - 2) / 6.0
    else:
        c0 = -((t - 2) * (t - 3) + (t - 1) * (t - 3) + (t - 1) * (t - 2)) / 6.0
        c1 = ((t - 2) * (t - 3) + t * (t - 3) + t * (t - 2)) / 2.0
        c2 = -((t - 1) * (t - 3) + t * (t - 3) + t * (t - 1)) / 2.0
        c3 = ((t - 1) * (t - 2) + t * (t - 1) + t * (t - 2)) / 6.0
    out = c0 * ys[0] + c1 * ys[1] + c2 * ys[2] + c3 * ys[3]
    if not derivative:
        snap = np.abs(t - np.round(t)) < 1e-9
        near = np.clip(np.round(t).astype(int), 0, 3)
        exact = np.take_along_axis(np.stack(ys, axis=1), near[:, None], axis=1)[:, 0]
        out = np.where(snap, exact, out)
    return out
