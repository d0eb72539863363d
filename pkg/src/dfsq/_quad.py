"""Vectorized adaptive Gauss-Legendre quadrature on (possibly unbounded) intervals.

Unbounded intervals are mapped onto a finite ``t`` interval with an algebraic
change of variables, so tails are integrated exactly rather than truncated.
Panels are bisected until the Gauss-Legendre estimate agrees with the sum of
its two halves.  A panel that keeps failing down to the minimum width is
"stuck"; if stuck panels carry a non-negligible share of the integral the
integral is declared divergent.

The same panel table doubles as a cumulative integral with a fast inverse,
which is how numeric compressor functions are built.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DivergenceError

_N_NODES = 20
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_N_NODES)

MIN_WIDTH = 1e-13
MAX_PANELS = 200_000
STUCK_FRACTION = 1e-6


class DomainMap:
    """Monotone map ``t -> x`` from a finite interval onto ``[lo, hi]``."""

    def __init__(self, lo, hi, center=0.0, scale=1.0):
        lo = float(lo)
        hi = float(hi)
        if not lo < hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.lo, self.hi, self.scale = lo, hi, float(scale)
        lo_inf, hi_inf = math.isinf(lo), math.isinf(hi)
        if lo_inf and hi_inf:
            self.kind = "both"
            self.center = float(center)
            self.t_lo, self.t_hi = -1.0, 1.0
        elif hi_inf:
            self.kind = "upper"
            self.t_lo, self.t_hi = 0.0, 1.0
        elif lo_inf:
            self.kind = "lower"
            self.t_lo, self.t_hi = -1.0, 0.0
        else:
            self.kind = "finite"
            self.t_lo, self.t_hi = lo, hi

    def to_x(self, t):
        t = np.asarray(t, dtype=float)
        s = self.scale
        with np.errstate(divide="ignore"):
            if self.kind == "finite":
                return t.copy()
            if self.kind == "upper":
                return self.lo + s * t / (1.0 - t)
            if self.kind == "lower":
                return self.hi + s * t / (1.0 + t)
            return self.center + s * t / ((1.0 - t) * (1.0 + t))

    def to_t(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "finite":
            return np.clip(x, self.lo, self.hi)
        if self.kind == "upper":
            y = np.maximum((x - self.lo) / s, 0.0)
            with np.errstate(invalid="ignore"):
                t = y / (1.0 + y)
            return np.where(np.isinf(y), 1.0, t)
        if self.kind == "lower":
            y = np.minimum((x - self.hi) / s, 0.0)
            with np.errstate(invalid="ignore"):
                t = y / (1.0 - y)
            return np.where(np.isinf(y), -1.0, t)
        y = (x - self.center) / s
        with np.errstate(invalid="ignore", over="ignore"):
            t = 2.0 * y / (1.0 + np.sqrt(1.0 + 4.0 * y * y))
        return np.where(np.isinf(y), np.sign(y), t)

    def jac(self, t):
        t = np.asarray(t, dtype=float)
        s = self.scale
        if self.kind == "finite":
            return np.ones_like(t)
        with np.errstate(divide="ignore"):
            if self.kind == "upper":
                return s / (1.0 - t) ** 2
            if self.kind == "lower":
                return s / (1.0 + t) ** 2
            return s * (1.0 + t * t) / ((1.0 - t) * (1.0 + t)) ** 2


def _gl(fn_t, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    t = mid[:, None] + half[:, None] * _NODES
    vals = np.asarray(fn_t(t.ravel()), dtype=float).reshape(t.shape)
    return half * (vals @ _WEIGHTS), vals


def _initial_knots(dmap, breakpoints, initial):
    inner = []
    for x in breakpoints:
        x = float(x)
        if np.isfinite(x) and dmap.lo < x < dmap.hi:
            inner.append(float(dmap.to_t(x)))
    knots = np.unique(np.array([dmap.t_lo, *inner, dmap.t_hi]))
    pieces = []
    for a, b in zip(knots[:-1], knots[1:]):
        if b - a <= 0:
            continue
        pieces.append(np.linspace(a, b, initial + 1)[:-1])
    pieces.append(knots[-1:])
    return np.concatenate(pieces)


class PanelTable:
    """Accepted panels of an adaptive integration, sorted along ``t``."""

    def __init__(self, dmap, fn_t, a, b, values, errors, stuck):
        order = np.argsort(a)
        self.dmap = dmap
        self._fn_t = fn_t
        self.a = a[order]
        self.b = b[order]
        self.values = values[order]
        self.errors = errors[order]
        self.stuck = stuck[order]
        self.cumulative = np.concatenate([[0.0], np.cumsum(self.values)])
        self.total = float(self.cumulative[-1])

    @property
    def error(self):
        return float(np.sum(self.errors))

    def knots_x(self):
        return self.dmap.to_x(np.concatenate([self.a, self.b[-1:]]))

    def _partial(self, idx, t):
        # integral over [a[idx], t] with the panel's own rule
        a = self.a[idx]
        val, _ = _gl(self._fn_t, a, t)
        return val

    def cumulative_at_t(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.a[0], self.b[-1])
        idx = np.clip(np.searchsorted(self.a, t, side="right") - 1, 0, len(self.a) - 1)
        flat_t = t.ravel()
        flat_i = idx.ravel()
        out = self.cumulative[flat_i] + self._partial(flat_i, flat_t)
        return out.reshape(t.shape)

    def cumulative_at(self, x):
        return self.cumulative_at_t(self.dmap.to_t(x))

    def invert_t(self, target, tol=1e-14, max_iter=100):
        """Solve ``cumulative(t) = target`` by bracketed Newton iteration."""
        target = np.asarray(target, dtype=float)
        flat = target.ravel()
        idx = np.searchsorted(self.cumulative, flat, side="right") - 1
        idx = np.clip(idx, 0, len(self.a) - 1)
        lo = self.a[idx].copy()
        hi = self.b[idx].copy()
        base = self.cumulative[idx]
        goal = flat - base
        t = 0.5 * (lo + hi)
        atol = tol * max(abs(self.total), 1e-300)
        for _ in range(max_iter):
            f = self._partial(idx, t) - goal
            lo = np.where(f < 0, t, lo)
            hi = np.where(f >= 0, t, hi)
            deriv = np.asarray(self._fn_t(t), dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = t - f / deriv
            ok = np.isfinite(step) & (step > lo) & (step < hi)
            t_new = np.where(ok, step, 0.5 * (lo + hi))
            done = (np.abs(f) <= atol) | (hi - lo <= 4e-16 * np.maximum(1.0, np.abs(t)))
            t = np.where(done, t, t_new)
            if np.all(done):
                break
        return t.reshape(target.shape)


def build_panels(func, lo, hi, breakpoints=(), center=0.0, scale=1.0, rel=1e-12,
                 abs_tol=0.0, initial=8, what="integral"):
    """Adaptively integrate ``func`` over ``[lo, hi]`` and return the panel table.

    ``func`` must be vectorized over a 1-D array of abscissae and must not
    return NaN inside the interval.  Raises :class:`DivergenceError` if the
    integral does not converge.
    """
    dmap = DomainMap(lo, hi, center=center, scale=scale)

    def fn_t(t):
        x = dmap.to_x(t)
        with np.errstate(invalid="ignore", over="ignore"):
            v = np.asarray(func(x), dtype=float) * dmap.jac(t)
        return v

    knots = _initial_knots(dmap, breakpoints, initial)
    a = knots[:-1]
    b = knots[1:]
    whole, _ = _gl(fn_t, a, b)
    done_a, done_b, done_v, done_e, done_s = [], [], [], [], []
    n_total = len(a)
    done_l1 = 0.0
    while len(a):
        m = 0.5 * (a + b)
        left, vl = _gl(fn_t, a, m)
        right, vr = _gl(fn_t, m, b)
        if not (np.all(np.isfinite(vl)) and np.all(np.isfinite(vr))):
            bad = ~(np.isfinite(vl).all(axis=1) & np.isfinite(vr).all(axis=1))
            where = dmap.to_x(m[bad][:1])
            raise DivergenceError(f"{what}: integrand is not finite near x={float(where[0]):.6g}")
        pair = left + right
        err = np.abs(whole - pair)
        # L1 mass, so signed integrands that cancel still get a sane tolerance
        running = float(np.sum(np.abs(pair))) + done_l1

        tol_panel = max(rel * running / 64.0, abs_tol)
        ok = err <= tol_panel
        tiny = (b - a) <= MIN_WIDTH * max(1.0, float(np.max(np.abs(knots))))
        accept = ok | tiny
        done_a.append(a[accept])
        done_b.append(b[accept])
        done_v.append(pair[accept])
        done_e.append(err[accept])
        done_s.append(tiny[accept] & ~ok[accept])
        done_l1 += float(np.sum(np.abs(pair[accept])))
        split = ~accept
        n_total += int(np.count_nonzero(split))
        if n_total > MAX_PANELS:
            raise DivergenceError(f"{what}: adaptive quadrature exceeded {MAX_PANELS} panels")
        a, m_s, b = a[split], m[split], b[split]
        a, b = np.concatenate([a, m_s]), np.concatenate([m_s, b])
        whole = np.concatenate([left[split], right[split]])
    table = PanelTable(
        dmap, fn_t,
        np.concatenate(done_a), np.concatenate(done_b),
        np.concatenate(done_v), np.concatenate(done_e),
        np.concatenate(done_s),
    )
    if np.any(table.stuck):
        stuck_mass = float(np.sum(np.abs(table.values[table.stuck])))
        scale_ref = float(np.sum(np.abs(table.values)))
        if stuck_mass > STUCK_FRACTION * max(scale_ref, 1e-300) and stuck_mass > 1e-300:
            where = table.dmap.to_x(table.a[table.stuck][np.argmax(np.abs(table.values[table.stuck]))])
            raise DivergenceError(
                f"{what}: quadrature does not converge near x={float(where):.6g} "
                f"(unresolved share {stuck_mass / scale_ref:.3g})"
            )
    return table


def integrate(func, lo, hi, breakpoints=(), center=0.0, scale=1.0, rel=1e-10, abs_tol=0.0,
              what="integral"):
    """Integral of ``func`` over ``[lo, hi]``; see :func:`build_panels`."""
    return build_panels(func, lo, hi, breakpoints, center, scale, rel, abs_tol,
                        what=what).total


def integrate_segments(func, edges, center=0.0, scale=1.0, rel=1e-12, what="integral"):
    """Integrals of ``func`` over consecutive segments ``[edges[i], edges[i+1]]``.

    One adaptive pass over the whole range with every edge as a breakpoint, so
    segment sums share one error budget.
    """
    edges = np.asarray(edges, dtype=float)
    table = build_panels(func, edges[0], edges[-1], edges[1:-1], center, scale, rel,
                         what=what)
    t_edges = table.dmap.to_t(edges)
    # panels never straddle a breakpoint, so bucket them by left end
    seg = np.searchsorted(t_edges, table.a, side="right") - 1
    seg = np.clip(seg, 0, len(edges) - 2)
    out = np.zeros(len(edges) - 1)
    np.add.at(out, seg, table.values)
    return out
