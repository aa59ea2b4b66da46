"""Shared primitives: model parameters, the cavity transfer function, RNG streams.

Fields are extended reals. ``+inf`` is a first-class value meaning the spin is
conditioned to ``+1`` (plus boundary). ``-inf`` is accepted by :func:`xi` for
internal conditioning but never as a model parameter.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class IsingError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(IsingError, ValueError):
    """Invalid model or algorithm parameter."""


class CapacityError(IsingError):
    """Problem too large for an exact (exponential-cost) routine."""


class GenerationError(IsingError):
    """Random graph generation failed."""


@dataclass(frozen=True)
class IsingParams:
    """Inverse temperature ``beta`` and magnetic field(s).

    ``per_vertex_fields`` overrides the uniform ``field`` when given; entries
    may be ``+inf`` but never ``-inf``.
    """

    beta: float
    field: float = 0.0
    per_vertex_fields: tuple[float, ...] | None = None

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ParameterError(f"beta must be finite and >= 0, got {self.beta}")
        if math.isnan(self.field) or self.field == -math.inf:
            raise ParameterError(f"invalid uniform field {self.field}")
        if self.per_vertex_fields is not None:
            pv = tuple(float(b) for b in self.per_vertex_fields)
            if any(math.isnan(b) or b == -math.inf for b in pv):
                raise ParameterError("per-vertex fields must be finite or +inf")
            object.__setattr__(self, "per_vertex_fields", pv)

    def fields(self, n: int) -> np.ndarray:
        """Per-vertex field array of length ``n``."""
        if self.per_vertex_fields is None:
            return np.full(n, float(self.field))
        if len(self.per_vertex_fields) != n:
            raise ParameterError(
                f"per_vertex_fields has length {len(self.per_vertex_fields)}, expected {n}"
            )
        return np.asarray(self.per_vertex_fields, dtype=float)

    def with_beta(self, beta: float) -> "IsingParams":
        return IsingParams(beta, self.field, self.per_vertex_fields)

    def with_fields(self, fields: Sequence[float]) -> "IsingParams":
        return IsingParams(self.beta, self.field, tuple(fields))


def log_cosh(a):
    """Overflow-free ``log(cosh(a))``."""
    a = np.abs(np.asarray(a, dtype=float))
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def log_2cosh(a):
    a = np.abs(np.asarray(a, dtype=float))
    return a + np.log1p(np.exp(-2.0 * a))


def _scalar_or_array(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


def xi(beta: float, h):
    """Cavity transfer ``atanh(tanh(beta) * tanh(h))``, vectorized over ``h``.

    For ``tanh(beta) tanh|h| < 1/2`` the product form is well conditioned; above
    that the cosh-ratio form ``0.5 log(cosh(beta+h)/cosh(beta-h))`` is used, written
    as ``min(beta,|h|)`` plus a nonpositive correction so no cancellation occurs
    for large fields. Infinite ``h`` maps to ``sign(h) * beta`` exactly.
    """
    if not math.isfinite(beta) or beta < 0:
        raise ParameterError(f"beta must be finite and >= 0, got {beta}")
    h_in = h
    h = np.asarray(h, dtype=float)
    a = np.abs(h)
    sign = np.sign(h)
    with np.errstate(invalid="ignore", over="ignore"):
        m = np.minimum(beta, a)
        prod = math.tanh(beta) * np.tanh(a)
        small = np.arctanh(np.minimum(prod, 0.5))
        big = m + 0.5 * (np.log1p(np.exp(-2.0 * (beta + a))) - np.log1p(np.exp(-2.0 * np.abs(beta - a))))
        out = np.where(prod < 0.5, small, big)
        out = np.clip(out, 0.0, m)
        out = np.where(np.isinf(a), beta, out)
    return _scalar_or_array(sign * out, h_in)


@dataclass(frozen=True)
class CriticalPoint:
    """Critical inverse temperature; ``transition`` is False when none exists."""

    beta_c: float
    transition: bool

    def __float__(self) -> float:
        return self.beta_c


def critical_beta(rho_bar: float) -> CriticalPoint:
    """Solve ``rho_bar * tanh(beta_c) = 1``."""
    if math.isnan(rho_bar):
        raise ParameterError("rho_bar is NaN")
    if rho_bar <= 1.0:
        return CriticalPoint(math.inf, False)
    return CriticalPoint(math.atanh(1.0 / rho_bar), True)


ATANH_TOL = 1e-12


def atanh_clamped(x):
    """``atanh`` with ``±1 -> ±inf`` and round-off just outside [-1, 1] clamped."""
    x_in = x
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + ATANH_TOL) or np.any(np.isnan(x)):
        raise ParameterError("atanh_clamped: argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        out = np.arctanh(x)
    return _scalar_or_array(out, x_in)


def spin_configurations(k: int) -> np.ndarray:
    """All ``2**k`` spin vectors; bit ``b`` of row index ``c`` set means ``x_b = +1``."""
    c = np.arange(2**k, dtype=np.int64)
    bits = (c[:, None] >> np.arange(k, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


@dataclass(frozen=True)
class SpinDistribution:
    """A law on ``{-1,+1}^vertices`` indexed as in :func:`spin_configurations`."""

    vertices: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        if self.probs.shape != (2 ** len(self.vertices),):
            raise ParameterError("probs length must be 2**len(vertices)")

    def magnetization(self, v: int) -> float:
        b = self.vertices.index(v)
        x = spin_configurations(len(self.vertices))[:, b]
        return float(self.probs @ x)


def rng(seed: int, stream: str, *counters: int) -> np.random.Generator:
    """Philox generator for a named stream.

    The stream name is hashed with crc32 into the seed sequence's spawn key, so
    distinct operations (and distinct counters, e.g. generation index or grid
    point) never share random numbers, independent of call order.
    """
    key = (zlib.crc32(stream.encode()),) + tuple(int(c) for c in counters)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
