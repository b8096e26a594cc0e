"""Periodic agent-state policies and L-tuples of Q-tables."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import ModelFormatError, _need, _read_json

PMF_TOL = 1e-12
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PeriodicPolicy:
    """``probs[l, z, a] = pi^l(a | z)``; phase ``l`` is used at decision epochs with that phase."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 3:
            raise ValueError(f"probs must be 3-D (L, nZ, nA), got shape {p.shape}")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=2) - 1.0) > PMF_TOL):
            raise ValueError("every probs[l, z] must be a PMF")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_actions(cls, actions, nA: int) -> "PeriodicPolicy":
        """Deterministic policy from an (L, nZ) table of action indices."""
        actions = np.asarray(actions, dtype=np.int64)
        return cls(np.eye(nA)[actions])

    @classmethod
    def stationary(cls, probs) -> "PeriodicPolicy":
        return cls(np.asarray(probs, dtype=float)[None])

    @classmethod
    def from_digits(cls, digits: str, L: int, nZ: int, nA: int) -> "PeriodicPolicy":
        vals = [int(d) for d in (digits.split("-") if "-" in digits else digits)]
        if len(vals) != L * nZ:
            raise ValueError(f"policy code {digits!r} has {len(vals)} digits, expected L*nZ={L * nZ}")
        return cls.from_actions(np.array(vals).reshape(L, nZ), nA)

    @property
    def L(self) -> int:
        return self.probs.shape[0]

    @property
    def nZ(self) -> int:
        return self.probs.shape[1]

    @property
    def nA(self) -> int:
        return self.probs.shape[2]

    @property
    def deterministic(self) -> bool:
        return bool(np.all((self.probs == 0) | (self.probs == 1)))

    def actions(self) -> np.ndarray:
        """(L, nZ) action table of a deterministic policy."""
        if not self.deterministic:
            raise ValueError("policy is stochastic")
        return self.probs.argmax(axis=2)

    def digits(self) -> str:
        """Base-nA code: digit ``l * nZ + z`` is the action at (l, z)."""
        acts = self.actions().ravel()
        sep = "" if self.nA <= 10 else "-"
        return sep.join(str(int(a)) for a in acts)

    def is_phase_constant(self) -> bool:
        return bool(np.all(self.probs == self.probs[:1]))

    def __eq__(self, other):
        return isinstance(other, PeriodicPolicy) and np.array_equal(self.probs, other.probs)


def behavior_from_matrix(matrix) -> PeriodicPolicy:
    """Two-action behavior policy from rows ``[mu^0(0|z), ..., mu^{L-1}(0|z)]``, one row per z."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    p0 = m.T  # (L, nZ)
    return PeriodicPolicy(np.stack([p0, 1.0 - p0], axis=2))


@dataclass(frozen=True, eq=False)
class QTuple:
    """``q[l, z, a]`` for every phase; ``unvisited[l, z]`` marks rows outside the limit's support."""

    q: np.ndarray
    unvisited: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 3:
            raise ValueError(f"q must be 3-D (L, nZ, nA), got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("q has non-finite entries")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        uv = np.zeros(q.shape[:2], bool) if self.unvisited is None else np.asarray(self.unvisited, bool)
        object.__setattr__(self, "unvisited", uv)

    @property
    def L(self) -> int:
        return self.q.shape[0]

    def values(self) -> np.ndarray:
        """``V^l(z) = max_a Q^l(z, a)``."""
        return self.q.max(axis=2)


def greedy(q: QTuple, tie_tol: float = TIE_TOL) -> PeriodicPolicy:
    """Deterministic argmax policy; actions within ``tie_tol`` of the max count as tied
    and the lowest index wins."""
    arr = q.q
    best = arr.max(axis=2, keepdims=True)
    acts = np.argmax(arr >= best - tie_tol, axis=2)
    return PeriodicPolicy.from_actions(acts, arr.shape[2])


def save_policy(pi: PeriodicPolicy, path, meta=None) -> None:
    doc = {"L": pi.L, "nZ": pi.nZ, "nA": pi.nA, "probs": pi.probs.tolist()}
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc) + "\n")


def load_policy(path) -> PeriodicPolicy:
    doc = _read_json(path)
    probs = np.asarray(_need(doc, "probs", path), dtype=float)
    want = tuple(int(_need(doc, k, path)) for k in ("L", "nZ", "nA"))
    if probs.shape != want:
        raise ModelFormatError(f"{path}: field 'probs' has shape {probs.shape}, expected {want}")
    try:
        return PeriodicPolicy(probs)
    except ValueError as e:
        raise ModelFormatError(f"{path}: {e}") from e
