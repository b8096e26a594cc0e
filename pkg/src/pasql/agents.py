"""Agent-state machines ``z' = phi(z, y', a)``."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import ModelFormatError, _need, _read_json


@dataclass(frozen=True, eq=False)
class AgentStateMachine:
    """Finite agent state with update table ``phi[z, y', a]``.

    ``z0`` is the state before the first observation and ``a0`` the dummy
    action used for the first update ``z1 = phi[z0, y1, a0]``.
    """

    phi: np.ndarray
    z0: int = 0
    a0: int = 0
    name: str = "agent"

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.int64)
        if phi.ndim != 3:
            raise ValueError(f"phi must be 3-D (z, y, a), got shape {phi.shape}")
        nZ = phi.shape[0]
        if phi.size and (phi.min() < 0 or phi.max() >= nZ):
            raise ValueError("phi emits agent states outside [0, nZ)")
        if not 0 <= self.z0 < nZ:
            raise ValueError(f"z0={self.z0} outside [0, {nZ})")
        if not 0 <= self.a0 < phi.shape[2]:
            raise ValueError(f"a0={self.a0} outside [0, {phi.shape[2]})")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def nZ(self) -> int:
        return self.phi.shape[0]

    @property
    def nY(self) -> int:
        return self.phi.shape[1]

    @property
    def nA(self) -> int:
        return self.phi.shape[2]

    def first(self, y1: int) -> int:
        return int(self.phi[self.z0, y1, self.a0])

    def reachable(self) -> np.ndarray:
        """Sorted agent states reachable after at least one update from ``z0``."""
        seen = set(np.unique(self.phi[self.z0, :, self.a0]).tolist())
        frontier = list(seen)
        while frontier:
            z = frontier.pop()
            for nz in np.unique(self.phi[z]).tolist():
                if nz not in seen:
                    seen.add(nz)
                    frontier.append(nz)
        return np.array(sorted(seen), dtype=np.int64)


def observation_agent(nY: int, nA: int) -> AgentStateMachine:
    """The agent state is the latest observation, ``Z_t = Y_t``."""
    phi = np.broadcast_to(np.arange(nY)[None, :, None], (nY, nY, nA))
    return AgentStateMachine(phi=phi, z0=0, a0=0, name="observation")


def make_frame_stack(m: int, nY: int, nA: int, use_actions: bool = True, a0: int = 0) -> AgentStateMachine:
    """Sliding window of the last ``m`` items.

    An item is ``(a_{t-1}, y_t)`` when ``use_actions`` else ``y_t``.  Full
    windows come first (lexicographic, oldest item most significant), then
    the partially filled padding windows by decreasing length; the empty
    window is the last index and is ``z0``.  With ``m=1`` and no actions the
    full-window index equals the observation.
    """
    if m < 1:
        raise ValueError(f"window length must be >= 1, got {m}")
    n_items = nA * nY if use_actions else nY
    windows = []
    for length in range(m, -1, -1):
        windows.extend(itertools.product(range(n_items), repeat=length))
    index = {w: i for i, w in enumerate(windows)}
    nZ = len(windows)
    phi = np.empty((nZ, nY, nA), dtype=np.int64)
    for z, w in enumerate(windows):
        for y in range(nY):
            for a in range(nA):
                item = a * nY + y if use_actions else y
                phi[z, y, a] = index[(w + (item,))[-m:]]
    return AgentStateMachine(phi=phi, z0=nZ - 1, a0=a0, name=f"frame_stack_m{m}")


def agent_to_dict(agent: AgentStateMachine) -> dict:
    return {"nZ": agent.nZ, "z0": agent.z0, "a0": agent.a0, "phi": agent.phi.tolist()}


def save_agent(agent: AgentStateMachine, path) -> None:
    Path(path).write_text(json.dumps(agent_to_dict(agent)) + "\n")


def load_agent(path) -> AgentStateMachine:
    doc = _read_json(path)
    phi = np.asarray(_need(doc, "phi", path), dtype=np.int64)
    nZ = int(_need(doc, "nZ", path))
    if phi.ndim != 3 or phi.shape[0] != nZ:
        raise ModelFormatError(f"{path}: field 'phi' must have shape (nZ={nZ}, nY, nA), got {phi.shape}")
    try:
        return AgentStateMachine(phi=phi, z0=int(_need(doc, "z0", path)), a0=int(_need(doc, "a0", path)),
                                 name=Path(str(path)).stem)
    except ValueError as e:
        raise ModelFormatError(f"{path}: {e}") from e
