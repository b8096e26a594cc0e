"""POMDP models: the tabular form, the generative form, validation and file I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

ROW_TOL = 1e-12


class ModelFormatError(ValueError):
    """A model/agent/policy file could not be parsed."""


class ModelValidationError(ValueError):
    """A model violates its invariants; ``diagnostics`` lists every violation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid model:\n  " + "\n  ".join(self.diagnostics))


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularPomdp:
    """Finite POMDP with joint kernel ``trans[s, a, s', y'] = P(s', y' | s, a)``.

    ``init_obs[s, y]`` is the law of the first observation given the first
    state.  When omitted it defaults to the observation marginal of
    ``P(., . | s, a0=0)``.
    """

    trans: np.ndarray
    reward: np.ndarray
    gamma: float
    rho: np.ndarray
    init_obs: Optional[np.ndarray] = None
    labels: dict = field(default_factory=dict)
    name: str = "model"

    def __post_init__(self):
        trans = _frozen(self.trans)
        if trans.ndim != 4:
            raise ValueError(f"trans must be 4-D (s, a, s', y'), got shape {trans.shape}")
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "rho", _frozen(self.rho))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.init_obs is None:
            init = trans[:, 0].sum(axis=1)
        else:
            init = self.init_obs
        object.__setattr__(self, "init_obs", _frozen(init))

    @property
    def nS(self) -> int:
        return self.trans.shape[0]

    @property
    def nA(self) -> int:
        return self.trans.shape[1]

    @property
    def nY(self) -> int:
        return self.trans.shape[3]

    @property
    def r_max(self) -> float:
        return float(np.abs(self.reward).max())

    def state_kernel(self) -> np.ndarray:
        """``P(s' | s, a)`` with shape (nS, nA, nS)."""
        return self.trans.sum(axis=3)

    def obs_kernel(self) -> np.ndarray:
        """``P(y' | s, a)`` with shape (nS, nA, nY)."""
        return self.trans.sum(axis=2)

    def __eq__(self, other):
        if not isinstance(other, TabularPomdp):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and self.labels == other.labels
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("trans", "reward", "rho", "init_obs")
            )
        )


@dataclass(frozen=True)
class GenerativePomdp:
    """A simulator-only POMDP over integer states.

    ``step(s, a, rng) -> (s', y', reward, done)``; ``observe(s)`` gives the first
    observation.  ``batch_step`` (numpy arrays in, arrays out) and ``jit_step``
    (a numba-compiled scalar step) are optional fast paths used by the
    brute-force searcher; both must agree with ``step``.
    """

    name: str
    nA: int
    nY: int
    step: Callable
    observe: Callable
    initial_state: int
    gamma: float
    reward_bound: float
    deterministic: bool = True
    batch_step: Optional[Callable] = None
    jit_step: Optional[Callable] = None
    initial_states: tuple = ()

    def starts(self):
        """Initial states to evaluate from (several for randomized starts)."""
        return self.initial_states or (self.initial_state,)


def validate_model(model: TabularPomdp, require_nonnegative_reward: bool = False) -> list[str]:
    """Return the list of invariant violations; an empty list means the model is valid."""
    diags = []
    t = model.trans
    if not np.all(np.isfinite(t)):
        diags.append("trans contains non-finite entries")
    for s, a in zip(*np.nonzero(np.any(t < 0, axis=(2, 3)))):
        diags.append(f"trans[{s},{a}] has negative entries")
    sums = t.sum(axis=(2, 3))
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_TOL)):
        diags.append(f"trans[{s},{a}] sums to {sums[s, a]!r}, expected 1")
    if model.reward.shape != (model.nS, model.nA):
        diags.append(f"reward shape {model.reward.shape} != ({model.nS}, {model.nA})")
    elif not np.all(np.isfinite(model.reward)):
        diags.append("reward contains non-finite entries")
    elif require_nonnegative_reward and np.any(model.reward < 0):
        s, a = np.argwhere(model.reward < 0)[0]
        diags.append(f"reward[{s},{a}] = {model.reward[s, a]!r} is negative")
    if model.rho.shape != (model.nS,):
        diags.append(f"rho shape {model.rho.shape} != ({model.nS},)")
    else:
        if np.any(model.rho < 0):
            diags.append("rho has negative entries")
        if abs(model.rho.sum() - 1.0) > ROW_TOL:
            diags.append(f"rho sums to {model.rho.sum()!r}, expected 1")
    io = model.init_obs
    if io.shape != (model.nS, model.nY):
        diags.append(f"init_obs shape {io.shape} != ({model.nS}, {model.nY})")
    else:
        for s in np.nonzero((np.abs(io.sum(axis=1) - 1.0) > ROW_TOL) | np.any(io < 0, axis=1))[0]:
            diags.append(f"init_obs[{s}] is not a PMF")
    if not (0.0 <= model.gamma < 1.0):
        diags.append(f"gamma = {model.gamma!r} outside [0, 1)")
    return diags


def check_model(model: TabularPomdp, **kw) -> TabularPomdp:
    diags = validate_model(model, **kw)
    if diags:
        raise ModelValidationError(diags)
    return model


# ---------------------------------------------------------------- file format


def model_to_dict(model: TabularPomdp) -> dict:
    trans = []
    for s in range(model.nS):
        row = []
        for a in range(model.nA):
            sp, yp = np.nonzero(model.trans[s, a])
            row.append([[int(i), int(j), float(model.trans[s, a, i, j])] for i, j in zip(sp, yp)])
        trans.append(row)
    return {
        "nS": model.nS,
        "nA": model.nA,
        "nY": model.nY,
        "gamma": model.gamma,
        "rho": model.rho.tolist(),
        "trans": trans,
        "reward": model.reward.tolist(),
        "init_obs": model.init_obs.tolist(),
        "labels": model.labels,
    }


def save_model(model: TabularPomdp, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips bit-exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    return doc


def _need(doc, key, path):
    if key not in doc:
        raise ModelFormatError(f"{path}: missing field '{key}'")
    return doc[key]


def model_from_dict(doc: dict, path="<dict>", validate=True) -> TabularPomdp:
    nS, nA, nY = (int(_need(doc, k, path)) for k in ("nS", "nA", "nY"))
    gamma = float(_need(doc, "gamma", path))
    rho = np.asarray(_need(doc, "rho", path), dtype=float)
    reward = np.asarray(_need(doc, "reward", path), dtype=float)
    raw = _need(doc, "trans", path)
    trans = np.zeros((nS, nA, nS, nY))
    try:
        if len(raw) != nS:
            raise ModelFormatError(f"{path}: field 'trans' has {len(raw)} rows, expected nS={nS}")
        for s, row in enumerate(raw):
            if len(row) != nA:
                raise ModelFormatError(f"{path}: field 'trans[{s}]' has {len(row)} entries, expected nA={nA}")
            for a, triples in enumerate(row):
                for k, (sp, yp, prob) in enumerate(triples):
                    if not (0 <= int(sp) < nS and 0 <= int(yp) < nY):
                        raise ModelFormatError(
                            f"{path}: field 'trans[{s}][{a}][{k}]' index ({sp}, {yp}) out of range")
                    trans[s, a, int(sp), int(yp)] += float(prob)
    except (TypeError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"{path}: field 'trans' malformed: {e}") from e
    init_obs = doc.get("init_obs")
    model = TabularPomdp(
        trans=trans,
        reward=reward,
        gamma=gamma,
        rho=rho,
        init_obs=None if init_obs is None else np.asarray(init_obs, dtype=float),
        labels=doc.get("labels") or {},
        name=str(doc.get("name", Path(str(path)).stem)),
    )
    if validate:
        check_model(model)
    return model


def load_model(path, validate=True) -> TabularPomdp:
    return model_from_dict(_read_json(path), path, validate)
