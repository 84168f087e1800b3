"""Projection-based online updates of the readout weights.

The reservoir stays frozen; each arriving sample moves the readout the
minimal distance needed to (partially) explain it. Three rules are
provided: the damped basic projection, a decreasing-gain variant whose
step size shrinks with the accumulated feature energy (converging to
the generating weights under persistent excitation), and a dead-zone
variant that freezes the weights whenever the error is small enough to
be attributable to bounded noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractViolationError
from .model import ReservoirModel, run_reservoir
from .tasks import SupervisedSequence

MODE_BASIC = "basic"
MODE_DECREASING = "decreasing_gain"
MODE_DEAD_ZONE = "dead_zone"
_MODES = (MODE_BASIC, MODE_DECREASING, MODE_DEAD_ZONE)


@dataclass(frozen=True)
class OnlineConfig:
    """Update-rule selection and its constants.

    ``a`` in (0, 1] damps the basic step and ``c > 0`` guards its
    denominator. ``phi`` bounds the noise for the dead zone, either as a
    constant or as a per-step series.
    """

    mode: str = MODE_BASIC
    a: float = 1.0
    c: float = 1.0
    phi: float | Sequence[float] | np.ndarray = 0.0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ContractViolationError(f"unknown online mode {self.mode!r}")
        if self.mode == MODE_BASIC and not (0.0 < self.a <= 1.0 and self.c > 0.0):
            raise ContractViolationError("basic mode needs 0 < a <= 1 and c > 0")
        phi = np.asarray(self.phi, dtype=float)
        if np.any(phi < 0.0):
            raise ContractViolationError("phi must be nonnegative")

    def phi_at(self, step: int) -> float:
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim == 0:
            return float(phi)
        if step - 1 >= phi.size:
            raise ContractViolationError(
                f"phi series has {phi.size} entries, needed step {step}"
            )
        return float(phi[step - 1])


@dataclass
class StepDiagnostics:
    """Per-step record: errors before/after the update, gate, weight gap."""

    step: int
    prior_error: np.ndarray
    posterior_error: np.ndarray
    eta: float
    weight_gap: float | None


@dataclass
class OnlineState:
    """Current readout and accumulated quantities of one online run.

    Single-owner and mutated sequentially by the step functions; the
    diagnostics list grows by one record per step.
    """

    readout: np.ndarray
    accumulated_gain: float = 0.0
    step: int = 0
    w_ref: np.ndarray | None = None
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    def _log(self, prior: np.ndarray, posterior: np.ndarray, eta: float) -> None:
        gap = None
        if self.w_ref is not None:
            gap = float(np.linalg.norm(self.readout - self.w_ref))
        self.diagnostics.append(
            StepDiagnostics(
                step=self.step,
                prior_error=prior,
                posterior_error=posterior,
                eta=eta,
                weight_gap=gap,
            )
        )

    def weight_gap_series(self) -> np.ndarray:
        return np.array([
            d.weight_gap if d.weight_gap is not None else np.nan
            for d in self.diagnostics
        ])


def _check_sample(state: OnlineState, g: np.ndarray, y: np.ndarray):
    g = np.asarray(g, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if g.shape != (state.readout.shape[1],):
        raise ContractViolationError(
            f"feature vector has length {g.size}, expected {state.readout.shape[1]}"
        )
    if y.shape != (state.readout.shape[0],):
        raise ContractViolationError(
            f"target has length {y.size}, expected {state.readout.shape[0]}"
        )
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(y))):
        raise ContractViolationError("non-finite online sample")
    return g, y


def project_step(
    state: OnlineState, g: np.ndarray, y: np.ndarray, a: float, c: float
) -> OnlineState:
    """Damped projection: ``W += a e g^T / (c + g^T g)`` with prior error e."""
    g, y = _check_sample(state, g, y)
    prior = y - state.readout @ g
    state.readout = state.readout + np.outer(a * prior, g) / (c + g @ g)
    state.step += 1
    state._log(prior, y - state.readout @ g, eta=a)
    return state


def project_step_decreasing(
    state: OnlineState, g: np.ndarray, y: np.ndarray
) -> OnlineState:
    """Decreasing-gain projection dividing by the accumulated feature energy."""
    g, y = _check_sample(state, g, y)
    state.accumulated_gain += float(g @ g)
    prior = y - state.readout @ g
    if state.accumulated_gain > 0.0:
        state.readout = state.readout + np.outer(prior, g) / state.accumulated_gain
        eta = 1.0
    else:
        eta = 0.0
    state.step += 1
    state._log(prior, y - state.readout @ g, eta=eta)
    return state


def project_step_deadzone(
    state: OnlineState, g: np.ndarray, y: np.ndarray, phi_n: float
) -> OnlineState:
    """Gated projection: update only when some prior error exceeds ``2 phi``.

    The gate reads the error computable before the update (the target
    minus the previous weights' prediction); once open, the step is the
    basic projection with ``a = 1`` and ``c = 1``.
    """
    if phi_n < 0:
        raise ContractViolationError("phi must be nonnegative")
    g, y = _check_sample(state, g, y)
    prior = y - state.readout @ g
    if np.any(np.abs(prior) > 2.0 * phi_n):
        state.readout = state.readout + np.outer(prior, g) / (1.0 + g @ g)
        eta = 1.0
    else:
        eta = 0.0
    state.step += 1
    state._log(prior, y - state.readout @ g, eta=eta)
    return state


def online_run(
    model: ReservoirModel,
    stream: SupervisedSequence,
    cfg: OnlineConfig,
    w_ref: np.ndarray | None = None,
    initial_state: np.ndarray | None = None,
) -> tuple[np.ndarray, OnlineState]:
    """Run the frozen reservoir over a stream, adapting only the readout.

    The first prediction uses the model's stored readout before any
    update; from the second step on, each revealed target updates the
    weights first and the step's prediction uses the updated weights.
    Returns all predictions ``(L, n)`` and the state with per-step
    diagnostics (including the gap to ``w_ref`` when supplied).
    """
    if stream.n_inputs != model.n_inputs:
        raise ContractViolationError(
            f"stream has {stream.n_inputs} input channels, model expects {model.n_inputs}"
        )
    if stream.n_outputs != model.n_outputs:
        raise ContractViolationError(
            f"stream has {stream.n_outputs} output channels, model expects {model.n_outputs}"
        )
    if w_ref is not None:
        w_ref = np.asarray(w_ref, dtype=float)
        if w_ref.shape != model.readout.shape:
            raise ContractViolationError("w_ref shape does not match the readout")
    seq = run_reservoir(model, stream.inputs, initial_state)
    # one contiguous vector per step, so every product sees identical bytes
    features = np.ascontiguousarray(seq.extended.T)
    n_steps = stream.n_steps
    state = OnlineState(readout=model.readout.copy(), w_ref=w_ref)
    preds = np.empty((model.n_outputs, n_steps))

    g1 = features[0]
    y1 = stream.targets[:, 0]
    preds[:, 0] = state.readout @ g1
    e1 = y1 - preds[:, 0]
    state.step = 1
    state._log(e1, e1, eta=0.0)

    for t in range(1, n_steps):
        g = features[t]
        y = stream.targets[:, t]
        if cfg.mode == MODE_BASIC:
            project_step(state, g, y, cfg.a, cfg.c)
        elif cfg.mode == MODE_DECREASING:
            project_step_decreasing(state, g, y)
        else:
            project_step_deadzone(state, g, y, cfg.phi_at(t + 1))
        preds[:, t] = state.readout @ g
    return preds, state


def diagnostics_csv(
    stream: SupervisedSequence, preds: np.ndarray, state: OnlineState
) -> str:
    """Plot-ready per-step export of one online run."""
    ell = stream.n_outputs
    header = ["n"]
    header += [f"target_{q + 1}" for q in range(ell)]
    header += [f"prediction_{q + 1}" for q in range(ell)]
    header += ["prior_err_norm", "posterior_err_norm", "eta", "weight_gap"]
    lines = [",".join(header)]
    for t, d in enumerate(state.diagnostics):
        cells = [str(t + 1)]
        cells += [repr(float(v)) for v in stream.targets[:, t]]
        cells += [repr(float(v)) for v in preds[:, t]]
        cells.append(repr(float(np.linalg.norm(d.prior_error))))
        cells.append(repr(float(np.linalg.norm(d.posterior_error))))
        cells.append(repr(float(d.eta)))
        cells.append("" if d.weight_gap is None else repr(float(d.weight_gap)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
