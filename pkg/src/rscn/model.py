"""Reservoir network model: state recursion, linear readout, serialization.

Arrays follow a channels-by-time convention: an input sequence is a
``(K, n)`` matrix whose column ``t`` is the input vector at step ``t``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import ContractViolationError, NumericOverflowError

TANH = "tanh"
SIGMOID = "sigmoid"

BLOCK_LOWER_TRIANGULAR = "block_lower_triangular"
GENERAL = "general"

_ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    TANH: np.tanh,
    SIGMOID: expit,
}

SERIALIZATION_VERSION = 1


def activation_fn(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ContractViolationError(
            f"unknown activation {name!r}; expected one of {sorted(_ACTIVATIONS)}"
        ) from None


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ReservoirModel:
    """All parameters of one reservoir network.

    ``input_weights`` is ``(N, K)``, ``feedback`` is ``(N, N)``, ``biases``
    is ``(N,)`` and ``readout`` maps the extended state ``(x(n), u(n))`` to
    the ``L`` outputs, so it is ``(L, N + K)``.

    With ``structure_tag == "block_lower_triangular"`` the feedback matrix
    consists of a dense ``initial_block_size`` block followed by grown rows
    that are zero to the right of their own diagonal, so appending a row
    never feeds back into earlier nodes.
    """

    input_weights: np.ndarray
    feedback: np.ndarray
    biases: np.ndarray
    readout: np.ndarray
    activation: str = TANH
    structure_tag: str = GENERAL
    initial_block_size: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_weights", _frozen(self.input_weights))
        object.__setattr__(self, "feedback", _frozen(self.feedback))
        object.__setattr__(self, "biases", _frozen(self.biases))
        object.__setattr__(self, "readout", _frozen(self.readout))
        self._validate()

    def _validate(self):
        w_in, w_r, b, w_out = (
            self.input_weights,
            self.feedback,
            self.biases,
            self.readout,
        )
        if w_in.ndim != 2 or w_r.ndim != 2 or b.ndim != 1 or w_out.ndim != 2:
            raise ContractViolationError("model arrays have wrong rank")
        n, k = w_in.shape
        if w_r.shape != (n, n):
            raise ContractViolationError(
                f"feedback shape {w_r.shape} does not match {n} nodes"
            )
        if b.shape != (n,):
            raise ContractViolationError(f"biases shape {b.shape}, expected ({n},)")
        if w_out.shape[1] != n + k:
            raise ContractViolationError(
                f"readout has {w_out.shape[1]} columns, expected {n + k}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ContractViolationError(f"unknown activation {self.activation!r}")
        if self.structure_tag not in (BLOCK_LOWER_TRIANGULAR, GENERAL):
            raise ContractViolationError(
                f"unknown structure_tag {self.structure_tag!r}"
            )
        for a in (w_in, w_r, b, w_out):
            if not np.all(np.isfinite(a)):
                raise ContractViolationError("model contains non-finite entries")
        if self.structure_tag == BLOCK_LOWER_TRIANGULAR:
            n0 = self.initial_block_size
            if not 0 <= n0 <= n:
                raise ContractViolationError(
                    f"initial_block_size {n0} out of range for {n} nodes"
                )
            for i in range(n):
                j0 = max(i, n0 - 1) + 1
                if j0 < n and np.any(w_r[i, j0:] != 0.0):
                    raise ContractViolationError(
                        f"feedback row {i} has nonzeros beyond column "
                        f"{j0 - 1}, breaking the grown lower-triangular shape"
                    )

    @property
    def n_nodes(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_weights.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.readout.shape[0]

    def with_readout(self, readout: np.ndarray) -> "ReservoirModel":
        return replace(self, readout=readout)

    def with_feedback(self, feedback: np.ndarray) -> "ReservoirModel":
        return replace(self, feedback=feedback)


@dataclass(frozen=True, eq=False)
class StateSequence:
    """Reservoir states over time plus the extended (state, input) matrix.

    ``states`` is ``(N, n)``; column ``t`` of ``extended`` stacks the state
    and input columns at step ``t``, giving the ``(N + K, n)`` design matrix
    used by the readout.
    """

    states: np.ndarray
    extended: np.ndarray
    initial_state: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen(self.states))
        object.__setattr__(self, "extended", _frozen(self.extended))
        object.__setattr__(self, "initial_state", _frozen(self.initial_state))

    @property
    def n_steps(self) -> int:
        return self.states.shape[1]


def run_reservoir(
    model: ReservoirModel,
    inputs: np.ndarray,
    initial_state: np.ndarray | None = None,
) -> StateSequence:
    """Drive the reservoir over ``inputs`` (shape ``(K, n)``).

    Column ``t`` of the result is
    ``act(W_in u(t) + W_r x(t-1) + b)`` with ``x(0) = initial_state``
    (zeros by default). Deterministic: identical arguments give a
    bit-identical sequence.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] != model.n_inputs:
        raise ContractViolationError(
            f"inputs shape {inputs.shape}, expected ({model.n_inputs}, n)"
        )
    if not np.all(np.isfinite(inputs)):
        raise ContractViolationError("inputs contain non-finite values")
    n = model.n_nodes
    if initial_state is None:
        x = np.zeros(n)
    else:
        x = np.asarray(initial_state, dtype=float).copy()
        if x.shape != (n,):
            raise ContractViolationError(
                f"initial_state shape {x.shape}, expected ({n},)"
            )
    act = activation_fn(model.activation)
    n_steps = inputs.shape[1]
    drive = model.input_weights @ inputs + model.biases[:, None]
    states = np.empty((n, n_steps))
    w_r = model.feedback
    x0 = x.copy()
    for t in range(n_steps):
        x = act(drive[:, t] + w_r @ x)
        if not np.all(np.isfinite(x)):
            raise NumericOverflowError(
                f"non-finite reservoir state at step {t + 1}"
            )
        states[:, t] = x
    extended = np.vstack([states, inputs])
    return StateSequence(states=states, extended=extended, initial_state=x0)


def readout(
    model: ReservoirModel, seq: StateSequence, inputs: np.ndarray
) -> np.ndarray:
    """Model output over time: column ``t`` is ``W_out (x(t), u(t))``."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (model.n_inputs, seq.n_steps):
        raise ContractViolationError(
            f"inputs shape {inputs.shape} does not match sequence of "
            f"{seq.n_steps} steps with {model.n_inputs} channels"
        )
    if seq.extended.shape[0] != model.n_nodes + model.n_inputs:
        raise ContractViolationError(
            "state sequence does not match model dimensions"
        )
    return model.readout @ seq.extended


def model_to_dict(model: ReservoirModel) -> dict:
    return {
        "version": SERIALIZATION_VERSION,
        "n_nodes": model.n_nodes,
        "n_inputs": model.n_inputs,
        "n_outputs": model.n_outputs,
        "activation": model.activation,
        "structure_tag": model.structure_tag,
        "initial_block_size": model.initial_block_size,
        "input_weights": model.input_weights.tolist(),
        "feedback": model.feedback.tolist(),
        "biases": model.biases.tolist(),
        "readout": model.readout.tolist(),
    }


def model_from_dict(doc: dict) -> ReservoirModel:
    if doc.get("version") != SERIALIZATION_VERSION:
        raise ContractViolationError(
            f"unsupported model document version {doc.get('version')!r}"
        )
    model = ReservoirModel(
        input_weights=np.array(doc["input_weights"], dtype=float).reshape(
            doc["n_nodes"], doc["n_inputs"]
        ),
        feedback=np.array(doc["feedback"], dtype=float).reshape(
            doc["n_nodes"], doc["n_nodes"]
        ),
        biases=np.array(doc["biases"], dtype=float),
        readout=np.array(doc["readout"], dtype=float).reshape(
            doc["n_outputs"], doc["n_nodes"] + doc["n_inputs"]
        ),
        activation=doc["activation"],
        structure_tag=doc["structure_tag"],
        initial_block_size=doc["initial_block_size"],
    )
    return model


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: ReservoirModel, path: str) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model)))


def load_model(path: str) -> ReservoirModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
