"""Fixed-size reservoir baselines: random echo state network, ring reservoir."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .build import solve_output_weights
from .errors import ContractViolationError
from .model import GENERAL, ReservoirModel, run_reservoir
from .seeding import substream
from .spectral import MODE_CONTRACTION, scale_feedback
from .tasks import SupervisedSequence

TOPOLOGY_ESN = "esn_random"
TOPOLOGY_SCR = "scr_ring"


@dataclass(frozen=True)
class BaselineConfig:
    """Knobs of the fixed-topology baselines.

    ``weight_scale`` bounds the uniform input weights and biases;
    ``esp_alpha`` is the contraction level of the feedback matrix;
    ``ring_weight`` is the single coupling of the ring topology.
    """

    n_nodes: int = 100
    weight_scale: float = 1.0
    sparsity: float = 0.03
    esp_alpha: float = 0.9
    topology: str = TOPOLOGY_ESN
    ring_weight: float = 0.9
    ridge: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ContractViolationError("n_nodes must be positive")
        if not 0.0 < self.esp_alpha < 1.0:
            raise ContractViolationError("esp_alpha must lie in (0, 1)")
        if self.topology not in (TOPOLOGY_ESN, TOPOLOGY_SCR):
            raise ContractViolationError(f"unknown topology {self.topology!r}")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ContractViolationError("sparsity must lie in [0, 1]")
        if self.ridge < 0.0:
            raise ContractViolationError("ridge must be nonnegative")


def _fit_readout(
    model: ReservoirModel, train: SupervisedSequence, ridge: float
) -> ReservoirModel:
    seq = run_reservoir(model, train.inputs)
    w = train.washout
    w_out = solve_output_weights(
        seq.extended[:, w:], train.targets[:, w:], ridge
    )
    return model.with_readout(w_out)


def build_esn(
    cfg: BaselineConfig,
    train: SupervisedSequence,
    ridge: float | None = None,
    rng: np.random.Generator | None = None,
) -> ReservoirModel:
    """Random sparse reservoir contracted to ``esp_alpha``, readout by
    least squares on the post-washout extended states."""
    if cfg.topology != TOPOLOGY_ESN:
        raise ContractViolationError("build_esn needs topology 'esn_random'")
    ridge = cfg.ridge if ridge is None else ridge
    rng = rng if rng is not None else substream(cfg.seed, "init")
    n, k, ell = cfg.n_nodes, train.n_inputs, train.n_outputs
    lam = cfg.weight_scale
    w_in = rng.uniform(-lam, lam, size=(n, k))
    b = rng.uniform(-lam, lam, size=n)
    mask = rng.random(size=(n, n)) < cfg.sparsity
    vals = rng.uniform(-lam, lam, size=(n, n))
    model = ReservoirModel(
        input_weights=w_in,
        feedback=np.where(mask, vals, 0.0),
        biases=b,
        readout=np.zeros((ell, n + k)),
        structure_tag=GENERAL,
    )
    model = scale_feedback(model, cfg.esp_alpha, MODE_CONTRACTION).model
    return _fit_readout(model, train, ridge)


def build_scr(
    cfg: BaselineConfig,
    train: SupervisedSequence,
    ridge: float | None = None,
    rng: np.random.Generator | None = None,
) -> ReservoirModel:
    """Simple cycle reservoir: one directed ring with a single weight."""
    if cfg.topology != TOPOLOGY_SCR:
        raise ContractViolationError("build_scr needs topology 'scr_ring'")
    ridge = cfg.ridge if ridge is None else ridge
    rng = rng if rng is not None else substream(cfg.seed, "init")
    n, k, ell = cfg.n_nodes, train.n_inputs, train.n_outputs
    lam = cfg.weight_scale
    w_in = rng.uniform(-lam, lam, size=(n, k))
    b = rng.uniform(-lam, lam, size=n)
    w_r = np.zeros((n, n))
    w_r[np.arange(n), (np.arange(n) - 1) % n] = cfg.ring_weight
    model = ReservoirModel(
        input_weights=w_in,
        feedback=w_r,
        biases=b,
        readout=np.zeros((ell, n + k)),
        structure_tag=GENERAL,
    )
    return _fit_readout(model, train, ridge)


def build_baseline(
    cfg: BaselineConfig,
    train: SupervisedSequence,
    ridge: float | None = None,
    rng: np.random.Generator | None = None,
) -> ReservoirModel:
    if cfg.topology == TOPOLOGY_ESN:
        return build_esn(cfg, train, ridge, rng)
    return build_scr(cfg, train, ridge, rng)
