"""Incremental reservoir construction under a supervisory inequality.

Growth starts from a small sparse random reservoir and repeatedly draws
pools of candidate nodes, keeping only candidates whose score certifies
that adding them cannot worsen the training residual. The feedback
matrix grows in a block-lower-triangular shape: an appended row feeds
from all earlier nodes and itself but never back into them, so the
existing state sequences stay valid and the post-washout training
residual norm is non-increasing across accepted nodes (with the default
echo-state handling).
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolationError
from .model import (
    BLOCK_LOWER_TRIANGULAR,
    ReservoirModel,
    StateSequence,
    activation_fn,
    run_reservoir,
)
from .seeding import substream
from .spectral import EIGEN, MODE_CONTRACTION, MODE_SPECTRAL, scale_feedback, spectral_radius
from .tasks import SupervisedSequence

ESP_INCREMENTAL = "incremental"
ESP_RESCALE_ACCEPTED = "rescale_accepted"
ESP_RESCALE_CANDIDATES = "rescale_candidates"
ESP_NONE = "none"
_ESP_MODES = (ESP_INCREMENTAL, ESP_RESCALE_ACCEPTED, ESP_RESCALE_CANDIDATES, ESP_NONE)

INFEASIBLE = -math.inf


@dataclass(frozen=True)
class BuildConfig:
    """Every knob of the growth loop.

    ``lambda_sequence`` is the ladder of weight scales tried for the
    random draws and ``r_sequence`` the contraction factors of the
    acceptance test; both are swept (scales outermost) until a pool
    yields an acceptable candidate.

    ``esp_mode`` selects how the echo state property is maintained while
    growing:

    * ``"incremental"`` (default): no rescaling; each candidate's
      self-weight is clamped to at most ``esp_alpha`` in magnitude so the
      grown triangular part keeps its spectral radius below one, and old
      state sequences stay valid.
    * ``"rescale_accepted"``: after each acceptance the whole feedback
      matrix is rescaled to spectral radius ``esp_alpha`` and all states
      recomputed.
    * ``"rescale_candidates"``: every candidate is scored under its own
      rescaled feedback matrix (full state recomputation per candidate;
      expensive, off by default).
    * ``"none"``: no handling at all.
    """

    n_init: int = 5
    n_max: int = 100
    n_step: int = 6
    g_max: int = 100
    lambda_sequence: tuple[float, ...] = (0.5, 1.0, 5.0, 10.0, 30.0, 50.0, 100.0)
    r_sequence: tuple[float, ...] = (0.9, 0.99, 0.999, 0.9999, 0.99999)
    epsilon: float = 1e-6
    sparsity: float = 0.03
    esp_alpha: float = 0.9
    esp_mode: str = ESP_INCREMENTAL
    washout: int = 20
    ridge: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.n_step < self.n_max:
            raise ContractViolationError("n_step must be smaller than n_max")
        if self.n_init < 1 or self.g_max < 0:
            raise ContractViolationError("n_init must be positive, g_max nonnegative")
        if not all(r_i > 0 and r_i < 1 for r_i in self.r_sequence):
            raise ContractViolationError("every r must lie in (0, 1)")
        if not all(lam > 0 for lam in self.lambda_sequence):
            raise ContractViolationError("weight scales must be positive")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ContractViolationError("sparsity must lie in [0, 1]")
        if not 0.0 < self.esp_alpha < 1.0:
            raise ContractViolationError("esp_alpha must lie in (0, 1)")
        if self.esp_mode not in _ESP_MODES:
            raise ContractViolationError(f"unknown esp_mode {self.esp_mode!r}")
        if self.ridge < 0:
            raise ContractViolationError("ridge must be nonnegative")


@dataclass(frozen=True, eq=False)
class CandidateNode:
    """One randomly drawn node, its state sequence and scores.

    ``feedback_row`` has one entry per node after growth (couplings to
    the existing nodes followed by the self-weight). ``state_seq`` runs
    over the full training inputs. Under candidate rescaling the whole
    scaled feedback matrix and the recomputed full state matrix ride
    along, since old states change in that mode.
    """

    input_row: np.ndarray
    feedback_row: np.ndarray
    bias: float
    state_seq: np.ndarray
    score: float
    per_output_scores: np.ndarray
    scaled_feedback: np.ndarray | None = None
    full_states: np.ndarray | None = None


@dataclass
class CandidatePool:
    """Outcome of one configuration attempt at fixed (scale, r)."""

    best: CandidateNode | None
    n_accepted: int
    n_drawn: int


@dataclass
class BuildHistory:
    """Per-size records of one growth run plus terminal flags."""

    sizes: list[int] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    rs: list[float] = field(default_factory=list)
    xi_best: list[float] = field(default_factory=list)
    train_norms: list[float] = field(default_factory=list)
    val_norms: list[float] = field(default_factory=list)
    pool_accepted: list[int] = field(default_factory=list)
    pool_total: list[int] = field(default_factory=list)
    stalled: bool = False
    early_stopped: bool = False
    rolled_back_to: int | None = None
    final_size: int = 0

    def record(self, size, lam, r, xi, train_norm, val_norm, accepted, total):
        self.sizes.append(size)
        self.lambdas.append(lam)
        self.rs.append(r)
        self.xi_best.append(xi)
        self.train_norms.append(train_norm)
        self.val_norms.append(val_norm)
        self.pool_accepted.append(accepted)
        self.pool_total.append(total)

    def to_csv(self) -> str:
        lines = ["size,lambda,r,xi_best,train_norm,val_norm,pool_accepted,pool_total"]
        for i in range(len(self.sizes)):
            lines.append(
                f"{self.sizes[i]},{self.lambdas[i]!r},{self.rs[i]!r},"
                f"{self.xi_best[i]!r},{self.train_norms[i]!r},"
                f"{self.val_norms[i]!r},{self.pool_accepted[i]},{self.pool_total[i]}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class BuildState:
    """Mutable working state of one growth run (single-owner)."""

    cfg: BuildConfig
    train: SupervisedSequence
    val: SupervisedSequence
    model: ReservoirModel
    train_seq: StateSequence
    val_seq: StateSequence
    residual: np.ndarray
    residual_norm_history: list[float]
    validation_norm_history: list[float]
    mu_current: float
    snapshots: deque
    history: BuildHistory


def solve_output_weights(
    extended: np.ndarray, targets: np.ndarray, ridge: float = 0.0
) -> np.ndarray:
    """Least-squares readout: argmin over W of ||targets - W @ extended||.

    With ``ridge > 0``, ``ridge * I`` is added to the Gram matrix. A
    rank-deficient plain solve returns the minimum-norm solution.
    """
    x = np.asarray(extended, dtype=float)
    t = np.asarray(targets, dtype=float)
    if x.ndim != 2 or t.ndim != 2 or x.shape[1] != t.shape[1]:
        raise ContractViolationError(
            f"incompatible shapes {x.shape} and {t.shape}"
        )
    if x.shape[1] < 1:
        raise ContractViolationError("at least one sample is required")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
        raise ContractViolationError("non-finite values in the solve")
    if ridge > 0.0:
        gram = x @ x.T + ridge * np.eye(x.shape[0])
        return np.linalg.solve(gram, x @ t.T).T
    w, *_ = np.linalg.lstsq(x.T, t.T, rcond=None)
    return w.T


def score_candidate(
    residual: np.ndarray, g: np.ndarray, r: float, mu: float
) -> tuple[float, np.ndarray]:
    """Supervisory score of one candidate state sequence.

    Per output ``q`` the score is ``<e_q, g>^2 / <g, g>`` minus
    ``(1 - r - mu) * ||e_q||^2``; the total is their sum. A candidate
    whose state sequence has zero energy is infeasible and scores -inf.
    """
    e = np.atleast_2d(np.asarray(residual, dtype=float))
    g = np.asarray(g, dtype=float).ravel()
    if e.shape[1] != g.size:
        raise ContractViolationError(
            f"residual covers {e.shape[1]} steps but g covers {g.size}"
        )
    gg = float(g @ g)
    if gg == 0.0:
        per = np.full(e.shape[0], INFEASIBLE)
        return INFEASIBLE, per
    coef = 1.0 - r - mu
    per = (e @ g) ** 2 / gg - coef * np.einsum("qt,qt->q", e, e)
    return float(per.sum()), per


def _shifted_states(states: np.ndarray, initial_state: np.ndarray) -> np.ndarray:
    """Matrix whose column ``t`` is the state at ``t - 1``."""
    return np.column_stack([initial_state, states[:, :-1]])


def _node_states(
    prev_states: np.ndarray,
    inputs: np.ndarray,
    input_row: np.ndarray,
    feedback_row: np.ndarray,
    bias: float,
    act: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """State sequence of one appended node, starting from zero."""
    drive = input_row @ inputs + bias
    if prev_states.shape[0]:
        drive = drive + feedback_row[:-1] @ prev_states
    self_w = feedback_row[-1]
    g = np.empty(inputs.shape[1])
    gp = 0.0
    for t in range(g.size):
        gp = float(act(drive[t] + self_w * gp))
        g[t] = gp
    return g


def candidate_states(
    state: BuildState, cand: CandidateNode, inputs: np.ndarray
) -> np.ndarray:
    """New-node state sequence over the run's training inputs.

    Valid because an appended row leaves the existing rows untouched:
    the old states are read from the current training sequence rather
    than recomputed.
    """
    inputs = np.asarray(inputs, dtype=float)
    n = state.model.n_nodes
    if cand.feedback_row.shape != (n + 1,):
        raise ContractViolationError(
            f"feedback_row has length {cand.feedback_row.size}, expected {n + 1}"
        )
    if inputs.shape != state.train.inputs.shape:
        raise ContractViolationError(
            "inputs must be the training inputs this build state was made from"
        )
    prev = _shifted_states(state.train_seq.states, state.train_seq.initial_state)
    act = activation_fn(state.model.activation)
    return _node_states(prev, inputs, cand.input_row, cand.feedback_row, cand.bias, act)


def _pool_node_states(
    prev_states: np.ndarray,
    inputs: np.ndarray,
    w_in_pool: np.ndarray,
    w_r_pool: np.ndarray,
    b_pool: np.ndarray,
    act: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Vectorised :func:`_node_states` across a candidate pool."""
    drive = w_in_pool @ inputs + b_pool[:, None]
    if prev_states.shape[0]:
        drive += w_r_pool[:, :-1] @ prev_states
    self_w = w_r_pool[:, -1]
    n_pool, n_steps = drive.shape
    g = np.empty((n_pool, n_steps))
    gp = np.zeros(n_pool)
    for t in range(n_steps):
        gp = act(drive[:, t] + self_w * gp)
        g[:, t] = gp
    return g


def _pool_scores(
    residual: np.ndarray, g_eff: np.ndarray, r: float, mu: float
) -> tuple[np.ndarray, np.ndarray]:
    """Scores (n_pool,) and per-output scores (L, n_pool) for a pool."""
    gg = np.einsum("gt,gt->g", g_eff, g_eff)
    eg = residual @ g_eff.T
    ee = np.einsum("qt,qt->q", residual, residual)
    coef = 1.0 - r - mu
    feasible = gg > 0.0
    safe_gg = np.where(feasible, gg, 1.0)
    per = eg**2 / safe_gg - coef * ee[:, None]
    per[:, ~feasible] = INFEASIBLE
    scores = np.where(feasible, per.sum(axis=0), INFEASIBLE)
    return scores, per


def _pool_states_rescaled(
    state: BuildState,
    w_in_pool: np.ndarray,
    w_r_pool: np.ndarray,
    b_pool: np.ndarray,
    scales: np.ndarray,
    inputs: np.ndarray,
) -> np.ndarray:
    """New-node states when every candidate rescales the grown matrix.

    The rescaling touches the existing rows too, so each candidate's full
    state trajectory is evolved; only the appended node's sequence is
    returned (old rows are recomputed again for the accepted candidate).
    """
    model = state.model
    act = activation_fn(model.activation)
    n, n_steps = model.n_nodes, inputs.shape[1]
    n_pool = b_pool.size
    drive_old = model.input_weights @ inputs + model.biases[:, None]
    drive_new = w_in_pool @ inputs + b_pool[:, None]
    w_r_old = model.feedback
    x_old = np.zeros((n_pool, n))
    x_new = np.zeros(n_pool)
    g = np.empty((n_pool, n_steps))
    for t in range(n_steps):
        fb_old = scales[:, None] * (x_old @ w_r_old.T)
        fb_new = scales * (
            np.einsum("pj,pj->p", w_r_pool[:, :n], x_old) + w_r_pool[:, n] * x_new
        )
        x_old = act(drive_old[:, t][None, :] + fb_old)
        x_new = act(drive_new[:, t] + fb_new)
        g[:, t] = x_new
    return g


def configure_node(
    state: BuildState,
    inputs: np.ndarray,
    lam: float,
    r: float,
    g_max: int,
    rng: np.random.Generator,
) -> CandidatePool:
    """Draw a pool of candidates and return the best acceptable one.

    Draw order is fixed (input rows, then feedback rows, then biases) so
    a seeded generator reproduces the pool exactly. A candidate passes
    when its worst per-output score is nonnegative; among passers the
    largest total score wins, first drawn winning ties. An empty pool is
    a valid outcome telling the caller to advance r or the weight scale.
    """
    cfg = state.cfg
    n = state.model.n_nodes
    k = state.model.n_inputs
    if g_max <= 0:
        return CandidatePool(None, 0, 0)
    w_in_pool = rng.uniform(-lam, lam, size=(g_max, k))
    w_r_pool = rng.uniform(-lam, lam, size=(g_max, n + 1))
    b_pool = rng.uniform(-lam, lam, size=g_max)
    mu = (1.0 - r) / (n + 1)
    state.mu_current = mu

    scaled_pool = None
    scales = None
    if cfg.esp_mode == ESP_INCREMENTAL:
        np.clip(w_r_pool[:, -1], -cfg.esp_alpha, cfg.esp_alpha, out=w_r_pool[:, -1])
        act = activation_fn(state.model.activation)
        prev = _shifted_states(state.train_seq.states, state.train_seq.initial_state)
        g = _pool_node_states(prev, inputs, w_in_pool, w_r_pool, b_pool, act)
    elif cfg.esp_mode == ESP_RESCALE_CANDIDATES:
        rho_base = spectral_radius(
            state.model.feedback, BLOCK_LOWER_TRIANGULAR,
            state.model.initial_block_size, estimator=EIGEN,
        )
        rho_pool = np.maximum(rho_base, np.abs(w_r_pool[:, -1]))
        scales = np.where(rho_pool > 0.0, cfg.esp_alpha / np.where(rho_pool > 0, rho_pool, 1.0), 1.0)
        g = _pool_states_rescaled(state, w_in_pool, w_r_pool, b_pool, scales, inputs)
        scaled_pool = True
    else:
        act = activation_fn(state.model.activation)
        prev = _shifted_states(state.train_seq.states, state.train_seq.initial_state)
        g = _pool_node_states(prev, inputs, w_in_pool, w_r_pool, b_pool, act)

    washout = state.train.washout
    scores, per = _pool_scores(state.residual, g[:, washout:], r, mu)
    ok = np.all(per >= 0.0, axis=0)
    n_accepted = int(ok.sum())
    if n_accepted == 0:
        return CandidatePool(None, 0, g_max)
    ok_idx = np.nonzero(ok)[0]
    best = ok_idx[int(np.argmax(scores[ok_idx]))]
    scaled_feedback = None
    if scaled_pool:
        grown = _grow_feedback(state.model.feedback, w_r_pool[best])
        scaled_feedback = grown * scales[best]
    cand = CandidateNode(
        input_row=w_in_pool[best].copy(),
        feedback_row=w_r_pool[best].copy(),
        bias=float(b_pool[best]),
        state_seq=g[best].copy(),
        score=float(scores[best]),
        per_output_scores=per[:, best].copy(),
        scaled_feedback=scaled_feedback,
    )
    return CandidatePool(cand, n_accepted, g_max)


def _grow_feedback(w_r: np.ndarray, new_row: np.ndarray) -> np.ndarray:
    n = w_r.shape[0]
    grown = np.zeros((n + 1, n + 1))
    grown[:n, :n] = w_r
    grown[n, :] = new_row
    return grown


def _solve_and_score(state: BuildState) -> None:
    """Re-solve the readout and refresh residuals and norm histories."""
    cfg = state.cfg
    w_t = state.train.washout
    w_v = state.val.washout
    x_eff = state.train_seq.extended[:, w_t:]
    t_eff = state.train.targets[:, w_t:]
    w_out = solve_output_weights(x_eff, t_eff, cfg.ridge)
    state.model = state.model.with_readout(w_out)
    state.residual = t_eff - w_out @ x_eff
    state.residual_norm_history.append(float(np.linalg.norm(state.residual)))
    val_resid = state.val.targets[:, w_v:] - w_out @ state.val_seq.extended[:, w_v:]
    state.validation_norm_history.append(float(np.linalg.norm(val_resid)))


def init_network(
    train: SupervisedSequence,
    val: SupervisedSequence,
    cfg: BuildConfig,
    rng: np.random.Generator,
) -> BuildState:
    """Random initial reservoir of size ``n_init`` with a solved readout.

    Input weights and biases are dense uniform on the first weight
    scale's interval; feedback entries are independently nonzero with
    probability ``sparsity``. The initial block is rescaled according to
    ``esp_mode`` before any state is computed.
    """
    if train.n_inputs != val.n_inputs or train.n_outputs != val.n_outputs:
        raise ContractViolationError("train and val must share channel counts")
    lam0 = cfg.lambda_sequence[0]
    n0, k, ell = cfg.n_init, train.n_inputs, train.n_outputs
    w_in = rng.uniform(-lam0, lam0, size=(n0, k))
    b = rng.uniform(-lam0, lam0, size=n0)
    mask = rng.random(size=(n0, n0)) < cfg.sparsity
    vals = rng.uniform(-lam0, lam0, size=(n0, n0))
    w_r = np.where(mask, vals, 0.0)
    model = ReservoirModel(
        input_weights=w_in,
        feedback=w_r,
        biases=b,
        readout=np.zeros((ell, n0 + k)),
        structure_tag=BLOCK_LOWER_TRIANGULAR,
        initial_block_size=n0,
    )
    with warnings.catch_warnings():
        # an all-zero sparse draw is routine at 3% density; the no-op is fine
        warnings.simplefilter("ignore")
        if cfg.esp_mode == ESP_INCREMENTAL:
            model = scale_feedback(model, cfg.esp_alpha, MODE_CONTRACTION).model
        elif cfg.esp_mode in (ESP_RESCALE_ACCEPTED, ESP_RESCALE_CANDIDATES):
            model = scale_feedback(model, cfg.esp_alpha, MODE_SPECTRAL).model
    train_seq = run_reservoir(model, train.inputs)
    val_seq = run_reservoir(model, val.inputs)
    state = BuildState(
        cfg=cfg,
        train=train,
        val=val,
        model=model,
        train_seq=train_seq,
        val_seq=val_seq,
        residual=np.zeros((ell, train.n_steps - train.washout)),
        residual_norm_history=[],
        validation_norm_history=[],
        mu_current=0.0,
        snapshots=deque(maxlen=cfg.n_step + 1),
        history=BuildHistory(),
    )
    _solve_and_score(state)
    state.snapshots.append(state.model)
    state.history.record(
        n0, math.nan, math.nan, math.nan,
        state.residual_norm_history[-1], state.validation_norm_history[-1], 0, 0,
    )
    state.history.final_size = n0
    return state


def _extend_sequence(
    seq: StateSequence, inputs: np.ndarray, node_states: np.ndarray
) -> StateSequence:
    states = np.vstack([seq.states, node_states])
    return StateSequence(
        states=states,
        extended=np.vstack([states, inputs]),
        initial_state=np.append(seq.initial_state, 0.0),
    )


def _accept_node(state: BuildState, cand: CandidateNode) -> None:
    cfg = state.cfg
    model = state.model
    act = activation_fn(model.activation)
    w_in = np.vstack([model.input_weights, cand.input_row])
    b = np.append(model.biases, cand.bias)
    ell = model.n_outputs
    k = model.n_inputs
    n_new = model.n_nodes + 1
    readout0 = np.zeros((ell, n_new + k))

    if cfg.esp_mode == ESP_RESCALE_CANDIDATES:
        grown = ReservoirModel(
            input_weights=w_in, feedback=cand.scaled_feedback, biases=b,
            readout=readout0, structure_tag=BLOCK_LOWER_TRIANGULAR,
            initial_block_size=model.initial_block_size,
        )
        state.model = grown
        state.train_seq = run_reservoir(grown, state.train.inputs)
        state.val_seq = run_reservoir(grown, state.val.inputs)
    elif cfg.esp_mode == ESP_RESCALE_ACCEPTED:
        grown = ReservoirModel(
            input_weights=w_in,
            feedback=_grow_feedback(model.feedback, cand.feedback_row),
            biases=b, readout=readout0,
            structure_tag=BLOCK_LOWER_TRIANGULAR,
            initial_block_size=model.initial_block_size,
        )
        grown = scale_feedback(grown, cfg.esp_alpha, MODE_SPECTRAL).model
        state.model = grown
        state.train_seq = run_reservoir(grown, state.train.inputs)
        state.val_seq = run_reservoir(grown, state.val.inputs)
    else:
        grown = ReservoirModel(
            input_weights=w_in,
            feedback=_grow_feedback(model.feedback, cand.feedback_row),
            biases=b, readout=readout0,
            structure_tag=BLOCK_LOWER_TRIANGULAR,
            initial_block_size=model.initial_block_size,
        )
        state.model = grown
        prev_val = _shifted_states(state.val_seq.states, state.val_seq.initial_state)
        val_node = _node_states(
            prev_val, state.val.inputs, cand.input_row, cand.feedback_row,
            cand.bias, act,
        )
        state.train_seq = _extend_sequence(state.train_seq, state.train.inputs, cand.state_seq)
        state.val_seq = _extend_sequence(state.val_seq, state.val.inputs, val_node)
    _solve_and_score(state)
    state.snapshots.append(state.model)


def early_stop_triggered(val_norms: list[float], n_step: int) -> bool:
    """True when the last ``n_step + 1`` validation norms never improve."""
    if len(val_norms) < n_step + 1:
        return False
    tail = val_norms[-(n_step + 1):]
    return all(tail[i] <= tail[i + 1] for i in range(n_step))


def build_rscn(
    train: SupervisedSequence,
    val: SupervisedSequence,
    cfg: BuildConfig,
    rng: np.random.Generator | None = None,
) -> tuple[ReservoirModel, BuildHistory]:
    """Grow a reservoir until tolerance, size cap, or validation stop.

    Candidate search sweeps the weight-scale ladder outermost and the
    contraction factors within it, moving on whenever a pool comes back
    empty. When the validation residual has not improved over the last
    ``n_step + 1`` sizes, growth rolls back ``n_step`` nodes and returns.
    Exhausting every (scale, r) pair flags the history as stalled and
    returns the current model rather than raising.

    Passing ``rng`` drives initialisation and candidate draws from one
    stream; by default the two draw from named substreams of
    ``cfg.seed``, so a config fully determines the result.
    """
    if train.n_inputs != val.n_inputs or train.n_outputs != val.n_outputs:
        raise ContractViolationError("train and val must share channel counts")
    if rng is None:
        rng_init = substream(cfg.seed, "init")
        rng_cand = substream(cfg.seed, "candidates")
    else:
        rng_init = rng_cand = rng
    state = init_network(train, val, cfg, rng_init)
    history = state.history
    while True:
        n = state.model.n_nodes
        if state.residual_norm_history[-1] <= cfg.epsilon or n >= cfg.n_max:
            break
        if early_stop_triggered(state.validation_norm_history, cfg.n_step):
            model = state.snapshots[0]
            history.early_stopped = True
            history.rolled_back_to = model.n_nodes
            history.final_size = model.n_nodes
            return model, history
        chosen = None
        pool_total = 0
        for lam in cfg.lambda_sequence:
            for r in cfg.r_sequence:
                pool = configure_node(state, train.inputs, lam, r, cfg.g_max, rng_cand)
                pool_total += pool.n_drawn
                if pool.best is not None:
                    chosen = (pool.best, lam, r, pool.n_accepted)
                    break
            if chosen is not None:
                break
        if chosen is None:
            history.stalled = True
            break
        cand, lam, r, n_accepted = chosen
        _accept_node(state, cand)
        history.record(
            state.model.n_nodes, lam, r, cand.score,
            state.residual_norm_history[-1], state.validation_norm_history[-1],
            n_accepted, pool_total,
        )
    history.final_size = state.model.n_nodes
    return state.model, history
