"""Offboard attack detector: windowed lifting with a parity-space residual.

Measurements from different sensors arrive at different rates and stamps.
Over a sliding window of base steps they are stacked against powers of the
plant transition matrix, compensated for the known commanded inputs, and
whitened with the exact stacked noise covariance (including process noise
accumulated between stamps).  Projecting onto the left null space of the
stacked observation operator cancels the unknown window-start state and
leaves a residual whose energy is chi-squared under nominal conditions and
inflated when GNSS and camera measurements disagree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import chi2_threshold
from .plant import DynamicsModel

RANK_TOL = 1e-10


@dataclass(frozen=True)
class WindowEntry:
    step: int                 # base step within the window, 0 <= step < N
    H: np.ndarray             # (m_i, n)
    R: np.ndarray             # (m_i, m_i)
    z: np.ndarray             # (m_i,)
    sensor_id: int
    seq: int = 0


@dataclass(frozen=True)
class LiftWindow:
    n_steps: int              # window length N in base steps
    t0: float                 # window start time, s
    entries: tuple[WindowEntry, ...]
    inputs: np.ndarray        # (>= N-1, n_u) commanded inputs u_0..

    def __post_init__(self):
        entries = tuple(sorted(self.entries,
                               key=lambda e: (e.step, e.sensor_id, e.seq)))
        for e in entries:
            if not 0 <= e.step < self.n_steps:
                raise ValueError(f"entry step {e.step} outside window")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class LiftedSystem:
    O: np.ndarray             # (sum m_i, n) stacked observation operator
    z_tilde: np.ndarray       # (sum m_i,) input-compensated stacked measurement
    Sigma: np.ndarray         # (sum m_i, sum m_i) exact stacked noise covariance
    dof: int                  # sum m_i - rank(O)


class LiftTables:
    """Per-model precomputation reused across windows: transition powers and
    accumulated process-noise covariances up to a maximum step count."""

    def __init__(self, model: DynamicsModel, max_steps: int):
        A, Q = model.A, model.Q
        n = A.shape[0]
        self.powers = [np.eye(n)]
        self.acc_q = [np.zeros((n, n))]
        for _ in range(max_steps):
            self.powers.append(A @ self.powers[-1])
            self.acc_q.append(A @ self.acc_q[-1] @ A.T + Q)

    def extend_to(self, max_steps: int, model: DynamicsModel) -> None:
        while len(self.powers) <= max_steps:
            self.powers.append(model.A @ self.powers[-1])
            self.acc_q.append(model.A @ self.acc_q[-1] @ model.A.T + model.Q)


def _geometry_key(entries) -> tuple:
    return tuple((e.step, e.H.tobytes()) for e in entries)


def _sigma_proc(entries, tables: LiftTables) -> np.ndarray:
    """Process-noise part of the stacked covariance (no measurement noise)."""
    sizes = [e.H.shape[0] for e in entries]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    powers, acc_q = tables.powers, tables.acc_q
    Sigma = np.zeros((total, total))
    for i, ei in enumerate(entries):
        for j, ej in enumerate(entries):
            if j < i:
                continue
            m = min(ei.step, ej.step)
            cross = (ei.H @ powers[ei.step - m] @ acc_q[m]
                     @ powers[ej.step - m].T @ ej.H.T)
            Sigma[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = cross
            if j > i:
                Sigma[offsets[j]:offsets[j + 1],
                      offsets[i]:offsets[i + 1]] = cross.T
    return 0.5 * (Sigma + Sigma.T)


def build_lifted_system(w: LiftWindow, model: DynamicsModel,
                        tables: LiftTables | None = None,
                        proc_cache: dict | None = None) -> LiftedSystem:
    """Stack window entries into one batch linear model in the start state.

    For an entry at window step k: its row block is H A^k, its measurement is
    compensated by the forced response sum_{l<k} A^(k-1-l) B u_l, and the
    covariance couples entry pairs through process noise accumulated up to
    the earlier of the two stamps.  `tables` and `proc_cache` are optional
    reuse hooks for repeated window geometries.
    """
    if not w.entries:
        raise ValueError("empty lift window")
    A, B = model.A, model.B
    n = A.shape[0]
    max_k = max(e.step for e in w.entries)
    if w.inputs.shape[0] < max_k:
        raise ValueError("window inputs incomplete")

    if tables is None:
        tables = LiftTables(model, max_k)
    else:
        tables.extend_to(max_k, model)
    powers = tables.powers

    forced = [np.zeros(n)]           # sum_{l<k} A^(k-1-l) B u_l
    for k in range(max_k):
        forced.append(A @ forced[-1] + B @ w.inputs[k])

    blocks_O, blocks_z = [], []
    for e in w.entries:
        blocks_O.append(e.H @ powers[e.step])
        blocks_z.append(e.z - e.H @ forced[e.step])
    O = np.vstack(blocks_O)
    z_tilde = np.concatenate(blocks_z)

    if proc_cache is not None:
        key = _geometry_key(w.entries)
        Sigma_proc = proc_cache.get(key)
        if Sigma_proc is None:
            Sigma_proc = _sigma_proc(w.entries, tables)
            proc_cache[key] = Sigma_proc
    else:
        Sigma_proc = _sigma_proc(w.entries, tables)

    sizes = [e.H.shape[0] for e in w.entries]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    Sigma = Sigma_proc.copy()
    for i, e in enumerate(w.entries):
        Sigma[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] += e.R

    sv = np.linalg.svd(O, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv.size and sv[0] > 0 else 0
    return LiftedSystem(O=O, z_tilde=z_tilde, Sigma=Sigma, dof=total - rank)


def parity_residual(ls: LiftedSystem) -> tuple[float, int]:
    """Residual energy of the lifted system and its degrees of freedom.

    Whiten with Sigma^(-1/2) (symmetric eigendecomposition), project the
    whitened measurement onto the left null space of the whitened observation
    operator, and return the squared norm.  Equivalent to the minimum of
    (z - O x)^T Sigma^-1 (z - O x) over x.
    """
    if ls.dof < 1:
        raise ValueError("window has no analytic redundancy (dof = 0)")
    evals, V = np.linalg.eigh(ls.Sigma)
    if evals.min() <= 0:
        raise np.linalg.LinAlgError("stacked covariance not positive definite")
    S_inv_half = (V / np.sqrt(evals)) @ V.T
    O_w = S_inv_half @ ls.O
    z_w = S_inv_half @ ls.z_tilde
    U, sv, _ = np.linalg.svd(O_w, full_matrices=True)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv.size and sv[0] > 0 else 0
    W = U[:, rank:]
    resid = W.T @ z_w
    return float(resid @ resid), W.shape[1]


@dataclass(frozen=True)
class OffboardDecision:
    t: float
    q_off: float
    gamma_off: float
    dof: int
    exceed: bool
    flag: bool


class DecisionGate:
    """Persistence-gated, latched decision rule over window residuals.

    exceed = q_off above the chi-squared threshold for the window's dof;
    flag = exceed held for `persistence` consecutive windows, then latched
    for the rest of the run.
    """

    def __init__(self, alpha: float, persistence: int):
        if not 0 < alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if persistence < 1:
            raise ValueError("persistence must be >= 1")
        self.alpha = alpha
        self.persistence = persistence
        self._gamma_cache: dict[int, float] = {}
        self._consecutive = 0
        self.flag = False
        self.flag_time: float | None = None

    def gamma_for(self, dof: int) -> float:
        if dof not in self._gamma_cache:
            self._gamma_cache[dof] = chi2_threshold(dof, self.alpha)
        return self._gamma_cache[dof]

    def decide(self, q_off: float, dof: int, t: float = 0.0) -> OffboardDecision:
        if dof < 1:
            raise ValueError("dof must be >= 1")
        gamma = self.gamma_for(dof)
        exceed = q_off > gamma
        self._consecutive = self._consecutive + 1 if exceed else 0
        if not self.flag and self._consecutive >= self.persistence:
            self.flag = True
            self.flag_time = t
        return OffboardDecision(t=t, q_off=q_off, gamma_off=gamma, dof=dof,
                                exceed=exceed, flag=self.flag)


@dataclass
class DetectorConfig:
    window_steps: int = 100
    slide_steps: int = 50
    alpha: float = 0.01
    persistence: int = 3

    def __post_init__(self):
        if self.window_steps < 2 or self.slide_steps < 1:
            raise ValueError("bad window geometry")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.persistence < 1:
            raise ValueError("persistence must be >= 1")


@dataclass
class _Delivered:
    step: int
    H: np.ndarray
    R: np.ndarray
    z: np.ndarray
    sensor_id: int
    seq: int


class WindowedParityDetector:
    """Sliding-window detector with persistence gating and a latched flag.

    Consumes only measurements already delivered at evaluation time; stamps
    (snapped to the base grid) are what aligns them inside the lifted model.
    """

    def __init__(self, model: DynamicsModel, cfg: DetectorConfig):
        self.model = model
        self.cfg = cfg
        self._measurements: list[_Delivered] = []
        self._tables = LiftTables(model, cfg.window_steps)
        self._proc_cache: dict = {}
        self.gate = DecisionGate(cfg.alpha, cfg.persistence)
        self.skipped_windows = 0
        self.decisions: list[OffboardDecision] = []

    @property
    def flag(self) -> bool:
        return self.gate.flag

    @property
    def flag_time(self) -> float | None:
        return self.gate.flag_time

    def add_measurement(self, stamp: float, value: np.ndarray, cov: np.ndarray,
                        H: np.ndarray, sensor_id: int, seq: int) -> None:
        step = int(round(stamp / self.model.dt))
        self._measurements.append(
            _Delivered(step=step, H=H, R=cov, z=value,
                       sensor_id=sensor_id, seq=seq))

    def evaluate(self, t_end: float, inputs: np.ndarray) -> OffboardDecision | None:
        """Evaluate the window ending at t_end; returns None when skipped."""
        k_end = int(round(t_end / self.model.dt))
        k0 = k_end - self.cfg.window_steps
        if k0 < 0:
            return None
        entries = [
            WindowEntry(step=m.step - k0, H=m.H, R=m.R, z=m.z,
                        sensor_id=m.sensor_id, seq=m.seq)
            for m in self._measurements if k0 <= m.step < k_end
        ]
        self._measurements = [m for m in self._measurements if m.step >= k0]
        if not entries:
            self.skipped_windows += 1
            return None
        window = LiftWindow(n_steps=self.cfg.window_steps, t0=k0 * self.model.dt,
                            entries=tuple(entries),
                            inputs=inputs[k0:k_end - 1])
        ls = build_lifted_system(window, self.model, tables=self._tables,
                                 proc_cache=self._proc_cache)
        if ls.dof < 1:
            self.skipped_windows += 1
            return None
        q_off, dof = parity_residual(ls)
        decision = self.gate.decide(q_off, dof, t=t_end)
        self.decisions.append(decision)
        return decision
