"""Least-absolute-error solve for markers and translations at fixed camera angles.

For each observed pair (m, n) the residuals

    U = (u_bar r3 - r1) . x_m + u_bar t'_z - t'_x
    V = (v_bar r3 - r2) . x_m + v_bar t'_z - t'_y

are affine in the unknowns once the rotation rows are frozen. Two auxiliary
columns per observed pair bound |U| and |V| from above, and the LP minimizes
their sum. Variable order: markers (3M), translations (3N), auxiliaries (2K).

Because the residuals are homogeneous, the all-collapsed state is a zero-cost
optimum. Height rows for the first ``m_cal`` markers keep each marker below
every camera that sees it (with a small positive margin), and one scale row
keeps the summed wand extent along the incoming wand directions at its
incoming value, so the LP cannot shrink the scene toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import DegenerateGeometryError, InvalidArgumentError, LpFailure
from .lp import LpConfig, LpProblem, LpSolution, solve_lp
from .geometry import wrap_angle
from .lm import stacked_jacobian
from .residuals import eval_LAE
from .state import SceneState


@dataclass(frozen=True)
class FixedAngleContext:
    """Rotation matrices ``(N, 3, 3)`` frozen for one LP solve."""

    rotations: np.ndarray

    @classmethod
    def from_state(cls, state: SceneState) -> FixedAngleContext:
        return cls(state.rotations())


@dataclass(frozen=True)
class SubproblemConfig:
    bound: float = 10.0
    m_cal: int = 200
    anti_collapse: bool = True
    # "linear": row z_m + (R_n^T t'_n)_z <= -margin with t'_n unknown.
    # "frozen": row z_m <= c_nz - margin with the camera center taken from the incoming state.
    collapse_form: str = "linear"
    margin_fraction: float = 0.1
    margin_floor: float = 1e-2
    scale_row: bool = True
    aux_cap_factor: float = 4.0

    def __post_init__(self):
        if not self.bound > 0:
            raise InvalidArgumentError("bound must be positive")
        if self.m_cal < 0:
            raise InvalidArgumentError("m_cal must be non-negative")
        if self.collapse_form not in ("linear", "frozen"):
            raise InvalidArgumentError(f"unknown collapse_form {self.collapse_form!r}")
        if not 0 <= self.margin_fraction < 1:
            raise InvalidArgumentError("margin_fraction must lie in [0, 1)")


@dataclass
class SubproblemLayout:
    n_markers: int
    n_cameras: int
    pairs: np.ndarray
    bound: float
    m_cal: int
    n_abs_rows: int
    n_collapse_rows: int = 0
    margin: float = 0.0

    @property
    def n_aux(self) -> int:
        return 2 * len(self.pairs)

    @property
    def n_vars(self) -> int:
        return 3 * self.n_markers + 3 * self.n_cameras + self.n_aux

    def marker_cols(self, m):
        return 3 * np.asarray(m)[..., None] + np.arange(3)

    def camera_cols(self, n):
        return 3 * self.n_markers + 3 * np.asarray(n)[..., None] + np.arange(3)

    @property
    def aux_offset(self) -> int:
        return 3 * self.n_markers + 3 * self.n_cameras

    def pack(self, state: SceneState, aux=None) -> np.ndarray:
        """Flatten a state into an LP point; auxiliaries default to zero."""
        x = np.zeros(self.n_vars)
        x[: 3 * self.n_markers] = state.markers.ravel()
        x[3 * self.n_markers: self.aux_offset] = state.t_prime.ravel()
        if aux is not None:
            x[self.aux_offset:] = np.asarray(aux).ravel()
        return x


def _abs_rows(obs_norm, mask, ctx: FixedAngleContext, layout: SubproblemLayout):
    pairs = layout.pairs
    m_idx, n_idx = pairs[:, 0], pairs[:, 1]
    rots = ctx.rotations[n_idx]
    ub = obs_norm[m_idx, n_idx, 0]
    vb = obs_norm[m_idx, n_idx, 1]
    # structural coefficients of U and V: (K, 6) over (x, y, z, t'_x, t'_y, t'_z)
    cu = np.zeros((len(pairs), 6))
    cv = np.zeros((len(pairs), 6))
    cu[:, :3] = ub[:, None] * rots[:, 2, :] - rots[:, 0, :]
    cv[:, :3] = vb[:, None] * rots[:, 2, :] - rots[:, 1, :]
    cu[:, 3], cu[:, 5] = -1.0, ub
    cv[:, 4], cv[:, 5] = -1.0, vb
    scols = np.concatenate([layout.marker_cols(m_idx), layout.camera_cols(n_idx)], axis=1)
    k = np.arange(len(pairs))
    aux_u = layout.aux_offset + 2 * k
    aux_v = aux_u + 1
    rows, cols, vals = [], [], []
    for r, (coef, sign, aux) in enumerate(
        [(cu, 1.0, aux_u), (cu, -1.0, aux_u), (cv, 1.0, aux_v), (cv, -1.0, aux_v)]
    ):
        row_id = 4 * k + r
        rows.append(np.repeat(row_id, 7))
        cols.append(np.concatenate([scols, aux[:, None]], axis=1).ravel())
        vals.append(np.concatenate([sign * coef, -np.ones((len(pairs), 1))], axis=1).ravel())
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(4 * len(pairs), layout.n_vars),
    )
    row_l1 = max(np.abs(cu).sum(axis=1).max(initial=0.0), np.abs(cv).sum(axis=1).max(initial=0.0))
    return A, row_l1


def build_lp(obs_norm, mask, ctx: FixedAngleContext, cfg: SubproblemConfig | None = None):
    """Assemble the absolute-value LP (without the height rows).

    Returns ``(LpProblem, SubproblemLayout)``.
    """
    cfg = cfg or SubproblemConfig()
    mask = np.asarray(mask, dtype=bool)
    n_markers, n_cameras = mask.shape
    empty = np.flatnonzero(mask.sum(axis=0) == 0)
    if empty.size:
        raise DegenerateGeometryError(f"cameras {empty.tolist()} observe no markers")
    pairs = np.argwhere(mask)
    layout = SubproblemLayout(n_markers, n_cameras, pairs, cfg.bound,
                              min(cfg.m_cal, n_markers), 4 * len(pairs))
    A, row_l1 = _abs_rows(obs_norm, mask, ctx, layout)
    c = np.zeros(layout.n_vars)
    c[layout.aux_offset:] = 1.0
    lo = np.full(layout.n_vars, -cfg.bound)
    hi = np.full(layout.n_vars, cfg.bound)
    lo[layout.aux_offset:] = 0.0
    hi[layout.aux_offset:] = cfg.aux_cap_factor * cfg.bound * max(row_l1, 1.0)
    return LpProblem(c, A, np.zeros(A.shape[0]), lo, hi), layout


def collapse_gaps(state: SceneState, mask, m_cal: int) -> np.ndarray:
    """Height of each camera center above each constrained marker it sees."""
    m_cal = min(m_cal, state.n_markers)
    centers = state.centers()
    gaps = centers[None, :, 2] - state.markers[:m_cal, 2][:, None]
    return gaps[np.asarray(mask, dtype=bool)[:m_cal]]


def collapse_rows(layout: SubproblemLayout, ctx: FixedAngleContext, state: SceneState,
                  mask, m_cal: int, margin: float = 0.0, form: str = "linear"):
    """Rows ``(A_rows, rhs)`` keeping markers ``0..m_cal-1`` below the cameras that see them."""
    mask = np.asarray(mask, dtype=bool)
    m_cal = min(m_cal, layout.n_markers)
    pairs = np.argwhere(mask[:m_cal])
    k = len(pairs)
    if k == 0:
        return sp.csr_matrix((0, layout.n_vars)), np.zeros(0)
    m_idx, n_idx = pairs[:, 0], pairs[:, 1]
    zcol = layout.marker_cols(m_idx)[:, 2]
    if form == "frozen":
        centers = state.centers()
        A = sp.csr_matrix((np.ones(k), (np.arange(k), zcol)), shape=(k, layout.n_vars))
        rhs = centers[n_idx, 2] - margin
        return A, rhs
    if form != "linear":
        raise InvalidArgumentError(f"unknown collapse form {form!r}")
    # camera height c_z = -(R^T t')_z = -R[:, 2] . t'
    tcols = layout.camera_cols(n_idx)
    rcoef = ctx.rotations[n_idx][:, :, 2]
    rows = np.repeat(np.arange(k), 4)
    cols = np.concatenate([zcol[:, None], tcols], axis=1).ravel()
    vals = np.concatenate([np.ones((k, 1)), rcoef], axis=1).ravel()
    A = sp.csr_matrix((vals, (rows, cols)), shape=(k, layout.n_vars))
    return A, np.full(k, -margin)


def add_anti_collapse(p: LpProblem, layout: SubproblemLayout, ctx: FixedAngleContext,
                      state: SceneState, mask, m_cal: int, margin: float = 0.0,
                      form: str = "linear") -> LpProblem:
    """Append the height rows; ``m_cal = 0`` returns the problem unchanged."""
    if m_cal <= 0:
        return p
    A, rhs = collapse_rows(layout, ctx, state, mask, m_cal, margin, form)
    if A.shape[0] == 0:
        return p
    layout.n_collapse_rows = A.shape[0]
    layout.margin = margin
    return p.with_rows(A, rhs)


def scale_row(layout: SubproblemLayout, state: SceneState):
    """Row ``(a, rhs)`` encoding ``sum_k w_k . (x_2k+1 - x_2k) >= sum_k |x_2k+1 - x_2k|``.

    ``w_k`` are the incoming unit wand directions, so the incoming state lies
    exactly on this row and the row is a linearization of the mean wand length.
    """
    vec = state.markers[1::2] - state.markers[0::2]
    lengths = np.linalg.norm(vec, axis=1)
    if not lengths.sum() > 0:
        raise DegenerateGeometryError("all wand lengths are zero; scale row is undefined")
    dirs = vec / np.where(lengths > 0, lengths, 1.0)[:, None]
    k = np.arange(len(vec))
    cols = np.concatenate([layout.marker_cols(2 * k + 1).ravel(), layout.marker_cols(2 * k).ravel()])
    # written as  -(sum w . delta) <= -L
    vals = np.concatenate([-dirs.ravel(), dirs.ravel()])
    a = sp.csr_matrix((vals, (np.zeros(cols.size, dtype=int), cols)), shape=(1, layout.n_vars))
    return a, np.array([-float(lengths.sum())])


def extract_solution(sol: LpSolution, layout: SubproblemLayout):
    """Map an optimal LP point to ``(markers, t_prime, aux)``."""
    if not sol.optimal:
        raise LpFailure(sol.status.value, message=f"cannot extract from a {sol.status.value} LP: {sol.message}")
    x = sol.x
    markers = x[: 3 * layout.n_markers].reshape(-1, 3)
    t_prime = x[3 * layout.n_markers: layout.aux_offset].reshape(-1, 3)
    aux = x[layout.aux_offset:].reshape(-1, 2)
    return markers.copy(), t_prime.copy(), aux.copy()


@dataclass
class SubproblemResult:
    state: SceneState
    objective: float
    lae_in: float
    lae_out: float
    margin: float
    iterations: int
    n_vars: int
    n_rows: int


def choose_margin(state: SceneState, mask, cfg: SubproblemConfig) -> float:
    """Margin for the height rows: a fraction of the incoming smallest gap.

    The incoming state then stays feasible, so the LP cannot return a worse
    absolute error than it started with.
    """
    gaps = collapse_gaps(state, mask, cfg.m_cal)
    if gaps.size and gaps.min() > 0:
        return cfg.margin_fraction * float(gaps.min())
    return cfg.margin_floor


def assemble(state: SceneState, obs_norm, mask, cfg: SubproblemConfig):
    """Absolute-value rows, height rows and scale row at the angles of ``state``."""
    ctx = FixedAngleContext.from_state(state)
    p, layout = build_lp(obs_norm, mask, ctx, cfg)
    if cfg.anti_collapse and cfg.m_cal > 0:
        margin = choose_margin(state, mask, cfg)
        p = add_anti_collapse(p, layout, ctx, state, mask, cfg.m_cal, margin, cfg.collapse_form)
    if cfg.scale_row:
        p = p.with_rows(*scale_row(layout, state))
    return p, layout


def solve_subproblem(state: SceneState, obs_norm, mask, cfg: SubproblemConfig | None = None,
                     lp_cfg: LpConfig | None = None, iteration=None) -> SubproblemResult:
    """Solve the LP at the angles of ``state``; angles are returned unchanged."""
    cfg = cfg or SubproblemConfig()
    p, layout = assemble(state, obs_norm, mask, cfg)
    sol = solve_lp(p, lp_cfg)
    if not sol.optimal:
        raise LpFailure(sol.status.value, iteration,
                        f"LP subproblem {sol.status.value} at iteration {iteration}: {sol.message}")
    markers, t_prime, _ = extract_solution(sol, layout)
    new = SceneState(state.angles.copy(), t_prime, markers)
    return SubproblemResult(new, sol.objective, eval_LAE(state, obs_norm, mask),
                            eval_LAE(new, obs_norm, mask), layout.margin, sol.iterations,
                            p.n_vars, p.n_rows)


def angle_columns(layout: SubproblemLayout, state: SceneState, obs_norm, mask) -> sp.csr_matrix:
    """First-order effect of angle increments on the absolute-value rows, ``(4K, 3N)``."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols, vals = [], [], []
    for n in range(layout.n_cameras):
        ks = np.flatnonzero(layout.pairs[:, 1] == n)
        if ks.size == 0:
            continue
        jac = stacked_jacobian(state.angles[n], state.markers[mask[:, n]], obs_norm[mask[:, n], n])
        jac = jac.reshape(-1, 2, 3)
        for r, (comp, sign) in enumerate([(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)]):
            rows.append(np.repeat(4 * ks + r, 3))
            cols.append(np.tile(3 * n + np.arange(3), ks.size))
            vals.append((sign * jac[:, comp, :]).ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(layout.n_abs_rows, 3 * layout.n_cameras))


def scene_radius(state: SceneState) -> float:
    """RMS distance of the camera centers from the marker centroid."""
    c = state.centers() - state.markers.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(c * c, axis=1))))


@dataclass
class LinearizedStep:
    state: SceneState
    predicted: float
    iterations: int


def solve_linearized_step(state: SceneState, obs_norm, mask, radius: float,
                          cfg: SubproblemConfig | None = None, lp_cfg: LpConfig | None = None,
                          iteration=None) -> LinearizedStep:
    """LP over markers, translations and first-order angle increments inside a box.

    Angle increments are limited to ``radius`` radians and markers/translations
    to ``radius * scene_radius`` meters around ``state``. ``predicted`` is the
    linearized absolute error at the returned point.
    """
    cfg = cfg or SubproblemConfig()
    p, layout = assemble(state, obs_norm, mask, cfg)
    n_extra = p.n_rows - layout.n_abs_rows
    jac = sp.vstack([angle_columns(layout, state, obs_norm, mask),
                     sp.csr_matrix((n_extra, 3 * layout.n_cameras))])
    z0 = layout.pack(state)[: layout.aux_offset]
    step = radius * scene_radius(state)
    lo, hi = p.lo.copy(), p.hi.copy()
    nz = layout.aux_offset
    lo[:nz] = np.maximum(lo[:nz], z0 - step)
    hi[:nz] = np.minimum(hi[:nz], z0 + step)
    lo[:nz] = np.minimum(lo[:nz], hi[:nz])
    ang = np.full(3 * layout.n_cameras, radius)
    q = LpProblem(np.concatenate([p.c, np.zeros(ang.size)]), sp.hstack([p.A, jac], format="csr"),
                  p.b, np.concatenate([lo, -ang]), np.concatenate([hi, ang]))
    sol = solve_lp(q, lp_cfg)
    if not sol.optimal:
        raise LpFailure(sol.status.value, iteration,
                        f"linearized LP {sol.status.value} at iteration {iteration}: {sol.message}")
    x = sol.x
    delta = x[p.n_vars:].reshape(-1, 3)
    markers = x[: 3 * layout.n_markers].reshape(-1, 3)
    t_prime = x[3 * layout.n_markers: layout.aux_offset].reshape(-1, 3)
    new = SceneState(wrap_angle(state.angles + delta), t_prime, markers)
    return LinearizedStep(new, sol.objective, sol.iterations)
