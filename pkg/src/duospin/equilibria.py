"""Stationary points and phase structure of the limiting flow.

At a balanced environment (``m_eta = 0``) every stationary point of the
moment ODE is determined by a scalar ``m = m_sigma`` solving the
self-consistency equation ``gamma_map(m) = m``, where

``gamma_map(m) = tanh(beta) * sinh(g m) * cosh(g m)
/ (cosh(g m)^2 + sinh(g h)^2)``,   ``g = gamma``.

``m = 0`` always solves it (the disordered point); depending on parameters
there are 0, 1 or 2 strictly positive solutions (each paired with its mirror
image).  The boundary where the slope at the origin crosses 1,

``gamma * tanh(beta) = cosh(gamma h)^2``,

is the continuous-transition curve; it can be written ``h(beta, gamma)``
for ``gamma >= 1/tanh(beta)``.  Beyond the tricritical coupling
``gamma_tri = 3 / (2 tanh beta)`` a second boundary appears where a positive
root is created by a tangency (``gamma_map(m) = m`` and
``gamma_map'(m) = 1`` simultaneously): the fold line, computed here by a
bracketing scan polished with damped Newton on analytic partials.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .limit import mkv_rhs
from .model import ModelParams, MomentVector

__all__ = [
    "Equilibrium",
    "PhasePoint",
    "FoldPoint",
    "NeutralJacobian",
    "PhaseDiagram",
    "gamma_map",
    "gamma_map_derivative",
    "critical_curve_h",
    "tricritical_point",
    "fold_boundary",
    "equilibrium_moments",
    "solve_fixed_points",
    "jacobian_at_neutral",
    "phase_diagram_scan",
    "write_phase_csv",
    "write_curves_json",
]

#: Eigenvalue band treated as marginal when labeling stability.
_NEUTRAL_BAND = 1e-7

#: Root-merging threshold: positive roots closer than this are collapsed and
#: flagged in diagnostics (the scan cannot resolve a near-tangency further).
_MERGE_TOL = 1e-6

_GRID_SIZE = 10_001


def _hyper(params: ModelParams, m) -> Tuple:
    g = params.gamma
    thb = math.tanh(params.beta)
    SH2 = math.sinh(g * params.h) ** 2
    gm = g * np.asarray(m, dtype=np.float64)
    return thb, SH2, gm


def gamma_map(m, params: ModelParams):
    """Self-consistency map whose fixed points are the stationary m_sigma.

    Accepts scalars or arrays.  Odd in ``m``; saturates at ``+-tanh(beta)``.
    """
    thb, SH2, gm = _hyper(params, m)
    with np.errstate(over="ignore"):
        sech2 = 1.0 / np.cosh(gm) ** 2  # underflows to 0 for huge |gm|
    out = thb * np.tanh(gm) / (1.0 + SH2 * sech2)
    return float(out) if np.isscalar(m) else out


def gamma_map_derivative(m, params: ModelParams):
    """Derivative of :func:`gamma_map` in ``m`` (closed form, > 0)."""
    thb, SH2, gm = _hyper(params, m)
    with np.errstate(over="ignore"):
        sech2 = 1.0 / np.cosh(gm) ** 2
    num = sech2 * ((1.0 + 2.0 * SH2) - SH2 * sech2)
    den = (1.0 + SH2 * sech2) ** 2
    out = params.gamma * thb * num / den
    return float(out) if np.isscalar(m) else out


def _gamma_map_dh(m: float, params: ModelParams) -> float:
    """Partial of gamma_map in h at fixed m (used by the fold Newton)."""
    g = params.gamma
    thb = math.tanh(params.beta)
    c1 = math.cosh(g * m)
    s1 = math.sinh(g * m)
    D = c1 * c1 + math.sinh(g * params.h) ** 2
    return -thb * s1 * c1 * g * math.sinh(2.0 * g * params.h) / (D * D)


def _gamma_map_dmm(m: float, params: ModelParams) -> float:
    """Second m-derivative of gamma_map (used by the fold Newton)."""
    g = params.gamma
    thb = math.tanh(params.beta)
    c1 = math.cosh(g * m)
    s1 = math.sinh(g * m)
    SH2 = math.sinh(g * params.h) ** 2
    D = c1 * c1 + SH2
    core = (1.0 + 2.0 * SH2) * (SH2 - c1 * c1) + 2.0 * SH2
    return 2.0 * g * g * thb * c1 * s1 * core / (D ** 3)


def _gamma_map_dmh(m: float, params: ModelParams) -> float:
    """Mixed (m, h) second derivative of gamma_map (fold Newton)."""
    g = params.gamma
    thb = math.tanh(params.beta)
    c1 = math.cosh(g * m)
    SH2 = math.sinh(g * params.h) ** 2
    D = c1 * c1 + SH2
    core = (2.0 * c1 * c1 - 1.0) * D - 2.0 * ((1.0 + 2.0 * SH2) * c1 * c1 - SH2)
    return g * g * thb * math.sinh(2.0 * g * params.h) * core / (D ** 3)


def critical_curve_h(beta: float, gamma: float) -> Optional[float]:
    """Environment strength where the origin's slope crosses 1, or None.

    Solves ``gamma * tanh(beta) = cosh(gamma h)^2`` for ``h >= 0``; defined
    exactly when ``gamma >= 1 / tanh(beta)`` (returns ``0.0`` at equality and
    ``None`` below it, which is not an error: the transition is then absent
    at every h).
    """
    x = gamma * math.tanh(beta)
    if x < 1.0:
        return None
    return math.acosh(math.sqrt(x)) / gamma


def tricritical_point(beta: float) -> Tuple[float, float]:
    """(gamma, h) where the continuous boundary turns first-order.

    On the boundary the map's cubic coefficient at the origin is
    ``gamma * (2 gamma / 3 - 1 / tanh beta)``; it vanishes at
    ``gamma = 3 / (2 tanh beta)``.
    """
    gamma_tri = 1.5 / math.tanh(beta)
    h_tri = critical_curve_h(beta, gamma_tri)
    assert h_tri is not None  # gamma_tri * tanh(beta) = 1.5 > 1 always
    return gamma_tri, h_tri


@dataclass(frozen=True)
class FoldPoint:
    """A tangency of the self-consistency map: the first-order boundary."""

    m_sigma: float
    h: float
    residual_value: float   # |gamma_map(m) - m|
    residual_slope: float   # |gamma_map'(m) - 1|


def _tangency_excess(h: float, beta: float, gamma: float, grid: np.ndarray):
    """max_m (gamma_map(m) - m) over the positive grid, and its argmax."""
    p = ModelParams(beta, gamma, h)
    vals = gamma_map(grid, p) - grid
    i = int(np.argmax(vals))
    return float(vals[i]), float(grid[i])


def fold_boundary(
    beta: float,
    gamma: float,
    *,
    h_bracket: Optional[Tuple[float, float]] = None,
    max_iter: int = 60,
) -> Optional[FoldPoint]:
    """Fold (tangency) point at fixed (beta, gamma), or None below gamma_tri.

    Solves ``gamma_map(m) = m`` and ``gamma_map'(m) = 1`` with ``m > 0``.
    Strategy: bracket in h by bisection on the signed tangency excess
    ``max_m (gamma_map - m)`` (positive below the fold, negative above),
    then polish (m, h) with a damped Newton step on the analytic partials.
    Residuals of the returned point are below 1e-10.
    """
    gamma_tri, h_tri = tricritical_point(beta)
    if gamma < gamma_tri - 1e-12:
        return None
    if abs(gamma - gamma_tri) <= 1e-12:
        return FoldPoint(0.0, h_tri, 0.0, 0.0)

    grid = np.linspace(1e-4, 1.0, 4001)
    if h_bracket is None:
        h_lo = critical_curve_h(beta, gamma)
        assert h_lo is not None  # gamma > gamma_tri >= 1/tanh(beta)
        h_hi = h_lo + 0.05
        for _ in range(60):
            if _tangency_excess(h_hi, beta, gamma, grid)[0] < 0.0:
                break
            h_hi += 0.1
        else:
            raise RuntimeError("failed to bracket the fold in h")
    else:
        h_lo, h_hi = h_bracket
    m_at = 0.0
    for _ in range(max_iter):
        h_mid = 0.5 * (h_lo + h_hi)
        excess, m_at = _tangency_excess(h_mid, beta, gamma, grid)
        if excess > 0.0:
            h_lo = h_mid
        else:
            h_hi = h_mid
    m, h = m_at, 0.5 * (h_lo + h_hi)

    # Newton polish on F(m, h) = (gamma_map - m, gamma_map' - 1)
    def residual(m_: float, h_: float) -> np.ndarray:
        p = ModelParams(beta, gamma, h_)
        return np.array(
            [gamma_map(m_, p) - m_, gamma_map_derivative(m_, p) - 1.0]
        )

    f = residual(m, h)
    for _ in range(50):
        if np.max(np.abs(f)) < 1e-13:
            break
        p = ModelParams(beta, gamma, h)
        jac = np.array(
            [
                [gamma_map_derivative(m, p) - 1.0, _gamma_map_dh(m, p)],
                [_gamma_map_dmm(m, p), _gamma_map_dmh(m, p)],
            ]
        )
        try:
            dm, dh = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        for _ in range(30):  # damping: keep in bounds, require improvement
            m_new, h_new = m + lam * dm, h + lam * dh
            if 0.0 < m_new < 1.0 and h_new > 0.0:
                f_new = residual(m_new, h_new)
                if np.max(np.abs(f_new)) < np.max(np.abs(f)):
                    m, h, f = m_new, h_new, f_new
                    break
            lam *= 0.5
        else:
            break

    res_val, res_slope = abs(f[0]), abs(f[1])
    if max(res_val, res_slope) > 1e-10:
        raise RuntimeError(
            f"fold refinement stalled at (m, h) = ({m:.12g}, {h:.12g}), "
            f"residuals ({res_val:.3e}, {res_slope:.3e})"
        )
    return FoldPoint(m, h, res_val, res_slope)


# ---------------------------------------------------------------------------
# Stationary points of the full 7-dim flow
# ---------------------------------------------------------------------------


def equilibrium_moments(m_sigma: float, params: ModelParams) -> np.ndarray:
    """Full stationary 7-moment vector built from a root of the scalar map.

    With ``m_eta = 0`` fixed, the remaining components follow from linear
    stationarity conditions once ``m_sigma`` is known: the (m_omega,
    m_omega_eta) pair solves a symmetric 2x2 system with closed-form
    solution, m_sigma_eta is slaved to m_omega_eta, and the
    (m_sigma_omega, m_sigma_omega_eta) pair solves another 2x2 system.
    """
    g = params.gamma
    thb = math.tanh(params.beta)
    chb = math.cosh(params.beta)
    shb = math.sinh(params.beta)
    CH = math.cosh(g * params.h)
    SH = math.sinh(g * params.h)
    c1 = math.cosh(g * m_sigma)
    s1 = math.sinh(g * m_sigma)
    D = c1 * c1 + SH * SH
    m_omega = s1 * c1 / D
    m_omega_eta = SH * CH / D
    m_sigma_eta = thb * m_omega_eta
    # (m_sigma_omega, m_sigma_omega_eta): symmetric 2x2 linear system
    a_diag = chb + CH * c1
    a_off = SH * s1
    rhs1 = m_sigma * CH * s1 + m_sigma_eta * SH * c1 + shb
    rhs2 = m_sigma * SH * c1 + m_sigma_eta * CH * s1
    det = a_diag * a_diag - a_off * a_off
    m_so = (a_diag * rhs1 - a_off * rhs2) / det
    m_soe = (a_diag * rhs2 - a_off * rhs1) / det
    return np.array(
        [0.0, m_sigma, m_omega, m_so, m_sigma_eta, m_omega_eta, m_soe]
    )


def _fd_jacobian6(m7: np.ndarray, params: ModelParams, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the 6-dim block of the flow."""
    jac = np.empty((6, 6))
    for col in range(6):
        up = m7.copy()
        dn = m7.copy()
        up[1 + col] += step
        dn[1 + col] -= step
        jac[:, col] = (mkv_rhs(up, params)[1:] - mkv_rhs(dn, params)[1:]) / (2 * step)
    return jac


@dataclass(frozen=True)
class Equilibrium:
    """One stationary point of the balanced-environment flow."""

    m_sigma: float
    moments: np.ndarray          # full 7-vector, m_eta = 0
    stability: str               # "stable" | "unstable" | "neutral"
    eigenvalues: np.ndarray      # spectrum of the 6x6 linearization
    provenance: str              # "closed-form" (origin) | "numerical"

    def __post_init__(self) -> None:
        for name in ("moments", "eigenvalues"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PhasePoint:
    """All stationary points at one parameter choice, plus the phase label.

    ``phase`` counts the strictly positive roots of the self-consistency
    map: 0 (disordered only), 1 (one symmetric pair of polarized states) or
    2 (metastable wedge between the continuous and fold boundaries).
    """

    params: ModelParams
    roots: Tuple[Equilibrium, ...]
    phase: int
    diagnostics: Tuple[str, ...] = ()


@dataclass(frozen=True)
class NeutralJacobian:
    """Linearization of the flow at the disordered point.

    ``matrix`` is the full 6x6 derivative (factor 2 included);
    ``closed_form`` holds the six analytic eigenvalues in labeled order
    [lead, partner, pair, pair, omega-eta, sigma-eta]; ``numerical`` is the
    eigvals() spectrum for cross-checking.
    """

    matrix: np.ndarray
    closed_form: np.ndarray
    numerical: np.ndarray

    def __post_init__(self) -> None:
        for name in ("matrix", "closed_form", "numerical"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def leading(self) -> float:
        return float(self.closed_form[0])


def jacobian_at_neutral(params: ModelParams) -> NeutralJacobian:
    """Jacobian at the disordered stationary point, with closed spectrum.

    The closed-form eigenvalues: with ``c = cosh(beta)``, ``C = cosh(gamma
    h)``, ``s = sqrt((c - C)^2 + 4 gamma sinh(beta) / C)``,

    ``lambda_1,2 = -(c + C) +- s``, ``lambda_3 = lambda_4 = -2 (c + C)``,
    ``lambda_5 = -2 C``, ``lambda_6 = -2 c``.

    ``lambda_1 = 0`` exactly on the continuous boundary
    ``gamma tanh(beta) = C^2``.
    """
    g = params.gamma
    chb = math.cosh(params.beta)
    shb = math.sinh(params.beta)
    thb = math.tanh(params.beta)
    CH = math.cosh(g * params.h)
    SH = math.sinh(g * params.h)
    thgh = math.tanh(g * params.h)
    dv = 2.0 * np.array(
        [
            [-chb, shb, 0.0, 0.0, 0.0, 0.0],
            [g / CH, -CH, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -(chb + CH), SH, 0.0, 0.0],
            [0.0, 0.0, 0.0, -chb, shb, 0.0],
            [0.0, 0.0, 0.0, 0.0, -CH, 0.0],
            [SH + g * thb * thgh / (chb + CH), 0.0, 0.0, 0.0, 0.0, -(chb + CH)],
        ]
    )
    s = math.sqrt((chb - CH) ** 2 + 4.0 * g * shb / CH)
    closed = np.array(
        [
            -(chb + CH) + s,
            -(chb + CH) - s,
            -2.0 * (chb + CH),
            -2.0 * (chb + CH),
            -2.0 * CH,
            -2.0 * chb,
        ]
    )
    numerical = np.linalg.eigvals(dv)
    return NeutralJacobian(matrix=dv, closed_form=closed, numerical=numerical)


def _positive_roots(params: ModelParams) -> Tuple[List[float], List[str]]:
    """Scan + bisection for strictly positive roots of gamma_map(m) = m."""
    grid = np.linspace(0.0, 1.0, _GRID_SIZE)
    f = gamma_map(grid, params) - grid
    roots: List[float] = []
    for i in range(1, _GRID_SIZE - 1):
        if f[i] == 0.0:
            roots.append(float(grid[i]))
        elif f[i] * f[i + 1] < 0.0:
            lo, hi = float(grid[i]), float(grid[i + 1])
            flo = float(f[i])
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                fm = gamma_map(mid, params) - mid
                if fm == 0.0:
                    lo = hi = mid
                    break
                if (fm > 0.0) == (flo > 0.0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    diagnostics: List[str] = []
    merged: List[float] = []
    for r in sorted(roots):
        if merged and r - merged[-1] < _MERGE_TOL:
            diagnostics.append(
                f"merged nearly-degenerate roots near m = {r:.8g} "
                f"(separation < {_MERGE_TOL:g}); parameters sit close to the fold"
            )
            merged[-1] = 0.5 * (merged[-1] + r)
        else:
            merged.append(r)
    return merged, diagnostics


def _classify(eigs: np.ndarray) -> str:
    lead = float(np.max(np.real(eigs)))
    if lead > _NEUTRAL_BAND:
        return "unstable"
    if lead < -_NEUTRAL_BAND:
        return "stable"
    return "neutral"


def solve_fixed_points(params: ModelParams) -> PhasePoint:
    """All stationary points at the given parameters (balanced environment).

    Grid scan (10^4 intervals on [0, 1]) plus bisection to 1e-12 for the
    positive roots; each root is completed to the full 7-moment stationary
    vector, mirrored to its negative partner, and labeled by the spectrum of
    the linearization (closed form at the origin, finite differences
    elsewhere).  Near-degenerate roots are merged and flagged; a mismatch
    between the root count and the slope criterion at the origin is recorded
    as a diagnostic, never silently dropped.
    """
    pos, diagnostics = _positive_roots(params)

    nj = jacobian_at_neutral(params)
    roots = [
        Equilibrium(
            m_sigma=0.0,
            moments=equilibrium_moments(0.0, params),
            stability=_classify(nj.closed_form),
            eigenvalues=nj.closed_form,
            provenance="closed-form",
        )
    ]
    for r in pos:
        for m_star in (r, -r):
            m7 = equilibrium_moments(m_star, params)
            eigs = np.linalg.eigvals(_fd_jacobian6(m7, params))
            roots.append(
                Equilibrium(
                    m_sigma=m_star,
                    moments=m7,
                    stability=_classify(eigs),
                    eigenvalues=eigs,
                    provenance="numerical",
                )
            )

    slope0 = gamma_map_derivative(0.0, params)
    expected = "one" if slope0 > 1.0 else "zero or two"
    if (slope0 > 1.0 and len(pos) != 1) or (slope0 < 1.0 and len(pos) == 1):
        diagnostics.append(
            f"root count {len(pos)} disagrees with the origin slope "
            f"{slope0:.6g} (expected {expected} positive roots)"
        )
    return PhasePoint(
        params=params,
        roots=tuple(roots),
        phase=len(pos),
        diagnostics=tuple(diagnostics),
    )


# ---------------------------------------------------------------------------
# Phase-diagram scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseDiagram:
    """Grid of phase labels over (gamma, h) at fixed beta."""

    beta: float
    gammas: np.ndarray
    hs: np.ndarray
    phase: np.ndarray        # (n_gamma, n_h) int, -1 where the point failed
    m_star_max: np.ndarray   # largest positive root, 0 if none
    lambda1: np.ndarray      # leading closed-form eigenvalue at the origin
    points: Tuple[Tuple[Optional[PhasePoint], ...], ...]
    failures: Tuple[Tuple[int, int, str], ...]
    critical_curve: Tuple[np.ndarray, np.ndarray]   # (gammas, h(gamma) or nan)
    fold_curve: Tuple[np.ndarray, np.ndarray, np.ndarray]  # (gammas, h, m)
    tricritical: Tuple[float, float]

    def __post_init__(self) -> None:
        for name in ("gammas", "hs", "phase", "m_star_max", "lambda1"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def phase_diagram_scan(
    beta: float,
    gamma_range: Tuple[float, float],
    h_range: Tuple[float, float],
    resolution: Union[int, Tuple[int, int]],
) -> PhaseDiagram:
    """Classify the phase over a (gamma, h) grid at fixed beta.

    ``resolution`` is the number of grid points per axis (one int for both).
    A failure at one grid point is recorded in ``failures`` (with indices and
    message) and the scan continues.  The continuous boundary, fold line and
    tricritical point are sampled alongside for plotting/serialization.
    """
    if isinstance(resolution, int):
        n_gamma = n_h = resolution
    else:
        n_gamma, n_h = resolution
    gammas = np.linspace(gamma_range[0], gamma_range[1], n_gamma)
    hs = np.linspace(h_range[0], h_range[1], n_h)

    phase = np.full((n_gamma, n_h), -1, dtype=np.int64)
    m_star_max = np.full((n_gamma, n_h), np.nan)
    lambda1 = np.full((n_gamma, n_h), np.nan)
    rows: List[Tuple[Optional[PhasePoint], ...]] = []
    failures: List[Tuple[int, int, str]] = []
    for i, g in enumerate(gammas):
        row: List[Optional[PhasePoint]] = []
        for j, h in enumerate(hs):
            try:
                pp = solve_fixed_points(ModelParams(beta, float(g), float(h)))
                phase[i, j] = pp.phase
                pos = [r.m_sigma for r in pp.roots if r.m_sigma > 0]
                m_star_max[i, j] = max(pos) if pos else 0.0
                lambda1[i, j] = jacobian_at_neutral(pp.params).leading
                row.append(pp)
            except Exception as exc:  # noqa: BLE001 - recorded, scan continues
                failures.append((i, j, f"{type(exc).__name__}: {exc}"))
                row.append(None)
        rows.append(tuple(row))

    curve_h = np.array(
        [
            np.nan if (v := critical_curve_h(beta, float(g))) is None else v
            for g in gammas
        ]
    )
    gamma_tri, h_tri = tricritical_point(beta)
    fold_g: List[float] = []
    fold_h: List[float] = []
    fold_m: List[float] = []
    for g in gammas:
        if g <= gamma_tri:
            continue
        try:
            fp = fold_boundary(beta, float(g))
        except RuntimeError:
            continue
        if fp is not None:
            fold_g.append(float(g))
            fold_h.append(fp.h)
            fold_m.append(fp.m_sigma)

    return PhaseDiagram(
        beta=beta,
        gammas=gammas,
        hs=hs,
        phase=phase,
        m_star_max=m_star_max,
        lambda1=lambda1,
        points=tuple(rows),
        failures=tuple(failures),
        critical_curve=(gammas.copy(), curve_h),
        fold_curve=(np.array(fold_g), np.array(fold_h), np.array(fold_m)),
        tricritical=(gamma_tri, h_tri),
    )


def write_phase_csv(diagram: PhaseDiagram, path: str) -> None:
    """Phase grid as CSV: one row per (gamma, h) point, gamma-major order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gamma,h,phase,m_star_max,lambda1\n")
        for i, g in enumerate(diagram.gammas):
            for j, h in enumerate(diagram.hs):
                fh.write(
                    "%.17g,%.17g,%d,%.17g,%.17g\n"
                    % (
                        g,
                        h,
                        diagram.phase[i, j],
                        diagram.m_star_max[i, j],
                        diagram.lambda1[i, j],
                    )
                )


def write_curves_json(diagram: PhaseDiagram, path: str) -> None:
    """Boundary curves (continuous, fold, tricritical point) as JSON."""
    payload = {
        "beta": diagram.beta,
        "critical_curve": {
            "gamma": [float(g) for g in diagram.critical_curve[0]],
            "h": [None if math.isnan(v) else float(v) for v in diagram.critical_curve[1]],
        },
        "fold_curve": {
            "gamma": [float(g) for g in diagram.fold_curve[0]],
            "h": [float(v) for v in diagram.fold_curve[1]],
            "m_sigma": [float(v) for v in diagram.fold_curve[2]],
        },
        "tricritical": {
            "gamma": diagram.tricritical[0],
            "h": diagram.tricritical[1],
        },
        "failures": [
            {"i_gamma": i, "i_h": j, "error": msg} for i, j, msg in diagram.failures
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
