# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.
"""Dense spectral oracle, angle measurements and convergence verifiers.

All checks of asymptotic statements work on fitted constants over a window
of iterations. The window drops iterates whose residual norm or angle sine
is at the rounding floor ``100 eps ||A||_1`` and inner solves that stagnated
or missed their tolerance. Constants are fitted on the asymptotic part of
the window, the iterates with ``sin(phi_k) <= 1e-2``.
"""

from __future__ import annotations

import functools
import logging
import math
import typing

import numpy as np
import scipy.linalg
import scipy.stats

from rqilab import _matio
from rqilab import _policies
from rqilab import _rqi_driver
from rqilab import _tridiag
from rqilab import exceptions


if typing.TYPE_CHECKING:
    from collections.abc import Sequence

    from rqilab import _minres
    from rqilab import _tuned_precond
    from rqilab import types


LOG = logging.getLogger(__name__)

EPS = float(np.finfo(np.float64).eps)
DEFAULT_N_CAP = 2000
RICHNESS_N_CAP = 400
DEGENERATE_GAP = 1e-12
RESIDUAL_TOLERANCE = 1e-10
BOUND_SLACK = 0.1
ABSOLUTE_SLACK = 1e-10
ASYMPTOTIC_SIN_PHI = 1e-2
FLOOR_FACTOR = 100.0

Classification: typing.TypeAlias = typing.Literal[
    "cubic", "quadratic", "linear", "none"
]


class SpectralOracle(typing.NamedTuple):
    """Full dense spectrum of ``A`` and the target eigenpair.

    ``gap`` is the distance from the target ``lam`` to the nearest other
    eigenvalue and ``beta = (lambda_max - lambda_min) / gap``. When the gap
    is below ``1e-12 ||A||_1`` the oracle is ``degenerate`` and bound checks
    are skipped.
    """

    eigenvalues: types.RealVector
    eigenvectors: types.ComplexMatrix
    index: int
    sigma: float
    lam: float
    x: types.ComplexVector
    gap: float
    spread: float
    beta: float
    one_norm: float
    degenerate: bool

    @property
    def lambda2_gap(self) -> float:
        return self.gap

    @property
    def extremal(self) -> bool:
        return self.index in {0, len(self.eigenvalues) - 1}

    @property
    def r_floor(self) -> float:
        return FLOOR_FACTOR * EPS * self.one_norm

    @property
    def sin_floor(self) -> float:
        return FLOOR_FACTOR * EPS * max(self.one_norm, self.beta, 1.0)


class Angle(typing.NamedTuple):
    sin_phi: float
    cos_phi: float
    tan_phi: float


class BoundCheck(typing.NamedTuple):
    k: int
    lhs: float
    rhs: float
    holds: bool
    skipped: bool = False

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.inf


class BoundReport(typing.NamedTuple):
    name: str
    checks: tuple[BoundCheck, ...]
    asserted: bool = True

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.checks if not c.skipped)

    @property
    def max_ratio(self) -> float | None:
        ratios = [c.ratio for c in self.checks if not c.skipped]
        return max(ratios) if ratios else None


class RateReport(typing.NamedTuple):
    """Observed convergence order of a run against its theoretical bounds."""

    classification: Classification
    expected: Classification
    fitted_order: float
    fitted_on: str
    window: tuple[int, ...]
    r_ratios: dict[int, tuple[float, ...]]
    sin_ratios: dict[int, tuple[float, ...]]
    cubic_factor: tuple[float, ...]
    cubic_factor_bound: tuple[float, ...]
    inexact_factor_bound: tuple[float, ...]
    cos_phi_backsolved: tuple[float, ...]
    cos_phi_direct: tuple[float, ...]
    eta: float | None
    eta_spread: float | None
    zeta: float | None

    @property
    def matches(self) -> bool:
        return self.classification == self.expected

    @property
    def cos_phi_min(self) -> float | None:
        values = self.cos_phi_direct or self.cos_phi_backsolved
        return min(values) if values else None


class GrowthReport(typing.NamedTuple):
    slope: float
    intercept: float
    points: tuple[int, ...]
    lower_bound: BoundReport


class DirectionReport(typing.NamedTuple):
    sign_steps: int
    opposite_sign_steps: int
    preconditioned_sign_steps: int
    preconditioned_opposite_steps: int
    near_minus_one_constant: float | None
    preconditioned_constant: float | None
    sin_psi_ratio: float | None
    implied_cos_varphi: float | None
    positiveness_constant: float | None

    @property
    def opposite_fraction(self) -> float | None:
        if not self.sign_steps:
            return None
        return self.opposite_sign_steps / self.sign_steps


class ComparisonEntry(typing.NamedTuple):
    k: int
    eps_m: float
    w_norm: float
    w_lower_bound: float
    r_next: float | None
    r_bound: float | None


class RichnessReport(typing.NamedTuple):
    steps: tuple[int, ...]
    c1: tuple[float, ...]

    @property
    def c1_max(self) -> float | None:
        return max(self.c1) if self.c1 else None

    @property
    def bounded(self) -> bool:
        if not self.c1:
            return True
        return all(math.isfinite(c) for c in self.c1) and self.c1[-1] <= 10.0 * max(
            self.c1[0], 1.0
        )


def select_index(eigenvalues: types.RealVector, sigma: float) -> int:
    """Index of the eigenvalue closest to ``sigma``, lowest on ties."""
    return int(np.argmin(np.abs(eigenvalues - sigma)))


def build_oracle(
    A: _matio.SparseHermitianMatrix,
    target_sigma: float,
    n_cap: int = DEFAULT_N_CAP,
    index: int | None = None,
) -> SpectralOracle:
    """Compute the dense spectrum of ``A`` and select the target pair.

    The target is the eigenvalue closest to ``target_sigma``, or the one at
    position ``index`` in ascending order when given.

    :raises OracleError: when ``A`` is larger than ``n_cap`` or the dense
                         eigenpairs fail their residual self-check
    """
    n = A.n
    if n > n_cap:
        msg = f"dense oracle limited to order {n_cap}, matrix has order {n}"
        raise exceptions.OracleError(msg)
    dense = A.to_dense()
    eig = _tridiag.dense_eigh(dense)
    values, vectors = eig.eigenvalues, eig.eigenvectors

    residual = np.linalg.norm(dense @ vectors - vectors * values, axis=0)
    worst = float(np.max(residual))
    if worst > RESIDUAL_TOLERANCE * max(A.one_norm, 1.0):
        msg = f"dense eigenpairs failed the residual check ({worst:.3e})"
        raise exceptions.OracleError(msg)

    if index is None:
        index = select_index(values, target_sigma)
    elif not 0 <= index < n:
        msg = f"target index {index} out of range for order {n}"
        raise exceptions.OracleError(msg)
    lam = float(values[index])
    others = np.delete(values, index)
    gap = float(np.min(np.abs(others - lam))) if others.size else math.inf
    spread = float(values[-1] - values[0])
    degenerate = gap <= DEGENERATE_GAP * A.one_norm
    if degenerate:
        LOG.warning(
            "Target eigenvalue %(lam).15g has a degenerate gap %(gap).3e, "
            "bound checks disabled",
            {"lam": lam, "gap": gap},
        )
    beta = spread / gap if gap and math.isfinite(gap) and not degenerate else math.inf
    LOG.info(
        "Oracle: lambda=%(lam).15g gap=%(gap).6g beta=%(beta).6g",
        {"lam": lam, "gap": gap, "beta": beta},
    )
    return SpectralOracle(
        eigenvalues=values,
        eigenvectors=vectors,
        index=index,
        sigma=target_sigma,
        lam=lam,
        x=vectors[:, index].copy(),
        gap=gap,
        spread=spread,
        beta=beta,
        one_norm=A.one_norm,
        degenerate=degenerate,
    )


def angle_to_target(u: types.ComplexVector, oracle: SpectralOracle) -> Angle:
    """Acute angle between ``u`` and the target eigenvector.

    ``tan_phi`` is ``inf`` when ``u`` is orthogonal to the eigenvector.
    """
    u = np.asarray(u, dtype=np.complex128)
    u = u / np.linalg.norm(u)
    xu = np.vdot(oracle.x, u)
    cos_phi = min(abs(xu), 1.0)
    sin_phi = min(float(np.linalg.norm(u - oracle.x * xu)), 1.0)
    tan_phi = sin_phi / cos_phi if cos_phi else math.inf
    return Angle(sin_phi=sin_phi, cos_phi=float(cos_phi), tan_phi=tan_phi)


def _aligned_target(
    x: types.ComplexVector, u: types.ComplexVector
) -> types.ComplexVector:
    xu = np.vdot(x, u)
    return x * (xu / abs(xu)) if abs(xu) else x


class OracleProbe:
    """Measure angles against the oracle eigenvector during a run."""

    def __init__(
        self,
        A: _matio.SparseHermitianMatrix,
        oracle: SpectralOracle,
        richness_cap: int = RICHNESS_N_CAP,
    ) -> None:
        self.A = A
        self.oracle = oracle
        self.richness_cap = richness_cap

    def __call__(
        self,
        estimate: _rqi_driver.EigenEstimate,
        result: _minres.InnerSolveResult | None,
        preconditioner: _tuned_precond.TunedPreconditioner | None,
    ) -> _rqi_driver.ProbeValues:
        u = estimate.u
        x = _aligned_target(self.oracle.x, u)
        angle = angle_to_target(u, self.oracle)
        if result is None:
            return _rqi_driver.ProbeValues(sin_phi=angle.sin_phi, cos_phi=angle.cos_phi)

        values: dict[str, float | None] = {
            "sin_phi": angle.sin_phi,
            "cos_phi": angle.cos_phi,
            "cos_phi_plus_xi_cos_psi": angle.cos_phi,
        }
        if result.xi > 0.0:
            xd = np.vdot(x, result.d)
            cos_psi = float(xd.real)
            f = result.d - x * xd
            sin_psi = float(np.linalg.norm(f))
            values["cos_psi"] = cos_psi
            values["sin_psi"] = sin_psi
            values["cos_phi_plus_xi_cos_psi"] = angle.cos_phi + result.xi * cos_psi
            if angle.cos_phi:
                # u - (A - theta I) w = -xi d, projected on x, over x* u.
                values["eps_m"] = -result.xi * cos_psi / angle.cos_phi
            values["cos_varphi"] = self._cos_varphi(estimate, x, angle, f, sin_psi)
        if preconditioner is not None and self.A.n <= self.richness_cap:
            values["sin_phi_hat"] = _sin_phi_hat(self.A, estimate, preconditioner)
        return _rqi_driver.ProbeValues(**values)  # type: ignore[arg-type]

    def _cos_varphi(
        self,
        estimate: _rqi_driver.EigenEstimate,
        x: types.ComplexVector,
        angle: Angle,
        f: types.ComplexVector,
        sin_psi: float,
    ) -> float | None:
        if not angle.sin_phi or not sin_psi:
            return None
        e = (estimate.u - x * angle.cos_phi) / angle.sin_phi
        ae = _matio.shifted_matvec(self.A, estimate.theta, e)
        norm = float(np.linalg.norm(ae))
        if not norm:
            return None
        return float(abs(np.vdot(f / sin_psi, ae)) / norm)


def _sin_phi_hat(
    A: _matio.SparseHermitianMatrix,
    estimate: _rqi_driver.EigenEstimate,
    preconditioner: _tuned_precond.TunedPreconditioner,
) -> float:
    L = preconditioner.factor
    shifted = A.to_dense()
    shifted[np.diag_indices(A.n)] -= estimate.theta
    tmp = scipy.linalg.solve_triangular(L, shifted, lower=True)
    B = scipy.linalg.solve_triangular(L, tmp.conj().T, lower=True).conj().T
    B = 0.5 * (B + B.conj().T)
    eig = _tridiag.dense_eigh(B)
    y1 = eig.eigenvectors[:, int(np.argmin(np.abs(eig.eigenvalues)))]
    b = scipy.linalg.solve_triangular(L, estimate.u, lower=True)
    b /= np.linalg.norm(b)
    cos = min(abs(np.vdot(y1, b)), 1.0)
    return math.sqrt(max(0.0, 1.0 - cos * cos))


def _check_oracle(oracle: SpectralOracle) -> None:
    if oracle.degenerate:
        msg = "oracle gap is degenerate, bounds involving beta are undefined"
        raise exceptions.OracleError(msg)


def _pairs(
    trace: _rqi_driver.OuterTrace,
) -> list[tuple[_rqi_driver.TraceRecord, _rqi_driver.TraceRecord]]:
    records = list(trace)
    return [
        (cur, nxt)
        for cur, nxt in zip(records, records[1:], strict=False)
        if cur.solved and nxt.k == cur.k + 1
    ]


def _in_window(record: _rqi_driver.TraceRecord, oracle: SpectralOracle) -> bool:
    if record.r_norm <= oracle.r_floor:
        return False
    return record.sin_phi is None or record.sin_phi > oracle.sin_floor


def _asymptotic(record: _rqi_driver.TraceRecord) -> bool:
    return record.sin_phi is not None and record.sin_phi <= ASYMPTOTIC_SIN_PHI


def _usable_xi(record: _rqi_driver.TraceRecord) -> bool:
    """Whether ``1 - xi_k`` is a meaningful positive factor for the step."""
    return not record.stagnated and (record.xi_achieved or 0.0) < 1.0


def _tan(sin: float) -> float:
    cos = math.sqrt(max(0.0, 1.0 - sin * sin))
    return sin / cos if cos else math.inf


def _require_angles(record: _rqi_driver.TraceRecord) -> float:
    if record.sin_phi is None:
        msg = f"record {record.k} has no oracle-backed angle"
        raise exceptions.InsufficientDataError(msg)
    return record.sin_phi


def verify_angle_bound(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> BoundReport:
    """Check the one-step angle bound

    ``tan(phi_{k+1}) <= 2 beta (sin phi_k + xi_k sin psi_k)
    / |cos phi_k + xi_k cos psi_k| sin^2 phi_k``.

    Violations beyond 10% slack are flagged. An exact solve drops the
    ``psi`` terms.

    :raises ValueError: when an inexact step lacks residual direction data
    """
    _check_oracle(oracle)
    checks = []
    for cur, nxt in _pairs(trace):
        sin_k = _require_angles(cur)
        sin_next = _require_angles(nxt)
        xi = cur.xi_achieved or 0.0
        cos_k = math.sqrt(max(0.0, 1.0 - sin_k * sin_k))
        if xi > 0.0:
            if cur.cos_psi is None or cur.sin_psi is None:
                msg = f"step {cur.k} has xi={xi:.3e} but no residual direction data"
                raise ValueError(msg)
            numerator = sin_k + xi * cur.sin_psi
            denominator = abs(cos_k + xi * cur.cos_psi)
        else:
            numerator = sin_k
            denominator = cos_k
        rhs = (
            2.0 * oracle.beta * numerator / denominator * sin_k**2
            if denominator
            else math.inf
        )
        lhs = _tan(sin_next)
        skipped = cur.flagged or not _usable_xi(cur) or sin_next <= oracle.sin_floor
        checks.append(
            BoundCheck(cur.k, lhs, rhs, lhs <= (1.0 + BOUND_SLACK) * rhs, skipped),
        )
    return BoundReport("angle_bound", tuple(checks))


def verify_residual_bound(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> BoundReport:
    """Residual form ``||r_{k+1}|| <= 8 beta^2 xi_k / (c gap) ||r_k||^2``.

    ``c`` is the measured ``|cos phi_k + xi_k cos psi_k|``. Reported only.
    """
    _check_oracle(oracle)
    checks = []
    for cur, nxt in _pairs(trace):
        xi = cur.xi_achieved or 0.0
        c = cur.cos_phi_plus_xi_cos_psi
        if xi <= 0.0 or c is None:
            continue
        rhs = (
            8.0 * oracle.beta**2 * xi / (abs(c) * oracle.gap) * cur.r_norm**2
            if c
            else math.inf
        )
        skipped = cur.flagged or not _in_window(nxt, oracle)
        checks.append(
            BoundCheck(
                cur.k, nxt.r_norm, rhs, nxt.r_norm <= (1.0 + BOUND_SLACK) * rhs, skipped
            ),
        )
    return BoundReport("residual_bound", tuple(checks), asserted=False)


def expected_classification(policy: _policies.TolerancePolicy) -> Classification:
    if isinstance(policy, _policies.QuadraticNearOne):
        return "quadratic"
    if isinstance(policy, _policies.LinearNearOne):
        return "linear"
    return "cubic"


def classify_order(order: float) -> Classification:
    if order >= 2.5:
        return "cubic"
    if order >= 1.6:
        return "quadratic"
    if order >= 0.6:
        return "linear"
    return "none"


def _window_pairs(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> list[tuple[_rqi_driver.TraceRecord, _rqi_driver.TraceRecord]]:
    window = [r for r in trace if _in_window(r, oracle)]
    if len(window) < 3:
        msg = f"need at least 3 converging iterates above the rounding floor, got {len(window)}"
        raise exceptions.InsufficientDataError(msg)
    ks = {r.k for r in window}
    pairs = [
        (cur, nxt)
        for cur, nxt in _pairs(trace)
        if cur.k in ks
        and nxt.k in ks
        and not cur.flagged
        and _usable_xi(cur)
        and (cur.sin_phi is None or _asymptotic(cur))
    ]
    if len(pairs) < 2:
        msg = (
            "need at least 2 unflagged converging steps with "
            f"sin(phi_k) <= {ASYMPTOTIC_SIN_PHI:g}, got {len(pairs)}"
        )
        raise exceptions.InsufficientDataError(msg)
    return pairs


def _ratios(values: Sequence[tuple[float, float]]) -> dict[int, tuple[float, ...]]:
    return {p: tuple(b / a**p for a, b in values) for p in (1, 2, 3)}


def verify_convergence_order(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
    policy: _policies.TolerancePolicy,
) -> RateReport:
    """Classify the convergence order and evaluate the rate bounds.

    The order is the slope of ``log sin(phi_{k+1})`` against ``log sin(phi_k)``
    on oracle-backed traces and of the residual norms otherwise.
    ``|cos varphi|`` is back-solved per step from the bound of the observed
    regime: for cubic runs the largest value consistent with the cubic
    residual bound, for quadratic and linear runs the smallest value meeting
    the tolerance condition with the fitted ``eta`` or ``zeta``.

    Only steps starting at ``sin(phi_k) <= 1e-2`` enter the fit, and steps
    whose inner solve stagnated or reached ``xi_k >= 1`` are left out.

    :raises InsufficientDataError: with fewer than 3 converging iterates or
                                   fewer than 2 usable asymptotic steps
    """
    _check_oracle(oracle)
    pairs = _window_pairs(trace, oracle)
    beta, gap = oracle.beta, oracle.gap
    r_pairs = [(cur.r_norm, nxt.r_norm) for cur, nxt in pairs]
    sin_pairs = [
        (cur.sin_phi, nxt.sin_phi)
        for cur, nxt in pairs
        if cur.sin_phi is not None and nxt.sin_phi is not None
    ]
    # Angles carry no factor ||(A - lambda I) e_k|| that drifts in early steps.
    fitted_on = "sin_phi" if len(sin_pairs) == len(pairs) else "r_norm"
    basis = sin_pairs if fitted_on == "sin_phi" else r_pairs
    fit = scipy.stats.linregress(
        [math.log(a) for a, _ in basis],
        [math.log(b) for _, b in basis],
    )
    order = float(fit.slope)
    classification = classify_order(order)

    cubic_factor = tuple(b / a**3 for a, b in sin_pairs)
    cubic_bound = tuple(2.0 * beta for _ in sin_pairs)

    backsolved: list[float] = []
    eta = eta_spread = zeta = None
    if classification == "cubic":
        # r_{k+1} <= 16 beta^2 / gap^2 (1 + 2 xi beta / |cos varphi|) / (1 - xi)
        # r_k^3, solved for |cos varphi| with K the observed ratio to the
        # exact-solve part.
        for cur, nxt in pairs:
            xi = cur.xi_achieved or 0.0
            K = nxt.r_norm * (1.0 - xi) * gap**2 / (16.0 * beta**2 * cur.r_norm**3)
            backsolved.append(
                1.0 if K <= 1.0 else min(1.0, 2.0 * xi * beta / (K - 1.0))
            )
    elif classification == "quadratic":
        etas = [nxt.r_norm * gap / (4.0 * beta * cur.r_norm**2) for cur, nxt in pairs]
        eta = max(etas)
        eta_spread = max(etas) / min(etas)
        # Quadratic regime condition 1 - xi >= 6 beta ||r|| / (eta gap |cos varphi|)
        # solved for |cos varphi|.
        for cur, _ in pairs:
            xi = cur.xi_achieved or 0.0
            backsolved.append(6.0 * beta * cur.r_norm / (eta * gap * (1.0 - xi)))
    elif classification == "linear":
        zeta = max(nxt.r_norm / cur.r_norm for cur, nxt in pairs)
        # Linear regime condition
        # 1 - xi >= 48 beta^3 ||r||^2 / (zeta gap^2 |cos varphi|) solved for
        # |cos varphi|.
        for cur, _ in pairs:
            xi = cur.xi_achieved or 0.0
            backsolved.append(
                48.0 * beta**3 * cur.r_norm**2 / (zeta * gap**2 * (1.0 - xi)),
            )

    direct = tuple(
        cur.cos_varphi for cur, _ in pairs if cur.cos_varphi is not None
    )
    c_values = list(direct) or backsolved or [1.0]
    c_floor = max(min(c_values), EPS)
    inexact_bound = tuple(
        2.0 * beta / (1.0 - xi) + 4.0 * xi * beta**2 / ((1.0 - xi) * c_floor)
        for xi in ((cur.xi_achieved or 0.0) for cur, _ in pairs)
    )

    report = RateReport(
        classification=classification,
        expected=expected_classification(policy),
        fitted_order=order,
        fitted_on=fitted_on,
        window=tuple(cur.k for cur, _ in pairs) + (pairs[-1][1].k,),
        r_ratios=_ratios(r_pairs),
        sin_ratios=_ratios(sin_pairs),
        cubic_factor=cubic_factor,
        cubic_factor_bound=cubic_bound,
        inexact_factor_bound=inexact_bound,
        cos_phi_backsolved=tuple(backsolved),
        cos_phi_direct=direct,
        eta=eta,
        eta_spread=eta_spread,
        zeta=zeta,
    )
    LOG.info(
        "Rate: order %(order).2f classified %(cls)s (expected %(exp)s)",
        {"order": order, "cls": classification, "exp": report.expected},
    )
    return report


def w_norm_growth(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> GrowthReport:
    """Fit ``log ||w_{k+1}||`` against ``-log ||r_k||`` and check the lower bound.

    The slope is about 2, 1 and 0 for cubic, quadratic and linear regimes.
    The lower bound ``||w_{k+1}|| >= (1 - xi_k) gap / (4 beta ||r_k||^2)`` is
    checked with 10% slack on the asymptotic iterates.

    :raises InsufficientDataError: with fewer than 3 usable inner solves
    """
    _check_oracle(oracle)
    points = [
        r
        for r in trace
        if r.solved
        and r.w_norm
        and not r.flagged
        and _usable_xi(r)
        and _in_window(r, oracle)
    ]
    if len(points) < 3:
        msg = f"need at least 3 converging inner solves, got {len(points)}"
        raise exceptions.InsufficientDataError(msg)
    fit = scipy.stats.linregress(
        [-math.log(r.r_norm) for r in points],
        [math.log(typing.cast("float", r.w_norm)) for r in points],
    )
    checks = []
    for r in points:
        if not _asymptotic(r):
            continue
        xi = r.xi_achieved or 0.0
        bound = (1.0 - xi) * oracle.gap / (4.0 * oracle.beta * r.r_norm**2)
        w = typing.cast("float", r.w_norm)
        checks.append(BoundCheck(r.k, w, bound, (1.0 + BOUND_SLACK) * w >= bound))
    return GrowthReport(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        points=tuple(r.k for r in points),
        lower_bound=BoundReport("w_lower_bound", tuple(checks)),
    )


def verify_residual_relation(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> BoundReport:
    """``||r_{k+1}|| <= sqrt((1 + xi_k) / (1 - xi_k)) 4 beta / gap ||r_k||^2``.

    Only steps in the asymptotic window are asserted. Steps whose solve
    stagnated or reached ``xi_k >= 1`` are reported as skipped.
    """
    _check_oracle(oracle)
    checks = []
    for cur, nxt in _pairs(trace):
        if not _asymptotic(cur):
            continue
        if not _usable_xi(cur):
            checks.append(BoundCheck(cur.k, nxt.r_norm, math.inf, True, skipped=True))
            continue
        xi = cur.xi_achieved or 0.0
        factor = math.sqrt((1.0 + xi) / (1.0 - xi))
        rhs = factor * 4.0 * oracle.beta / oracle.gap * cur.r_norm**2
        skipped = cur.flagged or not _in_window(nxt, oracle)
        checks.append(
            BoundCheck(
                cur.k, nxt.r_norm, rhs, nxt.r_norm <= (1.0 + BOUND_SLACK) * rhs, skipped
            ),
        )
    return BoundReport("residual_relation", tuple(checks))


def verify_rayleigh_optimality(trace: _rqi_driver.OuterTrace) -> BoundReport:
    """``||r_{k+1}|| <= sqrt(1 - xi_k^2) / ||w_{k+1}||`` on unpreconditioned steps."""
    checks = []
    for cur, nxt in _pairs(trace):
        if cur.preconditioned or not cur.w_norm:
            continue
        xi = min(cur.xi_achieved or 0.0, 1.0)
        rhs = math.sqrt(1.0 - xi * xi) / cur.w_norm
        checks.append(
            BoundCheck(cur.k, nxt.r_norm, rhs, nxt.r_norm <= rhs + ABSOLUTE_SLACK),
        )
    return BoundReport("rayleigh_optimality", tuple(checks))


def verify_spectral_bounds(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> BoundReport:
    """``gap sin^2 phi_k <= |lambda - theta_k| <= spread sin^2 phi_k``.

    The lower half needs an extremal target; for interior targets the report
    is not asserted.
    """
    _check_oracle(oracle)
    checks = []
    for r in trace:
        if r.sin_phi is None:
            continue
        s2 = r.sin_phi**2
        error = abs(oracle.lam - r.theta)
        low, high = oracle.gap * s2, oracle.spread * s2
        holds = low <= error + ABSOLUTE_SLACK and error <= high + ABSOLUTE_SLACK
        checks.append(BoundCheck(r.k, error, high, holds))
    return BoundReport("spectral_bounds", tuple(checks), asserted=oracle.extremal)


def verify_parlett_sandwich(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> BoundReport:
    """``||r_k|| / spread <= sin phi_k <= 2 ||r_k|| / gap`` at every iterate."""
    _check_oracle(oracle)
    checks = []
    for r in trace:
        if r.sin_phi is None:
            continue
        low = r.r_norm / oracle.spread if oracle.spread else 0.0
        high = 2.0 * r.r_norm / oracle.gap
        holds = low <= r.sin_phi + ABSOLUTE_SLACK and r.sin_phi <= high + ABSOLUTE_SLACK
        checks.append(BoundCheck(r.k, r.sin_phi, high, holds))
    return BoundReport("parlett_sandwich", tuple(checks))


def direction_alignment(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
) -> DirectionReport:
    """Residual direction statistics of a run.

    Counts the unpreconditioned steps with ``xi_k > sin phi_k`` where
    ``cos psi_k`` has the sign opposite to ``cos phi_k``. Preconditioned
    steps are counted apart, only ``|cos psi_k|`` tends to one for them.
    Fits on the asymptotic iterates the constants of
    ``1 + cos psi_k <= C sin^2 phi_k`` (unpreconditioned),
    ``1 - |cos psi_k| <= C sin^2 phi_k`` (preconditioned),
    ``sin psi_k <= C sin phi_k`` and
    ``1 - xi_k <= |cos phi_k + xi_k cos psi_k| + C sin^2 phi_k``.
    """
    sign_steps = opposite = 0
    precond_steps = precond_opposite = 0
    near_minus_one: list[float] = []
    preconditioned: list[float] = []
    sin_psi_ratio: list[float] = []
    positiveness: list[float] = []
    for r in trace:
        if r.cos_psi is None or r.sin_phi is None or r.xi_achieved is None:
            continue
        if r.sin_phi <= oracle.sin_floor:
            continue
        if r.xi_achieved > r.sin_phi:
            if r.preconditioned:
                precond_steps += 1
                if r.cos_psi < 0.0:
                    precond_opposite += 1
            else:
                sign_steps += 1
                if r.cos_psi < 0.0:
                    opposite += 1
        if not _asymptotic(r):
            continue
        s2 = r.sin_phi**2
        if r.preconditioned:
            preconditioned.append((1.0 - abs(r.cos_psi)) / s2)
        elif r.cos_psi < 0.0:
            near_minus_one.append((1.0 + r.cos_psi) / s2)
        if r.sin_psi is not None:
            sin_psi_ratio.append(r.sin_psi / r.sin_phi)
        if r.cos_phi_plus_xi_cos_psi is not None:
            positiveness.append(
                (1.0 - r.xi_achieved - abs(r.cos_phi_plus_xi_cos_psi)) / s2,
            )
    ratio = max(sin_psi_ratio) if sin_psi_ratio else None
    implied = None
    if ratio and math.isfinite(oracle.beta):
        implied = 2.0 * oracle.beta / ratio
    return DirectionReport(
        sign_steps=sign_steps,
        opposite_sign_steps=opposite,
        preconditioned_sign_steps=precond_steps,
        preconditioned_opposite_steps=precond_opposite,
        near_minus_one_constant=max(near_minus_one) if near_minus_one else None,
        preconditioned_constant=max(preconditioned) if preconditioned else None,
        sin_psi_ratio=ratio,
        implied_cos_varphi=implied,
        positiveness_constant=max(positiveness) if positiveness else None,
    )


def simoncini_elden_comparison(
    trace: _rqi_driver.OuterTrace,
) -> tuple[ComparisonEntry, ...]:
    """Evaluate the ``eps_m`` based bounds on ``||w_{k+1}||`` and ``||r_{k+1}||``.

    ``||w_{k+1}|| >= |1 - eps_m| cos^3 phi_k / (sin phi_k ||r_k||)`` and
    ``||r_{k+1}|| <= sin phi_k / cos^3 phi_k sqrt(1 - xi_k^2) / |1 - eps_m| ||r_k||``,
    for steps with ``xi_k > 1e-10``. Reported, never asserted.
    """
    following = {r.k: r for r in trace}
    entries = []
    for r in trace:
        if (
            r.eps_m is None
            or r.sin_phi is None
            or r.cos_phi is None
            or r.w_norm is None
            or (r.xi_achieved or 0.0) <= 1e-10
            or not r.sin_phi
        ):
            continue
        one_minus = abs(1.0 - r.eps_m)
        cos3 = r.cos_phi**3
        w_lower = one_minus * cos3 / (r.sin_phi * r.r_norm)
        nxt = following.get(r.k + 1)
        r_bound = None
        if one_minus and cos3:
            xi = min(r.xi_achieved or 0.0, 1.0)
            r_bound = r.sin_phi / cos3 * math.sqrt(1.0 - xi * xi) / one_minus * r.r_norm
        entries.append(
            ComparisonEntry(
                k=r.k,
                eps_m=r.eps_m,
                w_norm=r.w_norm,
                w_lower_bound=w_lower,
                r_next=None if nxt is None else nxt.r_norm,
                r_bound=r_bound,
            ),
        )
    return tuple(entries)


def preconditioned_richness(trace: _rqi_driver.OuterTrace) -> RichnessReport:
    """Ratios ``c1 = sin(phi_hat_k) / sin(phi_k)`` of preconditioned steps."""
    steps = []
    c1 = []
    for r in trace:
        if r.sin_phi_hat is None or not r.sin_phi:
            continue
        steps.append(r.k)
        c1.append(r.sin_phi_hat / r.sin_phi)
    return RichnessReport(tuple(steps), tuple(c1))


DERIVED_FIELDS = (
    "holds",
    "max_ratio",
    "ratio",
    "matches",
    "cos_phi_min",
    "opposite_fraction",
    "c1_max",
    "bounded",
)


class VerificationReport(typing.TypedDict):
    policy: str
    oracle: dict[str, typing.Any]
    asymptotic_window: str
    checks: dict[str, typing.Any]
    notes: list[str]


def as_jsonable(value: typing.Any) -> typing.Any:
    """Convert reports into JSON-compatible values, non-finite floats as strings."""
    if hasattr(value, "_asdict"):
        out = {k: as_jsonable(v) for k, v in value._asdict().items()}
        for name in DERIVED_FIELDS:
            if isinstance(getattr(type(value), name, None), property):
                out[name] = as_jsonable(getattr(value, name))
        return out
    if isinstance(value, dict):
        return {str(k): as_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [as_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else str(f)
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    return value


def _section(
    checks: dict[str, typing.Any],
    notes: list[str],
    name: str,
    func: typing.Callable[[], typing.Any],
) -> None:
    try:
        checks[name] = as_jsonable(func())
    except (
        exceptions.InsufficientDataError,
        exceptions.OracleError,
        ValueError,
    ) as exc:
        checks[name] = {"indeterminate": str(exc)}
        notes.append(f"{name}: {exc}")


def verify_run(
    trace: _rqi_driver.OuterTrace,
    oracle: SpectralOracle,
    policy: _policies.TolerancePolicy,
) -> VerificationReport:
    """Run every applicable check on an oracle-backed trace.

    Sections that cannot be evaluated are reported as indeterminate with the
    reason rather than failing the whole report.
    """
    checks: dict[str, typing.Any] = {}
    notes: list[str] = []
    sections: list[tuple[str, typing.Callable[[], typing.Any]]] = [
        ("rayleigh_optimality", functools.partial(verify_rayleigh_optimality, trace)),
        ("direction_alignment", functools.partial(direction_alignment, trace, oracle)),
        ("simoncini_elden", functools.partial(simoncini_elden_comparison, trace)),
        ("preconditioned_richness", functools.partial(preconditioned_richness, trace)),
    ]
    if oracle.degenerate:
        notes.append("degenerate eigenvalue gap, bound checks skipped")
    else:
        sections += [
            ("angle_bound", functools.partial(verify_angle_bound, trace, oracle)),
            ("residual_bound", functools.partial(verify_residual_bound, trace, oracle)),
            (
                "rate",
                functools.partial(verify_convergence_order, trace, oracle, policy),
            ),
            ("w_norm_growth", functools.partial(w_norm_growth, trace, oracle)),
            (
                "residual_relation",
                functools.partial(verify_residual_relation, trace, oracle),
            ),
            (
                "spectral_bounds",
                functools.partial(verify_spectral_bounds, trace, oracle),
            ),
            (
                "parlett_sandwich",
                functools.partial(verify_parlett_sandwich, trace, oracle),
            ),
        ]
    for name, func in sections:
        _section(checks, notes, name, func)
    if not oracle.extremal:
        notes.append("interior target, the lower spectral bound is not asserted")
    return VerificationReport(
        policy=_policies.policy_name(policy),
        oracle=as_jsonable(
            {
                "index": oracle.index,
                "lambda": oracle.lam,
                "gap": oracle.gap,
                "spread": oracle.spread,
                "beta": oracle.beta,
                "one_norm": oracle.one_norm,
                "degenerate": oracle.degenerate,
            }
        ),
        asymptotic_window=f"sin(phi_k) <= {ASYMPTOTIC_SIN_PHI:g}",
        checks=checks,
        notes=notes,
    )
