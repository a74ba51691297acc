"""Structural assumption checks on a coefficient table.

The solvability and localization arguments downstream need three things from
the calculus: the diffusion weight is controlled by the gradient transform
(F <= C1*G*G'), the gradient transform is controlled by the time weight
((sqrt(s*F))^lam <= C2*H, with C2 = 1 by construction here), and the
derivative F' stays positive, which is a comparison between (Lambda+1)/Lambda
and sup P*I.  Limits toward s = 0 are never read off at zero: they are
extrapolated trends on geometric subsequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .coeffs import (CoefficientTable, DegeneracyProfile, LambdaChoice,
                     build_table, exp_inv_profile, exp_zeta_profile,
                     power_profile)
from .errors import DomainError

__all__ = [
    "AssumptionReport",
    "check_A1",
    "estimate_A_B",
    "check_almost_decreasing",
    "check_profile",
    "example_catalog",
    "CatalogEntry",
]

C_FLOOR_DEFAULT = 0.5
TREND_POINTS = 8


@dataclass
class AssumptionReport:
    """Verdicts and measured constants for one (profile, Lambda) pair.

    Verdicts carry margins, not bare booleans, so borderline cases (e.g.
    sup P*I equal to its small-s limit) degrade gracefully instead of
    flipping on roundoff.
    """

    profile_kind: str
    profile_params: dict
    Lambda: float
    A_est: float
    B_est: float
    B_slope: float
    C1_est: float
    C2_residual: float
    mu_used: float
    almost_dec_c: float
    sPprimeI_sup: float
    sPprimeI_trend: float
    verdicts: dict = field(default_factory=dict)

    def all_pass(self) -> bool:
        return all(v["pass"] for v in self.verdicts.values())

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _trend_points(table: CoefficientTable) -> np.ndarray:
    """Doubling subsequence from s_min; when fewer than TREND_POINTS
    doublings fit below M the window shrinks, capped at the geometric
    midpoint of [s_min, M] so the fit never leaves the small-s half."""
    lo = table.s_min
    hi = min(table.M, lo * 2.0 ** (TREND_POINTS - 1))
    mid = float(np.sqrt(lo * table.M))
    if hi > mid > lo * 2.0:
        hi = mid
    return np.geomspace(lo, hi, TREND_POINTS)


def check_A1(table: CoefficientTable, trend_factor: float = 2.0):
    """Estimate C1 = sup F/(G*G') over the nodes.

    Passes when the sup is finite and the ratio does not run away toward
    s_min: consecutive values on the smallest nodes must stay within
    trend_factor of each other.
    """
    ratio = table.F / (table.G * np.sqrt(table.Fprime))
    if not np.all(np.isfinite(ratio)):
        return float("inf"), False, {"reason": "nonfinite ratio"}
    C1 = float(np.max(ratio))
    head = ratio[:TREND_POINTS]
    steps = head[:-1] / head[1:]
    bounded = bool(np.all(steps < trend_factor) and np.all(steps > 1.0 / trend_factor))
    return C1, bounded, {"small_s_ratio": head.tolist()}


def estimate_A_B(profile: DegeneracyProfile, table: CoefficientTable):
    """Sup and small-s trend of P*I.

    A_est is the nodewise max.  B_est is a linear fit of P*I against log s on
    the doubling subsequence near s_min, read off at s_min; the slope is
    reported so callers can see whether the trend has settled.
    """
    PI_nodes = profile(table.s) * table.I
    A_est = float(np.max(PI_nodes))
    pts = _trend_points(table)
    PI_pts = profile(pts) * np.array([table.eval("I", p) for p in pts])
    t = np.log(pts)
    slope, intercept = np.polyfit(t, PI_pts, 1)
    B_est = float(max(0.0, slope * t[0] + intercept))
    return A_est, B_est, float(slope)


def _dP(profile: DegeneracyProfile, s: np.ndarray) -> np.ndarray:
    if profile.analytic_dP is not None:
        return np.asarray(profile.analytic_dP(s), dtype=float)
    # central difference on a relative stencil; profiles are smooth in log s
    d = 1e-6
    return (profile(s * (1 + d)) - profile(s * (1 - d))) / (2 * d * s)


def check_almost_decreasing(profile: DegeneracyProfile, table: CoefficientTable,
                            mu: Optional[float] = None,
                            c_floor: float = C_FLOOR_DEFAULT):
    """Almost-decreasing test for Q = P*I^mu.

    Q is almost decreasing when Q(t) >= c*Q(s) for every node pair t < s with
    c >= c_floor.  With mu = None the exponent is taken from the sufficient
    condition: mu = sup s*P'(s)*I(s), which makes Q nonincreasing whenever
    that sup is attained uniformly.  Work happens in logs; I^mu overflows
    doubles otherwise.
    """
    sPpI = table.s * _dP(profile, table.s) * table.I
    sup_sPpI = float(np.max(sPpI))
    mu_used = sup_sPpI if mu is None else float(mu)
    if mu_used <= 0.0:
        raise DomainError(f"almost-decreasing exponent must be positive, got {mu_used:g}")
    Qlog = np.log(profile(table.s)) + mu_used * np.log(table.I)
    # c = min over t < s of Q(t)/Q(s) = exp(min_j
    #     (running min of Qlog up to j-1) - Qlog[j])
    runmin = np.minimum.accumulate(Qlog)[:-1]
    c = float(np.exp(np.min(runmin - Qlog[1:])))
    return c, bool(c >= c_floor), mu_used, sup_sPpI


def _sPprimeI_trend(profile: DegeneracyProfile, table: CoefficientTable) -> float:
    pts = _trend_points(table)
    I_pts = np.array([table.eval("I", p) for p in pts])
    vals = pts * _dP(profile, pts) * I_pts
    slope, intercept = np.polyfit(np.log(pts), vals, 1)
    return float(slope * np.log(pts[0]) + intercept)


def check_profile(profile: DegeneracyProfile, lam: LambdaChoice,
                  table: Optional[CoefficientTable] = None,
                  c_floor: float = C_FLOOR_DEFAULT,
                  mu: Optional[float] = None,
                  **build_opts) -> AssumptionReport:
    """Run the full battery of structural checks and collect a report."""
    if table is None:
        table = build_table(profile, lam, **build_opts)
    C1, a1_ok, a1_detail = check_A1(table)
    A_est, B_est, B_slope = estimate_A_B(profile, table)
    c, ad_ok, mu_used, sup_sPpI = check_almost_decreasing(
        profile, table, mu=mu, c_floor=c_floor)
    res = table.identity_residuals()
    C2_residual = res["sF_pow_vs_H"]
    growth = (lam.Lambda + 1.0) / lam.Lambda
    p2_margin = growth - A_est

    report = AssumptionReport(
        profile_kind=profile.kind,
        profile_params=dict(profile.params),
        Lambda=lam.Lambda,
        A_est=A_est,
        B_est=B_est,
        B_slope=B_slope,
        C1_est=C1,
        C2_residual=C2_residual,
        mu_used=mu_used,
        almost_dec_c=c,
        sPprimeI_sup=sup_sPpI,
        sPprimeI_trend=_sPprimeI_trend(profile, table),
        verdicts={
            "A1": {"pass": a1_ok, "C1": C1, **a1_detail},
            "A2": {"pass": bool(C2_residual <= 10.0 * table.quad_tol),
                   "residual": C2_residual},
            "P2": {"pass": bool(p2_margin > 0.0), "margin": p2_margin,
                   "growth": growth},
            "almost_decreasing": {"pass": ad_ok, "c": c, "c_floor": c_floor},
        },
    )
    return report


# -- worked example catalog ------------------------------------------------

@dataclass
class CatalogEntry:
    """One worked degeneracy example with its expected measured limits."""

    name: str
    make_profile: Callable[[], DegeneracyProfile]
    Lambda: float
    build_opts: dict
    expected: dict  # keys: A_est/B_est/sPprimeI_trend -> (value, tol, mode)

    def profile(self) -> DegeneracyProfile:
        return self.make_profile()

    def run(self) -> AssumptionReport:
        return check_profile(self.profile(), LambdaChoice(self.Lambda),
                             **self.build_opts)

    def matches(self, report: AssumptionReport):
        """Compare measured estimates against the expected limits.

        Relative mode uses the 10% extrapolation margin; absolute mode is for
        limits equal to zero, where a relative margin is meaningless.
        """
        failures = []
        for key, (value, tol, mode) in self.expected.items():
            got = getattr(report, key)
            err = abs(got - value) if mode == "abs" else abs(got - value) / abs(value)
            if err > tol:
                failures.append(f"{key}: got {got:.6g}, want {value:g} (tol {tol:g} {mode})")
        if not report.all_pass():
            bad = [k for k, v in report.verdicts.items() if not v["pass"]]
            failures.append(f"verdicts failed: {bad}")
        return len(failures) == 0, failures


def _zeta_bounded(s):
    return 1.0 + np.asarray(s, dtype=float) / 2.0


def _zeta_bounded_integral(s):
    s = np.asarray(s, dtype=float)
    return -np.log(s) + (1.0 - s) / 2.0


def _zeta_slow(s):
    return 1.0 - np.log(np.asarray(s, dtype=float))


def _zeta_slow_integral(s):
    s = np.asarray(s, dtype=float)
    return -np.log(s) + 0.5 * np.log(s) ** 2


def example_catalog() -> list:
    """The four worked degeneracies, with limits the estimates must reproduce.

    1. power law s^beta: P*I identically 1/beta, s*P'*I identically 1
    2. essential singularity exp(-1/s^beta): P*I tends to 0, s*P'*I to 1
    3. bounded rate zeta(s) = 1 + s/2: P*I tends to 1/zeta(0) = 1
    4. slowly diverging rate zeta(s) = 1 - log s: P*I tends to 0 like 1/zeta,
       s*P'*I to 1

    Exponential-family entries carry profile-specific s_min floors keeping
    1/(s*P) inside double-precision range; their limits are read as trends.
    """
    return [
        CatalogEntry(
            name="power_beta1",
            make_profile=lambda: power_profile(1.0),
            Lambda=1.0,
            build_opts={},
            expected={
                "A_est": (1.0, 0.10, "rel"),
                "B_est": (1.0, 0.10, "rel"),
                "sPprimeI_trend": (1.0, 0.10, "rel"),
            },
        ),
        CatalogEntry(
            name="exp_inv_beta1",
            make_profile=lambda: exp_inv_profile(1.0),
            Lambda=1.0,
            build_opts={"s_min": 0.01},
            expected={
                "B_est": (0.0, 0.05, "abs"),
                "sPprimeI_trend": (1.0, 0.10, "rel"),
            },
        ),
        CatalogEntry(
            name="exp_zeta_bounded",
            make_profile=lambda: exp_zeta_profile(
                _zeta_bounded, _zeta_bounded_integral, kind="exp_zeta"),
            Lambda=1.0,
            build_opts={},
            expected={
                "A_est": (1.0, 0.10, "rel"),
                "B_est": (1.0, 0.10, "rel"),
                "sPprimeI_trend": (1.0, 0.10, "rel"),
            },
        ),
        CatalogEntry(
            name="exp_zeta_slow",
            make_profile=lambda: exp_zeta_profile(
                _zeta_slow, _zeta_slow_integral, kind="exp_zeta_slow"),
            Lambda=1.0,
            build_opts={},
            expected={
                "A_est": (1.0, 0.10, "rel"),
                "B_est": (0.0, 0.10, "abs"),
                "sPprimeI_trend": (1.0, 0.10, "rel"),
            },
        ),
    ]
