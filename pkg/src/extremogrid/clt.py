"""Rate planning and Monte Carlo verification of the limit behaviour.

Given exponents (beta1, beta2) this module derives the threshold and
separation sequences, simulates replicated fields, turns them into scaled
deviations of the empirical dependence estimates around their finite-level
or limiting centers, and assembles the plug-in and Monte Carlo versions of
the limiting covariance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.special import ndtri
from scipy.stats import kstest

from .estimators import (
    AndEvent,
    NoExceedancesError,
    PairEvent,
    SingleEvent,
    empirical_extremogram,
    event_sets,
    mu_hat,
    tau_hat,
)
from .fields import GridField, derive_seed, simulate_field
from .lattice import Grid, LagSet, ball_offsets
from .models import Model
from .theory import (
    Interval,
    dependence_of,
    preasymptotic_exact,
    second_order_coefficient,
    true_extremogram,
)

__all__ = [
    "CltReport",
    "LagDiagnostics",
    "SequencePlan",
    "bias_curve",
    "clt_report",
    "normality_diagnostics",
    "pi_matrix",
    "plan",
    "scaled_deviations",
    "sigma_plugin",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequencePlan:
    """Concrete (n, m, r) with the validity flags of the rate conditions."""

    n: int
    d: int
    beta1: float
    beta2: float
    m: int
    r: int
    a_m: float
    m2_ok: bool
    logm_o_r: bool
    logn_o_r: bool
    bias_ok: bool
    clt_window: bool


def plan(n: int, d: int, beta1: float, beta2: float) -> SequencePlan:
    """Threshold index m = round(n**beta1) and separation r = round(n**beta2).

    The flags are pure functions of the exponents: the block condition
    m**2 r**2 / n -> 0 needs 2 beta1 + 2 beta2 < 1, logarithmic domination
    of r holds for any positive beta2, a vanishing centering bias needs
    beta1 > 1/3, and the window flag marks exponents for which both the
    limit statement and the bias condition hold.
    """
    if not 0.0 < beta2 < beta1 < 1.0:
        raise ValueError(f"need 0 < beta2 < beta1 < 1, got ({beta1}, {beta2})")
    if n < 2 or d < 1:
        raise ValueError(f"invalid grid parameters n={n}, d={d}")
    m = max(1, round(n**beta1))
    r = max(1, round(n**beta2))
    if not r < m < n:
        raise ValueError(
            f"rounded sequences violate r < m < n: n={n}, m={m}, r={r}"
        )
    return SequencePlan(
        n=n,
        d=d,
        beta1=beta1,
        beta2=beta2,
        m=m,
        r=r,
        a_m=float(m) ** d,
        m2_ok=2.0 * beta1 + 2.0 * beta2 < 1.0,
        logm_o_r=beta2 > 0.0,
        logn_o_r=beta2 > 0.0,
        bias_ok=beta1 > 1.0 / 3.0,
        clt_window=(1.0 / 3.0 < beta1 < 0.5)
        and (0.0 < beta2 < min(beta1, 0.5 - beta1)),
    )


def _center_values(
    model: Model, plan_: SequencePlan, lag_set: LagSet, a_set: Interval,
    b_set: Interval, center: str,
) -> np.ndarray:
    v2 = dependence_of(model)
    if center == "preasymptotic":
        return np.array(
            [
                preasymptotic_exact(v2, h, a_set, b_set, plan_.m, plan_.d)
                for h in lag_set.lags
            ]
        )
    if center == "true":
        return np.array(
            [true_extremogram(v2, h, a_set, b_set) for h in lag_set.lags]
        )
    raise ValueError(f"unknown centering {center!r}; use 'preasymptotic' or 'true'")


def scaled_deviations(
    model: Model,
    plan_: SequencePlan,
    lag_set: LagSet,
    a_set: Interval,
    b_set: Interval,
    reps: int,
    master_seed: int,
    center: str = "preasymptotic",
    n_jobs: int = 1,
    keep_fields: int = 0,
):
    """Replicated deviations (n/m)**(d/2) * (estimate - center).

    Returns (samples, estimates, discarded, kept_fields): one row per
    surviving replicate, the raw per-lag estimates, the indices of
    replicates whose denominator had no exceedances, and the first
    ``keep_fields`` simulated fields for covariance plug-ins.
    """
    grid = Grid(n=plan_.n, d=plan_.d)
    centers = _center_values(model, plan_, lag_set, a_set, b_set, center)
    scale = (plan_.n / plan_.m) ** (plan_.d / 2.0)

    def one(rep: int):
        field = simulate_field(model, grid, derive_seed(master_seed, rep))
        try:
            series = empirical_extremogram(
                field, lag_set, a_set, b_set, plan_.a_m, meta={"m": plan_.m}
            )
        except NoExceedancesError:
            return rep, None, field if rep < keep_fields else None
        return rep, series.values, field if rep < keep_fields else None

    if n_jobs == 1:
        results = [one(rep) for rep in range(reps)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(one)(rep) for rep in range(reps))

    rows, discarded, kept = [], [], []
    for rep, values, field in results:
        if values is None:
            discarded.append(rep)
        else:
            rows.append(values)
        if field is not None:
            kept.append(field)
    if discarded:
        log.warning(
            "discarded %d of %d replicates with no exceedances (indices %s)",
            len(discarded), reps, discarded[:10],
        )
    estimates = np.array(rows) if rows else np.empty((0, lag_set.p))
    samples = scale * (estimates - centers[None, :])
    return samples, estimates, tuple(discarded), kept


def sigma_plugin(
    fields: list[GridField],
    lag_set: LagSet,
    a_set: Interval,
    b_set: Interval,
    m: int,
    r_trunc: int,
    gamma: float | None = None,
) -> np.ndarray:
    """Plug-in estimate of the (p+1) x (p+1) covariance of the tail counts.

    Entries follow the covariance decomposition of the scaled count sums:
    the same-site term uses the frequency of the event intersection, the
    lag terms the joint frequencies over 0 < ||g|| <= r_trunc, and every
    term subtracts the product of the marginal frequencies.  The products
    vanish in the limit, but keeping them makes the estimate usable at
    finite thresholds, where the raw joint frequencies would otherwise
    leak a nonzero contribution from every independent lag.
    """
    if not fields:
        raise ValueError("at least one field is required")
    if gamma is None:
        gamma = lag_set.gamma
    events = event_sets(lag_set, a_set, b_set)
    q = len(events)
    d = lag_set.d
    a_m = float(m) ** d
    sum_lags = [
        tuple(int(c) for c in g)
        for g in ball_offsets(r_trunc, d, lag_set.norm)
        if np.any(g != 0)
    ]
    sigma = np.zeros((q, q))
    for field in fields:
        one = np.zeros((q, q))
        mus = np.array(
            [mu_hat(field, ev, m, gamma=gamma, norm=lag_set.norm) for ev in events]
        )
        for i in range(q):
            for j in range(i, q):
                product = mus[i] * mus[j] / a_m
                ev = events[i] if i == j else AndEvent(events[i], events[j])
                acc = mu_hat(field, ev, m, gamma=gamma, norm=lag_set.norm) - product
                for g in sum_lags:
                    acc += (
                        tau_hat(
                            field, events[i], events[j], g, m,
                            gamma=gamma, norm=lag_set.norm,
                        )
                        - product
                    )
                one[i, j] = acc
                one[j, i] = acc
        sigma += one
    return sigma / len(fields)


def mu_vector(
    fields: list[GridField],
    lag_set: LagSet,
    a_set: Interval,
    b_set: Interval,
    m: int,
    gamma: float | None = None,
) -> tuple[np.ndarray, float]:
    """Averaged scaled frequencies of the pair events and the single event."""
    if not fields:
        raise ValueError("at least one field is required")
    if gamma is None:
        gamma = lag_set.gamma
    pair_events = [PairEvent(a_set, b_set, h) for h in lag_set.lags]
    single = SingleEvent(a_set)
    mu_d = np.zeros(lag_set.p)
    mu_a = 0.0
    for field in fields:
        for i, ev in enumerate(pair_events):
            mu_d[i] += mu_hat(field, ev, m, gamma=gamma, norm=lag_set.norm)
        mu_a += mu_hat(field, single, m, gamma=gamma, norm=lag_set.norm)
    return mu_d / len(fields), mu_a / len(fields)


def pi_matrix(sigma: np.ndarray, mu_a: float, mu_d: np.ndarray) -> np.ndarray:
    """Limiting covariance of the ratio estimates: mu_a**-4 F sigma F'.

    F has the diagonal mu_a block for the pair counts and the column of
    negated pair frequencies against the denominator count.
    """
    sigma = np.asarray(sigma, dtype=float)
    mu_d = np.atleast_1d(np.asarray(mu_d, dtype=float))
    p = mu_d.size
    if sigma.shape != (p + 1, p + 1):
        raise ValueError(f"sigma has shape {sigma.shape}, expected {(p + 1, p + 1)}")
    if mu_a <= 0:
        raise ValueError(f"denominator mass must be positive, got {mu_a}")
    f_mat = np.zeros((p, p + 1))
    f_mat[:, :p] = mu_a * np.eye(p)
    f_mat[:, p] = -mu_d
    return (f_mat @ sigma @ f_mat.T) / mu_a**4


@dataclass(frozen=True)
class LagDiagnostics:
    """Distribution checks for one lag's deviation sample."""

    ks: float
    ks_threshold: float
    qq_corr: float
    variance_ratio: float | None


def normality_diagnostics(
    samples: np.ndarray,
    pi_diag: np.ndarray | None = None,
    ks_coeff: float = 1.36,
) -> list[LagDiagnostics]:
    """Per-lag Kolmogorov-Smirnov distance and quantile correlation.

    The KS distance is taken against the normal with the sample's own
    moments; the threshold ks_coeff / sqrt(N) is calibrated so that
    genuinely normal input passes at roughly the 95% level while
    e.g. uniform input fails.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.ndim != 2:
        raise ValueError("samples must be a (reps, p) array")
    n_samp = x.shape[0]
    if n_samp < 100:
        raise ValueError(f"need at least 100 samples, got {n_samp}")
    probs = (np.arange(1, n_samp + 1) - 0.5) / n_samp
    ref = ndtri(probs)
    out = []
    for j in range(x.shape[1]):
        col = x[:, j]
        mean = float(np.mean(col))
        std = float(np.std(col, ddof=1))
        ks = float(kstest(col, "norm", args=(mean, std)).statistic)
        qq = float(np.corrcoef(np.sort(col), ref)[0, 1])
        ratio = None
        if pi_diag is not None:
            ratio = float(np.var(col, ddof=1) / pi_diag[j])
        out.append(
            LagDiagnostics(
                ks=ks,
                ks_threshold=ks_coeff / np.sqrt(n_samp),
                qq_corr=qq,
                variance_ratio=ratio,
            )
        )
    return out


@dataclass
class CltReport:
    """Everything one replicated deviation experiment produced."""

    plan: SequencePlan
    lags: tuple[tuple[int, ...], ...]
    center: str
    center_values: np.ndarray
    samples: np.ndarray
    discarded: tuple[int, ...]
    sigma_hat: np.ndarray
    mu_d: np.ndarray
    mu_a: float
    pi_plugin: np.ndarray
    pi_mc: np.ndarray
    diagnostics: list[LagDiagnostics]
    meta: dict = dataclass_field(default_factory=dict)

    @property
    def discard_rate(self) -> float:
        total = self.samples.shape[0] + len(self.discarded)
        return len(self.discarded) / total if total else 0.0

    def to_json_dict(self) -> dict:
        return {
            "plan": {
                "n": self.plan.n,
                "d": self.plan.d,
                "beta1": self.plan.beta1,
                "beta2": self.plan.beta2,
                "m": self.plan.m,
                "r": self.plan.r,
                "a_m": self.plan.a_m,
                "m2_ok": self.plan.m2_ok,
                "logm_o_r": self.plan.logm_o_r,
                "logn_o_r": self.plan.logn_o_r,
                "bias_ok": self.plan.bias_ok,
                "clt_window": self.plan.clt_window,
            },
            "lags": [list(h) for h in self.lags],
            "center": self.center,
            "center_values": self.center_values.tolist(),
            "replicates_kept": int(self.samples.shape[0]),
            "replicates_discarded": len(self.discarded),
            "sigma_hat": self.sigma_hat.tolist(),
            "mu_d": self.mu_d.tolist(),
            "mu_a": self.mu_a,
            "pi_plugin": self.pi_plugin.tolist(),
            "pi_mc": self.pi_mc.tolist(),
            "diagnostics": [
                {
                    "lag": list(h),
                    "ks": diag.ks,
                    "ks_threshold": diag.ks_threshold,
                    "qq_corr": diag.qq_corr,
                    "variance_ratio": diag.variance_ratio,
                }
                for h, diag in zip(self.lags, self.diagnostics)
            ],
            "samples": [list(map(float, row)) for row in self.samples],
            "meta": self.meta,
        }


def clt_report(
    model: Model,
    plan_: SequencePlan,
    lag_set: LagSet,
    a_set: Interval,
    b_set: Interval,
    reps: int,
    master_seed: int,
    center: str = "preasymptotic",
    r_trunc: int | None = None,
    sigma_fields: int = 20,
    n_jobs: int = 1,
) -> CltReport:
    """Run the full replicated experiment and assemble the report."""
    samples, _, discarded, kept = scaled_deviations(
        model,
        plan_,
        lag_set,
        a_set,
        b_set,
        reps,
        master_seed,
        center=center,
        n_jobs=n_jobs,
        keep_fields=min(sigma_fields, reps),
    )
    if r_trunc is None:
        r_trunc = plan_.r
    sigma = sigma_plugin(kept, lag_set, a_set, b_set, plan_.m, r_trunc)
    mu_d, mu_a = mu_vector(kept, lag_set, a_set, b_set, plan_.m)
    pi_plug = pi_matrix(sigma, mu_a, mu_d)
    pi_mc = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    diags = normality_diagnostics(samples, pi_diag=np.diag(pi_plug))
    return CltReport(
        plan=plan_,
        lags=lag_set.lags,
        center=center,
        center_values=_center_values(model, plan_, lag_set, a_set, b_set, center),
        samples=samples,
        discarded=discarded,
        sigma_hat=sigma,
        mu_d=mu_d,
        mu_a=mu_a,
        pi_plugin=pi_plug,
        pi_mc=pi_mc,
        diagnostics=diags,
    )


def bias_curve(
    model: Model,
    a_set: Interval,
    b_set: Interval,
    h,
    beta1s,
    ns,
) -> list[dict]:
    """Deterministic centering-bias table over an n sweep.

    For each (n, beta1) the scaled bias (n/m)**(d/2) (rho_m - rho) is
    reported together with its predicted leading term
    (n/m**3)**(d/2) * coefficient / 2 and their ratio.
    """
    v2 = dependence_of(model)
    d = model.d
    hv = tuple(int(c) for c in np.atleast_1d(np.asarray(h, dtype=int)))
    rho = true_extremogram(v2, hv, a_set, b_set)
    coeff = second_order_coefficient(v2, hv, a_set, b_set, rho=rho)
    rows = []
    for beta1 in beta1s:
        for n in ns:
            m = max(2, round(float(n) ** beta1))
            exact = preasymptotic_exact(v2, hv, a_set, b_set, m, d)
            scaled_bias = (n / m) ** (d / 2.0) * (exact - rho)
            reference = (n / m**3) ** (d / 2.0) * coeff / 2.0
            rows.append(
                {
                    "n": int(n),
                    "beta1": float(beta1),
                    "m": int(m),
                    "scaled_bias": float(scaled_bias),
                    "reference": float(reference),
                    "ratio": float(scaled_bias / reference) if reference else float("nan"),
                }
            )
    return rows
