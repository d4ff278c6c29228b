"""Equal-budget comparison of the two proxy calibration strategies.

For growing factor counts (factors added cumulatively in a configured
order) the harness calibrates one proxy per strategy at equal algorithmic
cost - the many-transitions budget equals the few-transitions budget times
its secondary paths - then reports, per factor count:

* the regressor count selected by the backward stepwise pass,
* the heteroskedasticity test on the many-transitions residuals (the small
  primary sample of the other strategy cannot support the test),
* the covariance-matrix eigenvalues of both fits,
* how often each strategy produces the smaller asymptotic confidence
  interval across the evaluation scenarios, under both covariance kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import econometrics, proxy
from .errors import ConfigError
from .transitions import ProbableSpace, sample_transitions

__all__ = ["ComparisonEntry", "ComparisonReport", "run_comparison"]

#: Response factory: given the active factor ids, return a ResponseFn over
#: transitions in that subspace.
SubspaceResponses = Callable[[list[str]], proxy.ResponseFn]


@dataclass
class ComparisonEntry:
    """Results for one factor count."""

    factor_ids: list[str]
    regressor_count: int
    bp_statistic: float
    bp_p_value: float
    eigenvalues_lsmc: list[float]
    eigenvalues_cf: list[float]
    homoskedastic: econometrics.IntervalComparison
    heteroskedastic: econometrics.IntervalComparison

    def to_dict(self) -> dict:
        def counts(c: econometrics.IntervalComparison) -> dict:
            return {"lsmc_smaller": c.a_smaller, "cf_smaller": c.b_smaller,
                    "ties": c.ties, "total": c.total}

        return {
            "factors": self.factor_ids,
            "regressor_count": self.regressor_count,
            "bp_statistic": self.bp_statistic,
            "bp_p_value": self.bp_p_value,
            "eigenvalues_lsmc": self.eigenvalues_lsmc,
            "eigenvalues_cf": self.eigenvalues_cf,
            "homoskedastic": counts(self.homoskedastic),
            "heteroskedastic": counts(self.heteroskedastic),
        }


@dataclass
class ComparisonReport:
    n_lsmc: int
    n_cf: int
    p_cf: int
    alpha_ci: float
    seed: int
    entries: list[ComparisonEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_lsmc": self.n_lsmc,
            "n_cf": self.n_cf,
            "p_cf": self.p_cf,
            "alpha_ci": self.alpha_ci,
            "seed": self.seed,
            "entries": [e.to_dict() for e in self.entries],
        }


def run_comparison(
    space: ProbableSpace,
    j_order: Sequence[str],
    responses_for: SubspaceResponses,
    n_cf: int,
    p_cf: int,
    seed: int,
    alpha_ci: float = 0.95,
    degree_cap: int = 3,
    n_lsmc: int | None = None,
) -> ComparisonReport:
    """Run the study for every cumulative factor subset of ``j_order``.

    The many-transitions budget defaults to ``n_cf * p_cf`` and must equal
    it exactly, otherwise the equal-cost premise of the comparison breaks.
    """
    budget = n_cf * p_cf
    if n_lsmc is None:
        n_lsmc = budget
    if n_lsmc != budget:
        raise ConfigError(
            f"equal-budget constraint violated: n_lsmc={n_lsmc} but n_cf*p_cf={budget}"
        )
    ids = list(space.factor_ids)
    missing = [f for f in j_order if f not in ids]
    if missing:
        raise ConfigError(f"comparison order names unknown factors {missing}")

    report = ComparisonReport(n_lsmc=n_lsmc, n_cf=n_cf, p_cf=p_cf, alpha_ci=alpha_ci, seed=seed)
    for j in range(1, len(j_order) + 1):
        active = list(j_order[:j])
        idx = [ids.index(f) for f in active]
        subspace = ProbableSpace(
            factor_ids=tuple(active), lo=space.lo[idx], hi=space.hi[idx], alpha=space.alpha
        )
        response_fn = responses_for(active)

        eps_lsmc = sample_transitions(subspace, n_lsmc, seed=seed + 101 * j)
        lsmc = proxy.calibrate_lsmc(
            eps_lsmc, response_fn, seed=seed + 7 * j, degree_cap=degree_cap
        )
        eps_cf = sample_transitions(subspace, n_cf, seed=seed + 101 * j + 1)
        cf = proxy.calibrate_cf(
            eps_cf, p_cf, response_fn, lsmc.monomials, seed=seed + 7 * j + 1
        )

        if lsmc.monomials:
            design = lsmc.design_matrix(eps_lsmc)
            bp_stat, bp_p = econometrics.breusch_pagan(design, lsmc.residuals)
        else:
            # intercept-only selection (tiny budgets): the test is undefined
            bp_stat, bp_p = float("nan"), float("nan")

        homo = econometrics.compare_interval_lengths(
            lsmc, cf, eps_lsmc, alpha=alpha_ci, kind="homoskedastic"
        )
        hetero = econometrics.compare_interval_lengths(
            lsmc, cf, eps_lsmc, alpha=alpha_ci, kind="white"
        )
        report.entries.append(ComparisonEntry(
            factor_ids=active,
            regressor_count=len(lsmc.monomials),
            bp_statistic=bp_stat,
            bp_p_value=bp_p,
            eigenvalues_lsmc=[float(v) for v in lsmc.cov_homo.eigenvalues()],
            eigenvalues_cf=[float(v) for v in cf.cov_homo.eigenvalues()],
            homoskedastic=homo,
            heteroskedastic=hetero,
        ))
    return report
