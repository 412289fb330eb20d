"""Two-sided throughput bounds for the perishable queueing-inventory system.

The target system protects the item in production from ageing while the
server is busy ("o" regime); it is not separable for base stock b >= 2.  Two
companion systems with queue-length independent ageing are separable and
bound it: the "minus" system ages all k items (lower bound) and the "plus"
system always protects one item (upper bound).  Their exact throughputs come
from the product form; the target throughput comes from truncation and
simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import perishable_minus, perishable_o, perishable_plus
from .model import InvalidParam, JointModel
from .numerics import auto_truncate, metrics
from .separability import NotSeparable, ProductFormResult, product_form
from .simulate import (
    DepartureValueTable,
    IsotoneReport,
    SimConfig,
    departure_values,
    isotone_check,
    simulate,
)

ORDER_TOL = 1e-9


class NotSeparableBoundSystem(Exception):
    """A bounding system failed the product-form verification; this indicates
    a convention bug in the separable steady state, not a property of the
    model."""


def build_triple(lam, mu, nu, gamma, b) -> tuple[JointModel, JointModel, JointModel]:
    """The (minus, o, plus) systems with shared parameters; verifies the
    pointwise ordering of the three ageing regimes."""
    if not lam < mu:
        raise InvalidParam(f"need lam < mu for ergodic bounding systems, got {lam} >= {mu}")
    lower = perishable_minus(lam, mu, nu, gamma, b)
    target = perishable_o(lam, mu, nu, gamma, b)
    upper = perishable_plus(lam, mu, nu, gamma, b)
    for n in range(8):
        for k in range(b + 1):
            minus_rate = gamma * k
            o_rate = gamma * k if n == 0 else gamma * max(k - 1, 0)
            plus_rate = gamma * max(k - 1, 0)
            if not (plus_rate <= o_rate <= minus_rate):
                raise AssertionError(f"ageing regimes out of order at (n={n}, k={k})")
    return lower, target, upper


def product_form_throughput(model: JointModel, pf: ProductFormResult) -> float:
    """Exact throughput sum_{n>=1} xi(n) mu(n) * sum_{k working} theta(k),
    with the tail summed in closed form over period blocks."""
    marginal = pf.marginal
    N0, p = model.tail_start, model.period
    start = N0 + p  # >= 1, so mu(n) is periodic from here on
    head = sum(marginal.xi(n) * model.service(n) for n in range(1, start))
    block = sum(marginal.xi(start + j) * model.service(start + j) for j in range(p))
    busy = head + block / (1.0 - marginal.tail_ratio)
    working = model.env.working_mask()
    return busy * float(pf.theta[working].sum())


def perishable_b1_closed_form(lam, mu, nu, gamma):
    """Exact steady state of the target system with b = 1:
    pi(n, k) accessor and its throughput."""
    if not lam < mu:
        raise InvalidParam("closed form requires lam < mu")
    C = mu / (mu - lam) * (1.0 + lam / nu) + gamma / nu

    def pi(n, k):
        rho_n = (lam / mu) ** n
        if k == 0:
            return ((lam + gamma) / nu if n == 0 else rho_n * lam / nu) / C
        return rho_n / C

    th = lam * mu / (mu - lam) / C
    return pi, th


@dataclass(frozen=True)
class BoundReport:
    params: dict
    TH_minus: float
    TH_plus: float
    TH_o_truncated: float
    TH_o_sim: object  # ThroughputEstimate or None
    TH_o_closed: float | None  # exact value, only for b = 1
    ordering_holds: bool
    margins: dict
    regime: str  # proved-condition regime vs conjecture regime
    isotone: dict  # system tag -> IsotoneReport
    balance_residuals: dict

    def to_record(self) -> dict:
        rec = {
            "TH_minus": self.TH_minus,
            "TH_o_truncated": self.TH_o_truncated,
            "TH_plus": self.TH_plus,
            "TH_o_closed": self.TH_o_closed,
            "ordering_holds": self.ordering_holds,
            "regime": self.regime,
        }
        rec.update({f"param_{k}": v for k, v in self.params.items()})
        rec.update({f"margin_{k}": v for k, v in self.margins.items()})
        if self.TH_o_sim is not None:
            rec["TH_o_sim_mean"] = self.TH_o_sim.mean
            rec["TH_o_sim_half_width"] = self.TH_o_sim.half_width
        rec.update({f"isotone_{tag}": rep.isotone for tag, rep in self.isotone.items()})
        return rec


def _bound_regime(lam, mu, gamma) -> str:
    if mu == gamma:
        return "proved: mu = gamma (full chain)"
    if lam <= gamma:
        return "proved: lam <= gamma (lower bound only)"
    return "conjecture"


def bound_report(
    lam,
    mu,
    nu,
    gamma,
    b,
    sim_config: SimConfig | None = None,
    truncation_tol: float = 1e-9,
    jump_horizon: int = 50,
    value_cap: int | None = None,
) -> BoundReport:
    """Full bounding pipeline: exact product-form bounds, truncated and
    simulated target throughput, isotonicity evidence, and the verdict."""
    lower, target, upper = build_triple(lam, mu, nu, gamma, b)
    pf_bounds = {}
    for tag, system in (("minus", lower), ("plus", upper)):
        pf = product_form(system)
        if isinstance(pf, NotSeparable):
            raise NotSeparableBoundSystem(f"{tag} system: {pf.reason} (residual {pf.residual})")
        pf_bounds[tag] = pf
    th_minus = product_form_throughput(lower, pf_bounds["minus"])
    th_plus = product_form_throughput(upper, pf_bounds["plus"])

    sol = auto_truncate(target, tol=truncation_tol)
    th_o = metrics(sol, target).throughput
    th_closed = perishable_b1_closed_form(lam, mu, nu, gamma)[1] if b == 1 else None

    sim_estimate = None
    if sim_config is not None:
        sim_estimate = simulate(target, sim_config).estimate

    cap = value_cap if value_cap is not None else max(2 * jump_horizon, 40)
    isotone = {}
    for tag, system in (("minus", lower), ("o", target), ("plus", upper)):
        table = departure_values(system, N_cap=cap, horizon=jump_horizon)
        isotone[tag] = isotone_check(table)

    lower_ok = th_minus <= th_o + ORDER_TOL
    upper_ok = th_o <= th_plus + ORDER_TOL
    ordering = lower_ok and upper_ok
    if sim_estimate is not None:
        ordering = ordering and (
            th_minus <= sim_estimate.mean + sim_estimate.half_width
            and sim_estimate.mean - sim_estimate.half_width <= th_plus
        )
    margins = {
        "lower": th_o - th_minus,
        "upper": th_plus - th_o,
        "exact_gap": th_plus - th_minus,
    }
    return BoundReport(
        params={"lam": lam, "mu": mu, "nu": nu, "gamma": gamma, "b": b},
        TH_minus=th_minus,
        TH_plus=th_plus,
        TH_o_truncated=th_o,
        TH_o_sim=sim_estimate,
        TH_o_closed=th_closed,
        ordering_holds=ordering,
        margins=margins,
        regime=_bound_regime(lam, mu, gamma),
        isotone=isotone,
        balance_residuals={tag: pf.balance_residual for tag, pf in pf_bounds.items()},
    )


def gamma_sweep(lam, mu, nu, b, gammas, truncation_tol: float = 1e-9):
    """Rows (gamma, TH_minus, TH_o, TH_plus) for a grid of ageing rates."""
    rows = []
    for gamma in gammas:
        lower, target, upper = build_triple(lam, mu, nu, gamma, b)
        th_minus = product_form_throughput(lower, product_form(lower))
        th_plus = product_form_throughput(upper, product_form(upper))
        th_o = metrics(auto_truncate(target, tol=truncation_tol), target).throughput
        rows.append((gamma, th_minus, th_o, th_plus))
    return rows
