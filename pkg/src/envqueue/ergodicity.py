"""Ergodicity certification for non-separable models.

Pipeline: a necessary summability condition on the isolated queue, mean
first-entrance times tau_n from blocked environment states into the working
set, per-level constants c_hat(n) bounding the weighted passage times through
the blocked set, a Lyapunov function for the isolated queue, and the composed
certificate L(n, k) = L_tilde(n) + 1{k blocked} * c_n * tau_n(k) whose drift
is verified numerically on a horizon that covers all periodic representatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import JointModel, generator_row
from .separability import queue_marginal

TAU_RESIDUAL_TOL = 1e-10
DRIFT_SLACK = 1e-12


class SingularSystem(Exception):
    """The blocked set contains states with no path to the working set."""


class BothBranchesZero(Exception):
    """No transition from working to blocked states exists at this level,
    contradicting irreducibility."""


def check_necessary(model: JointModel) -> tuple[bool, float]:
    """Necessary condition: the isolated queue marginal must be summable
    (an environment cannot stabilize a non-ergodic queue)."""
    marginal = queue_marginal(model)
    return marginal.summable, marginal.tail_ratio


@dataclass(frozen=True)
class AbsorptionTable:
    """Mean first-entrance times into the working set at queue length n;
    zero on working states by convention."""

    n: int
    tau: np.ndarray  # indexed by environment label index
    residual: float


def solve_tau(model: JointModel, n: int) -> AbsorptionTable:
    """Solve the first-entrance system V_BB . tau_B = -1 on the blocked set."""
    blocked = model.blocked_indices()
    tau = np.zeros(model.n_env)
    if blocked.size == 0:
        return AbsorptionTable(n=n, tau=tau, residual=0.0)
    V = model.V(n)
    VBB = V[np.ix_(blocked, blocked)]
    rhs = -np.ones(blocked.size)
    try:
        tau_b = np.linalg.solve(VBB, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            f"blocked states {[model.env.labels[i] for i in blocked]} have no exit at level {n}"
        ) from exc
    if not np.all(np.isfinite(tau_b)) or np.any(tau_b <= 0):
        raise SingularSystem(
            f"first-entrance times at level {n} are not positive finite: {tau_b}"
        )
    residual = float(np.abs(VBB @ tau_b - rhs).max())
    if residual > TAU_RESIDUAL_TOL:
        raise SingularSystem(f"first-entrance residual {residual:.3e} at level {n}")
    tau[blocked] = tau_b
    return AbsorptionTable(n=n, tau=tau, residual=residual)


def c_hat(model: JointModel, n: int, table: AbsorptionTable | None = None) -> float:
    """Reciprocal of the worst expected blocked-passage cost incurred when
    leaving a working state at queue length n, via either a service-triggered
    jump (weighted mu(n+1) * R_{n+1}) or a continuous move (weighted v_n).
    Returns +inf when the blocked set is unreachable from working states."""
    if table is None:
        table = solve_tau(model, n)
    blocked = model.blocked_indices()
    working = model.working_indices()
    if blocked.size == 0 or working.size == 0:
        return float("inf")
    tau_b = table.tau[blocked]
    jump = model.service(n + 1) * (model.R(n + 1)[np.ix_(working, blocked)] @ tau_b).max()
    cont = (model.V(n)[np.ix_(working, blocked)] @ tau_b).max()
    if jump <= 0.0 and cont <= 0.0:
        raise BothBranchesZero(
            f"level {n}: no transition from working into blocked states"
        )
    branches = [1.0 / v if v > 0 else float("inf") for v in (jump, cont)]
    return min(branches)


@dataclass(frozen=True)
class MM1Lyapunov:
    """Lyapunov function for the isolated queue: values, exception levels and
    the drift constant."""

    kind: str  # linear_drift | hitting_time
    values: tuple  # L_tilde(0..horizon), extendable via `value`
    F_levels: tuple
    eps_tilde: float
    tail_increment: float  # L_tilde(n+1) - L_tilde(n) beyond the stored range

    def value(self, n: int) -> float:
        if n < len(self.values):
            return self.values[n]
        return self.values[-1] + (n - len(self.values) + 1) * self.tail_increment


@dataclass(frozen=True)
class CannotBuild:
    kind: str
    reason: str


def build_mm1_lyapunov(model: JointModel, kind: str = "linear_drift", horizon: int | None = None):
    """Construct a Lyapunov function for the isolated birth-death queue.

    linear_drift: L(n) = n with the exception set covering levels before the
    drift mu - lambda turns (and stays) positive.  hitting_time: L(n) = mean
    first-entrance time into {0}, which has drift exactly -1 off {0}; needs an
    eventually constant tail.
    """
    N0, p = model.tail_start, model.period
    if horizon is None:
        horizon = N0 + 2 * p + 4
    if kind == "linear_drift":
        drifts = [model.service(n) - model.arrival(n) for n in range(1, N0 + p + 1)]
        N = None
        for start in range(N0 + p):
            # by periodicity the levels {start.. N0+p-1} cover all n >= start
            if min(drifts[start:]) > 0.0:
                N = start
                break
        if N is None:
            return CannotBuild(kind=kind, reason="no level beyond which mu - lambda stays positive")
        eps_tilde = min(drifts[N:])
        # the drift inequality at level 0 reads lambda(0) <= -eps and always
        # fails for L(n) = n, so 0 stays in the exception set
        N = max(N, 1)
        values = tuple(float(n) for n in range(horizon + 2))
        return MM1Lyapunov(
            kind=kind,
            values=values,
            F_levels=tuple(range(N)),
            eps_tilde=eps_tilde,
            tail_increment=1.0,
        )
    if kind == "hitting_time":
        if p != 1:
            return CannotBuild(kind=kind, reason="hitting_time needs an eventually constant tail (p* = 1)")
        lam_t, mu_t = model.arrival(N0), model.service(N0 + 1)
        if mu_t <= lam_t:
            return CannotBuild(kind=kind, reason="tail drift mu - lambda is not positive")
        # h[n] = mean passage time n -> n-1; constant beyond the prefix
        top = max(horizon + 2, N0 + 2)
        h = np.empty(top + 1)
        h[N0 + 1 :] = 1.0 / (mu_t - lam_t)
        for n in range(N0, 0, -1):
            h[n] = (1.0 + model.arrival(n) * h[n + 1]) / model.service(n)
        values = np.concatenate(([0.0], np.cumsum(h[1 : top + 1])))
        return MM1Lyapunov(
            kind=kind,
            values=tuple(values),
            F_levels=(0,),
            eps_tilde=1.0,
            tail_increment=1.0 / (mu_t - lam_t),
        )
    raise ValueError(f"unknown Lyapunov kind {kind!r}")


@dataclass(frozen=True)
class LyapunovCertificate:
    kind: str
    eps: float
    eps_tilde: float
    F_levels: tuple
    c_table: dict  # representative level -> c_n
    c_hat_table: dict
    tau_tables: dict  # representative level -> AbsorptionTable
    check_horizon: int
    worst_margin: float  # min over checked off-F states of (-eps - QL)

    certified: bool = True

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.eps,
            "epsilon_tilde": self.eps_tilde,
            "F_levels": list(self.F_levels),
            "c_n": {int(n): float(c) for n, c in self.c_table.items()},
            "c_hat_n": {int(n): float(c) for n, c in self.c_hat_table.items()},
            "tau": {int(n): [float(t) for t in tab.tau] for n, tab in self.tau_tables.items()},
            "check_horizon": self.check_horizon,
            "worst_margin": self.worst_margin,
        }


@dataclass(frozen=True)
class NotCertified:
    reason: str  # NecessaryFails | NoLyapunov | CHatInfimumZero | DriftCheckFails
    detail: str = ""
    violating_state: tuple | None = None
    certified: bool = False


def _fold_level(model: JointModel, n: int) -> int:
    N0, p = model.tail_start, model.period
    return n if n < N0 else N0 + (n - N0) % p


def certify(model: JointModel, kind: str = "linear_drift"):
    """Build and numerically verify a Lyapunov certificate for the joint
    chain, or explain why none was obtained."""
    passes, ratio = check_necessary(model)
    if not passes:
        return NotCertified(reason="NecessaryFails", detail=f"queue tail ratio {ratio} >= 1")
    N0, p = model.tail_start, model.period
    horizon = N0 + 2 * p + 2
    base = build_mm1_lyapunov(model, kind=kind, horizon=horizon)
    if isinstance(base, CannotBuild):
        return NotCertified(reason="NoLyapunov", detail=f"{base.kind}: {base.reason}")
    reps = range(N0 + p)
    tau_tables = {n: solve_tau(model, n) for n in reps}
    c_hat_table = {n: c_hat(model, n, tau_tables[n]) for n in reps}
    if min(c_hat_table.values()) <= 0.0:
        return NotCertified(reason="CHatInfimumZero")
    c_table = {n: base.eps_tilde / 4.0 * ch for n, ch in c_hat_table.items()}
    finite_c = [c for c in c_table.values() if math.isfinite(c)]
    eps = min([base.eps_tilde / 2.0] + finite_c)

    def L(n, k):
        fold = _fold_level(model, n)
        tau = tau_tables[fold].tau[k]
        if tau == 0.0:
            return base.value(n)
        return base.value(n) + c_table[fold] * tau

    F = set(base.F_levels)
    worst_margin = float("inf")
    for n in range(horizon + 1):
        for k in range(model.n_env):
            row = generator_row(model, (n, k))
            drift = sum(rate * (L(nn, kk) - L(n, k)) for (nn, kk), rate in row.transitions)
            if n in F:
                if not math.isfinite(drift):
                    return NotCertified(
                        reason="DriftCheckFails",
                        detail="drift not finite on exception set",
                        violating_state=(n, k),
                    )
                continue
            margin = -eps - drift
            if margin < -DRIFT_SLACK:
                return NotCertified(
                    reason="DriftCheckFails",
                    detail=f"drift {drift:.6e} exceeds -eps = {-eps:.6e}",
                    violating_state=(n, k),
                )
            worst_margin = min(worst_margin, margin)
    return LyapunovCertificate(
        kind=kind,
        eps=eps,
        eps_tilde=base.eps_tilde,
        F_levels=tuple(sorted(F)),
        c_table=c_table,
        c_hat_table=c_hat_table,
        tau_tables=tau_tables,
        check_horizon=horizon,
        worst_margin=worst_margin,
    )
