"""Random-spouse reserves: a death benefit whose recipient is revealed at death.

At the insured's death a spouse exists with probability ``g(t)``; the age
difference then follows a distribution given as weighted nodes.  Each node
leads to a widow(er) state ``(spouse, d)`` paying a life annuity on the
spouse, so the kernel row from ``active`` carries a continuous part.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discrete import DiscreteModel, ReserveTable, time_grid
from .duration import _vec
from .model import (
    DEAD,
    ContinuousPart,
    Discount,
    DomainError,
    IntensityKernel,
    InsuranceModel,
    Label,
    NumericError,
    PaymentSpec,
    widowed,
)

RateFn = Callable[[float], float]


@dataclass(frozen=True)
class SpouseModel:
    """Inputs of the random-spouse model.

    ``spouse_mortality`` takes the spouse's age, which at model time ``t`` is
    ``age_offset + t - d`` for age difference ``d`` (insured older when
    ``d > 0``).  With the default ``age_offset = 0`` model time is the
    insured's age.
    """

    mu_star_dagger: RateFn
    g: RateFn
    phi_nodes: tuple[tuple[float, float], ...]
    spouse_mortality: RateFn
    annuity_rate: float = 1.0
    age_offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.phi_nodes:
            raise DomainError("at least one age-difference node is required")
        w = np.array([n[1] for n in self.phi_nodes], dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"node weights must be non-negative and sum to 1 (sum={w.sum()!r})")

    @property
    def differences(self) -> np.ndarray:
        return np.array([n[0] for n in self.phi_nodes], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([n[1] for n in self.phi_nodes], dtype=float)

    def spouse_age(self, t, d):
        return self.age_offset + t - d


def _check_ages(model: SpouseModel, t_start: float) -> None:
    for j, d in enumerate(model.differences):
        if model.spouse_age(t_start, d) < 0:
            raise DomainError(f"spouse age negative on the horizon for node {j} (d={d})")


def solve_spouse_reserves(model: SpouseModel, r: float, t_start: float, t_end: float,
                          dt: float) -> ReserveTable:
    """Reserves for ``active``, every ``spouse@d`` node and ``dead``.

    Node reserves are single-life annuities on the spouse, solved together
    as one vector recursion; the active reserve then picks them up through
    the weighted node sum.  Backward Euler with rates at ``t_n``.
    """
    _check_ages(model, t_start)
    grid = time_grid(t_start, t_end, dt)
    N = len(grid) - 1
    step = (t_end - t_start) / N if N else dt
    d = model.differences
    w = model.weights
    mu = _vec(model.mu_star_dagger, grid)
    g = _vec(model.g, grid)
    if np.any(g < 0) or np.any(g > 1):
        raise DomainError("spouse probability g(t) must lie in [0, 1]")
    ages = model.spouse_age(grid[:, None], d[None, :])
    mu_sp = np.asarray(model.spouse_mortality(ages), dtype=float) * np.ones_like(ages)
    for name, arr in (("insured mortality", mu), ("spouse mortality", mu_sp)):
        if not np.isfinite(arr).all():
            raise NumericError(f"{name} not finite on the horizon")
    nodes = np.zeros((len(d), N + 1))
    active = np.zeros(N + 1)
    a = model.annuity_rate
    for n in range(N, 0, -1):
        vn = nodes[:, n]
        nodes[:, n - 1] = vn - step * ((mu_sp[n] + r) * vn - a)
        va = active[n]
        active[n - 1] = va - step * ((mu[n] + r) * va - mu[n] * g[n] * float(w @ vn))
    if not (np.isfinite(nodes).all() and np.isfinite(active).all()):
        raise NumericError("non-finite reserve in the random-spouse recursion")
    values = np.vstack([active, nodes, np.zeros(N + 1)])
    names = ("active", *(str(widowed(x)) for x in d), "dead")
    return ReserveTable(grid, values, names)


def spouse_kernel(model: SpouseModel, t_start: float, t_end: float) -> IntensityKernel:
    """Kernel with an explicit no-spouse death atom so the active exit rate is full mortality."""
    nodes = tuple(widowed(x) for x in model.differences)
    weights = model.weights

    def atoms(t, x):
        if x.label is Label.ACTIVE:
            return [(DEAD, float(model.mu_star_dagger(t)) * (1.0 - float(model.g(t))))]
        if x.label is Label.DEAD_WITH_SPOUSE:
            return [(DEAD, float(model.spouse_mortality(model.spouse_age(t, x.coord))))]
        return []

    def continuous(t, x):
        if x.label is not Label.ACTIVE:
            return None
        return ContinuousPart(nodes, weights, float(model.mu_star_dagger(t)) * float(model.g(t)))

    def rate_grid(x, times):
        if x.label is Label.ACTIVE:
            return _vec(model.mu_star_dagger, times)
        if x.label is Label.DEAD_WITH_SPOUSE:
            return _vec(model.spouse_mortality, model.spouse_age(times, x.coord))
        return np.zeros_like(times)

    return IntensityKernel(atoms, continuous, description="random spouse revealed at death",
                           horizon=(t_start, t_end), rate_grid=rate_grid)


def spouse_insurance_model(model: SpouseModel, r: float, t_start: float, t_end: float) -> InsuranceModel:
    _check_ages(model, t_start)

    def sojourn(t, x):
        return model.annuity_rate if x.label is Label.DEAD_WITH_SPOUSE else 0.0

    return InsuranceModel(spouse_kernel(model, t_start, t_end), PaymentSpec(sojourn_rate=sojourn),
                          Discount(r), t_end)


def single_node_chain(model: SpouseModel, r: float) -> DiscreteModel:
    """The one-node model as a chain active(0) -> widowed(1) -> dead(2), active -> dead."""
    if len(model.phi_nodes) != 1:
        raise ValueError("reduction needs exactly one node")
    d = model.differences[0]

    def mu(t, i, j):
        m = float(model.mu_star_dagger(t))
        if (i, j) == (0, 1):
            return m * float(model.g(t))
        if (i, j) == (0, 2):
            return m * (1.0 - float(model.g(t)))
        if (i, j) == (1, 2):
            return float(model.spouse_mortality(model.spouse_age(t, d)))
        return 0.0

    def sojourn(t, x):
        return model.annuity_rate if x.index == 1 else 0.0

    return DiscreteModel(3, mu, PaymentSpec(sojourn_rate=sojourn), Discount(r),
                         names=("active", str(widowed(d)), "dead"))
