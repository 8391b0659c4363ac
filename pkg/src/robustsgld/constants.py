"""Closed-form constants of the convergence analysis and parameter selection.

Every quantity here is a direct plug-in of the model growth constants, the
penalty constants and the problem data. The constants c, C1, C2, C3 of the
underlying SGLD convergence result are not computed: they are accepted from
the caller through ``ExternalConstants``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .grid import DiscreteMeasure, smallest_ell
from .objective import DROProblem, ThetaBar
from .penalty import dissipativity_constants, iota, iota_prime


class ConstantsError(ValueError):
    """Base exception for constants evaluation errors."""


class UnavailableConstantError(ConstantsError):
    """Raised when a constant needs an input that was not supplied."""

    def __init__(self, name: str, reason: str) -> None:
        self.name = name
        super().__init__(f"{name} is unavailable: {reason}")


class MissingExternalConstantError(ConstantsError):
    """Raised when the parameter selection is blocked on caller-supplied constants."""

    def __init__(self, blocked: dict[str, list[str]]) -> None:
        self.blocked = blocked
        parts = [f"{line} needs {', '.join(names)}" for line, names in blocked.items()]
        super().__init__("Missing external constants: " + "; ".join(parts))


class InvalidExternalConstantError(ConstantsError):
    """Raised when a caller-supplied constant is not a positive finite number."""

    def __init__(self, invalid: dict[str, float]) -> None:
        self.invalid = invalid
        parts = [f"{name}={value!r}" for name, value in invalid.items()]
        super().__init__("External constants must be positive and finite: " + ", ".join(parts))


@dataclass(frozen=True)
class ConstantsBundle:
    # problem inputs
    d: int
    m: int
    p: float
    eta1: float
    eta2: float
    delta: float
    beta: float
    ell: int
    jj: int
    n_points: int
    xi_lo: tuple[float, ...]
    xi_hi: tuple[float, ...]
    # model and data
    K_nabla: float
    Ktilde_nabla: float
    L_nabla: float
    nu: float
    J_U: float
    chi: float
    M_Xi: float
    moment_E: float
    moment_eta: float
    second_moment_0: float
    # penalty
    a_iota: float
    b_iota: float
    L_iota: float
    M_iota: float
    Ltilde_iota: float
    # derived
    a: float
    b: float
    L_delta: float
    frakC1: float
    frakC2: float
    frakC3: float
    Ltilde_delta: float
    lambda_max_delta: float
    frakM1: float
    frakc1_delta_beta: float
    frakC4: float
    Ctilde4: float
    C5_delta_beta: float
    C6: float
    K_radius: float | None
    K_radius_is_surrogate: bool
    C4: float | None

    def require_c4(self) -> float:
        if self.C4 is None:
            raise UnavailableConstantError(
                "C4", "no bound on the compact set was given and the surrogate radius is disabled"
            )
        return self.C4

    def ltilde_delta_at(self, delta: float) -> float:
        return self.frakC2 / delta + self.frakC3

    def lambda_max_at(self, delta: float) -> float:
        return min(self.frakC1 / self.ltilde_delta_at(delta) ** 2, 1.0 / self.a)


@dataclass(frozen=True)
class ExternalConstants:
    """Constants of the SGLD convergence result, supplied by the caller."""

    c_delta_beta: float | None = None
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    C6_override: float | None = None

    def check(self) -> None:
        """Raise InvalidExternalConstantError unless every supplied constant is positive and finite."""
        bad = {
            item.name: value
            for item in fields(self)
            if (value := getattr(self, item.name)) is not None and not (math.isfinite(value) and value > 0)
        }
        if bad:
            raise InvalidExternalConstantError(bad)


@dataclass(frozen=True)
class ParameterChoice:
    name: str
    value: float
    bound: float
    relation: str
    line: int
    binding: str


def _moments(training: np.ndarray | DiscreteMeasure, p: float) -> tuple[float, float]:
    if isinstance(training, DiscreteMeasure):
        points, masses = training.points, training.masses
    else:
        points = np.atleast_2d(np.asarray(training, dtype=float))
        masses = np.full(points.shape[0], 1.0 / points.shape[0])
    grow = (1.0 + np.linalg.norm(points, axis=1)) ** (2 * p)
    moment_E = float(masses @ (1.0 + grow) ** 4)
    moment_eta = float(masses @ grow)
    return moment_E, moment_eta


def surrogate_radius(
    eta1: float, eta2: float, p: float, ktilde_growth: float, m_xi: float, m_sharp: float
) -> float:
    """Positive root r of (min(eta1, eta2)/2) r^2 - (Kg + 2^p M^p) r - Kg = M#.

    Here Kg = Ktilde (1 + M_Xi)^nu. Iterates of value at most M# stay in the
    ball of this radius, so it over-estimates the radius of the compact set.
    """
    quad = 0.5 * min(eta1, eta2)
    lin = ktilde_growth + 2.0**p * m_xi**p
    const = ktilde_growth + m_sharp
    disc = max(lin * lin + 4.0 * quad * const, 0.0)
    return max((lin + math.sqrt(disc)) / (2.0 * quad), 0.0)


def compute_bundle(
    problem: DROProblem,
    training: np.ndarray | DiscreteMeasure,
    theta_bar_0_second_moment: float,
    *,
    beta: float,
    theta_bar_0: ThetaBar | None = None,
    k_radius: float | None = None,
    allow_surrogate: bool = True,
) -> ConstantsBundle:
    """Evaluate every closed-form constant for ``problem``.

    ``training`` is the (raw) training set or reference measure over which
    the data moments are taken. C4 needs the radius of the compact set: pass
    ``k_radius``, or let the surrogate radius be derived from the value of
    the objective at ``theta_bar_0``.

    Raises:
        UnavailableConstantError: If C4 cannot be formed.
    """
    if beta <= 0:
        raise ConstantsError(f"beta must be positive, got {beta}")
    pen = dissipativity_constants()
    growth = problem.utility.growth
    grid = problem.grid
    p, eta1, eta2, delta = problem.p, problem.eta1, problem.eta2, problem.delta
    d, m = problem.d, grid.m
    K, L_nabla, nu, J_U, chi = growth.K_nabla, growth.L_nabla, growth.nu, growth.J_U, growth.chi
    M = grid.m_xi
    ktilde = problem.utility.ktilde_nabla(grid.lo, grid.hi)
    M_iota, L_iota, a_iota = pen.M_iota, pen.L_iota, pen.a_iota
    moment_E, moment_eta = _moments(training, p)

    k_growth = K * (1.0 + M) ** nu
    max_mp = max(1.0, M**p)
    eta_min = min(eta1, eta2 * a_iota)

    a = eta_min / 2.0
    b = eta2 * pen.b_iota + 2.0 * (k_growth + 2.0**p * M_iota * M**p) ** 2 / eta_min
    half_term = k_growth + 2.0 ** (p - 1) * max_mp * M_iota
    L_delta = 2.0 * (1.0 + M) ** nu * (4.0 * K * half_term / delta + L_nabla) + (
        2.0**p * L_iota * max_mp + 2.0 ** (p + 2) * M_iota * max_mp * half_term / delta
    )
    frakC1 = min(a, a ** (1.0 / 3.0)) / (16.0 * math.sqrt(moment_E))
    frakC2 = (8.0 * k_growth + 2.0 ** (p + 2) * M_iota * max_mp) * (
        k_growth + 2.0 ** (p - 1) * M_iota * max_mp
    )
    frakC3 = 2.0 * L_nabla * (1.0 + M) ** nu + 2.0**p * L_iota * max_mp + eta1 + eta2 * pen.Ltilde_iota + 1.0
    Ltilde_delta = frakC2 / delta + frakC3
    lambda_max = min(frakC1 / Ltilde_delta**2, 1.0 / a)
    frakM1 = (k_growth + 2.0**p * M_iota * M + eta2 * iota(0.0) * iota_prime(0.0)) ** 2
    frakc1_db = 2.0 * frakM1 * lambda_max + 2.0 * b + 2.0 * (d + 1) / beta

    ktilde_growth = ktilde * (1.0 + M) ** nu
    frakC4 = J_U * (1.0 + 2.0 * M) ** chi + 8.0 * p * ktilde / math.sqrt(eta2) * (1.0 + 4.0 * M) ** (
        nu + p - 1
    )
    Ctilde4 = (
        J_U * (1.0 + M) ** chi
        + 4.0 * p / math.sqrt(eta2) * (1.0 + 4.0 * M) ** (p - 1) * (1.0 + 2.0 * ktilde_growth)
        + 2.0 ** (p + 2) * p * M / eta2 * (1.0 + 4.0 * M) ** (p - 1)
    )
    C5 = frakC4 * math.sqrt(frakc1_db) * math.sqrt(lambda_max + 1.0 / a)
    C6 = frakC4 * math.sqrt(theta_bar_0_second_moment)

    surrogate = False
    if k_radius is None and allow_surrogate:
        if theta_bar_0 is None:
            raise UnavailableConstantError("C4", "the surrogate radius needs theta_bar_0")
        m_sharp = problem.v_delta_full(theta_bar_0) + delta * problem.log_n
        k_radius = surrogate_radius(eta1, eta2, p, ktilde_growth, M, m_sharp)
        surrogate = True
    C4 = None
    if k_radius is not None:
        C4 = Ctilde4 + (J_U * (1.0 + 2.0 * M) ** chi + p * (1.0 + 4.0 * M) ** (p - 1)) * (1.0 + k_radius)

    return ConstantsBundle(
        d=d,
        m=m,
        p=p,
        eta1=eta1,
        eta2=eta2,
        delta=delta,
        beta=beta,
        ell=grid.ell,
        jj=grid.jj,
        n_points=problem.n_points,
        xi_lo=tuple(float(v) for v in grid.lo),
        xi_hi=tuple(float(v) for v in grid.hi),
        K_nabla=K,
        Ktilde_nabla=ktilde,
        L_nabla=L_nabla,
        nu=nu,
        J_U=J_U,
        chi=chi,
        M_Xi=M,
        moment_E=moment_E,
        moment_eta=moment_eta,
        second_moment_0=theta_bar_0_second_moment,
        a_iota=a_iota,
        b_iota=pen.b_iota,
        L_iota=L_iota,
        M_iota=M_iota,
        Ltilde_iota=pen.Ltilde_iota,
        a=a,
        b=b,
        L_delta=L_delta,
        frakC1=frakC1,
        frakC2=frakC2,
        frakC3=frakC3,
        Ltilde_delta=Ltilde_delta,
        lambda_max_delta=lambda_max,
        frakM1=frakM1,
        frakc1_delta_beta=frakc1_db,
        frakC4=frakC4,
        Ctilde4=Ctilde4,
        C5_delta_beta=C5,
        C6=C6,
        K_radius=k_radius,
        K_radius_is_surrogate=surrogate,
        C4=C4,
    )


def quadrature_error_bound(bundle: ConstantsBundle, radius: float) -> float:
    """Bound on the grid quadrature error for |theta_bar| <= radius."""
    M, p = bundle.M_Xi, bundle.p
    return (
        math.sqrt(bundle.m)
        * (bundle.J_U * (1.0 + 2.0 * M) ** bundle.chi + p * (1.0 + 4.0 * M) ** (p - 1))
        * (1.0 + radius)
        / 2.0**bundle.jj
    )


def primal_gap_bound(bundle: ConstantsBundle, theta_norm: float) -> float:
    """Bound on |u(theta) - u_discrete(theta)| at fixed theta."""
    return math.sqrt(bundle.m) / 2.0**bundle.jj * (bundle.Ctilde4 + bundle.frakC4 * theta_norm)


def moment_bound(bundle: ConstantsBundle, n: int, lam: float, second_moment_0: float) -> float:
    """Envelope of E|theta_bar_n|^2 along robust SGLD."""
    return math.exp(-bundle.a * lam * (n + 1)) * second_moment_0 + bundle.frakc1_delta_beta * (
        bundle.lambda_max_delta + 1.0 / bundle.a
    )


def excess_risk_bound(bundle: ConstantsBundle, external: ExternalConstants, lam: float, n: int) -> float:
    external.check()
    missing = [
        name for name in ("c_delta_beta", "C1", "C2", "C3") if getattr(external, name) is None
    ]
    if missing:
        raise MissingExternalConstantError({"excess risk bound": missing})
    c6 = external.C6_override if external.C6_override is not None else bundle.C6
    return (
        external.C1 * math.exp(-external.c_delta_beta * lam * n / 4.0)
        + external.C2 * lam**0.25
        + external.C3
        + bundle.delta * bundle.m * (bundle.ell + bundle.jj) * math.log(2.0)
        + math.sqrt(bundle.m)
        / 2.0**bundle.jj
        * (bundle.require_c4() + bundle.C5_delta_beta + c6 * math.exp(-bundle.a * lam * (n + 1) / 2.0))
    )


def _strict_above(bound: float) -> int:
    return math.floor(bound) + 1


def algorithm1_params(
    epsilon: float,
    bundle: ConstantsBundle,
    external: ExternalConstants,
    margin: float = 1e-3,
) -> list[ParameterChoice]:
    """Smallest parameters (ell, jj, delta, beta, lambda, n) meeting the accuracy ``epsilon``.

    Integer parameters take the smallest integer strictly above their bound;
    continuous ones are moved off their bound by the relative ``margin``.

    Raises:
        ValueError: If epsilon or margin is out of range.
        UnavailableConstantError: If C4 is not available in the bundle.
        InvalidExternalConstantError: If a supplied constant is not positive.
        MissingExternalConstantError: If the step size or iteration count lines
            are blocked on constants the caller did not supply.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < margin < 1:
        raise ValueError(f"margin must lie in (0, 1), got {margin}")
    external.check()

    blocked: dict[str, list[str]] = {}
    if external.C2 is None:
        blocked["line 16 (lambda)"] = ["C2"]
    line17 = [name for name in ("c_delta_beta", "C1") if getattr(external, name) is None]
    if line17:
        blocked["line 17 (n)"] = line17
    if blocked:
        raise MissingExternalConstantError(blocked)

    b_ = bundle
    m, d, a = b_.m, b_.d, b_.a
    sqrt_m = math.sqrt(m)
    choices: list[ParameterChoice] = []

    ell = smallest_ell(b_.xi_lo, b_.xi_hi)
    choices.append(ParameterChoice("ell", ell, ell, ">=", 12, "Xi inside [-2^(ell-1), 2^(ell-1))^m"))

    c4 = b_.require_c4()
    jj_bound = math.log2(5.0 * sqrt_m * (c4 + b_.frakC4 * (1.0 / a + 2.0 * b_.b)) / epsilon)
    jj = max(1, _strict_above(jj_bound))
    choices.append(ParameterChoice("jj", jj, jj_bound, ">", 13, "log2(5 sqrt(m)(C4 + frakC4(1/a + 2b))/eps)"))

    delta_terms = {
        "eps/(10 m (ell+jj) log 2)": epsilon / (10.0 * m * (ell + jj) * math.log(2.0)),
        "frakC2/sqrt(a frakC1)": b_.frakC2 / math.sqrt(a * b_.frakC1),
        "frakC2 sqrt(eps 2^jj/(10 frakC1 frakC4 (2 frakM1 + 1) sqrt(m)))": b_.frakC2
        * math.sqrt(epsilon * 2.0**jj / (10.0 * b_.frakC1 * b_.frakC4 * (2.0 * b_.frakM1 + 1.0) * sqrt_m)),
    }
    delta_key = min(delta_terms, key=delta_terms.get)
    delta_bound = delta_terms[delta_key]
    delta = delta_bound * (1.0 - margin)
    choices.append(ParameterChoice("delta", delta, delta_bound, "<", 14, delta_key))

    ltilde = b_.ltilde_delta_at(delta)
    log_arg = max((ltilde - 1.0) * b_.moment_eta / a, 1e-300)
    beta_terms = {
        "100(d+1)/eps^2": 100.0 * (d + 1) / epsilon**2,
        "10(d+1)(1 + log((Ltilde-1) E(1+|X|)^2p / a))/eps": 10.0 * (d + 1) * (1.0 + math.log(log_arg)) / epsilon,
        "10 sqrt(m) frakC4 (d+1)/(eps 2^jj)": 10.0 * sqrt_m * b_.frakC4 * (d + 1) / (epsilon * 2.0**jj),
    }
    beta_key = max(beta_terms, key=beta_terms.get)
    beta_bound = beta_terms[beta_key]
    beta = beta_bound * (1.0 + margin)
    choices.append(ParameterChoice("beta", beta, beta_bound, ">", 15, beta_key))

    lambda_terms = {
        "lambda_max_delta": b_.lambda_max_at(delta),
        "eps^4/(625 C2^4)": epsilon**4 / (625.0 * external.C2**4),
    }
    lambda_key = min(lambda_terms, key=lambda_terms.get)
    lambda_bound = lambda_terms[lambda_key]
    lam = lambda_bound * (1.0 - margin)
    choices.append(ParameterChoice("lambda", lam, lambda_bound, "<", 16, lambda_key))

    c6 = external.C6_override if external.C6_override is not None else b_.C6
    n_terms = {
        "(4/(c lambda)) log(10 C1/eps)": 4.0 / (external.c_delta_beta * lam) * math.log(10.0 * external.C1 / epsilon),
        "(2/(a lambda)) log(10 C6/eps) - 1": 2.0 / (a * lam) * math.log(10.0 * c6 / epsilon) - 1.0
        if c6 > 0
        else -math.inf,
    }
    n_key = max(n_terms, key=n_terms.get)
    n_bound = n_terms[n_key]
    n = max(1, _strict_above(n_bound))
    choices.append(ParameterChoice("n", n, n_bound, ">", 17, n_key))
    return choices


def render_report(bundle: ConstantsBundle) -> str:
    """One ``name=value`` line per bundle field, in declaration order."""
    lines = []
    for item in fields(bundle):
        value = getattr(bundle, item.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif value is None:
            text = "unavailable"
        elif isinstance(value, tuple):
            text = "[" + ",".join(repr(float(v)) for v in value) + "]"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{item.name}={text}")
    lines.append(f"C4_surrogate={'true' if bundle.K_radius_is_surrogate else 'false'}")
    return "\n".join(lines) + "\n"
