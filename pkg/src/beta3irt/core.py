"""Core math of the Beta^3 item response model and the 2PL-ND baseline.

Everything here is a pure function of its arguments. Functions accept
Python floats or numpy arrays and broadcast like numpy ufuncs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import betaln, expit

from .errors import DegenerateResponse, DomainError, ZeroDiscrimination

# Ability/Difficulty constructors reject values closer than this to 0 or 1.
BOUND_MARGIN = 1e-6


class _UnitValue(float):
    _name = "value"

    def __new__(cls, value):
        v = float(value)
        if not (BOUND_MARGIN <= v <= 1.0 - BOUND_MARGIN):
            raise DomainError(
                f"{cls._name} must lie in [{BOUND_MARGIN}, 1 - {BOUND_MARGIN}], got {v!r}"
            )
        return super().__new__(cls, v)

    @property
    def value(self) -> float:
        return float(self)


class Ability(_UnitValue):
    """Respondent ability on the open unit interval."""

    _name = "ability"


class Difficulty(_UnitValue):
    """Item difficulty on the open unit interval."""

    _name = "difficulty"


class Discrimination(float):
    """Item discrimination: a finite exponent of either sign."""

    def __new__(cls, value):
        v = float(value)
        if not np.isfinite(v):
            raise DomainError(f"discrimination must be finite, got {v!r}")
        return super().__new__(cls, v)

    @property
    def value(self) -> float:
        return float(self)


class BetaShape(NamedTuple):
    alpha: float
    beta: float


class Regime(str, enum.Enum):
    SIGMOID = "sigmoid"
    PARABOLIC = "parabolic"
    ANTI_SIGMOID = "anti-sigmoid"
    FLAT = "flat"
    DECREASING_ANTI_SIGMOID = "decreasing-anti-sigmoid"
    DECREASING_PARABOLIC = "decreasing-parabolic"
    DECREASING_SIGMOID = "decreasing-sigmoid"


class Family(str, enum.Enum):
    BETA3 = "beta3"
    TWOPL_ND = "2plnd"


def _log_odds(x):
    x = np.asarray(x, dtype=float)
    return np.log(x) - np.log1p(-x)


def beta_shape(theta, delta, a) -> BetaShape:
    """Beta parameters (alpha, beta) of the response distribution.

    alpha = (theta/delta)^a and beta = ((1-theta)/(1-delta))^a, evaluated in
    log space so that large |a| does not overflow the ratios.
    """
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    a = np.asarray(a, dtype=float)
    log_alpha = a * (np.log(theta) - np.log(delta))
    log_beta = a * (np.log1p(-theta) - np.log1p(-delta))
    alpha, beta = np.exp(log_alpha), np.exp(log_beta)
    if alpha.ndim == 0:
        return BetaShape(float(alpha), float(beta))
    return BetaShape(alpha, beta)


def icc_beta3(theta, delta, a):
    """Expected response alpha / (alpha + beta).

    Equivalent to 1 / (1 + (delta/(1-delta))^a * (theta/(1-theta))^-a),
    computed as logistic(a * (logit(theta) - logit(delta))).
    """
    z = np.asarray(a, dtype=float) * (_log_odds(theta) - _log_odds(delta))
    out = expit(z)
    return float(out) if out.ndim == 0 else out


def icc_slope_at_difficulty(delta, a):
    delta = np.asarray(delta, dtype=float)
    out = np.asarray(a, dtype=float) / (4.0 * delta * (1.0 - delta))
    return float(out) if out.ndim == 0 else out


def icc_regime(a: float) -> Regime:
    """Shape label of the ICC for a discrimination value.

    Boundaries (a = 1, 0, -1) are compared exactly.
    """
    a = float(a)
    if a > 1:
        return Regime.SIGMOID
    if a == 1:
        return Regime.PARABOLIC
    if a > 0:
        return Regime.ANTI_SIGMOID
    if a == 0:
        return Regime.FLAT
    if a > -1:
        return Regime.DECREASING_ANTI_SIGMOID
    if a == -1:
        return Regime.DECREASING_PARABOLIC
    return Regime.DECREASING_SIGMOID


def icc_2plnd(theta, delta, a):
    """Logistic ICC of 2PL-ND on unbounded ability/difficulty scales."""
    z = np.asarray(a, dtype=float) * (np.asarray(theta, dtype=float) - np.asarray(delta, dtype=float))
    out = expit(z)
    return float(out) if out.ndim == 0 else out


def ability_from_expected_response(p_bar, delta, a) -> Ability:
    """Invert the Beta^3 ICC for the ability that yields ``p_bar``.

    Solves (1/p_bar - 1)^(1/a) * (1/delta - 1) = 1/theta - 1, i.e.
    logit(theta) = logit(delta) + logit(p_bar) / a.
    """
    a = float(a)
    p_bar = float(p_bar)
    if a == 0:
        raise ZeroDiscrimination("ICC is flat at a = 0 and has no inverse")
    if not (0.0 < p_bar < 1.0):
        raise DegenerateResponse(f"expected response must be inside (0, 1), got {p_bar!r}")
    theta = float(expit(_log_odds(delta) + _log_odds(p_bar) / a))
    return Ability(theta)


def beta_log_density(p, shape: BetaShape):
    """Log density of Beta(alpha, beta) at p, with log B via log-Gamma."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DegenerateResponse("Beta log-density is undefined at p in {0, 1}")
    alpha, beta = shape
    out = (
        (np.asarray(alpha) - 1.0) * np.log(p)
        + (np.asarray(beta) - 1.0) * np.log1p(-p)
        - betaln(alpha, beta)
    )
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """Sparse observations (respondent, item, response).

    ``weights`` holds an optional multiplicity per observation. ``respondent_ids``
    and ``item_ids`` carry external labels; they default to ``"0", "1", ...``.
    """

    num_respondents: int
    num_items: int
    respondent: np.ndarray
    item: np.ndarray
    response: np.ndarray
    weights: np.ndarray | None = None
    respondent_ids: tuple[str, ...] = field(default=())
    item_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        r = np.asarray(self.respondent, dtype=np.int64)
        j = np.asarray(self.item, dtype=np.int64)
        p = np.asarray(self.response, dtype=float)
        if not (r.shape == j.shape == p.shape) or r.ndim != 1:
            raise DomainError("respondent, item and response must be 1-d arrays of equal length")
        if r.size == 0:
            raise DomainError("response matrix has no observations")
        if r.min() < 0 or r.max() >= self.num_respondents:
            raise DomainError("respondent index out of range")
        if j.min() < 0 or j.max() >= self.num_items:
            raise DomainError("item index out of range")
        if not np.all((p >= 0.0) & (p <= 1.0)):
            raise DomainError("responses must lie in [0, 1]")
        if np.bincount(r, minlength=self.num_respondents).min() == 0:
            raise DomainError("every respondent needs at least one observation")
        if np.bincount(j, minlength=self.num_items).min() == 0:
            raise DomainError("every item needs at least one observation")
        w = None
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != p.shape or np.any(w <= 0):
                raise DomainError("weights must be positive and match the observations")
            w.setflags(write=False)
        for arr in (r, j, p):
            arr.setflags(write=False)
        object.__setattr__(self, "respondent", r)
        object.__setattr__(self, "item", j)
        object.__setattr__(self, "response", p)
        object.__setattr__(self, "weights", w)
        rid = tuple(self.respondent_ids) or tuple(str(i) for i in range(self.num_respondents))
        iid = tuple(self.item_ids) or tuple(str(i) for i in range(self.num_items))
        if len(rid) != self.num_respondents or len(iid) != self.num_items:
            raise DomainError("id labels must match the matrix dimensions")
        object.__setattr__(self, "respondent_ids", rid)
        object.__setattr__(self, "item_ids", iid)

    def __len__(self) -> int:
        return int(self.response.size)

    @property
    def observation_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones_like(self.response)
        return self.weights

    def subset(self, rows) -> "ResponseMatrix":
        """Observations at ``rows``, keeping the full index space.

        Coverage is not re-checked here, so a test split may leave some
        respondents or items unobserved.
        """
        rows = np.asarray(rows, dtype=np.int64)
        new = object.__new__(ResponseMatrix)
        for name, value in (
            ("num_respondents", self.num_respondents),
            ("num_items", self.num_items),
            ("respondent", self.respondent[rows]),
            ("item", self.item[rows]),
            ("response", self.response[rows]),
            ("weights", None if self.weights is None else self.weights[rows]),
            ("respondent_ids", self.respondent_ids),
            ("item_ids", self.item_ids),
        ):
            object.__setattr__(new, name, value)
        return new

    @classmethod
    def from_dense(cls, matrix) -> "ResponseMatrix":
        """Build from an (M, N) array; NaN entries are treated as missing."""
        matrix = np.asarray(matrix, dtype=float)
        r, j = np.nonzero(~np.isnan(matrix))
        return cls(matrix.shape[0], matrix.shape[1], r, j, matrix[r, j])


@dataclass(frozen=True, eq=False)
class ModelParams:
    family: Family
    abilities: np.ndarray
    difficulties: np.ndarray
    discriminations: np.ndarray

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        arrays = []
        for name in ("abilities", "difficulties", "discriminations"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise DomainError(f"{name} must be 1-d")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays.append(arr)
        if arrays[1].size != arrays[2].size:
            raise DomainError("difficulties and discriminations must have equal length")
        if fam is Family.BETA3:
            for name, arr in (("abilities", arrays[0]), ("difficulties", arrays[1])):
                if np.any((arr <= 0.0) | (arr >= 1.0)):
                    raise DomainError(f"Beta3 {name} must lie strictly inside (0, 1)")

    @property
    def num_respondents(self) -> int:
        return int(self.abilities.size)

    @property
    def num_items(self) -> int:
        return int(self.difficulties.size)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            self.family == other.family
            and np.array_equal(self.abilities, other.abilities)
            and np.array_equal(self.difficulties, other.difficulties)
            and np.array_equal(self.discriminations, other.discriminations)
        )

    __hash__ = None


def expected_responses(params: ModelParams, respondent: Sequence[int], item: Sequence[int]) -> np.ndarray:
    """ICC value for each (respondent, item) pair under the params' family."""
    r = np.asarray(respondent, dtype=np.int64)
    j = np.asarray(item, dtype=np.int64)
    theta = params.abilities[r]
    delta = params.difficulties[j]
    a = params.discriminations[j]
    if params.family is Family.BETA3:
        return np.asarray(icc_beta3(theta, delta, a), dtype=float)
    return np.asarray(icc_2plnd(theta, delta, a), dtype=float)
