"""Family descriptors and the small value types shared across the toolkit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DomainError, InvalidTruncationError, ValidationError

# Scale-type parameters below this are treated as outside the domain; keeps
# 1/sigma^2 terms of the metric finite.
PARAM_FLOOR = 1e-8
# Triangular mode must stay this fraction of (b - a) away from the support ends.
TRIANGULAR_MARGIN = 1e-12


class Kind(str, Enum):
    NORMAL = "normal"
    TRUNCATED_NORMAL = "truncated-normal"
    GUMBEL = "gumbel"
    TRUNCATED_GUMBEL = "truncated-gumbel"
    LOGNORMAL = "lognormal"
    TRUNCATED_LOGNORMAL = "truncated-lognormal"
    GAMMA = "gamma"
    EXPONENTIAL = "exponential"
    TRIANGULAR = "triangular"
    LOCATION_SCALE = "location-scale"


TRUNCATED_KINDS = frozenset(
    {Kind.TRUNCATED_NORMAL, Kind.TRUNCATED_GUMBEL, Kind.TRUNCATED_LOGNORMAL}
)
ONE_PARAM_KINDS = frozenset({Kind.TRIANGULAR, Kind.EXPONENTIAL})

PARAM_NAMES = {
    Kind.NORMAL: ("mu", "sigma"),
    Kind.TRUNCATED_NORMAL: ("mu", "sigma"),
    Kind.LOGNORMAL: ("mu", "sigma"),
    Kind.TRUNCATED_LOGNORMAL: ("mu", "sigma"),
    Kind.GUMBEL: ("m", "s"),
    Kind.TRUNCATED_GUMBEL: ("m", "s"),
    Kind.LOCATION_SCALE: ("m", "s"),
    Kind.GAMMA: ("alpha", "beta"),
    Kind.EXPONENTIAL: ("lambda",),
    Kind.TRIANGULAR: ("m",),
}


@dataclass(frozen=True, eq=False)
class BaseDensity:
    """Standardized density ``p`` generating a location-scale family.

    ``dlogpdf`` is ``p'/p``; when omitted a central difference is used.
    ``ppf`` is only needed for sampling. Equality is by ``name``.
    """

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    dlogpdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ppf: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __eq__(self, other):
        return isinstance(other, BaseDensity) and other.name == self.name

    def __hash__(self):
        return hash(("BaseDensity", self.name))

    def score(self, y):
        y = np.asarray(y, dtype=float)
        if self.dlogpdf is not None:
            return self.dlogpdf(y)
        h = 1e-5 * np.maximum(1.0, np.abs(y))
        return (np.log(self.pdf(y + h)) - np.log(self.pdf(y - h))) / (2 * h)


def _std_normal_pdf(y):
    return np.exp(-0.5 * y * y) / math.sqrt(2 * math.pi)


def _gumbel_pdf(y):
    return np.exp(-y - np.exp(-y))


def _logistic_pdf(y):
    e = np.exp(-np.abs(y))
    return e / (1 + e) ** 2


def _std_normal_ppf(u):
    from scipy.special import ndtri

    return ndtri(u)


NORMAL_BASE = BaseDensity("normal", _std_normal_pdf, lambda y: -y, _std_normal_ppf)
GUMBEL_BASE = BaseDensity(
    "gumbel", _gumbel_pdf, lambda y: np.exp(-y) - 1.0, lambda u: -np.log(-np.log(u))
)
LOGISTIC_BASE = BaseDensity(
    "logistic",
    _logistic_pdf,
    lambda y: -np.tanh(y / 2),
    lambda u: np.log(u) - np.log1p(-u),
)


def student_base(nu: float) -> BaseDensity:
    """Standard Student-t base density with ``nu`` degrees of freedom."""
    from scipy import stats

    dist = stats.t(nu)
    return BaseDensity(
        f"student-{nu:g}",
        dist.pdf,
        lambda y: -(nu + 1) * y / (nu + y * y),
        dist.ppf,
    )


BUILTIN_BASES = {b.name: b for b in (NORMAL_BASE, GUMBEL_BASE, LOGISTIC_BASE)}


def _base_from_name(name: str) -> BaseDensity:
    if name in BUILTIN_BASES:
        return BUILTIN_BASES[name]
    if name.startswith("student-"):
        return student_base(float(name.split("-", 1)[1]))
    raise ValidationError(f"unknown base density {name!r}")


@dataclass(frozen=True)
class FamilySpec:
    """A parametric family: its kind plus fixed truncation bounds.

    For truncated kinds ``truncation`` is the conditioning interval; for
    ``Triangular`` it is the support. ``base`` is the standardized density of
    a ``LocationScale`` family.
    """

    kind: Kind
    truncation: Optional[tuple[float, float]] = None
    base: Optional[BaseDensity] = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        needs_bounds = kind in TRUNCATED_KINDS or kind is Kind.TRIANGULAR
        if needs_bounds:
            if self.truncation is None:
                raise InvalidTruncationError(f"{kind.value} requires bounds [a, b]")
            a, b = (float(v) for v in self.truncation)
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InvalidTruncationError(f"bounds must be finite, got [{a}, {b}]")
            if a >= b:
                raise InvalidTruncationError(f"need a < b, got [{a}, {b}]")
            if kind is Kind.TRUNCATED_LOGNORMAL and a <= 0:
                raise InvalidTruncationError(
                    f"log-normal truncation must lie in (0, inf), got [{a}, {b}]"
                )
            object.__setattr__(self, "truncation", (a, b))
        elif self.truncation is not None:
            raise InvalidTruncationError(f"{kind.value} takes no truncation bounds")
        if kind is Kind.LOCATION_SCALE:
            if self.base is None:
                raise ValidationError("location-scale family needs a base density")
        elif self.base is not None:
            raise ValidationError(f"{kind.value} takes no base density")

    # convenience constructors
    @classmethod
    def normal(cls):
        return cls(Kind.NORMAL)

    @classmethod
    def truncated_normal(cls, a, b):
        return cls(Kind.TRUNCATED_NORMAL, (a, b))

    @classmethod
    def gumbel(cls):
        return cls(Kind.GUMBEL)

    @classmethod
    def truncated_gumbel(cls, a, b):
        return cls(Kind.TRUNCATED_GUMBEL, (a, b))

    @classmethod
    def lognormal(cls):
        return cls(Kind.LOGNORMAL)

    @classmethod
    def truncated_lognormal(cls, a, b):
        return cls(Kind.TRUNCATED_LOGNORMAL, (a, b))

    @classmethod
    def gamma(cls):
        return cls(Kind.GAMMA)

    @classmethod
    def exponential(cls):
        return cls(Kind.EXPONENTIAL)

    @classmethod
    def triangular(cls, a, b):
        return cls(Kind.TRIANGULAR, (a, b))

    @classmethod
    def location_scale(cls, base: BaseDensity):
        return cls(Kind.LOCATION_SCALE, base=base)

    @property
    def param_dim(self) -> int:
        return 1 if self.kind in ONE_PARAM_KINDS else 2

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.kind]

    @property
    def is_truncated(self) -> bool:
        return self.kind in TRUNCATED_KINDS

    @property
    def support(self) -> tuple[float, float]:
        if self.truncation is not None:
            return self.truncation
        if self.kind in (Kind.LOGNORMAL, Kind.GAMMA, Kind.EXPONENTIAL):
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    def point(self, *coords) -> "ParamPoint":
        return ParamPoint.of(self, coords)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.truncation is not None:
            out["bounds"] = list(self.truncation)
        if self.base is not None:
            out["base"] = self.base.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FamilySpec":
        bounds = data.get("bounds")
        base = data.get("base")
        return cls(
            Kind(data["kind"]),
            tuple(bounds) if bounds is not None else None,
            _base_from_name(base) if base is not None else None,
        )

    def __str__(self):
        s = self.kind.value
        if self.truncation is not None:
            s += "[{:g},{:g}]".format(*self.truncation)
        if self.base is not None:
            s += f"({self.base.name})"
        return s


def domain_mask(spec: FamilySpec, coords) -> np.ndarray:
    """Vectorized domain membership for an array of shape ``(..., d)``."""
    c = np.asarray(coords, dtype=float)
    finite = np.all(np.isfinite(c), axis=-1)
    kind = spec.kind
    if kind is Kind.TRIANGULAR:
        a, b = spec.truncation
        eps = TRIANGULAR_MARGIN * (b - a)
        m = c[..., 0]
        return finite & (m > a + eps) & (m < b - eps)
    if kind is Kind.EXPONENTIAL:
        return finite & (c[..., 0] >= PARAM_FLOOR)
    if kind is Kind.GAMMA:
        return finite & (c[..., 0] >= PARAM_FLOOR) & (c[..., 1] >= PARAM_FLOOR)
    return finite & (c[..., 1] >= PARAM_FLOOR)


@dataclass(frozen=True)
class ParamPoint:
    """A point of the open parameter domain of one family."""

    coords: tuple[float, ...]

    @classmethod
    def of(cls, spec: FamilySpec, coords) -> "ParamPoint":
        if isinstance(coords, ParamPoint):
            coords = coords.coords
        arr = np.atleast_1d(np.asarray(coords, dtype=float)).ravel()
        if arr.size != spec.param_dim:
            raise DomainError(
                f"{spec} expects {spec.param_dim} parameter(s), got {arr.size}"
            )
        if not bool(domain_mask(spec, arr)):
            names = ",".join(spec.param_names)
            raise DomainError(f"({names})={tuple(arr.tolist())} outside domain of {spec}")
        return cls(tuple(float(v) for v in arr))

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def as_point(spec: FamilySpec, theta) -> ParamPoint:
    return ParamPoint.of(spec, theta)


@dataclass(frozen=True, eq=False)
class FisherMetric:
    """Fisher information matrix at a parameter point.

    ``source`` is one of ``closed-form``, ``quadrature``, ``monte-carlo``;
    ``stderr`` holds entrywise Monte-Carlo standard errors when available.
    """

    entries: np.ndarray
    at_point: ParamPoint
    source: str = "closed-form"
    stderr: Optional[np.ndarray] = None

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)

    def norm(self, v: Sequence[float]) -> float:
        v = np.asarray(v, dtype=float)
        return float(math.sqrt(max(v @ self.entries @ v, 0.0)))


@dataclass(frozen=True, eq=False)
class ChristoffelSymbols:
    """Christoffel symbols of the second kind, ``symbols[k, i, j]``."""

    symbols: np.ndarray
    at_point: ParamPoint
    source: str = "closed-form"  # or "finite-difference"

    def __getitem__(self, idx):
        return self.symbols[idx]


@dataclass(frozen=True)
class TruncatedMoments:
    """Mean/variance of a truncated normal and their partials in (mu, sigma).

    Derivative attributes follow ``d<vars>_<quantity>``; e.g. ``dsm_mean`` is
    the mixed second partial of the mean in sigma and mu.
    """

    mean: float
    var: float
    dm_mean: float
    ds_mean: float
    dm_var: float
    ds_var: float
    dmm_mean: float
    dsm_mean: float
    dss_mean: float
    dmm_var: float
    dsm_var: float
    dss_var: float
    extra: dict = field(default_factory=dict, repr=False)
