"""Model definition: offspring law, displacement law, level schedule.

The simulated object is a tree with ``k_n`` coarse levels.  Every node spawns
a Galton-Watson population run for ``b_n`` generations, and every child edge
carries a displacement distributed as a length-``b_n`` random walk with
centred unit-variance steps.  ``n`` is the nominal number of fine generations;
``b_n = floor(n / k_n)`` and the effective fine horizon is ``k_n * b_n``.

All types here are frozen dataclasses, safe to share between workers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

PROB_TOL = 1e-12

OFFSPRING_PRESETS = ("deterministic", "binary", "custom")
DISPLACEMENT_PRESETS = (
    "standard_gaussian",
    "uniform_centered",
    "shifted_exponential",
    "two_point_lattice",
)
HYPOTHESES = ("H1", "H2", "oracle_only")


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support offspring law with p(0) = 0.

    ``weights`` maps k >= 1 to p(k).  Finite support keeps the second moment
    finite automatically and makes exact Galton-Watson moments available to
    the test oracles.
    """

    weights: tuple[tuple[int, float], ...]
    preset: str = "custom"

    @staticmethod
    def deterministic(r: int) -> "OffspringLaw":
        if r < 2:
            raise ValueError("deterministic offspring needs r >= 2 for m > 1")
        return OffspringLaw(weights=((r, 1.0),), preset="deterministic")

    @staticmethod
    def binary() -> "OffspringLaw":
        return OffspringLaw.deterministic(2)

    @staticmethod
    def from_dict(d: dict[int, float]) -> "OffspringLaw":
        items = tuple(sorted((int(k), float(v)) for k, v in d.items()))
        return OffspringLaw(weights=items, preset="custom")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.weights)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.weights)

    @property
    def mean(self) -> float:
        return sum(k * p for k, p in self.weights)

    @property
    def second_moment(self) -> float:
        return sum(k * k * p for k, p in self.weights)

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean ** 2

    @property
    def is_deterministic(self) -> bool:
        return len(self.weights) == 1 and self.weights[0][1] == 1.0

    def to_json(self) -> dict:
        return {
            "preset": self.preset,
            "weights": {str(k): p for k, p in self.weights},
        }

    @staticmethod
    def from_json(obj: dict) -> "OffspringLaw":
        weights = tuple(sorted((int(k), float(v)) for k, v in obj["weights"].items()))
        return OffspringLaw(weights=weights, preset=obj.get("preset", "custom"))


@dataclass(frozen=True)
class DisplacementLaw:
    """Preset fine-step law, always centred with unit variance.

    ``mgf_domain`` is the open interval where the log-MGF is finite.
    ``gaussian`` marks H1 eligibility, ``cramer`` marks H2 eligibility, and
    ``oracle_only`` marks lattice laws kept purely for exact-enumeration
    oracles (the Cramer condition fails for them).
    """

    preset: str
    mgf_domain: tuple[float, float]
    gaussian: bool = False
    cramer: bool = False
    oracle_only: bool = False

    @staticmethod
    def standard_gaussian() -> "DisplacementLaw":
        return DisplacementLaw(
            preset="standard_gaussian",
            mgf_domain=(-math.inf, math.inf),
            gaussian=True,
            cramer=True,
        )

    @staticmethod
    def uniform_centered() -> "DisplacementLaw":
        # uniform on [-sqrt(3), sqrt(3)]: entire-line MGF, Cramer holds
        return DisplacementLaw(
            preset="uniform_centered",
            mgf_domain=(-math.inf, math.inf),
            cramer=True,
        )

    @staticmethod
    def shifted_exponential() -> "DisplacementLaw":
        # Exp(1) - 1: MGF finite only for theta < 1
        return DisplacementLaw(
            preset="shifted_exponential",
            mgf_domain=(-math.inf, 1.0),
            cramer=True,
        )

    @staticmethod
    def two_point_lattice() -> "DisplacementLaw":
        # +/-1 with prob 1/2: lattice, |phi(lambda)| = |cos(lambda)| has
        # limsup 1, so the Cramer condition fails
        return DisplacementLaw(
            preset="two_point_lattice",
            mgf_domain=(-math.inf, math.inf),
            oracle_only=True,
        )

    @staticmethod
    def from_preset(name: str) -> "DisplacementLaw":
        factory = {
            "standard_gaussian": DisplacementLaw.standard_gaussian,
            "uniform_centered": DisplacementLaw.uniform_centered,
            "shifted_exponential": DisplacementLaw.shifted_exponential,
            "two_point_lattice": DisplacementLaw.two_point_lattice,
        }
        if name not in factory:
            raise ValueError(f"unknown displacement preset {name!r}")
        return factory[name]()

    def to_json(self) -> dict:
        return {"preset": self.preset}

    @staticmethod
    def from_json(obj: dict) -> "DisplacementLaw":
        return DisplacementLaw.from_preset(obj["preset"])


@dataclass(frozen=True)
class Schedule:
    """Level schedule: n fine generations split into k_n levels of b_n steps.

    ``rule`` records how k_n scales with n so that experiment grids can
    re-derive k_n at each n:

    * ``("constant", k)``  -> k_n = k
    * ``("power", alpha)`` -> k_n = max(1, floor(n ** alpha))
    * ``("given_b", b)``   -> k_n = max(1, floor(n / b))
    * ``("explicit", k)``  -> k_n = k, valid for this n only
    """

    n: int
    k_n: int
    rule: tuple[str, float] = field(default=("explicit", 0.0))

    @staticmethod
    def constant_k(n: int, k: int) -> "Schedule":
        return Schedule(n=n, k_n=min(k, n), rule=("constant", float(k)))

    @staticmethod
    def power(n: int, alpha: float) -> "Schedule":
        k = max(1, min(n, int(math.floor(n ** alpha))))
        return Schedule(n=n, k_n=k, rule=("power", alpha))

    @staticmethod
    def sqrt(n: int) -> "Schedule":
        return Schedule.power(n, 0.5)

    @staticmethod
    def given_b(n: int, b: int) -> "Schedule":
        k = max(1, n // b)
        return Schedule(n=n, k_n=k, rule=("given_b", float(b)))

    @staticmethod
    def brw(n: int) -> "Schedule":
        # k_n = n, b_n = 1: the plain branching random walk, used only for
        # the qualitative decoration-contrast run
        return Schedule(n=n, k_n=n, rule=("constant", float(n)))

    def with_n(self, n: int) -> "Schedule":
        kind, value = self.rule
        if kind == "constant":
            return Schedule.constant_k(n, int(value))
        if kind == "power":
            return Schedule.power(n, value)
        if kind == "given_b":
            return Schedule.given_b(n, int(value))
        raise ValueError("explicit schedules cannot be re-derived at a new n")

    @property
    def b_n(self) -> int:
        return self.n // self.k_n

    @property
    def n_eff(self) -> int:
        """Effective fine horizon k_n * b_n (<= n because of the floor)."""
        return self.k_n * self.b_n

    def to_json(self) -> dict:
        return {"n": self.n, "k_n": self.k_n, "rule": [self.rule[0], self.rule[1]]}

    @staticmethod
    def from_json(obj: dict) -> "Schedule":
        rule = obj.get("rule", ["explicit", 0.0])
        return Schedule(n=int(obj["n"]), k_n=int(obj["k_n"]), rule=(str(rule[0]), float(rule[1])))


@dataclass(frozen=True)
class ModelSpec:
    """Full model: offspring + displacement + schedule + hypothesis tag."""

    offspring: OffspringLaw
    displacement: DisplacementLaw
    schedule: Schedule
    hypothesis: str = "H1"

    def to_json(self) -> dict:
        return {
            "offspring": self.offspring.to_json(),
            "displacement": self.displacement.to_json(),
            "schedule": self.schedule.to_json(),
            "hypothesis": self.hypothesis,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @staticmethod
    def from_json(obj: dict) -> "ModelSpec":
        return ModelSpec(
            offspring=OffspringLaw.from_json(obj["offspring"]),
            displacement=DisplacementLaw.from_json(obj["displacement"]),
            schedule=Schedule.from_json(obj["schedule"]),
            hypothesis=obj.get("hypothesis", "H1"),
        )

    @staticmethod
    def loads(text: str) -> "ModelSpec":
        return ModelSpec.from_json(json.loads(text))


@dataclass(frozen=True)
class ValidationReport:
    """Pass/fail per assumption, with the violated clause named."""

    failures: tuple[tuple[str, str], ...]  # (clause, message)
    advisories: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.failures

    def clauses(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.failures)

    def __str__(self) -> str:
        if self.ok:
            lines = ["validation: PASS"]
        else:
            lines = ["validation: FAIL"]
            lines += [f"  [{c}] {m}" for c, m in self.failures]
        lines += [f"  advisory: {a}" for a in self.advisories]
        return "\n".join(lines)


def validate_spec(spec: ModelSpec, n_grid: tuple[int, ...] | None = None) -> ValidationReport:
    """Check the standing assumptions; failures name the violated clause.

    Pure function: the report depends only on the spec (and the optional
    experiment n-grid used for the asymptotic advisories).
    """
    failures: list[tuple[str, str]] = []
    advisories: list[str] = []

    off = spec.offspring
    probs = dict(off.weights)
    if any(k < 0 for k in probs):
        failures.append(("support", "offspring support contains negative k"))
    if probs.get(0, 0.0) != 0.0:
        failures.append(("p0=0", f"offspring law has p(0)={probs.get(0)!r}, must be 0"))
    total = sum(off.probs)
    if abs(total - 1.0) > PROB_TOL:
        failures.append(("normalization", f"offspring weights sum to {total!r}"))
    if any(p < 0 for p in off.probs):
        failures.append(("normalization", "offspring weights must be nonnegative"))
    if off.mean <= 1.0:
        failures.append(("m>1", f"offspring mean m={off.mean!r} must exceed 1"))
    # finite support => E(Z_1^2) < infty holds by construction; record nothing

    law = spec.displacement
    if law.preset not in DISPLACEMENT_PRESETS:
        failures.append(("displacement", f"unknown preset {law.preset!r}"))
    lo, hi = law.mgf_domain
    if not (hi > 0):
        failures.append(("mgf", "need some theta > 0 with finite log-MGF"))

    if spec.hypothesis not in HYPOTHESES:
        failures.append(("hypothesis", f"unknown hypothesis tag {spec.hypothesis!r}"))
    if spec.hypothesis == "H1" and not law.gaussian:
        failures.append(("H1", f"H1 requires the Gaussian preset, got {law.preset!r}"))
    if spec.hypothesis == "H2" and not law.cramer:
        failures.append(
            ("Cramér condition", f"{law.preset!r} is lattice/non-Cramér and cannot run under H2")
        )

    sched = spec.schedule
    if not (1 <= sched.k_n <= sched.n):
        failures.append(("schedule", f"need 1 <= k_n <= n, got k_n={sched.k_n}, n={sched.n}"))
    elif sched.b_n < 1:
        failures.append(("schedule", f"b_n = floor(n/k_n) = {sched.b_n} must be >= 1"))

    # Limit conditions (b_n -> infty, b_n/log(n)^2 -> infty) are properties of
    # a sequence; on a finite grid they can only be advisory trends.
    if n_grid is not None and len(n_grid) >= 2 and sched.rule[0] != "explicit":
        bs = [spec.schedule.with_n(n).b_n for n in n_grid]
        if spec.hypothesis == "H1" and any(b2 < b1 for b1, b2 in zip(bs, bs[1:])):
            advisories.append(f"H1 wants b_n increasing along the grid; got {bs}")
        if spec.hypothesis == "H2":
            ratios = [b / math.log(n) ** 2 for b, n in zip(bs, n_grid)]
            if any(r2 < r1 for r1, r2 in zip(ratios, ratios[1:])):
                advisories.append(
                    "H2 wants b_n/log(n)^2 increasing along the grid; got "
                    + ", ".join(f"{r:.3g}" for r in ratios)
                )

    return ValidationReport(failures=tuple(failures), advisories=tuple(advisories))


def effective_generations(schedule: Schedule) -> int:
    """Total fine generations actually simulated: k_n * b_n."""
    return schedule.n_eff
