"""Declarative search space: component inventory and hyperparameter domains.

The resampler and imbalance-ensemble rows mirror the published search table
verbatim (including its [0.05-1.01] fraction ranges, clamped to 1.0 at use).
Domains for the native components are a frozen snapshot documented here
rather than resolved from any external configuration at runtime. Two rows
declare defaults outside their search range (RUSBoost n_estimators,
balanced-forest min_impurity_decrease); validation admits the declared
default as well as any in-range value, so default pipelines stay legal while
search draws stay inside the range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .rng import Rng

SAMPLER = "sampler"
PREPROCESSOR = "preprocessor"
ESTIMATOR = "estimator"


class DomainError(ValueError):
    """A hyperparameter value outside its declared domain; names the offender."""


@dataclass(frozen=True)
class Categorical:
    values: tuple
    default: object

    def contains(self, v) -> bool:
        return v in self.values or v == self.default

    def draw(self, rng: Rng):
        return self.values[int(rng.np.integers(len(self.values)))]


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int
    default: int

    def contains(self, v) -> bool:
        return (isinstance(v, int) and self.lo <= v <= self.hi) or v == self.default

    def draw(self, rng: Rng) -> int:
        return int(rng.np.integers(self.lo, self.hi + 1))


@dataclass(frozen=True)
class RealRange:
    lo: float
    hi: float
    default: float

    @property
    def log_scale(self) -> bool:
        # log-uniform sampling once the range spans more than one order of magnitude
        return self.lo > 0 and self.hi / self.lo > 10.0

    def contains(self, v) -> bool:
        return (isinstance(v, (int, float)) and not isinstance(v, bool)
                and self.lo <= float(v) <= self.hi) or v == self.default

    def draw(self, rng: Rng) -> float:
        if self.log_scale:
            return float(math.exp(rng.np.uniform(math.log(self.lo), math.log(self.hi))))
        return float(rng.np.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    category: str
    params: tuple[tuple[str, object], ...] = ()  # (name, domain) in canonical order

    def domain(self, name: str):
        for pname, dom in self.params:
            if pname == name:
                return dom
        raise DomainError(f"unknown hyperparameter '{name}' for {self.name}")

    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)


@dataclass(frozen=True)
class ComponentConfig:
    """A component with bound hyperparameter values, validated on creation."""

    name: str
    category: str
    params: tuple[tuple[str, object], ...] = ()

    def get(self, name: str):
        for pname, v in self.params:
            if pname == name:
                return v
        raise KeyError(name)

    def as_dict(self) -> dict:
        return dict(self.params)


class SearchSpace:
    def __init__(self, components: list[ComponentSpec]):
        self.components = {c.name: c for c in components}
        if len(self.components) != len(components):
            raise ValueError("duplicate component names")

    def __contains__(self, name: str) -> bool:
        return name in self.components

    def spec(self, name: str) -> ComponentSpec:
        if name not in self.components:
            raise DomainError(f"unknown component '{name}'")
        return self.components[name]

    def by_category(self, category: str) -> tuple[ComponentSpec, ...]:
        return tuple(c for c in self.components.values() if c.category == category)

    def samplers(self):
        return self.by_category(SAMPLER)

    def preprocessors(self):
        return self.by_category(PREPROCESSOR)

    def estimators(self):
        return self.by_category(ESTIMATOR)

    def make_config(self, name: str, params: dict | None = None) -> ComponentConfig:
        """Bind values (missing ones fall back to defaults) and validate domains."""
        spec = self.spec(name)
        params = dict(params or {})
        bound = []
        for pname, dom in spec.params:
            v = params.pop(pname, dom.default)
            if isinstance(dom, IntRange) and isinstance(v, float) and v.is_integer():
                v = int(v)
            if isinstance(dom, RealRange) and isinstance(v, int):
                v = float(v)
            if not dom.contains(v):
                raise DomainError(
                    f"{name}: value {v!r} for hyperparameter '{pname}' is outside its domain")
            bound.append((pname, v))
        if params:
            raise DomainError(
                f"{name}: unknown hyperparameter '{sorted(params)[0]}'")
        return ComponentConfig(spec.name, spec.category, tuple(bound))

    def default_config(self, name: str) -> ComponentConfig:
        return self.make_config(name, {})

    def random_config(self, name: str, rng: Rng) -> ComponentConfig:
        spec = self.spec(name)
        return ComponentConfig(
            spec.name, spec.category,
            tuple((pname, dom.draw(rng)) for pname, dom in spec.params))


def _k(default=5):
    return IntRange(1, 25, default)


def build_default_space() -> SearchSpace:
    frac = RealRange(0.05, 1.01, 1.0)
    components = [
        # resamplers
        ComponentSpec("SMOTE", SAMPLER, (("k_neighbours", _k()),)),
        ComponentSpec("BorderlineSMOTE", SAMPLER, (
            ("k_neighbours", _k()),
            ("kind", Categorical(("borderline-1", "borderline-2"), "borderline-1")),
            ("m_neighbours", _k(10)),
        )),
        ComponentSpec("ADASYN", SAMPLER, (("k_neighbours", _k()),)),
        ComponentSpec("EditedNearestNeighbours", SAMPLER, (("k_neighbours", _k()),)),
        ComponentSpec("CondensedNearestNeighbour", SAMPLER, (("k_neighbours", _k()),)),
        ComponentSpec("AllKNN", SAMPLER, (("k_neighbours", _k()),)),
        ComponentSpec("ClusterCentroids", SAMPLER, (
            ("voting", Categorical(("auto", "hard", "soft"), "auto")),
        )),
        ComponentSpec("TomekLinks", SAMPLER, ()),
        ComponentSpec("SMOTEENN", SAMPLER, (
            ("sampling_strategy", Categorical(("auto", "minority", "all"), "auto")),
        )),
        # the published table's strategy row carries a [1-25] range, which only
        # fits a neighbour count; exposed here as the SMOTE side's k
        ComponentSpec("SMOTETomek", SAMPLER, (("k_smote", _k()),)),
        # preprocessors
        ComponentSpec("Normalizer", PREPROCESSOR, (
            ("norm", Categorical(("l2", "l1", "max"), "l2")),
        )),
        ComponentSpec("Binarizer", PREPROCESSOR, (
            ("threshold", RealRange(0.0, 1.0, 0.0)),
        )),
        ComponentSpec("VarianceThreshold", PREPROCESSOR, (
            ("threshold", RealRange(0.0, 0.05, 0.0)),
        )),
        ComponentSpec("PCA", PREPROCESSOR, (
            ("n_components", IntRange(1, 20, 5)),
        )),
        ComponentSpec("PolynomialFeatures", PREPROCESSOR, (
            ("degree", Categorical((2,), 2)),
        )),
        # imbalance ensembles
        ComponentSpec("BalancedRandomForestClassifier", ESTIMATOR, (
            ("n_estimators", Categorical((100,), 100)),
            ("criterion", Categorical(("gini", "entropy"), "gini")),
            ("max_features", frac),
            ("min_impurity_decrease", RealRange(0.05, 1.01, 0.0)),
        )),
        ComponentSpec("BalancedBaggingClassifier", ESTIMATOR, (
            ("n_estimators", Categorical((10, 100), 10)),
            ("max_features", frac),
            ("max_samples", frac),
        )),
        ComponentSpec("RUSBoostClassifier", ESTIMATOR, (
            ("learning_rate", RealRange(0.05, 1.01, 1.0)),
            ("n_estimators", Categorical((50, 100), 10)),
            ("max_depth", IntRange(1, 3, 1)),
        )),
        # native estimators (frozen snapshot of searched domains)
        ComponentSpec("DecisionTreeClassifier", ESTIMATOR, (
            ("criterion", Categorical(("gini", "entropy"), "gini")),
            ("max_depth", IntRange(1, 20, 20)),
        )),
        ComponentSpec("DecisionStumpClassifier", ESTIMATOR, (
            ("criterion", Categorical(("gini", "entropy"), "gini")),
        )),
        ComponentSpec("RandomForestClassifier", ESTIMATOR, (
            ("n_estimators", Categorical((100,), 100)),
            ("criterion", Categorical(("gini", "entropy"), "gini")),
            ("max_features", RealRange(0.05, 1.01, 0.5)),
        )),
        ComponentSpec("KNeighborsClassifier", ESTIMATOR, (
            ("n_neighbors", _k()),
        )),
        ComponentSpec("LogisticRegression", ESTIMATOR, (
            ("regularization", RealRange(1e-4, 10.0, 1.0)),
        )),
        ComponentSpec("GaussianNB", ESTIMATOR, ()),
    ]
    return SearchSpace(components)


DEFAULT_SPACE = build_default_space()
