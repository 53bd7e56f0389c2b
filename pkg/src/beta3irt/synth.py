"""Synthetic data: Beta^3 response matrices and simulated classifier panels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Family, ModelParams, ResponseMatrix, beta_shape
from .errors import DomainError


@dataclass(frozen=True)
class GeneratorSpec:
    M: int
    N: int
    ability_prior: tuple[float, float] = (1.0, 1.0)
    difficulty_prior: tuple[float, float] = (1.0, 1.0)
    discrimination_prior: tuple[float, float] = (1.0, 1.0)  # (mean, sd)
    responses_per_pair: int = 1
    observation_density: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise DomainError("M and N must be >= 1")
        for name in ("ability_prior", "difficulty_prior"):
            a, b = getattr(self, name)
            if not (a > 0 and b > 0):
                raise DomainError(f"{name} shape parameters must be positive")
        mu, sd = self.discrimination_prior
        if not (np.isfinite(mu) and sd >= 0):
            raise DomainError("discrimination_prior needs a finite mean and sd >= 0")
        if self.responses_per_pair < 1:
            raise DomainError("responses_per_pair must be >= 1")
        if not (0.0 < self.observation_density <= 1.0):
            raise DomainError("observation_density must lie in (0, 1]")


def sample_beta_responses(alpha, beta, rng: np.random.Generator) -> np.ndarray:
    """Draw Beta(alpha, beta) variates, robust to extreme shapes.

    When both gamma variates underflow (alpha + beta tiny) the Beta is
    effectively Bernoulli(alpha / (alpha + beta)), which is what we draw.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    with np.errstate(invalid="ignore"):
        p = rng.beta(alpha, beta)
    bad = ~np.isfinite(p)
    if np.any(bad):
        mean = alpha[bad] / (alpha[bad] + beta[bad])
        p[bad] = (rng.random(int(bad.sum())) < mean).astype(float)
    return p


def _coverage_mask(M, N, density, rng):
    if density >= 1.0:
        return np.ones((M, N), dtype=bool)
    while True:
        mask = rng.random((M, N)) < density
        if mask.any(axis=1).all() and mask.any(axis=0).all():
            return mask


def sample_responses(params: ModelParams, respondent, item, rng: np.random.Generator) -> np.ndarray:
    """One Beta^3 response per (respondent, item) row."""
    r = np.asarray(respondent)
    j = np.asarray(item)
    alpha, beta = beta_shape(params.abilities[r], params.difficulties[j], params.discriminations[j])
    return sample_beta_responses(alpha, beta, rng)


def sample_dataset(spec: GeneratorSpec) -> tuple[ResponseMatrix, ModelParams]:
    """Draw parameters from the priors, then responses from the model."""
    rng = np.random.default_rng(spec.seed)
    theta = rng.beta(*spec.ability_prior, size=spec.M)
    delta = rng.beta(*spec.difficulty_prior, size=spec.N)
    a = rng.normal(spec.discrimination_prior[0], spec.discrimination_prior[1], size=spec.N)
    # Beta draws can round to the endpoints for very skewed priors.
    tiny = 1e-12
    theta = np.clip(theta, tiny, 1 - tiny)
    delta = np.clip(delta, tiny, 1 - tiny)
    truth = ModelParams(Family.BETA3, theta, delta, a)

    mask = _coverage_mask(spec.M, spec.N, spec.observation_density, rng)
    r, j = np.nonzero(mask)
    r = np.repeat(r, spec.responses_per_pair)
    j = np.repeat(j, spec.responses_per_pair)
    p = sample_responses(truth, r, j, rng)
    return ResponseMatrix(spec.M, spec.N, r, j, p), truth


@dataclass(frozen=True, eq=False)
class ClassifierResponseSet:
    """Class-probability predictions of M classifiers on N labelled instances.

    ``probs`` has shape (M, N, K); ``labels`` has shape (N,).
    """

    probs: np.ndarray
    labels: np.ndarray
    classifier_ids: tuple[str, ...] = ()
    instance_ids: tuple[str, ...] = ()

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        labels = np.array(self.labels, dtype=np.int64)
        if probs.ndim != 3:
            raise DomainError("probs must have shape (classifiers, instances, classes)")
        M, N, K = probs.shape
        if labels.shape != (N,):
            raise DomainError("labels must have one entry per instance")
        if K < 2:
            raise DomainError("need at least two classes")
        if np.any(probs < 0) or np.any(probs > 1):
            raise DomainError("probabilities must lie in [0, 1]")
        if np.max(np.abs(probs.sum(axis=2) - 1.0)) > 1e-9:
            raise DomainError("class probabilities must sum to 1")
        if labels.min() < 0 or labels.max() >= K:
            raise DomainError("labels must lie in [0, K)")
        probs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)
        cids = tuple(self.classifier_ids) or tuple(f"clf{i}" for i in range(M))
        iids = tuple(self.instance_ids) or tuple(str(j) for j in range(N))
        if len(cids) != M or len(iids) != N:
            raise DomainError("id labels must match the probability array")
        object.__setattr__(self, "classifier_ids", cids)
        object.__setattr__(self, "instance_ids", iids)

    @property
    def num_classifiers(self) -> int:
        return self.probs.shape[0]

    @property
    def num_instances(self) -> int:
        return self.probs.shape[1]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[2]

    def with_labels(self, labels) -> "ClassifierResponseSet":
        return ClassifierResponseSet(self.probs, labels, self.classifier_ids, self.instance_ids)

    def with_instance_prefix(self, prefix: str) -> "ClassifierResponseSet":
        return ClassifierResponseSet(self.probs, self.labels, self.classifier_ids,
                                     tuple(prefix + i for i in self.instance_ids))

    def correct_class_probs(self) -> np.ndarray:
        """(M, N) probability each classifier gives to the labelled class."""
        return self.probs[:, np.arange(self.num_instances), self.labels]


def to_response_matrix(c: ClassifierResponseSet) -> ResponseMatrix:
    """Response of classifier i to instance j is its probability for y_j."""
    resp = c.correct_class_probs()
    M, N = resp.shape
    r, j = np.divmod(np.arange(M * N), N)
    return ResponseMatrix(M, N, r, j, resp.ravel(), respondent_ids=c.classifier_ids, item_ids=c.instance_ids)


def joint_response_matrix(test: ClassifierResponseSet, train: ClassifierResponseSet | None = None) -> ResponseMatrix:
    """Responses to the training instances followed by the test instances.

    Both panels must list the same classifiers. Training items take indices
    0..n_train-1, so test item j sits at n_train + j.
    """
    if train is None:
        return to_response_matrix(test)
    if train.classifier_ids != test.classifier_ids:
        raise DomainError("training and test panels must list the same classifiers")
    resp = np.concatenate([train.correct_class_probs(), test.correct_class_probs()], axis=1)
    M, N = resp.shape
    r, j = np.divmod(np.arange(M * N), N)
    return ResponseMatrix(M, N, r, j, resp.ravel(), respondent_ids=test.classifier_ids,
                          item_ids=train.instance_ids + test.instance_ids)


def inject_label_noise(labels, fraction: float, K: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Flip exactly round(fraction * N) labels to a different, uniformly chosen class."""
    if not (0.0 <= fraction <= 1.0):
        raise DomainError("fraction must lie in [0, 1]")
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    k = int(np.floor(fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=k, replace=False)
    out = labels.copy()
    out[idx] = (labels[idx] + rng.integers(1, K, size=k)) % K
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return out, mask


@dataclass(frozen=True)
class PanelMember:
    """One simulated classifier.

    ``kind`` is "skilled" for a learned model, or one of "constant",
    "positive", "negative" for the degenerate baselines.
    """

    name: str
    kind: str = "skilled"
    skill: float = 0.8
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in ("skilled", "constant", "positive", "negative"):
            raise DomainError(f"unknown panel member kind {self.kind!r}")
        if self.kind == "skilled":
            if not (0.0 < self.skill < 1.0):
                raise DomainError("skill must lie in (0, 1)")
            if self.temperature <= 0:
                raise DomainError("temperature must be positive")


def default_panel() -> list[PanelMember]:
    """Nine skilled members of graded skill plus the three degenerate baselines."""
    skills = [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
    temps = [1.0, 0.6, 1.4, 0.8, 1.2, 1.0, 0.7, 1.3, 0.9]
    members = [PanelMember(f"skilled{i + 1}", "skilled", s, t) for i, (s, t) in enumerate(zip(skills, temps))]
    members += [PanelMember("constant", "constant"), PanelMember("positive", "positive"),
                PanelMember("negative", "negative")]
    return members


@dataclass(frozen=True)
class PanelSpec:
    members: tuple[PanelMember, ...] = field(default_factory=lambda: tuple(default_panel()))
    # Scale of the instance margins (distance from the decision boundary).
    margin_scale: float = 3.0
    # Spread of each classifier's instance-level error.
    noise_scale: float = 2.0
    # Fraction of training labels flipped; dilutes every skilled member's signal.
    train_noise: float = 0.0


def simulate_classifier_panel(N: int, K: int = 2, panel_spec: PanelSpec | None = None, seed=0) -> ClassifierResponseSet:
    """Class probabilities of a simulated classifier panel on N instances.

    Instance j has a label and a margin m_j >= 0. A skilled member sees the
    correct-class logit skill * m_j + (1 - skill) * noise, divided by its
    temperature; the remaining classes get logit 0. Degenerate members
    output 1/K everywhere, or all mass on class 1 / class 0.
    """
    spec = panel_spec or PanelSpec()
    rng = np.random.default_rng(seed)
    labels = np.arange(N) % K
    rng.shuffle(labels)
    margin = np.abs(rng.normal(0.0, spec.margin_scale, size=N))
    signal = 1.0 - 2.0 * spec.train_noise

    M = len(spec.members)
    probs = np.zeros((M, N, K))
    cols = np.arange(N)
    for i, member in enumerate(spec.members):
        if member.kind == "constant":
            probs[i] = 1.0 / K
        elif member.kind == "positive":
            probs[i, :, 1] = 1.0
        elif member.kind == "negative":
            probs[i, :, 0] = 1.0
        else:
            noise = rng.normal(0.0, spec.noise_scale, size=N)
            score = (signal * member.skill * margin + (1.0 - member.skill) * noise) / member.temperature
            logits = np.zeros((N, K))
            logits[cols, labels] = score
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            probs[i] = e / e.sum(axis=1, keepdims=True)
    return ClassifierResponseSet(probs, labels, tuple(m.name for m in spec.members))


def simulate_train_test_panels(n_train: int, n_test: int, K: int = 2, panel_spec: PanelSpec | None = None,
                               seed=0) -> tuple[ClassifierResponseSet, ClassifierResponseSet]:
    """Responses of one panel on disjoint training and test instance sets.

    The two sets use independent streams split from ``seed``; instance ids
    are prefixed "train" and "test".
    """
    s_train, s_test = np.random.SeedSequence(seed).spawn(2)
    train = simulate_classifier_panel(n_train, K, panel_spec, np.random.default_rng(s_train))
    test = simulate_classifier_panel(n_test, K, panel_spec, np.random.default_rng(s_test))
    return train.with_instance_prefix("train"), test.with_instance_prefix("test")
