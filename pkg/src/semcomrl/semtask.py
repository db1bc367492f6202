"""Synthetic semantic classification task.

Stands in for a pretrained vision-language encoder plus a zero-shot
classifier.  Each selectable encoder k in {0, 1, 2} maps a class label to a
unit-norm feature vector near the class prototype; the receiver classifies
a (channel-noisy) feature by cosine similarity against the prototype set.

Encoders differ in model size (cost) and in robustness: the prototype set
of encoder k is built with pairwise cosine similarity exactly 1 - m(k), so
a larger margin m(k) means better-separated classes and higher accuracy for
the same feature-noise level.  Channel noise is isotropic Gaussian with
per-coordinate variance kappa / SINR, tying classification quality to the
resource block the user was given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EncoderSpec:
    """One selectable semantic encoder."""

    index: int               # k in {0, 1, 2}
    name: str
    model_size_bits: float   # D_M(k)
    feature_dim: int         # n_f(k)
    margin: float            # m(k), minimum pairwise prototype separation

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if not 0 < self.margin < 1:
            raise ValueError("margin must be in (0, 1)")
        if self.model_size_bits <= 0:
            raise ValueError("model_size_bits must be > 0")

    @property
    def output_size_bits(self) -> float:
        """D_O(k): one 32-bit word per feature coordinate."""
        return 32.0 * self.feature_dim


def default_catalog() -> tuple[EncoderSpec, EncoderSpec, EncoderSpec]:
    """The three stock encoders: size and margin strictly increase with k."""
    return (
        EncoderSpec(index=0, name="small", model_size_bits=1e3, feature_dim=512, margin=0.15),
        EncoderSpec(index=1, name="medium", model_size_bits=3e3, feature_dim=512, margin=0.25),
        EncoderSpec(index=2, name="large", model_size_bits=6e3, feature_dim=768, margin=0.40),
    )


def validate_catalog(catalog) -> None:
    """Model size and margin must strictly increase with the index."""
    if len(catalog) != 3 or [s.index for s in catalog] != [0, 1, 2]:
        raise ValueError("catalog must hold encoders with indices 0, 1, 2")
    for a, b in zip(catalog, catalog[1:]):
        if not (a.model_size_bits < b.model_size_bits and a.margin < b.margin):
            raise ValueError("model size and margin must strictly increase with k")


class PrototypeSet:
    """N unit-norm class prototypes with a pairwise-similarity bound.

    Construction validates that every prototype has unit norm and that no
    pair is more similar than 1 - margin (plus float tolerance).
    """

    _TOL = 1e-9

    def __init__(self, vectors: np.ndarray, margin: float):
        v = np.asarray(vectors, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("need a (N, dim) matrix with N >= 2")
        norms = np.linalg.norm(v, axis=1)
        if not np.allclose(norms, 1.0, atol=self._TOL):
            raise ValueError("prototypes must be unit-norm")
        gram = v @ v.T
        np.fill_diagonal(gram, -1.0)
        worst = float(gram.max())
        if worst > 1.0 - margin + self._TOL:
            raise ValueError(
                f"prototype pair with cosine similarity {worst:.6f} exceeds "
                f"the 1 - margin bound {1.0 - margin:.6f}"
            )
        self.vectors = v
        self.margin = margin

    @property
    def num_classes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def make_prototypes(
    spec: EncoderSpec, num_classes: int, rng: np.random.Generator
) -> PrototypeSet:
    """Build an equi-similar prototype set for one encoder.

    Uses a randomly rotated frame: p_n = sqrt(m) * e_n + sqrt(1 - m) * u
    with orthonormal e_1..e_N, u, which gives pairwise cosine similarity
    exactly 1 - m for every pair, so the margin bound is tight and the
    robustness ordering across encoders is real rather than vacuous.
    """
    n, dim, m = num_classes, spec.feature_dim, spec.margin
    if dim < n + 1:
        raise ValueError(f"feature_dim {dim} too small for {n} classes (need >= {n + 1})")
    raw = rng.standard_normal((dim, n + 1))
    basis, _ = np.linalg.qr(raw)          # dim x (n+1), orthonormal columns
    frame, shared = basis[:, :n], basis[:, n]
    vectors = (np.sqrt(m) * frame + np.sqrt(1.0 - m) * shared[:, None]).T
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return PrototypeSet(vectors, margin=m)


def encode(
    prototypes: PrototypeSet,
    label: int,
    rng: np.random.Generator,
    sigma_intra: float = 0.05,
) -> np.ndarray:
    """Feature vector for one sample of class `label` (0-based).

    Prototype plus isotropic intra-class jitter, renormalized to unit norm.
    """
    if not 0 <= label < prototypes.num_classes:
        raise ValueError(f"class {label} out of range [0, {prototypes.num_classes})")
    f = prototypes.vectors[label] + sigma_intra * rng.standard_normal(prototypes.dim)
    return f / np.linalg.norm(f)


def channel_perturb(
    feature: np.ndarray,
    sinr: float,
    kappa: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Add channel-induced feature noise, variance kappa / SINR per coordinate.

    Does not renormalize; classification is scale-invariant anyway.
    """
    if not sinr > 0:
        raise ValueError(f"SINR must be > 0, got {sinr}")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    sigma = np.sqrt(kappa / sinr)
    return feature + sigma * rng.standard_normal(np.shape(feature))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def similarities(feature: np.ndarray, prototypes: PrototypeSet) -> np.ndarray:
    """Cosine similarity of one feature against every prototype."""
    f = np.asarray(feature, dtype=float)
    if f.shape != (prototypes.dim,):
        raise ValueError(f"feature shape {f.shape} != ({prototypes.dim},)")
    norm = np.linalg.norm(f)
    if norm == 0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return prototypes.vectors @ (f / norm)


def classify(feature: np.ndarray, prototypes: PrototypeSet) -> int:
    """Most-similar prototype index; ties break to the lowest index."""
    return int(np.argmax(similarities(feature, prototypes)))


def class_probabilities(
    feature: np.ndarray, prototypes: PrototypeSet, tau_s: float
) -> np.ndarray:
    """Softmax over tau_s * cosine similarities; argmax matches classify()."""
    if not tau_s > 0:
        raise ValueError("tau_s must be > 0")
    logits = tau_s * similarities(feature, prototypes)
    logits -= logits.max()
    e = np.exp(logits)
    return e / e.sum()


def accuracy_profile(
    prototypes: PrototypeSet,
    sinr_values,
    samples: int,
    rng: np.random.Generator,
    kappa: float = 0.5,
    sigma_intra: float = 0.05,
) -> np.ndarray:
    """Monte Carlo classification accuracy at each (linear) SINR value.

    The same labels, jitter and unit noise draws are reused across the
    grid (only the noise scale changes), so accuracy-vs-SINR curves are
    smooth and monotonicity checks are not washed out by sampling noise.
    np.inf is a valid grid entry and yields the noiseless accuracy.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sinr = np.asarray(sinr_values, dtype=float)
    if np.any(sinr <= 0):
        raise ValueError("SINR grid entries must be > 0")
    n, dim = prototypes.num_classes, prototypes.dim
    labels = rng.integers(0, n, size=samples)
    feats = prototypes.vectors[labels] + sigma_intra * rng.standard_normal((samples, dim))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    noise = rng.standard_normal((samples, dim))
    acc = np.empty(sinr.shape)
    for j, s in enumerate(sinr):
        sigma = 0.0 if np.isinf(s) else np.sqrt(kappa / s)
        noisy = feats + sigma * noise
        # Row norms are common factors, so dot-product argmax = cosine argmax.
        pred = np.argmax(noisy @ prototypes.vectors.T, axis=1)
        acc[j] = np.mean(pred == labels)
    return acc
