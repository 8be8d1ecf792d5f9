"""Evaluation metrics and Bayes-rule accuracy bounds for the Bernoulli generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PROBABILITY, GeneratorSpec


@dataclass
class EvalReport:
    metric: str  # "mse" or "accuracy"
    value: float
    n: int
    cutoff: float = None


def mse(predictions, targets):
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("empty input")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch {p.size} vs {t.size}")
    return float(np.mean((p - t) ** 2))


def accuracy(predictions, labels, cutoff=0.5):
    """Fraction of points where ``pred >= cutoff`` agrees with ``label == 1``."""
    p = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if p.size == 0:
        raise ValueError("empty input")
    if p.shape != y.shape:
        raise ValueError(f"length mismatch {p.size} vs {y.size}")
    return float(np.mean((p >= cutoff) == (y == 1)))


def evaluate(predictions, targets, classification=False, cutoff=0.5):
    if classification:
        return EvalReport("accuracy", accuracy(predictions, targets, cutoff), len(targets), cutoff)
    return EvalReport("mse", mse(predictions, targets), len(targets))


def _probability(spec):
    if isinstance(spec, str):
        spec = GeneratorSpec(spec)
    if callable(spec):
        return spec, (0.0, 1.0)
    if not spec.is_classification:
        raise ValueError(f"{spec.tag!r} is not a classification generator")
    return PROBABILITY[spec.tag], spec.domain[0]


def bayes_accuracy_estimate(spec, trials, rng, cutoff=0.5):
    """Monte-Carlo accuracy of the rule "predict 1 iff p(x) >= cutoff" on fresh samples.

    ``spec`` is a classification generator tag/spec, or a probability
    function ``p`` on [0, 1].
    """
    p, (lo, hi) = _probability(spec)
    x = rng.uniform(lo, hi, size=trials)
    px = p(x)
    y = rng.random(trials) < px
    return float(np.mean((px >= cutoff) == y))


def bayes_accuracy_exact(spec, cutoff=0.5):
    """Closed-form Bayes accuracy ``E[max(p, 1 - p)]`` (with the >= cutoff rule)."""
    if isinstance(spec, str):
        spec = GeneratorSpec(spec)
    if spec.tag == "bernoulli_step":
        pieces = [(0.0, 0.3, 0.05), (0.3, 0.6, 0.25), (0.6, 0.8, 0.75), (0.8, 1.0, 0.95)]
        return float(sum((b - a) * (p if p >= cutoff else 1.0 - p) for a, b, p in pieces))
    if spec.tag == "bernoulli_cosine":
        if cutoff != 0.5:
            raise ValueError("closed form only for cutoff 0.5")
        # max(p, 1-p) = (1 + |cos x|)/2, mean of |cos| over a period is 2/pi
        return 0.5 + 1.0 / np.pi
    raise ValueError(f"{spec.tag!r} is not a classification generator")
