"""Synthetic regression problems and their stochastic gradient oracles.

Three families: least squares on a fixed design (minibatch oracle), least
squares against a continuous Gaussian data distribution (fresh-sample oracle,
closed-form objective), and logistic regression on unit-norm rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import (
    Array,
    ConvergenceError,
    DimensionError,
    ParameterError,
    RngStream,
    as_vector,
)
from .regularizers import soft_threshold

POWER_ITERATION_TOL = 1e-8
POWER_ITERATION_MAX = 5000
_POWER_SEED = 0x9E3779B97F4A7C15  # fixed start vector seed, independent of user streams

LOGISTIC_ROW_NORM_TOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """K observations: rows of X with responses (linear) or 0/1 labels (logistic).

    Logistic datasets must have unit-norm rows (to within 1e-12) and 0/1 labels.
    """

    X: Array
    y: Array
    kind: str  # "linear" | "logistic"

    def __post_init__(self):
        if self.kind not in ("linear", "logistic"):
            raise ParameterError(f"unknown dataset kind {self.kind!r}")
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise DimensionError("X must be K x p and y length K")
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}"
            )
        if self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ParameterError("need K >= 1 and p >= 1")
        if self.kind == "logistic":
            norms = np.linalg.norm(self.X, axis=1)
            if np.any(np.abs(norms - 1.0) > LOGISTIC_ROW_NORM_TOL):
                raise ParameterError("logistic rows must have unit norm")
            if not np.all((self.y == 0.0) | (self.y == 1.0)):
                raise ParameterError("logistic labels must be 0 or 1")

    @property
    def K(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def ground_truth(kind: str, p: int) -> Array:
    """The generating coefficients: half ones then zeros (linear), all ones (logistic)."""
    if kind == "linear":
        if p % 2 != 0:
            raise ParameterError(f"linear ground truth needs even p, got {p}")
        beta = np.zeros(p)
        beta[: p // 2] = 1.0
        return beta
    if kind == "logistic":
        return np.ones(p)
    raise ParameterError(f"unknown dataset kind {kind!r}")


def gen_linear_dataset(K: int, p: int, rng: RngStream) -> Dataset:
    """Standard normal design, responses y = X beta + eps / 10, eps ~ N(0, 1)."""
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    beta = ground_truth("linear", p)
    X = rng.normal(K * p).reshape(K, p)
    eps = rng.normal(K)
    y = X @ beta + eps / 10.0
    return Dataset(X, y, "linear")


def gen_logistic_dataset(K: int, p: int, rng: RngStream, beta_hat=None) -> Dataset:
    """Unit-normalized Gaussian rows with Bernoulli labels from the logistic model."""
    if K < 1 or p < 1:
        raise ParameterError(f"need K, p >= 1, got K={K} p={p}")
    beta = ground_truth("logistic", p) if beta_hat is None else as_vector(beta_hat)
    X = rng.normal(K * p).reshape(K, p)
    norms = np.linalg.norm(X, axis=1)
    while np.any(norms == 0.0):  # probability-zero draw; resample those rows
        bad = np.flatnonzero(norms == 0.0)
        X[bad] = rng.normal(bad.size * p).reshape(bad.size, p)
        norms = np.linalg.norm(X, axis=1)
    X = X / norms[:, None]
    prob = sigmoid(X @ beta)
    labels = (rng.uniform(K) < prob).astype(np.float64)
    return Dataset(X, labels, "logistic")


def sigmoid(t) -> Array:
    """Numerically stable 1 / (1 + exp(-t)), branching on the sign of t."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _log1p_exp(t: Array) -> Array:
    # log(1 + e^t) = max(t, 0) + log1p(exp(-|t|))
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def _check_beta(d: Dataset, beta) -> Array:
    beta = as_vector(beta)
    if beta.shape[0] != d.p:
        raise DimensionError(f"beta has length {beta.shape[0]}, expected {d.p}")
    return beta


def exact_objective_linear(d: Dataset, beta) -> float:
    """(1 / 2K) ||X beta - y||^2 over the full dataset."""
    beta = _check_beta(d, beta)
    r = d.X @ beta - d.y
    return float((r @ r) / (2.0 * d.K))


def exact_gradient_linear(d: Dataset, beta) -> Array:
    beta = _check_beta(d, beta)
    return d.X.T @ (d.X @ beta - d.y) / d.K


def minibatch_gradient_linear(d: Dataset, beta, S) -> Array:
    """(1/|S|) X_S^T (X_S beta - y_S) for an index multiset S (with replacement)."""
    beta = _check_beta(d, beta)
    S = np.asarray(S, dtype=np.int64)
    if S.size == 0:
        raise ParameterError("minibatch S must be nonempty")
    if S.min() < 0 or S.max() >= d.K:
        raise ParameterError(f"minibatch indices outside [0, {d.K})")
    XS = d.X[S]
    return XS.T @ (XS @ beta - d.y[S]) / S.size


def exact_objective_logistic(d: Dataset, beta) -> float:
    """Average negative log-likelihood (1/K) sum log(1 + e^{t_i}) - y_i t_i."""
    beta = _check_beta(d, beta)
    t = d.X @ beta
    return float(np.mean(_log1p_exp(t) - d.y * t))


def exact_gradient_logistic(d: Dataset, beta) -> Array:
    beta = _check_beta(d, beta)
    return d.X.T @ (sigmoid(d.X @ beta) - d.y) / d.K


def minibatch_gradient_logistic(d: Dataset, beta, S) -> Array:
    """(1/|S|) sum_{i in S} (sigmoid(beta^T x_i) - y_i) x_i."""
    beta = _check_beta(d, beta)
    S = np.asarray(S, dtype=np.int64)
    if S.size == 0:
        raise ParameterError("minibatch S must be nonempty")
    if S.min() < 0 or S.max() >= d.K:
        raise ParameterError(f"minibatch indices outside [0, {d.K})")
    XS = d.X[S]
    return XS.T @ (sigmoid(XS @ beta) - d.y[S]) / S.size


def continuous_objective(beta, beta_hat) -> float:
    """Closed-form expected half square loss when x ~ N(0, I), y = x^T beta_hat + eps.

    Equals (1/2) (beta^T beta - 2 beta^T beta_hat + ||beta_hat||^2 + 1).
    """
    beta, beta_hat = as_vector(beta), as_vector(beta_hat)
    if beta.shape[0] != beta_hat.shape[0]:
        raise DimensionError("beta and beta_hat lengths differ")
    diff = beta - beta_hat
    return float(0.5 * (diff @ diff + 1.0))


def continuous_gradient(beta, beta_hat) -> Array:
    """beta - beta_hat; Lipschitz with constant 1."""
    beta, beta_hat = as_vector(beta), as_vector(beta_hat)
    if beta.shape[0] != beta_hat.shape[0]:
        raise DimensionError("beta and beta_hat lengths differ")
    return beta - beta_hat


class MinibatchLinearOracle:
    """Uniform-with-replacement minibatch gradient of the fixed-design square loss."""

    def __init__(self, dataset: Dataset, batch: int):
        if dataset.kind != "linear":
            raise ParameterError("dataset kind must be 'linear'")
        if batch < 1:
            raise ParameterError(f"batch must be >= 1, got {batch}")
        self.dataset = dataset
        self.batch = batch
        self.dim = dataset.p

    def sample(self, x: Array, rng: RngStream) -> Array:
        S = rng.indices(self.batch, self.dataset.K)
        return minibatch_gradient_linear(self.dataset, x, S)


class MinibatchLogisticOracle:
    """Uniform-with-replacement minibatch gradient of the logistic loss."""

    def __init__(self, dataset: Dataset, batch: int):
        if dataset.kind != "logistic":
            raise ParameterError("dataset kind must be 'logistic'")
        if batch < 1:
            raise ParameterError(f"batch must be >= 1, got {batch}")
        self.dataset = dataset
        self.batch = batch
        self.dim = dataset.p

    def sample(self, x: Array, rng: RngStream) -> Array:
        S = rng.indices(self.batch, self.dataset.K)
        return minibatch_gradient_logistic(self.dataset, x, S)


class ContinuousLinearOracle:
    """Fresh Gaussian minibatch each call; unbiased for beta - beta_hat.

    Draw order per call: batch * p design normals, then batch noise normals.
    """

    def __init__(self, beta_hat, batch: int):
        if batch < 1:
            raise ParameterError(f"batch must be >= 1, got {batch}")
        self.beta_hat = as_vector(beta_hat)
        self.batch = batch
        self.dim = self.beta_hat.shape[0]

    def sample(self, x: Array, rng: RngStream) -> Array:
        X = rng.normal(self.batch * self.dim).reshape(self.batch, self.dim)
        eps = rng.normal(self.batch)
        y = X @ self.beta_hat + eps
        return X.T @ (X @ x - y) / self.batch


class ExactOracle:
    """Wraps a deterministic gradient function; sigma = 0."""

    def __init__(self, grad_fn, dim: int):
        self.grad_fn = grad_fn
        self.dim = dim

    def sample(self, x: Array, rng: RngStream) -> Array:
        return self.grad_fn(x)


class GaussianNoiseOracle:
    """Adds isotropic Gaussian noise with E ||noise||^2 = sigma^2 to a base oracle."""

    def __init__(self, base, sigma: float):
        if sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {sigma}")
        self.base = base
        self.sigma = sigma
        self.dim = base.dim

    def sample(self, x: Array, rng: RngStream) -> Array:
        g = self.base.sample(x, rng)
        if self.sigma == 0.0:
            return g
        return g + (self.sigma / np.sqrt(self.dim)) * rng.normal(self.dim)


def lipschitz_linear(d: Dataset, convention: str = "scaled") -> float:
    """Largest eigenvalue of X^T X by power iteration.

    ``scaled`` divides by K, giving the true gradient Lipschitz constant of the
    averaged loss; ``paper`` returns the raw eigenvalue.
    """
    if convention not in ("paper", "scaled"):
        raise ParameterError(f"unknown convention {convention!r}")
    M = d.X.T @ d.X
    start = RngStream(_POWER_SEED)
    b = start.normal(d.p)
    b /= np.linalg.norm(b)
    lam = 0.0
    for _ in range(POWER_ITERATION_MAX):
        w = M @ b
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        lam_new = float(b @ w)
        b = w / nrm
        if abs(lam_new - lam) <= POWER_ITERATION_TOL * max(abs(lam_new), 1e-300):
            return lam_new / d.K if convention == "scaled" else lam_new
        lam = lam_new
    raise ConvergenceError(
        f"power iteration did not converge in {POWER_ITERATION_MAX} steps",
        last_iterate=lam,
    )


def ortho_lasso_instance(p: int, lam: float, rng: RngStream):
    """Square-loss + l1 instance with an orthogonal design, so the optimum has a
    closed form by soft thresholding.

    X = sqrt(p) Q with Q orthogonal and K = p rows, hence the scaled Lipschitz
    constant is exactly 1 and the objective is (1/2) ||beta - b||^2 + const with
    b = Q^T y / sqrt(p). Returns (dataset, x_star).
    """
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    G = rng.normal(p * p).reshape(p, p)
    Q, R = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(R))  # fix the sign convention so Q is deterministic
    X = np.sqrt(p) * Q
    beta_hat = ground_truth("linear", p)
    eps = rng.normal(p)
    y = X @ beta_hat + eps / 10.0
    b = Q.T @ y / np.sqrt(p)
    x_star = soft_threshold(b, lam)
    return Dataset(X, y, "linear"), x_star


def save_dataset_csv(d: Dataset, path) -> None:
    """Header ``y,x1,...,xp``; 17 significant digits, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(d.p)])
        for i in range(d.K):
            writer.writerow(
                [f"{d.y[i]:.17g}"] + [f"{v:.17g}" for v in d.X[i]]
            )


def load_dataset_csv(path, kind: str) -> Dataset:
    """Parse the format written by save_dataset_csv; logistic rows must have
    unit norm and 0/1 labels."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "y":
            raise ParameterError("dataset CSV must start with header y,x1,...")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ParameterError("dataset CSV has no data rows")
    data = np.asarray(rows)
    y = data[:, 0]
    X = data[:, 1:]
    if kind == "logistic":
        norms = np.linalg.norm(X, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > LOGISTIC_ROW_NORM_TOL)
        if bad.size:
            raise ParameterError(
                f"logistic row {bad[0] + 1} has norm {norms[bad[0]]!r}, expected 1"
            )
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ParameterError("logistic labels must be 0 or 1")
    return Dataset(X, y, kind)
