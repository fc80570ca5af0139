"""Loss streams, gradient oracles, projection, offline optimum, and regret.

Two loss families are supported per (round, agent) descriptor (feature vector
w, label y):

* quadratic: f(x) = 0.5 * (<w, x> - y)^2, optionally regularized with an
  additional 0.5 * ||x||^2 term (the strongly convex regime, modulus 1);
* linear: f(x) = <w, x> (labels unused), the family used by adversarial
  lower-bound instances.

Rounds and agents are 1-based in the public oracle signatures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng

__all__ = [
    "Domain",
    "LossStream",
    "RegretReport",
    "NonConvergenceError",
    "default_lipschitz",
    "generate_stream",
    "loss_value",
    "grad",
    "project",
    "offline_optimum",
    "regret_curve",
    "save_stream_csv",
    "load_stream_csv",
]

PGD_STATIONARITY_TOL = 1e-10
PGD_ITERATION_CAP = 100_000


class NonConvergenceError(RuntimeError):
    """Projected gradient failed to reach stationarity within the cap."""


@dataclass(frozen=True)
class Domain:
    """Convex closed decision set containing the origin.

    shape "ball": Euclidean ball of given radius centered at 0.
    shape "box": per-coordinate interval [lo, hi] (must contain 0).
    """

    dim: int
    shape: str = "ball"
    radius: float = 1.0
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.shape == "ball":
            if self.radius <= 0:
                raise ValueError("ball radius must be positive")
        elif self.shape == "box":
            lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (self.dim,)).copy()
            hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (self.dim,)).copy()
            if np.any(lo > 0) or np.any(hi < 0):
                raise ValueError("box must contain the origin")
            if np.any(lo >= hi):
                raise ValueError("box needs lo < hi per coordinate")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        else:
            raise ValueError(f"unknown domain shape {self.shape!r}")

    @property
    def diameter(self) -> float:
        if self.shape == "ball":
            return 2.0 * self.radius
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            return float(np.linalg.norm(x)) <= self.radius + tol
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


def project(dom: Domain, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the domain; idempotent.

    Accepts a single point (n,) or a stack of points (..., n); the projection
    is applied row-wise.
    """
    x = np.asarray(x, dtype=float)
    if dom.shape == "ball":
        norms = np.linalg.norm(x, axis=-1, keepdims=True)
        scale = np.where(norms > dom.radius, dom.radius / np.maximum(norms, 1e-300), 1.0)
        return x * scale
    return np.clip(x, dom.lo, dom.hi)


def default_lipschitz(dim: int, radius: float) -> float:
    """Worst-case gradient norm of the regularized quadratic family on the ball.

    Features have coordinates in [-1, 1] (norm <= sqrt(n)) and, under the
    split label rule with clipped unit noise, |y| <= sqrt(n) + 1; the
    gradient norm is then at most (sqrt(n)*R + y_max)*sqrt(n) + R.
    """
    y_max = math.sqrt(dim) + 1.0
    return (math.sqrt(dim) * radius + y_max) * math.sqrt(dim) + radius


@dataclass(frozen=True)
class LossStream:
    """Per-(round, agent) loss descriptors plus regime constants."""

    features: np.ndarray  # (T, N, n)
    labels: np.ndarray  # (T, N)
    regularized: bool
    family: str = "quadratic"
    lipschitz: float = 1.0
    alpha: float = 0.0

    @property
    def horizon(self) -> int:
        return self.features.shape[0]

    @property
    def agents(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    def __post_init__(self):
        if self.family not in ("quadratic", "linear"):
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.family == "linear" and self.regularized:
            raise ValueError("linear losses cannot be regularized")


def generate_stream(agents: int, horizon: int, dim: int, seed: int,
                    regime: str = "convex", trial: int = 0,
                    lipschitz: float | None = None) -> LossStream:
    """Random quadratic stream: uniform features, split label rule.

    Features have i.i.d. coordinates uniform on [-1, 1]. Agents 1..N/2 get
    pure-noise labels; agents N/2+1..N get labels <w, 1> + noise, where the
    noise is standard normal hard-clipped to [-1, 1]. regime "strongly_convex"
    adds the 0.5||x||^2 regularizer to every loss (modulus alpha = 1).
    """
    if agents % 2 != 0:
        raise ValueError("the label rule splits agents in half; need even N")
    if regime not in ("convex", "strongly_convex"):
        raise ValueError(f"unknown regime {regime!r}")
    feats = rng.stream(seed, trial, rng.STREAM_FEATURES).uniform(
        -1.0, 1.0, size=(horizon, agents, dim)
    )
    eps = rng.stream(seed, trial, rng.STREAM_NOISE).standard_normal((horizon, agents))
    eps = np.clip(eps, -1.0, 1.0)
    labels = eps.copy()
    labels[:, agents // 2:] += feats[:, agents // 2:, :].sum(axis=2)
    regularized = regime == "strongly_convex"
    if lipschitz is None:
        lipschitz = default_lipschitz(dim, 2.0)
    return LossStream(
        features=feats,
        labels=labels,
        regularized=regularized,
        family="quadratic",
        lipschitz=float(lipschitz),
        alpha=1.0 if regularized else 0.0,
    )


def loss_value(stream: LossStream, t: int, v: int, x: np.ndarray) -> float:
    """f_t(v, x) for 1-based round t and agent v."""
    w = stream.features[t - 1, v - 1]
    if stream.family == "linear":
        return float(w @ x)
    r = float(w @ x) - stream.labels[t - 1, v - 1]
    val = 0.5 * r * r
    if stream.regularized:
        val += 0.5 * float(x @ x)
    return float(val)


def grad(stream: LossStream, t: int, v: int, x: np.ndarray) -> np.ndarray:
    """Gradient of f_t(v, .) at x."""
    w = stream.features[t - 1, v - 1]
    if stream.family == "linear":
        return w.copy()
    g = (float(w @ x) - stream.labels[t - 1, v - 1]) * w
    if stream.regularized:
        g = g + x
    return g


def own_gradients(stream: LossStream, t: int, plays: np.ndarray) -> np.ndarray:
    """Each agent's gradient of its own round-t loss at its own play.

    plays is (N, n); returns (N, n).
    """
    w = stream.features[t - 1]
    if stream.family == "linear":
        return w.copy()
    resid = np.einsum("un,un->u", w, plays) - stream.labels[t - 1]
    g = resid[:, None] * w
    if stream.regularized:
        g = g + plays
    return g


def global_losses(stream: LossStream, t: int, points: np.ndarray) -> np.ndarray:
    """sum_v f_t(v, x) for each row x of points ((K, n) -> (K,))."""
    w = stream.features[t - 1]  # (N, n)
    inner = points @ w.T  # (K, N)
    if stream.family == "linear":
        vals = inner.sum(axis=1)
    else:
        resid = inner - stream.labels[t - 1][None, :]
        vals = 0.5 * np.einsum("kv,kv->k", resid, resid)
        if stream.regularized:
            vals = vals + 0.5 * stream.agents * np.einsum("kn,kn->k", points, points)
    return vals


def global_loss_series(stream: LossStream, x: np.ndarray) -> np.ndarray:
    """sum_v f_t(v, x) for every round t, as a (T,) array."""
    inner = stream.features @ x  # (T, N)
    if stream.family == "linear":
        return inner.sum(axis=1)
    resid = inner - stream.labels
    out = 0.5 * (resid * resid).sum(axis=1)
    if stream.regularized:
        out = out + 0.5 * stream.agents * float(x @ x)
    return out


def _quadratic_normal_terms(stream: LossStream):
    w = stream.features.reshape(-1, stream.dim)
    y = stream.labels.reshape(-1)
    hess = w.T @ w
    if stream.regularized:
        hess = hess + stream.horizon * stream.agents * np.eye(stream.dim)
    rhs = w.T @ y
    return hess, rhs


def _power_iteration(mat: np.ndarray, iters: int = 200) -> float:
    v = np.ones(mat.shape[0]) / math.sqrt(mat.shape[0])
    lam = 0.0
    for _ in range(iters):
        nv = mat @ v
        nrm = float(np.linalg.norm(nv))
        if nrm == 0.0:
            return 0.0
        v = nv / nrm
        lam = nrm
    return lam


def offline_optimum(stream: LossStream, dom: Domain) -> np.ndarray:
    """Minimizer of the total loss sum_t sum_v f_t(v, x) over the domain.

    Quadratic streams are solved by projected gradient with step 1/lambda_max
    (lambda_max of the total Hessian from power iteration) until the
    projected-gradient displacement falls below 1e-10; failure to converge
    within the iteration cap raises NonConvergenceError. Linear streams have
    a closed-form optimum on balls and boxes.
    """
    if stream.family == "linear":
        g = stream.features.reshape(-1, stream.dim).sum(axis=0)
        if dom.shape == "ball":
            nrm = float(np.linalg.norm(g))
            if nrm == 0.0:
                return np.zeros(stream.dim)
            return -dom.radius * g / nrm
        return np.where(g > 0, dom.lo, np.where(g < 0, dom.hi, 0.0))

    hess, rhs = _quadratic_normal_terms(stream)
    lam_max = _power_iteration(hess)
    if lam_max <= 0.0:
        return np.zeros(stream.dim)
    step = 1.0 / lam_max
    x = np.zeros(stream.dim)
    for _ in range(PGD_ITERATION_CAP):
        nxt = project(dom, x - step * (hess @ x - rhs))
        if float(np.linalg.norm(nxt - x)) <= PGD_STATIONARITY_TOL:
            return nxt
        x = nxt
    raise NonConvergenceError(
        "projected gradient did not reach stationarity; ill-conditioned stream"
    )


@dataclass
class RegretReport:
    """Per-agent cumulative global regret curves for one trial.

    curves[t-1, u-1] = sum over rounds tau <= t and all agents v of
    f_tau(v, x_tau(u)) - f_tau(v, x_star). reg_final is the max over agents
    of the horizon value.
    """

    curves: np.ndarray  # (T, N)
    x_star: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def final_per_agent(self) -> np.ndarray:
        return self.curves[-1]

    @property
    def reg_final(self) -> float:
        return float(self.curves[-1].max())

    @property
    def max_curve(self) -> np.ndarray:
        """Headline curve: max over agents at each round."""
        return self.curves.max(axis=1)


def regret_curve(trajectory: np.ndarray, stream: LossStream, x_star: np.ndarray,
                 metadata: dict | None = None) -> RegretReport:
    """Cumulative global regret of each agent's play sequence against x_star.

    trajectory is (T, N, n): the point agent u played at round t. The curve
    is not monotone in general; only the horizon value is guaranteed
    non-negative when x_star is the offline optimum.
    """
    horizon, agents, _ = trajectory.shape
    if horizon != stream.horizon or agents != stream.agents:
        raise ValueError("trajectory shape does not match the stream")
    base = global_loss_series(stream, x_star)  # (T,)
    inst = np.empty((horizon, agents))
    for t in range(1, horizon + 1):
        inst[t - 1] = global_losses(stream, t, trajectory[t - 1]) - base[t - 1]
    return RegretReport(
        curves=np.cumsum(inst, axis=0),
        x_star=np.asarray(x_star, dtype=float),
        metadata=dict(metadata or {}),
    )


def save_stream_csv(stream: LossStream, path):
    """Rows `t,agent,y,w_1..w_n` (family/regularization are not encoded)."""
    n = stream.dim
    header = "t,agent,y," + ",".join(f"w_{i}" for i in range(1, n + 1))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t in range(1, stream.horizon + 1):
            for v in range(1, stream.agents + 1):
                w = ",".join(repr(x) for x in stream.features[t - 1, v - 1])
                fh.write(f"{t},{v},{stream.labels[t - 1, v - 1]!r},{w}\n")


def load_stream_csv(path, regularized: bool = False, family: str = "quadratic",
                    lipschitz: float = 1.0, alpha: float = 0.0) -> LossStream:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["t", "agent", "y"]:
            raise ValueError("unexpected stream CSV header")
        dim = len(header) - 3
        rows = []
        for ln in fh:
            if ln.strip():
                parts = ln.strip().split(",")
                rows.append((int(parts[0]), int(parts[1]), float(parts[2]),
                             [float(p) for p in parts[3:]]))
    horizon = max(r[0] for r in rows)
    agents = max(r[1] for r in rows)
    feats = np.zeros((horizon, agents, dim))
    labels = np.zeros((horizon, agents))
    for t, v, y, w in rows:
        feats[t - 1, v - 1] = w
        labels[t - 1, v - 1] = y
    return LossStream(feats, labels, regularized, family, lipschitz, alpha)
