"""Monte-Carlo EM over a piecewise-constant graphon.

Latent node positions live on [0, 1); the graphon assigns a connection
probability per interval pair.  The E step runs a Metropolis-within-
Gibbs chain whose proposal is uniform on the complement of the node's
current interval; the M step re-estimates cell probabilities and blends
interval lengths toward the empirical occupation with a rising step
size.  After convergence one long final chain yields per-node
assignment frequencies and normalized Gini uncertainty scores.

Only the Bernoulli model is reformulated this way; count models are
served by the other engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from blockmix.graph import Network
from blockmix.models import BlockParams, GraphonStep, Partition, block_pair_stats, global_rate
from blockmix.models import bernoulli_loglik
from blockmix.results import FitResult, map_restarts, restart_stream

__all__ = [
    "LatentPositions",
    "McemConfig",
    "PosteriorSummary",
    "acceptance_prob",
    "gibbs_sweep",
    "posterior_mode",
    "m_step",
    "mcem_fit",
    "gini_uncertainty",
]

ENGINE_ID = 3
FINAL_CHAIN_ID = 4

# cell probabilities are clamped here before any likelihood ratio so the
# acceptance computation stays finite
_CLAMP = 1e-6


@dataclass
class LatentPositions:
    """Per-node latent uniforms in [0, 1)."""

    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.u.ndim != 1:
            raise ValueError("u must be a vector")
        if self.u.size and (self.u.min() < 0 or self.u.max() >= 1):
            raise ValueError("latent positions must lie in [0, 1)")


def _positions(u) -> np.ndarray:
    return u.u.copy() if isinstance(u, LatentPositions) else np.asarray(u, dtype=np.float64).copy()


@dataclass
class McemConfig:
    K: int
    em_max_iter: int = 50
    sweeps_base: int = 20
    sweeps_increment: int = 10
    sweeps_cap: int = 200
    thinning: int = 5
    burn_in: float = 0.2
    restarts: int = 10
    final_sweeps: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if min(self.em_max_iter, self.sweeps_base, self.sweeps_increment, self.sweeps_cap,
               self.thinning, self.restarts, self.final_sweeps) < 1:
            raise ValueError("schedule values must be positive")
        if not 0 <= self.burn_in < 1:
            raise ValueError("burn_in must lie in [0, 1)")

    @property
    def ramp(self) -> int:
        """EM iteration at which the step size reaches 1."""
        return math.ceil(self.em_max_iter / 2)


@dataclass
class PosteriorSummary:
    """Final-chain assignment frequencies and per-node concentration."""

    freq: np.ndarray
    gini: np.ndarray

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=np.float64)
        self.gini = np.asarray(self.gini, dtype=np.float64)
        if self.freq.ndim != 2 or self.gini.shape != (self.freq.shape[0],):
            raise ValueError("freq must be n x K with one gini entry per node")
        if not np.allclose(self.freq.sum(axis=1), 1.0, atol=1e-8):
            raise ValueError("freq rows must sum to 1")


def gini_uncertainty(freq_row: np.ndarray) -> float:
    """Normalized concentration of one frequency row: 1 certain, 0 uniform.

    Raw Gini is the mean absolute difference between frequency pairs
    over 2K; the (K-1)/K normalization makes a degenerate row score
    exactly 1.  A single-block row is certain by definition.
    """
    f = np.asarray(freq_row, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("freq_row must be a non-empty vector")
    if f.min() < 0:
        raise ValueError("frequencies cannot be negative")
    if abs(f.sum() - 1.0) > 1e-6:
        raise ValueError("frequencies must sum to 1")
    k = f.size
    if k == 1:
        return 1.0
    raw = np.abs(f[:, None] - f[None, :]).sum() / (2 * k)
    return float(raw * k / (k - 1))


class _Sampler:
    """Chain machinery for one network; graphon swapped in between E steps."""

    def __init__(self, net: Network):
        self.n = net.n_nodes
        self.pair_factor = 2.0 if net.directed else 1.0
        mult: list[dict[int, float]] = [dict() for _ in range(self.n)]
        for (i, j), v in net.entries.items():
            if net.directed:
                mult[i][j] = mult[i].get(j, 0.0) + v
                mult[j][i] = mult[j].get(i, 0.0) + v
            else:
                mult[i][j] = float(v)
        self.nbrs = [np.array(sorted(d), dtype=np.int64) for d in mult]
        self.wts = [np.array([d[x] for x in sorted(d)]) for d in mult]

    def set_graphon(self, g: GraphonStep):
        self.tau = g.tau
        self.lens = np.diff(g.tau)
        self.K = g.K
        pc = np.clip(g.P, _CLAMP, 1.0 - _CLAMP)
        self.log_p = np.log(pc)
        self.log_q = np.log1p(-pc)
        with np.errstate(divide="ignore"):
            self.log_stay = np.log1p(-self.lens)

    def assign(self, u: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.tau, u, side="right") - 1

    def node_log_ratio(self, j: int, z: np.ndarray, occ: np.ndarray, ks: int, kc: int) -> float:
        """Log likelihood ratio for moving node j's interval kc -> ks."""
        e = np.bincount(z[self.nbrs[j]], weights=self.wts[j], minlength=self.K)
        m = occ * self.pair_factor
        m[kc] -= self.pair_factor
        d_lp = self.log_p[ks] - self.log_p[kc]
        d_lq = self.log_q[ks] - self.log_q[kc]
        return float(e @ d_lp + (m - e) @ d_lq)

    def sweep(self, u: np.ndarray, z: np.ndarray, occ: np.ndarray, rng: np.random.Generator):
        """One in-place pass over all nodes in ascending index order."""
        for j in range(self.n):
            kc = z[j]
            support = 1.0 - self.lens[kc]
            x = rng.random()
            coin = rng.random()
            if support <= 1e-15:
                # proposal support is empty (the interval covers [0,1));
                # resample uniformly, which cannot change the likelihood
                u[j] = x
                continue
            x *= support
            u_star = x if x < self.tau[kc] else x + self.lens[kc]
            ks = int(np.searchsorted(self.tau, u_star, side="right") - 1)
            log_r = self.node_log_ratio(j, z, occ.astype(np.float64), ks, kc)
            log_r += self.log_stay[kc] - self.log_stay[ks]
            if log_r >= 0 or coin < math.exp(log_r):
                occ[kc] -= 1
                occ[ks] += 1
                z[j] = ks
                u[j] = u_star


def acceptance_prob(net: Network, u, j: int, u_star: float, g: GraphonStep) -> float:
    """Metropolis acceptance for proposing node j's position u_star.

    The proposal is uniform outside the node's current interval, so the
    likelihood ratio over node j's pairs is corrected by the ratio of
    complement lengths.
    """
    pos = _positions(u)
    sampler = _Sampler(net)
    sampler.set_graphon(g)
    z = sampler.assign(pos)
    kc = int(z[j])
    ks = int(g.interval_of(float(u_star)))
    if ks == kc:
        raise ValueError("u_star lies inside the current interval")
    occ = np.bincount(z, minlength=g.K)
    log_r = sampler.node_log_ratio(j, z, occ.astype(np.float64), ks, kc)
    log_r += sampler.log_stay[kc] - sampler.log_stay[ks]
    return 1.0 if log_r >= 0 else float(math.exp(log_r))


def gibbs_sweep(net: Network, u, g: GraphonStep, rng: np.random.Generator) -> LatentPositions:
    """One full sweep; rejected proposals retain the previous position."""
    pos = _positions(u)
    sampler = _Sampler(net)
    sampler.set_graphon(g)
    z = sampler.assign(pos)
    occ = np.bincount(z, minlength=g.K)
    sampler.sweep(pos, z, occ, rng)
    return LatentPositions(pos)


def _mode_from_counts(counts: np.ndarray, tau: np.ndarray) -> np.ndarray:
    mode = np.argmax(counts, axis=1)  # ties resolve to the lowest interval
    mids = (tau[:-1] + tau[1:]) / 2.0
    return mids[mode]


def posterior_mode(samples, g: GraphonStep, thinning: int) -> LatentPositions:
    """Midpoint of each node's most-visited interval in the thinned chain."""
    if thinning < 1:
        raise ValueError("thinning must be positive")
    arrays = [_positions(s) for s in samples]
    thinned = arrays[thinning - 1 :: thinning]
    if not thinned:
        raise ValueError("need at least one thinned sample")
    K = g.K
    counts = np.zeros((thinned[0].size, K))
    for pos in thinned:
        z = g.interval_of(pos)
        counts[np.arange(z.size), z] += 1
    return LatentPositions(_mode_from_counts(counts, g.tau))


def m_step(net: Network, u_hat, g: GraphonStep, delta: float, K: int) -> GraphonStep:
    """Closed-form graphon update from the assigned intervals of u_hat.

    Cell probabilities are empirical edge fractions (global density for
    empty cells); interval lengths blend the empirical occupation with
    the uniform vector by weight delta.
    """
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    pos = _positions(u_hat)
    z = g.interval_of(pos)
    edge, pairs, sizes = block_pair_stats(net.to_dense().astype(np.float64), z, K)
    num = edge + edge.T
    den = pairs + pairs.T
    fallback = global_rate(net)
    with np.errstate(invalid="ignore"):
        p = np.where(den > 0, num / np.maximum(den, 1.0), fallback)
    p = np.clip(p, 0.0, 1.0)
    pi = delta * (sizes / pos.size) + (1.0 - delta) / K
    tau = np.concatenate(([0.0], np.cumsum(pi)))
    tau[-1] = 1.0
    return GraphonStep(tau, p)


def _em_objective(net: Network, z_hat: np.ndarray, g: GraphonStep) -> float:
    params = BlockParams("bernoulli", g.K, np.diff(g.tau), g.P)
    return bernoulli_loglik(net, Partition(z_hat + 1, g.K), params)


def _run_restart(args):
    net, cfg, restart = args
    rng = restart_stream(cfg.seed, ENGINE_ID, restart)
    n, K = net.n_nodes, cfg.K
    sampler = _Sampler(net)

    p0 = min(max(global_rate(net), 1e-3), 1.0 - 1e-3)
    noise = rng.uniform(-0.5, 0.5, size=(K, K))
    p_init = np.clip(p0 * (1.0 + (noise + noise.T) / 2.0), 1e-4, 1.0 - 1e-4)
    g = GraphonStep(np.linspace(0.0, 1.0, K + 1), p_init)
    u = rng.random(n)

    z_hat = None
    prev_z_hat = None
    stable = 0
    trace: list[float] = []
    u_trace: list[np.ndarray] = []
    for m in range(1, cfg.em_max_iter + 1):
        sweeps = min(cfg.sweeps_base + (m - 1) * cfg.sweeps_increment, cfg.sweeps_cap)
        n_burn = int(cfg.burn_in * sweeps)
        sampler.set_graphon(g)
        z = sampler.assign(u)
        occ = np.bincount(z, minlength=K)
        counts = np.zeros((n, K))
        kept = 0
        last_z = z
        for t in range(sweeps):
            sampler.sweep(u, z, occ, rng)
            if t >= n_burn:
                kept += 1
                if kept % cfg.thinning == 0:
                    counts[np.arange(n), z] += 1
                    last_z = z.copy()
        if not counts.any():
            counts[np.arange(n), last_z] += 1
        z_hat = np.argmax(counts, axis=1)
        u_hat = _mode_from_counts(counts, g.tau)
        u_trace.append(u_hat)

        delta = min(1.0, m / cfg.ramp)
        if m == cfg.em_max_iter:
            delta = 1.0
        if prev_z_hat is not None and np.array_equal(z_hat, prev_z_hat):
            stable += 1
        else:
            stable = 0
        prev_z_hat = z_hat
        if stable >= 2 or m == cfg.em_max_iter:
            g = m_step(net, u_hat, g, 1.0, K)
            trace.append(_em_objective(net, z_hat, g))
            break
        g = m_step(net, u_hat, g, delta, K)
        trace.append(_em_objective(net, z_hat, g))

    objective = _em_objective(net, z_hat, g)
    return objective, z_hat, g, trace, u.copy(), u_trace


def mcem_fit(net: Network, cfg: McemConfig) -> FitResult:
    """Best-of-restarts MCEM fit with a final uncertainty chain.

    Restarts are compared by the Bernoulli log-likelihood of their mode
    partitions; the winner then runs ``final_sweeps`` more Gibbs sweeps
    at fixed parameters, and the post-burn-in chain yields the
    assignment frequency matrix and Gini scores.
    """
    if net.value_kind != "binary":
        raise ValueError("the graphon engine needs a binary network")
    if cfg.K > net.n_nodes:
        raise ValueError("K cannot exceed the number of nodes")
    runs = map_restarts(_run_restart, [(net, cfg, r) for r in range(cfg.restarts)])
    best = max(range(cfg.restarts), key=lambda r: runs[r][0])
    objective, z_hat, g, trace, u, u_trace = runs[best]

    n, K = net.n_nodes, cfg.K
    sampler = _Sampler(net)
    sampler.set_graphon(g)
    rng = restart_stream(cfg.seed, FINAL_CHAIN_ID, best)
    z = sampler.assign(u)
    occ = np.bincount(z, minlength=K)
    n_burn = int(cfg.burn_in * cfg.final_sweeps)
    counts = np.zeros((n, K))
    for t in range(cfg.final_sweeps):
        sampler.sweep(u, z, occ, rng)
        if t >= n_burn:
            counts[np.arange(n), z] += 1
    freq = counts / counts.sum(axis=1, keepdims=True)
    gini = np.array([gini_uncertainty(row) for row in freq])
    posterior = PosteriorSummary(freq, gini)

    result = FitResult(
        engine="mcem",
        kind="bernoulli",
        K=K,
        labels=z_hat + 1,
        node_labels=net.labels(),
        params=g,
        objective=objective,
        trace=trace,
        seed=cfg.seed,
        config=asdict(cfg),
        posterior=posterior,
    )
    result.extras["u_trace"] = u_trace
    return result
