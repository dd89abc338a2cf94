"""Exact second-moment oracles for the partition sum Z and displacement sum K.

Averaging the squared polymer weight over the +/-1 environment turns the
disorder into pair collisions: for two independent walks,

    E[Z(N)^2] = E[(1 + c^2)^{#{1 <= n <= N : omega(n) = omega~(n)}}],
    E[K(N)^2] = E[(1 + c^2)^{#collisions} |omega(N)|^2 |omega~(N)|^2],

and expanding the product over collision times gives the chain sum

    E[Z(N)^2] = sum_{n>=0} c^{2n} sum_{0<i_1<...<i_n<=N} sum_{x_1..x_n}
                prod_k p0(i_k - i_{k-1}, x_k - x_{k-1})^2,

with E[K^2] carrying the extra terminal factor ((N - i_n) + |x_n|^2)^2.

Every quantity here is computed by at least two genuinely different routes:

* pairwalk: direct dynamic programming over the pair of walks (difference
  walk for Z^2, joint state for K^2) with multiplicative collision weights;
* expansion: per-order dynamic programming over the last collision time,
  carrying only the mass / |y|^2 / |y|^4 summaries of the last-collision
  site distribution (the terminal weight needs nothing more);
* enumeration: literal sums over all path pairs, or over all environments,
  for small N.

The routes share no intermediate code beyond the packed layer stencil, which
is the point: their agreement is the correctness argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine, walk
from .environment import enumerate_environments

# Joint-state pair DP caps: O(N * slice^2) cost envelopes.
EK2_PAIRWALK_MAX_N = {1: 512, 2: 48}
# Collision-expansion caps: O(N^2) time DP after an O(N * slice) moment pass.
EXPANSION_MAX_N = {1: 4096, 2: 512}
# Orders with relative contribution below this are truncated.
_ORDER_TAIL_REL = 1e-17

_collision_moment_cache: dict[int, walk.CollisionMoments] = {}


def _cached_collision_moments(d: int, n_max: int) -> walk.CollisionMoments:
    have = _collision_moment_cache.get(d)
    if have is None or have.mass.shape[0] < n_max:
        have = walk.collision_layer_moments(d, n_max)
        _collision_moment_cache[d] = have
    return have


def _check_args(N: int, c: float, d: int) -> None:
    if d not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {d!r}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not 0.0 <= c < 1.0:
        raise ValueError(f"c must satisfy 0 <= c < 1, got {c}")


def ez2_pairwalk(N: int, c: float, d: int) -> float:
    """E[Z^2] via the difference walk D_n = omega(n) - omega~(n).

    D is a lazy +/-2 walk (independent per diagonal axis for d = 2); each
    visit to 0 multiplies the accumulated weight by 1 + c^2.
    """
    _check_args(N, c, d)
    w = 1.0 + c * c
    if d == 1:
        arr = np.ones(1)
        for n in range(1, N + 1):
            new = np.zeros(arr.shape[0] + 2)
            new[1:-1] += 0.5 * arr
            new[:-2] += 0.25 * arr
            new[2:] += 0.25 * arr
            new[n] *= w
            arr = new
        return float(arr.sum())
    arr = np.ones((1, 1))
    for n in range(1, N + 1):
        m = arr.shape[0]
        tmp = np.zeros((m + 2, m))
        tmp[1:-1] += 0.5 * arr
        tmp[:-2] += 0.25 * arr
        tmp[2:] += 0.25 * arr
        new = np.zeros((m + 2, m + 2))
        new[:, 1:-1] += 0.5 * tmp
        new[:, :-2] += 0.25 * tmp
        new[:, 2:] += 0.25 * tmp
        new[n, n] *= w
        arr = new
    return float(arr.sum())


def ek2_pairwalk(N: int, c: float, d: int) -> float:
    """E[K^2] via the joint pair state; needs both endpoints, hence the caps."""
    _check_args(N, c, d)
    cap = EK2_PAIRWALK_MAX_N[d]
    if N > cap:
        raise ValueError(f"joint pair DP capped at N = {cap} for d = {d}")
    w = 1.0 + c * c

    def grow(a: np.ndarray, axis: int) -> np.ndarray:
        # 2-tap packed step along one axis: index j' in {j, j+1}.
        shape = list(a.shape)
        shape[axis] += 1
        out = np.zeros(shape)
        lead = (slice(None),) * axis
        out[lead + (slice(0, -1),)] += a
        out[lead + (slice(1, None),)] += a
        out *= 0.5
        return out

    if d == 1:
        arr = np.ones((1, 1))
        for n in range(1, N + 1):
            arr = grow(grow(arr, 0), 1)
            ii = np.arange(n + 1)
            arr[ii, ii] *= w
        x = (2.0 * np.arange(N + 1) - N) ** 2
        return float(np.einsum("ij,i,j->", arr, x, x))
    arr = np.ones((1, 1, 1, 1))
    for n in range(1, N + 1):
        for ax in range(4):
            arr = grow(arr, ax)
        ii = np.arange(n + 1)
        arr[ii[:, None], ii[None, :], ii[:, None], ii[None, :]] *= w
    span = 2.0 * np.arange(N + 1) - N
    sq = 0.5 * (span[:, None] ** 2 + span[None, :] ** 2)
    return float(np.einsum("ijkl,ij,kl->", arr, sq, sq))


@dataclass(frozen=True)
class CollisionExpansion:
    """Per-order collision-chain contributions T_n, n = 0 .. len(orders)-1.

    orders[0] is the disorder-free term (1 for Z^2, N^2 for K^2).  truncated
    marks that trailing orders below the relative tail cutoff were dropped;
    the stored orders then determine the total to full float precision.
    """

    d: int
    N: int
    c: float
    kind: str  # "z2" or "k2"
    orders: np.ndarray
    truncated: bool

    @property
    def total(self) -> float:
        return math.fsum(self.orders.tolist())


def _expansion(N: int, c: float, d: int, kind: str) -> CollisionExpansion:
    """Shared per-order DP over the last collision time.

    State per order: arrays over the last collision time i = 1..N holding the
    mass m0, second moment m2 and fourth moment m4 of the last-collision site
    distribution.  Convolving two centrally symmetric site distributions only
    mixes these summaries:

        m4(mu * nu) = m4(mu) m0(nu) + m0(mu) m4(nu) + (2 + 4/d) m2(mu) m2(nu),

    so the spatial sums never need to be carried explicitly.
    """
    _check_args(N, c, d)
    cap = EXPANSION_MAX_N[d]
    if N > cap:
        raise ValueError(f"collision expansion capped at N = {cap} for d = {d}")
    cm = _cached_collision_moments(d, N)
    q0 = cm.mass[:N]
    q2 = cm.sq[:N]
    q4 = cm.quart[:N]
    c2 = c * c
    cross = 2.0 + 4.0 / d

    if kind == "z2":
        orders = [1.0]

        def term(a0, a2, a4, i):
            return float(a0.sum())
    else:
        orders = [float(N) * N]
        back = (N - np.arange(1, N + 1)).astype(np.float64)

        def term(a0, a2, a4, i):
            return float(np.dot(back * back, a0) + 2.0 * np.dot(back, a2) + a4.sum())

    # Order 1: single collision at time i with site distribution q(i, .).
    a0 = c2 * q0
    a2 = c2 * q2
    a4 = c2 * q4
    truncated = False
    for order in range(1, N + 1):
        t = term(a0, a2, a4, order)
        orders.append(t)
        if t == 0.0 or t < _ORDER_TAIL_REL * math.fsum(orders):
            truncated = order < N
            break
        if order == N:
            break
        # Convolve in time with one more collision gap; index k of the
        # convolution output corresponds to time i = k + 2.
        b0 = np.convolve(a0, q0)[: N - 1]
        b2 = np.convolve(a2, q0)[: N - 1] + np.convolve(a0, q2)[: N - 1]
        b4 = (
            np.convolve(a4, q0)[: N - 1]
            + np.convolve(a0, q4)[: N - 1]
            + cross * np.convolve(a2, q2)[: N - 1]
        )
        a0 = np.zeros(N)
        a0[1:] = c2 * b0
        a2 = np.zeros(N)
        a2[1:] = c2 * b2
        a4 = np.zeros(N)
        a4[1:] = c2 * b4
    return CollisionExpansion(
        d=d, N=N, c=c, kind=kind, orders=np.array(orders), truncated=truncated
    )


def ez2_expansion(N: int, c: float, d: int) -> CollisionExpansion:
    """Per-order collision expansion of E[Z^2]."""
    return _expansion(N, c, d, "z2")


def ek2_expansion(N: int, c: float, d: int) -> CollisionExpansion:
    """Per-order collision expansion of E[K^2] (terminal ((N-i) + |y|^2)^2)."""
    return _expansion(N, c, d, "k2")


def weighted_fourth_sum(times, N: int, d: int) -> float:
    """Closed form of the chain-weighted fourth-moment sum

        sum_{x_1..x_n} prod_k p0(i_k - i_{k-1}, x_k - x_{k-1})
            * ((N - i_n)^2 + 2 (N - i_n) |x_n|^2 + |x_n|^4)

    for a strictly increasing collision-time sequence `times` inside [1, N].
    """
    seq = _check_times(times, N)
    gaps = np.diff(np.concatenate(([0], seq)))
    i_n = int(seq[-1])
    prev = seq - gaps  # i_{k-1}
    base = float((N - i_n) ** 2 + 2 * (N - i_n) * i_n)
    if d == 1:
        return base + float(3 * np.dot(gaps, gaps) - 2 * i_n + 6 * np.dot(gaps, prev))
    if d == 2:
        return base + float(2 * np.dot(gaps, gaps) - i_n + 4 * np.dot(gaps, prev))
    raise ValueError(f"dimension must be 1 or 2, got {d!r}")


def weighted_fourth_sum_direct(times, N: int, d: int) -> float:
    """Same sum evaluated by chaining packed-layer convolutions (no closed form)."""
    seq = _check_times(times, N)
    gaps = np.diff(np.concatenate(([0], seq)))
    dist = np.ones((1,) if d == 1 else (1, 1))
    for g in gaps:
        # Displacement by an SRW bridge of length g: convolve with p0(g, .),
        # realized as g single steps of the shared stencil.
        for _ in range(int(g)):
            dist = walk.step_layer(dist, d)
    i_n = int(seq[-1])
    sq = walk.slice_sqnorm(d, i_n)
    w = (N - i_n) ** 2 + 2.0 * (N - i_n) * sq + sq * sq
    return float(np.dot(dist.ravel(), w.ravel()))


def _check_times(times, N: int) -> np.ndarray:
    seq = np.asarray(list(times), dtype=np.int64)
    if seq.size == 0:
        raise ValueError("time sequence must be nonempty")
    if seq[0] < 1 or seq[-1] > N or np.any(np.diff(seq) <= 0):
        raise ValueError(f"times must be strictly increasing inside [1, {N}]")
    return seq


def centered_moments(N: int, c: float, d: int) -> tuple[float, float]:
    """(var Z, var K) = (E Z^2 - 1, E K^2 - N^2) from the exact oracles.

    var Z always uses the difference-walk DP.  var K uses the joint pair DP
    within its caps and the collision expansion beyond them; the two methods
    are cross-checked against each other (and against enumeration) in the
    test suite wherever both run.
    """
    _check_args(N, c, d)
    var_z = ez2_pairwalk(N, c, d) - 1.0
    if N <= EK2_PAIRWALK_MAX_N[d]:
        ek2 = ek2_pairwalk(N, c, d)
    else:
        ek2 = ek2_expansion(N, c, d).total
    return var_z, ek2 - float(N) * N


@dataclass(frozen=True)
class CalibrationRow:
    """Smallest geometric-domination constants at one grid point.

    s is the disorder-collision scale (c^2 sqrt(N) for d = 1, c^2 log N for
    d = 2).  a_total_* is the smallest A with the full moment dominated by
    sum_n (A s)^n (times N^2 for K^2); a_order_* is the smallest A with every
    per-order term T_n <= (A s)^n individually.
    """

    d: int
    N: int
    c: float
    s: float
    ez2: float
    ek2: float
    a_total_z2: float
    a_order_z2: float
    a_total_k2: float
    a_order_k2: float


def _smallest_dominating_a(total: float, s: float, N: int, scale: float) -> float:
    """Bisect the smallest A >= 0 with scale * sum_{n=0}^{N} (A s)^n >= total."""
    if total <= scale:
        return 0.0
    terms = min(N, 4096)

    def dominated(a: float) -> bool:
        g = a * s
        acc = 1.0
        p = 1.0
        for _ in range(terms):
            p *= g
            acc += p
            if acc * scale >= total or not np.isfinite(acc):
                return True
        return acc * scale >= total

    hi = 1.0
    while not dominated(hi):
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("domination constant diverged")
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if dominated(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _per_order_a(orders: np.ndarray, s: float, scale: float) -> float:
    best = 0.0
    for n in range(1, orders.shape[0]):
        t = orders[n] / scale
        if t > 0.0:
            best = max(best, t ** (1.0 / n) / s)
    return best


def bound_calibration(d: int, n_grid, rule) -> list[CalibrationRow]:
    """Measure the geometric-domination constants along a grid.

    `rule` is any object with c_of(N) (a ScalingRule fits); the collision
    scale s = c^2 sqrt(N) resp. c^2 log N must stay below 1/A for the
    geometric series to close, which is what the returned constants verify.
    """
    rows = []
    for N in n_grid:
        c = rule.c_of(N)
        s = c * c * (math.sqrt(N) if d == 1 else math.log(N))
        ez = ez2_expansion(N, c, d)
        ek = ek2_expansion(N, c, d)
        ez2 = ez.total
        ek2 = ek.total
        rows.append(
            CalibrationRow(
                d=d,
                N=N,
                c=c,
                s=s,
                ez2=ez2,
                ek2=ek2,
                a_total_z2=_smallest_dominating_a(ez2, s, N, 1.0),
                a_order_z2=_per_order_a(ez.orders, s, 1.0),
                a_total_k2=_smallest_dominating_a(ek2, s, N, float(N) * N),
                a_order_k2=_per_order_a(ek.orders, s, float(N) * N),
            )
        )
    return rows


def pair_enumeration_moments(N: int, c: float, d: int) -> tuple[float, float]:
    """(E Z^2, E K^2) by literal enumeration of all (2d)^{2N} path pairs.

    The collision weight is accumulated as a dense pair matrix, so this is
    limited to (2d)^N <= 4096 paths; it exists purely as an oracle.
    """
    _check_args(N, c, d)
    if (2 * d) ** N > 4096:
        raise ValueError("pair enumeration limited to (2d)^N <= 4096 paths")
    batches = list(engine.path_batches(d, N))
    (idx, end_sq) = batches[0] if len(batches) == 1 else _merge_batches(batches, N, d)
    paths = end_sq.shape[0]
    # Encode each visited site as a single integer per time step.
    codes = np.empty((paths, N), dtype=np.int64)
    for n in range(1, N + 1):
        if d == 1:
            codes[:, n - 1] = idx[n - 1]
        else:
            iu, iv = idx[n - 1]
            codes[:, n - 1] = iu * (N + 2) + iv
    w = np.ones((paths, paths))
    c2 = 1.0 + c * c
    for n in range(N):
        col = codes[:, n]
        w *= np.where(col[:, None] == col[None, :], c2, 1.0)
    scale = float(2 * d) ** (-2 * N)
    ez2 = float(w.sum()) * scale
    ek2 = float(end_sq @ w @ end_sq) * scale
    return ez2, ek2


def _merge_batches(batches, N, d):
    idx = []
    for n in range(N):
        if d == 1:
            idx.append(np.concatenate([b[0][n] for b in batches]))
        else:
            idx.append(
                (
                    np.concatenate([b[0][n][0] for b in batches]),
                    np.concatenate([b[0][n][1] for b in batches]),
                )
            )
    end_sq = np.concatenate([b[1] for b in batches])
    return idx, end_sq


def environment_average_moments(d: int, horizon: int, c: float) -> dict:
    """Exhaustive environment averages of Z, K, Z^2, K^2 at time `horizon`.

    Runs the transfer-matrix engine once per sign table; the means are exact
    up to float rounding (fsum accumulation) and must match E Z = 1,
    E K = N and the pair oracles.
    """
    zs = []
    ks = []
    for table in enumerate_environments(d, horizon):
        obs = engine.observables(engine.evolve_density(table, c, horizon))
        zs.append(obs.Z)
        ks.append(obs.K)
    count = len(zs)
    return {
        "count": count,
        "mean_Z": math.fsum(zs) / count,
        "mean_K": math.fsum(ks) / count,
        "mean_Z2": math.fsum(z * z for z in zs) / count,
        "mean_K2": math.fsum(k * k for k in ks) / count,
    }
