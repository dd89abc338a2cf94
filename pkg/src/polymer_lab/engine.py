"""Transfer-matrix evolution of the polymer density and brute-force oracles.

The density recursion is

    p(n, x) = [ (2d)^{-1} sum_{|e|_1 = 1} p(n-1, x-e) ] * (1 + c h(n, x)),
    p(0, .) = delta_0,

carried on the packed parity slices from the walk module with two rolling
layers.  Everything is plain float64; with 0 <= c < 1 every weight factor is
positive, so no log-domain bookkeeping is needed, only an overflow guard.

brute_force_observables enumerates all (2d)^N paths directly and is the
independent check for the recursion on small N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import walk

# Abort threshold for the running layer sum (overflow guard).
DENSITY_SUM_LIMIT = 1e300
# Path enumeration cap: (2d)^N <= 2^24.
MAX_BRUTE_PATHS = 1 << 24
_PATH_CHUNK = 1 << 16


@dataclass(frozen=True)
class DensityLayer:
    """Packed polymer density p(n, .) at a single time."""

    d: int
    n: int
    values: np.ndarray


@dataclass(frozen=True)
class PolymerObservables:
    """Partition sum Z, squared-displacement sum K, quenched msd = K/Z."""

    Z: float
    K: float
    msd: float


def _check_run_args(env, c: float, N: int) -> None:
    if not 0.0 <= c < 1.0:
        raise ValueError(f"disorder strength c must satisfy 0 <= c < 1, got {c}")
    if N < 1:
        raise ValueError(f"horizon N must be >= 1, got {N}")
    if env.horizon < N:
        raise ValueError(f"environment horizon {env.horizon} < N = {N}")


def evolve_density(env, c: float, N: int) -> DensityLayer:
    """Run the density recursion to time N under the given environment."""
    _check_run_args(env, c, N)
    d = env.d
    lay = np.ones((1,) if d == 1 else (1, 1))
    for n in range(1, N + 1):
        lay = walk.step_layer(lay, d)
        lay *= 1.0 + c * env.slice_signs(n)
        s = float(lay.sum())
        if not np.isfinite(s) or s > DENSITY_SUM_LIMIT:
            raise OverflowError(f"density sum {s} exceeded {DENSITY_SUM_LIMIT} at step {n}")
    lay.flags.writeable = False
    return DensityLayer(d=d, n=N, values=lay)


def observables(layer: DensityLayer) -> PolymerObservables:
    z = float(layer.values.sum())
    if not z > 0.0:
        raise ValueError(f"partition sum must be positive, got {z}")
    k = float(np.dot(layer.values.ravel(), walk.slice_sqnorm(layer.d, layer.n).ravel()))
    return PolymerObservables(Z=z, K=k, msd=k / z)


def path_batches(d: int, N: int, max_paths: int = MAX_BRUTE_PATHS):
    """Enumerate all (2d)^N nearest-neighbour paths in vectorized chunks.

    Yields (indices, endpoint_sqnorm) where indices is a length-N list of
    packed slice-index arrays (one per time step, matching the packed layer
    layouts) and endpoint_sqnorm is |omega(N)|^2 per path.  d = 2 paths are
    driven in diagonal coordinates: two base-4 digits per step give the
    independent u and v increments.
    """
    total = (2 * d) ** N
    if total > max_paths:
        raise ValueError(f"(2d)^N = {total} exceeds enumeration cap {max_paths}")
    for lo in range(0, total, _PATH_CHUNK):
        hi = min(lo + _PATH_CHUNK, total)
        codes = np.arange(lo, hi, dtype=np.int64)
        if d == 1:
            steps = ((codes[:, None] >> np.arange(N)) & 1) * 2 - 1
            pos = np.cumsum(steps, axis=1)
            idx = [(pos[:, n - 1] + n) >> 1 for n in range(1, N + 1)]
            yield idx, (pos[:, -1] ** 2).astype(np.float64)
        else:
            digits = (codes[:, None] >> (2 * np.arange(N))) & 3
            du = (digits & 1) * 2 - 1
            dv = ((digits >> 1) & 1) * 2 - 1
            u = np.cumsum(du, axis=1)
            v = np.cumsum(dv, axis=1)
            idx = [((u[:, n - 1] + n) >> 1, (v[:, n - 1] + n) >> 1) for n in range(1, N + 1)]
            yield idx, ((u[:, -1] ** 2 + v[:, -1] ** 2) // 2).astype(np.float64)


def brute_force_observables(env, c: float, N: int) -> PolymerObservables:
    """Exact Z and K by summing the weight of every path individually."""
    _check_run_args(env, c, N)
    d = env.d
    signs = [env.slice_signs(n) for n in range(1, N + 1)]
    z_acc = 0.0
    k_acc = 0.0
    for idx, end_sq in path_batches(d, N):
        w = np.ones(end_sq.shape[0])
        for n in range(1, N + 1):
            if d == 1:
                s = signs[n - 1][idx[n - 1]]
            else:
                iu, iv = idx[n - 1]
                s = signs[n - 1][iu, iv]
            w *= 1.0 + c * s
        z_acc += float(w.sum())
        k_acc += float(np.dot(w, end_sq))
    scale = float(2 * d) ** (-N)
    z = z_acc * scale
    k = k_acc * scale
    if not z > 0.0:
        raise ValueError(f"partition sum must be positive, got {z}")
    return PolymerObservables(Z=z, K=k, msd=k / z)
