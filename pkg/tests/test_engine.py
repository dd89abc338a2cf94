import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymer_lab import engine, environment, walk


def _random_field(seed, d, horizon):
    return environment.EnvironmentField(seed=seed, d=d, horizon=horizon)


def test_zero_disorder_is_free_walk():
    for d in (1, 2):
        env = _random_field(1, d, 12)
        lay = engine.evolve_density(env, 0.0, 12)
        obs = engine.observables(lay)
        assert obs.Z == pytest.approx(1.0, abs=1e-14)
        assert obs.K == pytest.approx(12.0, rel=1e-14)
        assert obs.msd == pytest.approx(12.0, rel=1e-14)
        kernel = walk.build_kernel(d, 12)
        assert np.allclose(lay.values, kernel.layer(12), atol=1e-15)


def test_constant_environment_scales_z_only():
    # h identically +1 multiplies every path weight by (1+c)^N and leaves
    # msd at the free-walk value.
    c, N = 0.25, 7
    for d in (1, 2):
        tab = environment.EnvironmentTable.constant(d, N, 1)
        obs = engine.observables(engine.evolve_density(tab, c, N))
        assert obs.Z == pytest.approx((1 + c) ** N, rel=1e-13)
        assert obs.msd == pytest.approx(float(N), rel=1e-13)


@pytest.mark.parametrize("d,n_hi", [(1, 10), (2, 5)])
def test_engine_matches_brute_force(d, n_hi):
    worst = 0.0
    for seed in range(20):
        N = 1 + seed % n_hi
        env = _random_field(1000 + seed, d, N)
        obs = engine.observables(engine.evolve_density(env, 0.4, N))
        ref = engine.brute_force_observables(env, 0.4, N)
        worst = max(worst, abs(obs.Z - ref.Z) / ref.Z, abs(obs.K - ref.K) / max(ref.K, 1.0))
    assert worst < 1e-12


@given(
    d=st.sampled_from([1, 2]),
    c=st.floats(min_value=0.0, max_value=0.9),
    bits=st.integers(min_value=0, max_value=2 ** 13 - 1),
)
@settings(max_examples=40, deadline=None)
def test_engine_matches_brute_force_enumerated(d, c, bits):
    N = 3 if d == 1 else 2
    tab = environment.EnvironmentTable.from_assignment(d, N, bits % 2 ** environment.cone_site_count(d, N))
    obs = engine.observables(engine.evolve_density(tab, c, N))
    ref = engine.brute_force_observables(tab, c, N)
    assert obs.Z == pytest.approx(ref.Z, rel=1e-13)
    assert obs.K == pytest.approx(ref.K, rel=1e-13, abs=1e-13)


def test_path_batches_cover_all_paths():
    for d, N in ((1, 6), (2, 3)):
        batches = list(engine.path_batches(d, N))
        total = sum(end.shape[0] for _, end in batches)
        assert total == (2 * d) ** N
        # endpoint square norms over all paths average to the second moment
        ends = np.concatenate([end for _, end in batches])
        assert float(ends.mean()) == pytest.approx(walk.closed_form_moment(d, "second", N), rel=1e-12)


def test_density_positive_and_normalized_mean():
    env = _random_field(7, 1, 30)
    lay = engine.evolve_density(env, 0.5, 30)
    assert np.all(lay.values >= 0.0)
    assert lay.n == 30


def test_observables_rejects_nonpositive_z():
    lay = engine.DensityLayer(d=1, n=2, values=np.zeros(3))
    with pytest.raises(ValueError):
        engine.observables(lay)


def test_run_arg_validation():
    env = _random_field(1, 1, 4)
    with pytest.raises(ValueError):
        engine.evolve_density(env, 1.0, 4)  # c must be < 1
    with pytest.raises(ValueError):
        engine.evolve_density(env, -0.1, 4)
    with pytest.raises(ValueError):
        engine.evolve_density(env, 0.3, 0)
    with pytest.raises(ValueError):
        engine.evolve_density(env, 0.3, 5)  # horizon too small


def test_determinism():
    env = _random_field(99, 2, 9)
    a = engine.evolve_density(env, 0.3, 9)
    b = engine.evolve_density(env, 0.3, 9)
    assert np.array_equal(a.values, b.values)
