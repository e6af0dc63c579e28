import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakmass.kd import KDParams, bessel_spectrum
from weakmass.pipeline import (
    CALCIUM,
    EXIT_BREAKDOWN,
    EXIT_OK,
    ConfigError,
    PhysicalPreset,
    RunConfig,
    derive_groups,
    grid_class_distribution,
    run_pipeline,
)

# exact SI defining constants, typed in independently of scipy.constants
HBAR_SI = 6.62607015e-34 / (2 * math.pi)
C_SI = 299792458.0


def test_calcium_groups():
    grp = derive_groups(CALCIUM)
    assert grp.g0 == pytest.approx(8e-12, rel=0.1)
    assert grp.g0_t == pytest.approx(3.2e-15, rel=0.1)
    assert grp.omega_k == pytest.approx(1.6e6, rel=0.1)
    assert grp.g0_omega_k_t == pytest.approx(5e-9, rel=0.1)


def test_groups_by_hand():
    k = 2 * math.pi / 0.4e-6
    grp = derive_groups(CALCIUM, 2e-4)
    assert grp.g0 == pytest.approx(HBAR_SI * 4.6e14 / (6.7e-26 * C_SI**2), rel=1e-12)
    assert grp.omega_k == pytest.approx(4 * HBAR_SI * k**2 / 6.7e-26, rel=1e-12)
    assert grp.g0_t == pytest.approx(grp.g0 * 2e-4)
    assert grp.omega_k_t == pytest.approx(grp.omega_k * 2e-4)


def test_lifetime_warning():
    with pytest.warns(UserWarning):
        derive_groups(CALCIUM, 1e-3)


def test_time_unit():
    # omega_k in simulation units is 4, so 4 * t / time_unit must equal omega_k t in SI
    t = 3e-4
    assert 4 * t / CALCIUM.time_unit_s == pytest.approx(derive_groups(CALCIUM, t).omega_k_t, rel=1e-12)
    assert CALCIUM.length_unit_m == pytest.approx(0.4e-6 / (2 * math.pi))


def test_preset_positive_groups():
    p = PhysicalPreset("toy", 1e-25, 1e15, 1e-6, 1e-3, 1e-6)
    grp = derive_groups(p)
    assert grp.g0 > 0 and grp.omega_k > 0


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(omega_t=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(preset="calcium", g0=1e-3, omega_k_t=1.0, omega_t=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(g0=1e-3, omega_t=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(preset="strontium", omega_t=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(preset="calcium").validate()
    with pytest.raises(ConfigError):
        RunConfig(preset="calcium", omega_t=1.0, classes="0,x").validate()
    RunConfig(preset="calcium", omega_t=1.0).validate()


def test_config_roundtrip_default():
    cfg = RunConfig(preset="calcium", aw_target=1e4, trials=10, xi_d=1e-4, shot_noise=False)
    assert RunConfig.parse(cfg.serialize()) == cfg


@given(
    st.floats(0, 1e-2, allow_subnormal=False),
    st.floats(1e-3, 1e3),
    st.floats(0, 30),
    st.floats(-10, 10),
    st.booleans(),
    st.integers(0, 2**31),
    st.one_of(st.none(), st.integers(0, 40)),
)
@settings(max_examples=60, deadline=None)
def test_config_roundtrip(g0, omega_k_t, eta, theta, grid_check, seed, n_max):
    cfg = RunConfig(g0=g0, omega_k_t=omega_k_t, eta=eta, theta=theta, omega_t=0.3,
                    grid_check=grid_check, seed=seed, n_max=n_max, aw_real=0.25)
    assert RunConfig.parse(cfg.serialize()) == cfg


def test_config_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.parse("eta 10")
    with pytest.raises(ConfigError):
        RunConfig.parse("colour = red")
    with pytest.raises(ConfigError):
        RunConfig.parse("eta = ten")
    path = tmp_path / "run.cfg"
    path.write_text("# comment\npreset = calcium\naw-target = 1e4  # inline\n\nshot_noise = off\n")
    cfg = RunConfig.load(path)
    assert cfg.preset == "calcium" and cfg.aw_target == 1e4 and cfg.shot_noise is False


def test_g0_zero_table():
    cfg = RunConfig(g0=0.0, omega_k_t=1.0, omega_t=0.9, theta=1.1, alpha=0.6, beta=0.8)
    res = run_pipeline(cfg)
    spec = bessel_spectrum(KDParams(10.0))
    for row, j2 in zip(res.rows, spec.probabilities):
        assert row["P_n_exact"] == pytest.approx(res.a_w.p_s0 * j2, rel=1e-14, abs=1e-300)
        assert row["P_n_first_order"] == pytest.approx(res.a_w.p_s0 * j2, rel=1e-14, abs=1e-300)
    assert res.p_s_exact == pytest.approx(res.a_w.p_s0, rel=1e-11)
    assert res.exit_code == EXIT_OK


def test_headline_config():
    res = run_pipeline(RunConfig(preset="calcium", aw_target=1e4))
    shift = {r["n"]: r["relative_shift"] for r in res.rows}
    assert shift[10] == pytest.approx(5e-3, rel=0.05)
    assert shift[-10] == shift[10]
    assert res.a_w.im == pytest.approx(1e4, rel=1e-8)
    assert "near-singular" not in res.flags


def test_breakdown_config():
    res = run_pipeline(RunConfig(g0=1e-6, omega_k_t=1.0, aw_target=1e4))
    assert res.exit_code == EXIT_BREAKDOWN
    assert "negative-probability" in res.flags
    assert any(r["P_n_first_order"] < 0 for r in res.rows)
    # the all-orders probabilities stay physical
    assert all(r["P_n_exact"] >= 0 for r in res.rows)


def test_unit_audit():
    k = 2 * math.pi / 0.4e-6
    t = 0.4e-3
    g0 = HBAR_SI * 4.6e14 / (6.7e-26 * C_SI**2)
    omega_k_t = 4 * HBAR_SI * k**2 / 6.7e-26 * t
    a = run_pipeline(RunConfig(preset="calcium", aw_target=1e4))
    b = run_pipeline(RunConfig(g0=g0, omega_k_t=omega_k_t, aw_target=1e4))
    assert a.g0 == pytest.approx(b.g0, rel=1e-9)
    assert a.omega_k_t == pytest.approx(b.omega_k_t, rel=1e-9)
    for ra, rb in zip(a.rows, b.rows):
        for key in ("P_n_first_order", "P_n_exact", "relative_shift"):
            assert ra[key] == pytest.approx(rb[key], rel=1e-9, abs=1e-300)


def test_direct_weak_value():
    res = run_pipeline(RunConfig(g0=1e-6, omega_k_t=1.0, aw_real=0.5, aw_imag=100.0, p_s0=0.01))
    assert res.a_w.value == 0.5 + 100j
    assert res.rows[0]["P_n_exact"] >= 0
    with pytest.raises(ConfigError):
        run_pipeline(RunConfig(g0=1e-6, omega_k_t=1.0, aw_imag=1.0, grid_check=True))


def test_rotation_wins_over_direct():
    cfg = RunConfig(g0=1e-6, omega_k_t=1.0, omega_t=0.3, aw_real=9.0, aw_imag=9.0)
    with pytest.warns(UserWarning, match="ignored"):
        res = run_pipeline(cfg)
    assert "weak-value-mismatch" in res.flags
    assert res.a_w.value != 9 + 9j


def test_grid_check_column():
    cfg = RunConfig(g0=1e-3, omega_k_t=1.0, omega_t=0.7, theta=1.1, alpha=0.6, beta=0.8, grid_check=True)
    res = run_pipeline(cfg)
    dev = max(abs(r["P_n_grid"] - r["P_n_exact"]) for r in res.rows)
    assert dev < 1e-6


def test_grid_distribution_normalization():
    from weakmass.hilbert import QubitState
    from weakmass.weakmeas import PostSelection

    probs = grid_class_distribution(QubitState(1, 0), PostSelection(0.0), 0.0, 0.0, 1.0, 5.0, np.arange(-15, 16))
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)


def test_pipeline_noise_run():
    res = run_pipeline(RunConfig(preset="calcium", aw_target=1e4, trials=2000, xi_d=1e-4, shot_noise=False, seed=4))
    assert len(res.counts) == 3
    assert abs(res.estimate.g0_hat - res.g0) < 3 * res.estimate.stderr
    assert res.summary()["detectable"]


def test_pipeline_deterministic():
    cfg = RunConfig(preset="calcium", aw_target=1e4, trials=50, xi_d=1e-3, xi_s=0.01, dark_rate=2.0, seed=8)
    a, b = run_pipeline(cfg), run_pipeline(cfg)
    assert a.rows == b.rows
    for x, y in zip(a.counts, b.counts):
        assert x.counts.tobytes() == y.counts.tobytes()


def test_no_unexpected_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_pipeline(RunConfig(preset="calcium", aw_target=1e4))
