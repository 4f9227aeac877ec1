import math

import numpy as np
import pytest

from gevqmc.lattice import GeneratingVector, ShiftSet, qmc_estimate
from gevqmc.studies import (
    ConfigError,
    StudyConfig,
    fem_study,
    fit_rate,
    parse_config,
    qmc_convergence_study,
    read_rate_csv,
    truncation_study,
    with_overrides,
)

SMALL = StudyConfig(
    s=8,
    k=3,
    n_list="17,31,67",
    R=4,
    s_reference=16,
    s_list="2,4,8,16",
    n_trunc=127,
    k_reference=4,
    k_list="2,3,4",
    n_fem=31,
    fem_s=6,
)

REFERENCE_QMC_H1 = [
    (17, 0.000326005),
    (31, 0.000266371),
    (67, 0.000161875),
    (127, 0.0000664711),
    (263, 0.0000346036),
    (503, 0.0000226511),
    (1013, 0.0000122649),
    (2003, 0.0000107224),
    (4003, 4.36918e-6),
    (8009, 3.79533e-6),
    (16007, 2.15499e-6),
    (32009, 1.37072e-6),
    (63997, 1.29591e-6),
]


def test_fit_rate_examples():
    fr = fit_rate([(1, 1), (10, 0.1)])
    assert fr.slope == pytest.approx(-1) and fr.intercept == pytest.approx(0, abs=1e-15)
    x = np.array([1.0, 2.0, 3.0, 5.0, 8.0])
    fr = fit_rate(list(zip(x, 3 * x**2)))
    assert fr.slope == pytest.approx(2, abs=1e-13) and fr.residual < 1e-12
    assert fr.prefactor == pytest.approx(3)
    with pytest.raises(ValueError):
        fit_rate([(1, 1)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (2, 0)])


def test_fit_rate_reference_data():
    fr = fit_rate(REFERENCE_QMC_H1)
    assert fr.slope == pytest.approx(-0.720539, abs=5e-5)
    assert fr.prefactor == pytest.approx(0.00240776, rel=1e-3)


def test_config_parse_and_hash():
    cfg = parse_config("# comment\nvartheta = 1.75\nn_list = 17,31\nkernel=surrogate  # trailing\n")
    assert cfg.vartheta == 1.75 and cfg.ns == (17, 31)
    assert with_overrides(cfg, {"threads": "4"}).config_hash() == cfg.config_hash()
    assert with_overrides(cfg, {"seed": "5"}).config_hash() != cfg.config_hash()
    with pytest.raises(ConfigError):
        parse_config("bogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config("s = many\n")
    with pytest.raises(ConfigError):
        parse_config("just text\n")


@pytest.mark.parametrize(
    "updates",
    [
        {"theta": "0.1"},
        {"tau": "0.7"},
        {"n_list": "17,15"},
        {"n_list": "31,17"},
        {"s_reference": "8"},
        {"k_reference": "2"},
        {"n_trunc": "100"},
        {"field": "weird"},
        {"p": "0.7"},
    ],
)
def test_config_validation(updates):
    with pytest.raises(ConfigError):
        with_overrides(StudyConfig(), updates).validate()


def test_default_config_valid():
    StudyConfig().validate()
    SMALL.validate()


def test_deterministic_coefficient_gives_zero_rms():
    cfg = with_overrides(SMALL, {"amplitude": "0.0", "n_list": "17,31"})
    tab = qmc_convergence_study(cfg)
    assert tab.h1 == [0.0, 0.0] and tab.l2 == [0.0, 0.0]


def test_qmc_study_small_and_reproducible(tmp_path):
    a = qmc_convergence_study(SMALL)
    b = qmc_convergence_study(SMALL)
    assert a.to_csv() == b.to_csv()
    assert all(e > 0 for e in a.h1)
    a.write(tmp_path / "q.csv")
    rows, meta = read_rate_csv(tmp_path / "q.csv")
    assert rows.shape == (3, 3) and meta["config_hash"] == SMALL.config_hash()
    assert float(meta["fit_h1_slope"]) == pytest.approx(a.fit("h1").slope)


def test_truncation_study_small():
    tab = truncation_study(SMALL)
    assert tab.abscissa == [2.0, 4.0, 8.0, 16.0]
    assert tab.h1[-1] == 0.0 and tab.l2[-1] == 0.0
    assert all(x > y for x, y in zip(tab.h1[:-1], tab.h1[1:-1]))
    assert tab.fit("h1").slope < -1.5


def test_fem_study_small():
    tab = fem_study(SMALL)
    assert tab.abscissa == [2.0**-4, 2.0**-3, 2.0**-2]
    assert tab.h1[0] == 0.0
    assert all(x < y for x, y in zip(tab.h1, tab.h1[1:]))


def test_worker_count_does_not_change_results():
    cfg1 = with_overrides(SMALL, {"n_list": "17,31"})
    cfg2 = with_overrides(cfg1, {"threads": "2"})
    assert qmc_convergence_study(cfg1).to_csv() == qmc_convergence_study(cfg2).to_csv()


def test_rms_scales_with_shift_count():
    # a smooth periodic-in-mean integrand; average the ratio over seeds to tame noise
    g = GeneratingVector(61, (1, 17, 23))
    F = lambda x: np.exp(x[:, 0] * x[:, 1]) + np.cos(3 * x[:, 2])  # noqa: E731
    ratios = []
    for seed in range(20):
        few = qmc_estimate(F, g, ShiftSet.generate(8, 3, seed)).rms
        many = qmc_estimate(F, g, ShiftSet.generate(32, 3, 1000 + seed)).rms
        ratios.append(many / few)
    assert 0.35 <= float(np.mean(ratios)) <= 0.65


def test_genvec_dir_reuse(tmp_path):
    from gevqmc.lattice import write_genvec
    from gevqmc.studies import generating_vector

    cfg = with_overrides(SMALL, {"n_list": "17,31"})
    for n in cfg.ns:
        write_genvec(tmp_path / f"lattice_n{n}.txt", generating_vector(cfg, n, cfg.s))
    reuse = with_overrides(cfg, {"genvec_dir": str(tmp_path)})
    assert qmc_convergence_study(cfg).to_csv() == qmc_convergence_study(reuse).to_csv()
    write_genvec(tmp_path / "lattice_n17.txt", GeneratingVector(17, (1, 2)))
    with pytest.raises(ConfigError):
        qmc_convergence_study(reuse)


def test_metadata_contents():
    tab = truncation_study(SMALL)
    text = tab.to_csv()
    for key in ("# fit_h1_slope=", "# fit_l2_slope=", "# seed=", "# kernel_mode=surrogate", "# config_hash=", "# lambda="):
        assert key in text
    assert math.isnan(float(text.split("# fit_h1_intercept=")[1].split("\n")[0])) is False
