import math

import numpy as np
import pytest

from rerm.config import (INF, ChannelSpec, ConjugateOverlaps, ErrorReport,
                         NormOrder, Overlaps, PriorSpec, ProblemConfig,
                         SpectralMeasure, dual_exponent, identity_measure,
                         lp_norm, validate_config)


def test_dual_exponent():
    assert dual_exponent(INF) == 1.0
    assert dual_exponent(2.0) == 2.0
    assert abs(dual_exponent(3.0) - 1.5) < 1e-15
    assert abs(dual_exponent(1.5) - 3.0) < 1e-15
    with pytest.raises(ValueError):
        dual_exponent(1.0)
    with pytest.raises(ValueError):
        dual_exponent(0.5)


def test_norm_order_validation():
    NormOrder(p=INF, r=1.0)
    with pytest.raises(ValueError):
        NormOrder(p=1.0, r=2.0)
    with pytest.raises(ValueError):
        NormOrder(p=2.0, r=0.5)


def test_prior_variance():
    assert PriorSpec("gaussian", rho=0.7).variance == 0.7
    assert abs(PriorSpec("sparse_binary", rho=0.3).variance - 0.7) < 1e-15
    with pytest.raises(ValueError):
        PriorSpec("gaussian", rho=0.0)
    with pytest.raises(ValueError):
        PriorSpec("sparse_binary", rho=1.5)
    with pytest.raises(ValueError):
        PriorSpec("bogus")


def test_channel_spec():
    ChannelSpec("probit", tau=0.5)
    with pytest.raises(ValueError):
        ChannelSpec("probit", tau=-1.0)
    with pytest.raises(ValueError):
        ChannelSpec("bogus")


def test_spectral_measure_invariants():
    m = SpectralMeasure((1.0, 1.0), (1.0, 1.0), (1.0, 2.5), (2.5, 1.0),
                        (0.5, 0.5))
    assert m.rho == 1.0
    with pytest.raises(ValueError):
        SpectralMeasure((1.0,), (1.0,), (1.0,), (1.0,), (0.9,))
    with pytest.raises(ValueError):
        SpectralMeasure((1.0,), (0.0,), (1.0,), (1.0,), (1.0,))
    with pytest.raises(ValueError):
        SpectralMeasure((1.0, 1.0), (1.0,), (1.0,), (1.0,), (1.0,))


def test_validate_config_rules():
    base = ProblemConfig(alpha=1.0, eps=0.1, lam=0.1)
    validate_config(base)
    with pytest.raises(ValueError):
        validate_config(ProblemConfig(alpha=0.0, eps=0.1, lam=0.1))
    with pytest.raises(ValueError):
        validate_config(ProblemConfig(alpha=1.0, eps=-0.1, lam=0.1))
    # lambda = 0 rejected: the objective may not attain its infimum
    with pytest.raises(ValueError):
        validate_config(ProblemConfig(alpha=1.0, eps=0.1, lam=0.0))
    # mahalanobis constraints
    with pytest.raises(ValueError):
        validate_config(ProblemConfig(alpha=1.0, eps=0.1, lam=0.1,
                                      geometry="mahalanobis"))
    with pytest.raises(ValueError):
        validate_config(ProblemConfig(alpha=1.0, eps=0.1, lam=0.1,
                                      geometry="mahalanobis",
                                      norms=NormOrder(p=INF, r=1.0),
                                      measure=identity_measure()))
    ok = ProblemConfig(alpha=1.0, eps=0.1, lam=0.1, geometry="mahalanobis",
                       measure=identity_measure(0.8))
    assert validate_config(ok).rho == 0.8


def test_overlaps_checks():
    Overlaps(0.5, 1.0, 1.0, 1.0).check(rho=1.0)
    with pytest.raises(ValueError):
        Overlaps(1.5, 1.0, 1.0, 1.0).check(rho=1.0)  # Cauchy-Schwarz
    with pytest.raises(ValueError):
        Overlaps(0.0, -1.0, 1.0, 1.0).check(rho=1.0)
    with pytest.raises(ValueError):
        ConjugateOverlaps(0.0, -1.0, 1.0, 0.0).check()


def test_error_report_exact_identity():
    rep = ErrorReport(0.25, 0.05, 0.3, 0.8)
    assert rep.e_rob == rep.e_gen + rep.e_bnd
    with pytest.raises(ValueError):
        ErrorReport(0.25, 0.05, 0.31, 0.8)


def test_lp_norm():
    v = np.array([3.0, -4.0, 0.0])
    assert lp_norm(v, 2) == 5.0
    assert lp_norm(v, 1) == 7.0
    assert lp_norm(v, INF) == 4.0
    assert abs(lp_norm(v, 3) - (27 + 64) ** (1 / 3)) < 1e-12


def test_with_revalidates():
    cfg = ProblemConfig(alpha=1.0, eps=0.1, lam=0.1)
    assert cfg.with_(alpha=2.0).alpha == 2.0
    with pytest.raises(ValueError):
        cfg.with_(lam=0.0)
