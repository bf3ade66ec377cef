import numpy as np
import pytest

from nkdcd.baseline import BaselineConfig, fit_var, var_objective
from nkdcd.datagen import Var3Spec, generate_var, simulate_var
from nkdcd.inference import auroc, score_gc
from nkdcd.loss import evaluate
from nkdcd.model import DecoderNet, EncoderNet, LagStack, NkdcdModel


def var1_panel():
    rng = np.random.default_rng(0)
    W = np.array([[0.5, 0.2, 0.0], [0.0, 0.4, -0.3], [0.1, 0.0, 0.6]])
    # noiseless but excited: random start, restarted periodically
    blocks = []
    for _ in range(20):
        blocks.append(simulate_var(W[None], np.zeros((15, 3)), x0=rng.normal(size=(1, 3)))[1:])
    return W, blocks


def test_lambda_zero_recovers_var1():
    W, blocks = var1_panel()
    x = blocks[0]
    cfg = BaselineConfig(lam=0.0, L=1, standardize=False, tol=1e-16, max_iter=50000)
    m = fit_var(x, cfg)
    np.testing.assert_allclose(m.lag_matrices()[0], W, atol=1e-3)


def test_standardized_fit_reports_original_units():
    W, _ = var1_panel()
    noise = np.random.default_rng(1).normal(size=(5000, 3))
    x = simulate_var(W[None], noise) * np.array([1.0, 10.0, 0.1])
    raw = fit_var(x, BaselineConfig(lam=0.0, L=1, standardize=False, tol=1e-16, max_iter=50000))
    std = fit_var(x, BaselineConfig(lam=0.0, L=1, tol=1e-16, max_iter=50000))
    np.testing.assert_allclose(std.lag_matrices(), raw.lag_matrices(), rtol=0.02, atol=0.02)
    np.testing.assert_allclose(std.predict(x), raw.predict(x), atol=0.05 * x.std())


def test_huge_lambda_gives_zero_lags():
    d = generate_var(Var3Spec(T=200))
    m = fit_var(d, BaselineConfig(lam=1e9))
    assert np.all(m.lags.weights == 0.0)


@pytest.mark.parametrize("kind", ["ulg", "hlg", "ilg"])
def test_var3_panel_is_recovered(kind):
    d = generate_var(Var3Spec(T=1000, seed=0))
    m = fit_var(d, BaselineConfig(lam=5.0, penalty=kind))
    assert auroc(score_gc(m.lags), d.truth) > 0.98


def test_objective_matches_identity_nkdcd_loss_terms():
    # with identity one-unit encoder/decoder the lifted-VAR and base NAR terms
    # of the NKDCD loss are both the baseline's squared residual
    x = np.random.default_rng(3).normal(size=(30, 3))
    W = np.random.default_rng(4).normal(scale=0.3, size=(2, 3, 3))
    one = lambda: [np.ones((1, 1)) for _ in range(3)]
    zero = lambda: [np.zeros((1, 1)) for _ in range(3)]
    model = NkdcdModel(EncoderNet(one(), zero(), "linear"), DecoderNet(one(), zero(), "linear"),
                       LagStack(W, 3, 1), frozen={"encoder": True, "decoder": True})
    bd = evaluate(model, x, "ulg", 0.0)
    obj = var_objective(x, LagStack(W, 3, 1))
    assert bd.lifted_var == pytest.approx(obj, rel=1e-12)
    assert bd.nar_base == pytest.approx(obj, rel=1e-12)
    assert bd.recon_autoencoder == 0.0


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        BaselineConfig(tau=2.0)
    with pytest.raises(ValueError):
        BaselineConfig.from_dict({"alpha": 1})
    cfg = BaselineConfig.from_dict({"lambda": 3.0, "penalty": "hlg"})
    assert BaselineConfig.from_dict(cfg.to_dict()) == cfg
