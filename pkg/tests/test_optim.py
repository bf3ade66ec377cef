import numpy as np
import pytest

from nkdcd.loss import penalty
from nkdcd.model import DecoderNet, EncoderNet, InsufficientDataError, LagStack, NkdcdModel
from nkdcd.optim import Adam, DivergedError, TrainConfig, sgd_step_encoder_decoder, train


def tiny_cfg(**kw):
    base = dict(lam=0.01, tau=0.01, L=2, N=2, h=2, batch=16, max_epochs=3,
                activation="linear", loss_reduction="mean")
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture
def panel():
    return np.random.default_rng(0).normal(size=(40, 3))


def scalar_model(w=1.0):
    enc = EncoderNet([np.array([[w]]), np.ones((1, 1)), np.ones((1, 1))],
                     [np.zeros((1, 1))] * 3, "linear")
    dec = DecoderNet([np.ones((1, 1))] * 3, [np.zeros((1, 1))] * 3, "linear")
    return NkdcdModel(enc, dec, LagStack.zeros(1, 1, 1))


def test_sgd_one_line_update():
    m = scalar_model(1.0)
    g = [np.array([[2.0]]), np.zeros((1, 1)), np.zeros((1, 1))] + [np.zeros((1, 1))] * 3
    out = sgd_step_encoder_decoder(m, {"encoder": g}, 0.1)
    assert out.encoder.weights[0][0, 0] == pytest.approx(0.8)
    assert m.encoder.weights[0][0, 0] == 1.0


def test_sgd_zero_gradient_or_zero_step_is_identity():
    m = NkdcdModel.init(2, 3, 2, 4, seed=1)
    zeros = {k: [np.zeros_like(p) for p in getattr(m, k).parameters()] for k in ("encoder", "decoder")}
    ones = {k: [np.ones_like(p) for p in getattr(m, k).parameters()] for k in ("encoder", "decoder")}
    for out in (sgd_step_encoder_decoder(m, zeros, 0.3), sgd_step_encoder_decoder(m, ones, 0.0)):
        for a, b in zip(out.encoder.parameters() + out.decoder.parameters(),
                        m.encoder.parameters() + m.decoder.parameters()):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(out.lags.weights, m.lags.weights)


def test_sgd_nonfinite_gradient_raises():
    m = scalar_model()
    g = [np.array([[np.nan]])] + [np.zeros((1, 1))] * 5
    with pytest.raises(DivergedError):
        sgd_step_encoder_decoder(m, {"encoder": g}, 0.1)


def test_adam_first_step_is_sign_of_gradient():
    a = Adam()
    a.tick()
    d = a.direction("w", np.array([[3.0, -0.5]]))
    np.testing.assert_allclose(d, [[1.0, -1.0]], rtol=1e-6)


def test_config_validation_collects_problems():
    with pytest.raises(ValueError, match="tau"):
        TrainConfig(tau=1.5)
    with pytest.raises(ValueError, match="lam"):
        TrainConfig(lam=0.0)
    with pytest.raises(ValueError, match="h must"):
        TrainConfig(h=3)


def test_config_round_trip_and_aliases():
    cfg = TrainConfig.from_dict({"lambda": 0.05, "learning_rate": 5e-4, "L": 5, "N": 15,
                                 "h": 16, "batch": 500})
    assert cfg.lam == 0.05 and cfg.tau == 5e-4
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"gamma": 1})


def test_training_is_deterministic(panel):
    cfg = tiny_cfg()
    m1, r1 = train(panel, cfg)
    m2, r2 = train(panel, cfg)
    np.testing.assert_array_equal(m1.lags.weights, m2.lags.weights)
    assert [b.to_dict() for b in r1.history] == [b.to_dict() for b in r2.history]
    assert r1.epochs == len(r1.history) == 3
    assert r1.stop_reason == "max-epochs"


def test_huge_lambda_zeroes_every_block(panel):
    m, _ = train(panel, tiny_cfg(lam=1e6, max_epochs=1))
    assert np.all(m.lags.weights == 0.0)
    # with no lag coupling, every prediction is the decoder applied to zero
    pred = m.forward_all(panel).pred
    np.testing.assert_allclose(pred, pred[0][None, :].repeat(pred.shape[0], 0))


def test_short_panel_rejected():
    with pytest.raises(InsufficientDataError):
        train(np.zeros((2, 3)), tiny_cfg())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_epoch(panel):
    with pytest.raises(DivergedError) as exc:
        train(panel * 1e3, tiny_cfg(tau=1.0, loss_reduction="sum", activation="leaky_relu",
                                    max_epochs=20))
    assert exc.value.epoch >= 1


def test_adam_and_previous_denominator_run(panel):
    m, r = train(panel, tiny_cfg(optimizer="adam", prox_denominator="previous"))
    assert r.epochs == 3 and np.all(np.isfinite(m.lags.weights))


def test_stopping_rule_converges_with_patience(panel):
    cfg = tiny_cfg(max_epochs=500, patience=3, stop_threshold=np.inf, min_rel_decrease=0.5)
    _, r = train(panel, cfg)
    assert r.stop_reason == "converged"
    assert r.epochs < 500


def test_prox_step_never_increases_penalty(panel, monkeypatch):
    from nkdcd import optim

    pairs = []
    real = optim.apply_prox

    def spy(lags, kind, t, previous=None):
        out = real(lags, kind, t, previous)
        pairs.append((penalty(lags, kind), penalty(out, kind)))
        return out

    monkeypatch.setattr(optim, "apply_prox", spy)
    train(panel, tiny_cfg(max_epochs=5, lam=0.5))
    assert len(pairs) == 5 * 3  # 38 targets in batches of 16
    assert all(after <= before for before, after in pairs)


def test_loss_decreases_on_learnable_data():
    rng = np.random.default_rng(1)
    x = np.zeros((300, 2))
    for t in range(1, 300):
        x[t] = 0.8 * x[t - 1][::-1] + 0.1 * rng.normal(size=2)
    cfg = tiny_cfg(L=1, max_epochs=40, tau=0.05, batch=64, lam=1e-3)
    _, r = train(x, cfg)
    assert r.history[-1].j1 < r.history[0].j1


def test_frozen_lags_are_left_alone(panel):
    m = NkdcdModel.init(3, 2, 2, 2, seed=0, activation="linear")
    m.frozen["lags"] = True
    out, _ = train(panel, tiny_cfg(), model=m)
    np.testing.assert_array_equal(out.lags.weights, m.lags.weights)
    assert penalty(out.lags, "ilg") == penalty(m.lags, "ilg")
