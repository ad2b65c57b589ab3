import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from prednext.errors import ConfigError
from prednext.prediction import (
    LossBreakdown,
    PredictionHeads,
    PredNextConfig,
    clip_pred_loss,
    compose_total,
    forced_consistency_loss,
    pairwise_cosine_distance,
    step_pred_loss,
)

ident = torch.nn.Identity()


def t(x):
    return torch.tensor(x, dtype=torch.float64)


class TestStepLoss:
    def test_constant_sequence_is_perfect(self):
        z = torch.ones(2, 4, 3, dtype=torch.float64)
        assert step_pred_loss(z, z, ident, 1).item() == pytest.approx(-1.0)

    def test_orthogonal_predictions(self):
        z_i = t([[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]])
        z_j = t([[[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]])
        assert step_pred_loss(z_i, z_j, ident, 1).item() == pytest.approx(0.0, abs=1e-12)

    def test_hand_values(self):
        # T=3, m=1, B=1, D=2
        z_i = [[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]
        z_j = [[0.0, 1.0], [3.0, 4.0], [-1.0, 0.0]]
        # i -> j: cos((1,0),(3,4)) = 0.6, cos((1,1),(-1,0)) = -1/sqrt2
        q_ij = -(0.6 - 1 / math.sqrt(2)) / 2
        # j -> i: cos((0,1),(1,1)) = 1/sqrt2, cos((3,4),(0,2)) = 0.8
        q_ji = -(1 / math.sqrt(2) + 0.8) / 2
        got = step_pred_loss(t([z_i]), t([z_j]), ident, 1).item()
        assert got == pytest.approx(0.5 * q_ij + 0.5 * q_ji, abs=1e-12)

    def test_same_view_routes_to_own_future(self):
        z_i = t([[[1.0, 0.0], [1.0, 0.0]]])
        z_j = t([[[0.0, 1.0], [1.0, 0.0]]])
        # same view: i->i cos 1, j->j cos 0
        assert step_pred_loss(z_i, z_j, ident, 1, cross_view=False).item() == pytest.approx(-0.5)

    @pytest.mark.parametrize("m", [0, 3, 5])
    def test_interval_bounds(self, m):
        z = torch.ones(1, 3, 2)
        with pytest.raises(ValueError):
            step_pred_loss(z, z, ident, m)


class TestClipLoss:
    def test_identity_perfect(self):
        a = torch.randn(3, 4, dtype=torch.float64)
        b = torch.randn(3, 4, dtype=torch.float64)
        assert clip_pred_loss(a, b, a, b, ident, cross_view=False).item() == pytest.approx(-1.0)

    def test_antipodal(self):
        a = torch.randn(3, 4, dtype=torch.float64)
        assert clip_pred_loss(a, a, -a, -a, ident).item() == pytest.approx(1.0)

    def test_matches_scalar_oracle(self):
        g = torch.Generator().manual_seed(0)
        ai, aj, ni, nj = (torch.randn(2, 3, generator=g, dtype=torch.float64) for _ in range(4))
        ref = 0.0
        for b in range(2):
            ref += -0.5 * oracles.cos(ai[b].tolist(), nj[b].tolist()) - 0.5 * oracles.cos(aj[b].tolist(), ni[b].tolist())
        assert clip_pred_loss(ai, aj, ni, nj, ident).item() == pytest.approx(ref / 2, abs=1e-12)

    def test_missing_next_clip(self):
        a = torch.randn(2, 3)
        with pytest.raises(ValueError):
            clip_pred_loss(a, a, None, a, ident)


class TestCompose:
    def test_worked_example(self):
        cfg = PredNextConfig(alpha=0.5)
        out = compose_total(t(0.5), t(-1.0), t(-1.0), cfg)
        assert out.total.item() == pytest.approx(-0.25)
        assert out.l_pred.item() == pytest.approx(-1.0)

    def test_alpha_zero_returns_ssl_exactly(self):
        l_ssl = t(0.123456789)
        out = compose_total(l_ssl, t(-0.7), t(-0.2), PredNextConfig(alpha=0.0))
        assert out.total is l_ssl

    def test_single_component(self):
        cfg = PredNextConfig(alpha=0.5, include_clip=False)
        out = compose_total(t(1.0), t(-0.4), None, cfg)
        assert out.l_pred.item() == pytest.approx(-0.4)
        assert out.l_clip.item() == 0.0

    def test_standalone_ignores_ssl(self):
        cfg = PredNextConfig(alpha=0.3, standalone=True, cross_view=False)
        out = compose_total(None, t(-0.4), t(-0.6), cfg)
        assert out.total.item() == pytest.approx(-0.5)
        assert cfg.view_mode == "same_only"

    def test_algorithm_composition(self):
        cfg = PredNextConfig(alpha=1.0, composition="algorithm")
        # step mean -0.5 over T-m = 3 steps of both directions; clip -1
        out = compose_total(t(0.0), t(-0.5), t(-1.0), cfg, n_steps=3)
        # 0.25 * (sum_t Q_ij + sum_t Q_ji + M_i + M_j) = 0.25 * (3*(-0.5)*2 + 2*(-1))
        assert out.total.item() == pytest.approx(0.25 * (-3.0 - 2.0))

    def test_algorithm_needs_n_steps(self):
        with pytest.raises(ValueError):
            compose_total(t(0.0), t(-0.5), None, PredNextConfig(composition="algorithm"))

    def test_forced_term_added(self):
        cfg = PredNextConfig(enabled=False)
        out = compose_total(t(1.0), None, None, cfg, l_forced=t(0.5), beta=0.8)
        assert out.total.item() == pytest.approx(1.4)
        assert set(out.as_dict()) == set(LossBreakdown.KEYS)

    @pytest.mark.parametrize(
        "kw",
        [
            {"alpha": 1.5},
            {"alpha": -0.1},
            {"step_interval": 0},
            {"hidden_dim": 0},
            {"include_step": False, "include_clip": False},
            {"composition": "sum"},
        ],
    )
    def test_config_errors(self, kw):
        with pytest.raises(ConfigError):
            PredNextConfig(**kw)


class TestForced:
    def test_identical_timesteps(self):
        f = torch.ones(2, 4, 3)
        assert pairwise_cosine_distance(f).item() == pytest.approx(0.0, abs=1e-7)

    def test_two_orthogonal_steps(self):
        f = t([[[1.0, 0.0], [0.0, 1.0]]])
        assert forced_consistency_loss(f, 1.0).item() == pytest.approx(1.0)
        assert forced_consistency_loss(f, 0.8).item() == pytest.approx(0.8)

    def test_needs_two_steps(self):
        with pytest.raises(ValueError):
            pairwise_cosine_distance(torch.ones(2, 1, 3))

    def test_matches_oracle(self):
        f = torch.randn(3, 4, 5, dtype=torch.float64)
        ref = oracles.consistency_error(f.tolist())
        assert pairwise_cosine_distance(f).item() == pytest.approx(ref, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(2, 6), st.integers(0, 10**6))
def test_losses_bounded(b, t_len, seed):
    g = torch.Generator().manual_seed(seed)
    z_i, z_j = torch.randn(b, t_len, 3, generator=g), torch.randn(b, t_len, 3, generator=g)
    l_step = step_pred_loss(z_i, z_j, ident, 1).item()
    l_clip = clip_pred_loss(z_i[:, 0], z_j[:, 0], z_i[:, 1], z_j[:, 1], ident).item()
    assert -1 - 1e-6 <= l_step <= 1 + 1e-6
    assert -1 - 1e-6 <= l_clip <= 1 + 1e-6


def test_heads_shapes():
    heads = PredictionHeads(6, PredNextConfig(hidden_dim=4))
    assert heads.step(torch.randn(2, 3, 6)).shape == (2, 3, 6)
    assert heads.clip(torch.randn(2, 6)).shape == (2, 6)
