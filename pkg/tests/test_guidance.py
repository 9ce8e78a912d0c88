import numpy as np
import pytest

from ttpo.errors import GuidanceDivergedError, InvalidConfigError
from ttpo.fields import Field, fft2, gaussian_lowpass_mask
from ttpo.guidance import (
    GuidanceConfig,
    StagePolicy,
    combined_guidance,
    guided_step,
    initial_noise,
    optimize,
    reward_distance,
    structural_loss,
    ttpo_loss,
)
from ttpo.velocity import TimeSchedule, sample

from conftest import fd_gradient, random_field, rel_err, safe_l1_pair


def cfg_l1(**kw):
    return GuidanceConfig(**{"distance": "l1", **kw})


# -- config and stages ---------------------------------------------------------

def test_config_validation():
    for bad in [dict(alpha=-0.1), dict(beta=0.0), dict(g=-1.0), dict(d0=0.0),
                dict(d0=1.5), dict(t1=0.5, t2=0.5), dict(t1=1.2), dict(steps=0),
                dict(t_min=0.0), dict(distance="l2")]:
        with pytest.raises(InvalidConfigError):
            GuidanceConfig(**bad)


def test_stage_policy_intervals():
    p = StagePolicy(t1=0.7, t2=0.1)
    assert p.active_terms(0.9) == {"structural"}
    assert p.active_terms(0.71) == {"structural"}
    assert p.active_terms(0.7) == {"structural", "preference"}  # T1 in middle stage
    assert p.active_terms(0.5) == {"structural", "preference"}
    assert p.active_terms(0.1001) == {"structural", "preference"}
    assert p.active_terms(0.1) == {"preference"}  # T2 in last stage
    assert p.active_terms(0.0) == {"preference"}


def test_ablation_flags_gate_terms():
    cfg = cfg_l1(use_stages=False)
    assert cfg.active_terms(0.9) == {"structural", "preference"}
    cfg = cfg_l1(use_stages=False, use_preference=False)
    assert cfg.active_terms(0.05) == {"structural"}


# -- reward distance -------------------------------------------------------------

def test_reward_distance_identity(rng):
    a = random_field(rng)
    d, g = reward_distance(a, a.copy(), cfg_l1())
    assert d == 0.0
    assert np.all(g.data == 0.0)


def test_cosine_reward_degenerate_operands(rng):
    from ttpo.errors import UndefinedSimilarityError

    cfg = GuidanceConfig(distance="cosine")
    flat = Field.constant(8, 8, 1.0)  # zero high-frequency content
    with pytest.raises(UndefinedSimilarityError):
        reward_distance(flat, Field.constant(8, 8, 2.0), cfg)
    # one-sided zero: similarity 0 with zero gradient, by convention
    d, g = reward_distance(random_field(rng), flat, cfg)
    assert d == 0.0
    assert np.all(g.data == 0.0)


def test_reward_distance_beta_independent(rng):
    a, b = random_field(rng), random_field(rng)
    d1, g1 = reward_distance(a, b, cfg_l1(beta=1.0))
    d2, g2 = reward_distance(a, b, cfg_l1(beta=2.0))
    assert d1 == d2
    assert np.array_equal(g1.data, g2.data)


@pytest.mark.parametrize("distance", ["l1", "cosine"])
def test_reward_distance_gradient_oracle(rng, distance):
    cfg = GuidanceConfig(distance=distance)
    worst = 0.0
    for _ in range(20):
        if distance == "l1":
            a, b = safe_l1_pair(rng, cfg)
        else:
            a, b = random_field(rng), random_field(rng)
        _, g = reward_distance(a, b, cfg)
        fd = fd_gradient(lambda x: reward_distance(Field(x), b, cfg)[0], a.data)
        worst = max(worst, rel_err(g.data, fd))
    assert worst <= 1e-6


# -- preference loss --------------------------------------------------------------

def test_loss_at_equal_distances_is_ln2(rng):
    a = random_field(rng)
    loss, _ = ttpo_loss(a, a.copy(), a.copy(), cfg_l1())
    assert loss == pytest.approx(np.log(2.0), abs=1e-12)


def test_loss_frozen_logistic_value():
    # beta = 1, d_l - d_w = 2: loss = -ln sigmoid(2) = ln(1 + e^-2)
    want = float(np.log1p(np.exp(-2.0)))
    assert want == pytest.approx(0.126928011042972, abs=1e-12)
    # realize d_l - d_w = 2 with constructed spectra: use full-spectrum mode
    # on 1x1 fields where the l1 distance is |a - b|
    cfg = cfg_l1(use_freq_decomposition=False)
    a = Field(np.array([[0.0]]))
    yw = Field(np.array([[1.0]]))
    yl = Field(np.array([[3.0]]))
    loss, _ = ttpo_loss(a, yw, yl, cfg)
    assert loss == pytest.approx(want, abs=1e-12)


def test_loss_small_beta_limit(rng):
    a, w, l = random_field(rng), random_field(rng), random_field(rng)
    loss, grad = ttpo_loss(a, w, l, cfg_l1(beta=1e-12))
    assert loss == pytest.approx(np.log(2.0), abs=1e-9)
    assert np.max(np.abs(grad.data)) <= 1e-9


def test_loss_positive(rng):
    for _ in range(10):
        a, w, l = random_field(rng), random_field(rng), random_field(rng)
        loss, _ = ttpo_loss(a, w, l, cfg_l1(beta=float(rng.uniform(0.1, 5))))
        assert loss > 0.0


@pytest.mark.parametrize("distance", ["l1", "cosine"])
def test_preference_gradient_oracle(rng, distance):
    cfg = GuidanceConfig(distance=distance, beta=1.3)
    worst = 0.0
    for _ in range(20):
        if distance == "l1":
            a, yw = safe_l1_pair(rng, cfg)
            _, yl = safe_l1_pair(rng, cfg)
        else:
            a, yw, yl = random_field(rng), random_field(rng), random_field(rng)
        _, g = ttpo_loss(a, yw, yl, cfg)
        fd = fd_gradient(lambda x: ttpo_loss(Field(x), yw, yl, cfg)[0], a.data)
        worst = max(worst, rel_err(g.data, fd))
    assert worst <= 1e-6


# -- structural loss ---------------------------------------------------------------

def test_structural_identity(rng):
    a = random_field(rng)
    loss, g = structural_loss(a, a.copy(), cfg_l1())
    assert loss == 0.0
    assert np.all(g.data == 0.0)


def test_structural_full_mask_equals_field_mse():
    # with decomposition off the mask is all ones, so by Parseval the loss
    # is the plain mean squared field difference
    cfg = cfg_l1(use_freq_decomposition=False)
    a = Field.constant(2, 2, 0.4)
    b = Field.constant(2, 2, 0.3)
    loss, _ = structural_loss(a, b, cfg)
    assert loss == pytest.approx(0.01, abs=1e-14)


def test_structural_gradient_oracle(rng):
    cfg = cfg_l1()
    worst = 0.0
    for _ in range(20):
        a, b = random_field(rng), random_field(rng)
        _, g = structural_loss(a, b, cfg)
        fd = fd_gradient(lambda x: structural_loss(Field(x), b, cfg)[0], a.data)
        worst = max(worst, rel_err(g.data, fd))
    assert worst <= 1e-6


# -- combined guidance ----------------------------------------------------------------

def test_combined_stage_examples(rng):
    cfg = cfg_l1()  # t1=0.7, t2=0.1, alpha=0.5
    a, y0, yw, yl = (random_field(rng) for _ in range(4))
    lc, _, terms = combined_guidance(a, y0, yw, yl, 0.9, cfg)
    assert set(terms) == {"structural"}
    assert lc == pytest.approx(structural_loss(a, y0, cfg)[0], rel=1e-12)

    lc, _, terms = combined_guidance(a, y0, yw, yl, 0.5, cfg)
    assert set(terms) == {"structural", "preference"}
    want = cfg.alpha * ttpo_loss(a, yw, yl, cfg)[0] + structural_loss(a, y0, cfg)[0]
    assert lc == pytest.approx(want, rel=1e-12)

    lc, _, terms = combined_guidance(a, y0, yw, yl, 0.05, cfg)
    assert set(terms) == {"preference"}
    assert lc == pytest.approx(cfg.alpha * ttpo_loss(a, yw, yl, cfg)[0], rel=1e-12)


def test_combined_grad_is_weighted_sum(rng):
    cfg = cfg_l1(alpha=0.8)
    a, y0, yw, yl = (random_field(rng) for _ in range(4))
    _, g, _ = combined_guidance(a, y0, yw, yl, 0.5, cfg)
    _, gp = ttpo_loss(a, yw, yl, cfg)
    _, gs = structural_loss(a, y0, cfg)
    assert np.max(np.abs(g.data - (cfg.alpha * gp.data + gs.data))) <= 1e-10


def test_combined_gradient_oracle(rng):
    cfg = cfg_l1(alpha=0.5)
    worst = 0.0
    for _ in range(15):
        a, yw = safe_l1_pair(rng, cfg)
        _, yl = safe_l1_pair(rng, cfg)
        y0 = random_field(rng)
        _, g, _ = combined_guidance(a, y0, yw, yl, 0.5, cfg)
        fd = fd_gradient(
            lambda x: combined_guidance(Field(x), y0, yw, yl, 0.5, cfg)[0], a.data
        )
        worst = max(worst, rel_err(g.data, fd))
    assert worst <= 1e-6


def test_alpha_affine_slope(rng):
    # L_c is affine in alpha with slope equal to the preference loss
    a, y0, yw, yl = (random_field(rng) for _ in range(4))
    lp, _ = ttpo_loss(a, yw, yl, cfg_l1())
    l1, _, _ = combined_guidance(a, y0, yw, yl, 0.5, cfg_l1(alpha=1.0))
    l2, _, _ = combined_guidance(a, y0, yw, yl, 0.5, cfg_l1(alpha=3.0))
    assert (l2 - l1) / 2.0 == pytest.approx(lp, rel=1e-10)
    assert lp >= 0.0


# -- guided step -------------------------------------------------------------------

class FrozenVelocity:
    """Evaluates a fixed velocity regardless of state, mirroring the
    stop-gradient contract for finite-difference checks."""

    def __init__(self, v):
        self.v = v
        self.descriptor = "frozen"
        self.t_min = 1e-3

    def evaluate(self, x, t):
        return Field(self.v.copy())


def test_guided_step_g0_is_plain_euler(rng, testbed):
    from ttpo.velocity import euler_step

    x = random_field(rng, 32, 32)
    cfg = cfg_l1(g=0.0)
    x_next, row = guided_step(x, 0.5, 0.48, testbed.prior, testbed.y0, testbed.yw, testbed.yl, cfg)
    v = testbed.prior.evaluate(x, 0.5)
    assert np.array_equal(x_next.data, euler_step(x, 0.5, 0.48, v).data)
    assert row.grad_norm >= 0.0 and np.isfinite(row.l_ttpo)


def test_stop_gradient_correction_oracle(rng):
    # the applied correction must equal finite differences of L_c composed
    # with the clean prediction, holding the velocity frozen
    cfg = cfg_l1(alpha=0.5, g=1.0)
    t, t_next = 0.5, 0.48
    x, yw = safe_l1_pair(rng, cfg)
    _, yl = safe_l1_pair(rng, cfg)
    y0 = random_field(rng)
    v = rng.standard_normal((8, 8))
    field = FrozenVelocity(v)
    x_next, _ = guided_step(x, t, t_next, field, y0, yw, yl, cfg)
    applied = (x.data + (t - t_next) * v - x_next.data) / cfg.g  # recovered gradient

    def frozen_chain(xdata):
        x0hat = xdata + t * v
        lc, _, _ = combined_guidance(Field(x0hat), y0, yw, yl, t, cfg)
        return lc

    fd = fd_gradient(frozen_chain, x.data)
    assert rel_err(applied, fd) <= 1e-6


def test_guided_step_degenerate_all_equal(rng, testbed):
    # x0hat = y0 = yw = yl puts every loss at a stationary point; the step
    # must reduce to plain Euler even with g > 0
    y = random_field(rng, 32, 32)
    t, t_next = 0.5, 0.48
    v = np.zeros((32, 32))
    field = FrozenVelocity(v)
    x = Field(y.data.copy())  # x0hat = x + t*0 = y
    cfg = cfg_l1(g=100.0)
    x_next, row = guided_step(x, t, t_next, field, y, y.copy(), y.copy(), cfg)
    assert np.array_equal(x_next.data, x.data)
    assert row.grad_norm == 0.0


def test_guided_step_divergence_raises(testbed):
    cfg = cfg_l1(g=1e18)
    x = initial_noise(testbed.y0.shape, 0)
    with pytest.raises(GuidanceDivergedError):
        for t, t_next in zip(TimeSchedule.uniform(50).knots[:-1], TimeSchedule.uniform(50).knots[1:]):
            x, _ = guided_step(x, float(t), float(t_next), testbed.prior,
                               testbed.y0, testbed.yw, testbed.yl, cfg)


# -- full optimization ----------------------------------------------------------------

def test_optimize_deterministic(testbed):
    cfg = cfg_l1(g=50.0, seed=12345, steps=20)
    out1, rec1 = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior, cfg)
    out2, rec2 = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior, cfg)
    assert np.array_equal(out1.data, out2.data)
    assert [r.__dict__ for r in rec1.rows] == [r.__dict__ for r in rec2.rows]


def test_optimize_record_length(testbed):
    cfg = cfg_l1(steps=17, seed=5)
    _, rec = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior, cfg)
    assert len(rec.rows) == 17
    for r in rec.rows:
        for v in (r.t, r.l_ttpo, r.l_r, r.d_win, r.d_lose, r.grad_norm):
            assert np.isfinite(v)


def test_null_guidance_reduction(testbed):
    cfg = cfg_l1(g=0.0, seed=777)
    out, _ = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior, cfg)
    plain = sample(testbed.prior, TimeSchedule.uniform(cfg.steps),
                   initial_noise(testbed.y0.shape, 777), 1.0)
    assert np.array_equal(out.data, plain.data)


def test_optimize_divergence_preserves_partial_record(testbed):
    cfg = cfg_l1(g=1e18, seed=3)
    with pytest.raises(GuidanceDivergedError) as exc:
        optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior, cfg)
    record = exc.value.record
    assert 0 < len(record.rows) < cfg.steps


def test_guided_run_improves_win_distance(testbed):
    # small-sample version of the efficacy check; the acceptance suite runs
    # the full 20-pair protocol
    mask = gaussian_lowpass_mask(32, 32, 0.9)

    def hf_l1(x, y):
        d = (fft2(x).coefficients - fft2(y).coefficients) * mask.highpass
        return float(np.mean(np.abs(d.real) + np.abs(d.imag)))

    hits = 0
    for seed in range(3000, 3005):
        guided, _ = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior,
                             cfg_l1(g=50.0, seed=seed))
        plain, _ = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior,
                            cfg_l1(g=0.0, seed=seed))
        hits += hf_l1(guided, testbed.yw) < hf_l1(plain, testbed.yw)
    assert hits >= 4


def test_loss_curve_sanity(testbed):
    # the structural loss must not drift upward: its mean over the last
    # quarter stays at or below its value when the first stage ends
    cfg = cfg_l1(g=50.0, seed=2024)
    _, rec = optimize(testbed.y0, testbed.yw, testbed.yl, testbed.prior, cfg)
    lr = np.array([r.l_r for r in rec.rows])
    end_stage1 = [r.l_r for r in rec.rows if r.t > cfg.t1][-1]
    assert lr[-len(lr) // 4:].mean() <= end_stage1
