"""Policy, training step, difficulty probe, and log round-trips.

The heavier convergence and margin measurements live in the acceptance
suite; this file covers the mechanical contracts."""

import math

import numpy as np
import pytest

from textmorph import RandomSource
from textmorph.agent import (
    DIST_LABEL,
    FLIP_LABEL,
    LOGIT_CLAMP,
    STATE_LABEL,
    ReferencePolicy,
    StepReport,
    decode_state,
    difficulty_probe_seam,
    encode_state,
    negate,
    nll,
    parse_log_line,
    sample_state,
    train_step,
)
from textmorph.augment import AugmentConfig, MovingState, augment, perturb_state, random_state
from textmorph.errors import LengthMismatch
from textmorph.glyphs import TemplateRecognizer, load_default_task, render_word

IMG = np.full((16, 32), 255, dtype=np.uint8)  # small canvas keeps steps cheap
CFG = AugmentConfig(n_patches=3, radius=5.0)


def _all_plus(n_patches=3):
    return MovingState(np.ones((2 * (n_patches + 1), 2), dtype=np.int8))


class EchoRecognizer:
    """Always reads the ground truth; forces the tie rule every step."""

    def __init__(self, gt):
        self.gt = gt
        self.observed = []

    def recognize(self, img):
        return self.gt

    def observe_training_example(self, img, gt):
        self.observed.append((img, gt))


class ConstantRecognizer:
    def recognize(self, img):
        return "4444"

    def observe_training_example(self, img, gt):
        pass


# ----------------------------------------------------------- ReferencePolicy

def test_policy_shapes_and_range():
    policy = ReferencePolicy(3)
    p = policy.predict(None)
    assert p.shape == (8, 2)
    assert ((p > 0) & (p < 1)).all()
    assert (p == 0.5).all()  # fresh policy is uniform
    with pytest.raises(ValueError):
        ReferencePolicy(0)


def test_policy_gradient_formula():
    policy = ReferencePolicy(1, initial_logit=0.7)
    target = _all_plus(1)
    grad = policy.gradient(None, target)
    sigma = 1.0 / (1.0 + math.exp(-0.7))
    assert np.allclose(grad, sigma - 1.0)
    grad_neg = policy.gradient(None, negate(target))
    assert np.allclose(grad_neg, sigma)


def test_update_decreases_nll():
    policy = ReferencePolicy(3)
    target = random_state(3, RandomSource(1))
    before = nll(policy, None, target)
    loss = policy.update(None, target, lr=0.5)
    assert math.isclose(loss, before)  # update returns the pre-update NLL
    after = nll(policy, None, target)
    assert after < before


def test_gradient_negation_symmetry():
    # at the uniform starting point the two directions are exact mirrors
    policy = ReferencePolicy(2)
    target = random_state(2, RandomSource(2))
    g_to = policy.gradient(None, target)
    g_away = policy.gradient(None, negate(target))
    assert np.array_equal(g_away, -g_to)
    # at any other point they stay componentwise opposed in sign and differ
    # by exactly the target sign: (sigma - (1-y)) - (sigma - y) = 2y - 1
    policy.logits += np.linspace(-2, 2, policy.logits.size).reshape(policy.logits.shape)
    g_to = policy.gradient(None, target)
    g_away = policy.gradient(None, negate(target))
    assert (np.sign(g_to) == -np.sign(g_away)).all()
    assert np.allclose(g_away - g_to, target.signs.astype(float))


def test_logits_stay_clamped():
    policy = ReferencePolicy(1)
    target = _all_plus(1)
    for _ in range(1000):
        policy.update(None, target, lr=5.0)
    assert (policy.logits <= LOGIT_CLAMP).all()
    p = policy.predict(None)
    assert (p < 1.0).all() and (p > 0.0).all()


def test_policy_shape_mismatch():
    policy = ReferencePolicy(3)
    with pytest.raises(LengthMismatch):
        policy.update(None, _all_plus(2), 0.1)
    with pytest.raises(LengthMismatch):
        nll(policy, None, _all_plus(2))


# -------------------------------------------------------------- sample_state

def test_sample_state_saturated():
    policy = ReferencePolicy(3, initial_logit=20.0)
    state = sample_state(policy, None, RandomSource(0))
    assert (state.signs == 1).all()
    policy_neg = ReferencePolicy(3, initial_logit=-20.0)
    state_neg = sample_state(policy_neg, None, RandomSource(0))
    assert (state_neg.signs == -1).all()


def test_sample_state_uniform_mean():
    policy = ReferencePolicy(3)
    root = RandomSource(7)
    total = 0.0
    n = 6250  # 1e5 components at 16 per draw
    for i in range(n):
        total += float(sample_state(policy, None, root.substream(i)).signs.mean())
    assert abs(total / n) < 0.02


def test_sample_state_frozen():
    state = sample_state(ReferencePolicy(3), None, RandomSource(99))
    assert state.flat().tolist() == [
        -1, -1, -1, -1, -1, -1, 1, -1, 1, -1, -1, 1, 1, 1, 1, 1,
    ]


# ----------------------------------------------------------------------- nll

def test_nll_perfect_prediction():
    policy = ReferencePolicy(3, initial_logit=LOGIT_CLAMP)
    assert nll(policy, None, _all_plus(3)) < 1e-9


def test_nll_uniform_is_16_ln2():
    policy = ReferencePolicy(3)
    target = random_state(3, RandomSource(3))
    assert nll(policy, None, target) == 16 * math.log(2)
    assert nll(policy, None, negate(target)) == nll(policy, None, target)


# -------------------------------------------------------------------- negate

def test_negate_examples():
    state = random_state(3, RandomSource(4))
    assert negate(negate(state)) == state
    assert (negate(_all_plus()).signs == -1).all()
    assert (negate(state).flat() != state.flat()).sum() == state.n_components


# ----------------------------------------------------------- encode / decode

def test_state_encoding_round_trip():
    state = random_state(3, RandomSource(5))
    text = encode_state(state)
    assert set(text) <= {"+", "-"} and len(text) == 16
    assert decode_state(text) == state
    with pytest.raises(ValueError):
        decode_state("+-x+")
    with pytest.raises(ValueError):
        decode_state("+-+")


def test_log_line_round_trip():
    state = random_state(3, RandomSource(6))
    s_prime = state.with_flipped(4)
    report = StepReport(
        s=state,
        s_prime=s_prime,
        flipped_index=4,
        ed_s=3,
        ed_s_prime=5,
        learning_target=s_prime,
        agent_loss=16 * math.log(2),
        recognizer_prediction_s="w0rd =x",
        recognizer_prediction_s_prime="über~2",
    )
    line = report.to_log_line(41)
    parsed = parse_log_line(line)
    assert parsed["step"] == 41
    assert parsed["ed_s"] == 3 and parsed["ed_s_prime"] == 5
    assert parsed["flipped_index"] == 4
    assert parsed["s"] == state
    assert parsed["s_prime"] == s_prime
    assert parsed["learning_target"] == s_prime
    assert parsed["agent_loss"] == report.agent_loss
    assert parsed["recognizer_prediction_s"] == "w0rd =x"
    assert parsed["recognizer_prediction_s_prime"] == "über~2"
    # one record per line: nothing in the encoding can inject a newline
    assert "\n" not in line


# ---------------------------------------------------------------- train_step

def test_train_step_tie_selects_s_prime():
    policy = ReferencePolicy(3)
    rec = EchoRecognizer("blank")
    report = train_step(policy, rec, IMG, "blank", CFG, 0.1, RandomSource(10))
    assert report.ed_s == report.ed_s_prime == 0
    assert report.learning_target == report.s_prime
    assert len(rec.observed) == 1
    assert rec.observed[0][1] == "blank"


def test_train_step_replays_documented_streams():
    # reconstructing the step from its published sub-stream labels must
    # reproduce the states and both augmented arms exactly
    root = RandomSource(11)
    policy = ReferencePolicy(3)
    probe_policy = ReferencePolicy(3)  # same logits, consumed in parallel
    rec = TemplateRecognizer(load_default_task(), 4)
    word = "1234"
    img = render_word(load_default_task(), word, 64, 24)
    report = train_step(policy, rec, img, word, CFG, 0.1, root)

    s = sample_state(probe_policy, img, root.substream(STATE_LABEL))
    s_prime, idx = perturb_state(s, root.substream(FLIP_LABEL))
    assert report.s == s
    assert report.s_prime == s_prime
    assert report.flipped_index == idx
    img_s, _ = augment(img, CFG, s, root.substream(DIST_LABEL))
    img_sp, _ = augment(img, CFG, s_prime, root.substream(DIST_LABEL))
    assert rec.recognize(img_s) == report.recognizer_prediction_s
    assert rec.recognize(img_sp) == report.recognizer_prediction_s_prime


def test_train_step_report_invariant_fuzz():
    # 500 steps; the chosen target always matches the edit-distance rule
    task = load_default_task()
    rec = TemplateRecognizer(task, 4)
    policy = ReferencePolicy(3)
    root = RandomSource(12)
    word = "5081"
    img = render_word(task, word, 64, 24)
    flips = 0
    for t in range(500):
        report = train_step(policy, rec, img, word, CFG, 0.05, root.substream(t))
        if report.ed_s <= report.ed_s_prime:
            assert report.learning_target == report.s_prime
        else:
            flips += 1
            assert report.learning_target == negate(report.s_prime)
        assert report.s_prime == report.s.with_flipped(report.flipped_index)
        assert report.agent_loss >= 0.0
    assert flips > 0  # the negation branch actually ran


def test_train_step_flipped_negate_mode():
    task = load_default_task()
    rec = TemplateRecognizer(task, 4)
    policy = ReferencePolicy(3)
    root = RandomSource(13)
    word = "9339"
    img = render_word(task, word, 64, 24)
    saw_negation = False
    for t in range(200):
        report = train_step(
            policy, rec, img, word, CFG, 0.05, root.substream(t), negate_mode="flipped"
        )
        if report.ed_s > report.ed_s_prime:
            saw_negation = True
            assert report.learning_target == report.s  # only the flip undone
    assert saw_negation
    with pytest.raises(ValueError):
        train_step(policy, rec, img, word, CFG, 0.05, root, negate_mode="both")


def test_train_step_unbiased_random_walk_under_indifference():
    # a difficulty-indifferent recognizer gives the policy nothing to learn;
    # logits must stay within random-walk bounds instead of drifting
    T, lr = 10_000, 0.1
    policy = ReferencePolicy(3)
    root = RandomSource(2024)
    rec = ConstantRecognizer()
    for t in range(T):
        train_step(policy, rec, IMG, "different", CFG, lr, root.substream("t", t))
    sigma = 0.5 * lr * math.sqrt(T)  # per-component random-walk scale
    assert np.abs(policy.logits).max() <= 3 * sigma
    assert abs(float(policy.logits.mean())) <= 3 * sigma / 4  # mean of 16 walks


# ------------------------------------------------------------------- probe

def test_probe_full_agreement():
    hidden = _all_plus(3)
    probe = difficulty_probe_seam(hidden)
    probe.register_realized_state(hidden)
    pred = probe.recognize(IMG)
    from textmorph.metrics import edit_distance

    assert edit_distance(pred, "") == 16


def test_probe_zero_and_one_agreement():
    from textmorph.metrics import edit_distance

    hidden = _all_plus(3)
    probe = difficulty_probe_seam(hidden)
    probe.register_realized_state(negate(hidden))
    assert edit_distance(probe.recognize(IMG), "") == 0
    probe.register_realized_state(negate(hidden).with_flipped(7))
    assert edit_distance(probe.recognize(IMG), "") == 1


def test_probe_with_nonempty_gt():
    from textmorph.metrics import edit_distance

    hidden = _all_plus(3)
    gt = "abcd"
    probe = difficulty_probe_seam(hidden, gt)
    probe.register_realized_state(negate(hidden).with_flipped(0))
    pred = probe.recognize(IMG)
    assert pred == probe._alien + "bcd"
    assert edit_distance(pred, gt) == 1
    probe.register_realized_state(hidden)
    assert edit_distance(probe.recognize(IMG), gt) == 16


def test_probe_guards():
    probe = difficulty_probe_seam(_all_plus(3))
    with pytest.raises(RuntimeError):
        probe.recognize(IMG)
    with pytest.raises(ValueError):
        difficulty_probe_seam(_all_plus(3), gt="~^`|\x7f")


def test_probe_drives_training_toward_hidden():
    # short smoke of the full loop; the acceptance suite runs it to the 0.9
    # sign-accuracy criterion on five seeds
    root = RandomSource(14)
    hidden = random_state(3, root.substream("hidden"))
    policy = ReferencePolicy(3)
    probe = difficulty_probe_seam(hidden)
    cfg = AugmentConfig(n_patches=3, radius=10.0)
    best = 0.0
    for t in range(300):
        train_step(policy, probe, IMG, "", cfg, 0.1, root.substream("t", t))
        acc = float((np.sign(policy.logits) == hidden.signs).mean())
        best = max(best, acc)
    assert best > 0.9
