"""Direction-learning agent and the joint training step.

The policy predicts, per fiducial point and axis, the probability that the
moving sign is +1. One training step samples a state S, flips one component
to get S', augments the input under both, asks the recognizer to read both
results, and nudges the policy toward whichever state produced the harder
image (ties count as S' being at least as hard). Learning is over directions
only; distances stay random.

Both augmentation arms replay the same named distance sub-stream, so S and S'
move every fiducial by identical amounts and the difficulty comparison
isolates the one flipped direction. With independent draws the comparison
mostly reflects which arm happened to draw larger distances, and the loop
drifts toward whatever corner of state space renders easiest. The replay is
therefore load-bearing, not an optimization.
"""

from __future__ import annotations

import urllib.parse
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .augment import AugmentConfig, MovingState, augment, perturb_state
from .errors import LengthMismatch
from .metrics import edit_distance
from .rng import RandomSource

# Sub-stream labels used inside train_step. DIST_LABEL is public API: callers
# who want common-random-number baselines replay rng.substream(DIST_LABEL).
STATE_LABEL = "state"
FLIP_LABEL = "flip"
DIST_LABEL = "dist"

# Test-only channel by which the harness reports the realized state to
# recognizers that ask for it (the difficulty probe below).
REGISTER_METHOD = "register_realized_state"

# Keeps reference-policy probabilities strictly inside (0, 1) in float64.
LOGIT_CLAMP = 30.0


@runtime_checkable
class AgentPolicy(Protocol):
    def predict(self, img) -> np.ndarray:
        """Per-component probability that the sign is +1, shape (2(N+1), 2),
        every entry strictly inside (0, 1)."""
        ...

    def update(self, img, target: MovingState, lr: float) -> float:
        """One gradient step toward target; returns the NLL of target under
        the pre-update prediction."""
        ...


@runtime_checkable
class Recognizer(Protocol):
    def recognize(self, img) -> str:
        ...

    def observe_training_example(self, img, gt: str) -> None:
        ...


class ReferencePolicy:
    """Context-free policy: one logit per (point, axis), image ignored.

    P(sign = +1) = logistic(logit). The NLL gradient w.r.t. a logit is
    (logistic(logit) - 1[target = +1]); updates are plain SGD steps.
    """

    def __init__(self, n_patches: int, initial_logit: float = 0.0):
        if n_patches < 1:
            raise ValueError(f"n_patches must be >= 1, got {n_patches}")
        self.n_patches = int(n_patches)
        self.logits = np.full(
            (2 * (self.n_patches + 1), 2), float(initial_logit), dtype=np.float64
        )

    def predict(self, img=None) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.logits))

    def gradient(self, img, target: MovingState) -> np.ndarray:
        self._check(target)
        y = (target.signs == 1).astype(np.float64)
        return self.predict(img) - y

    def update(self, img, target: MovingState, lr: float) -> float:
        self._check(target)
        y = (target.signs == 1).astype(np.float64)
        z = np.where(y == 1.0, 1.0, -1.0)
        # log(1 + exp(-z*l)) summed; stable at large |l|
        loss = float(np.logaddexp(0.0, -z * self.logits).sum())
        self.logits -= lr * (self.predict(img) - y)
        np.clip(self.logits, -LOGIT_CLAMP, LOGIT_CLAMP, out=self.logits)
        return loss

    def _check(self, target: MovingState) -> None:
        if target.signs.shape != self.logits.shape:
            raise LengthMismatch(
                f"target shape {target.signs.shape} vs policy {self.logits.shape}"
            )


def sample_state(policy: AgentPolicy, img, rng: RandomSource) -> MovingState:
    """Draw each component independently: +1 with the predicted probability."""
    p = np.asarray(policy.predict(img), dtype=np.float64)
    draws = rng.random(p.shape)
    return MovingState(np.where(draws < p, 1, -1).astype(np.int8))


def nll(policy: AgentPolicy, img, target: MovingState) -> float:
    """Negative log-likelihood of the target state under the policy,
    summed over all (point, axis) components."""
    p = np.asarray(policy.predict(img), dtype=np.float64)
    if p.shape != target.signs.shape:
        raise LengthMismatch(f"target shape {target.signs.shape} vs policy {p.shape}")
    pt = np.where(target.signs == 1, p, 1.0 - p)
    return float(-np.log(pt).sum())


def negate(state: MovingState) -> MovingState:
    """Componentwise sign negation of the whole state."""
    return state.negated()


@dataclass(frozen=True)
class StepReport:
    """Everything one training step decided, for logging and analysis."""

    s: MovingState
    s_prime: MovingState
    flipped_index: int
    ed_s: int
    ed_s_prime: int
    learning_target: MovingState
    agent_loss: float
    recognizer_prediction_s: str
    recognizer_prediction_s_prime: str

    def to_log_line(self, step: int) -> str:
        parts = [
            f"step={step}",
            f"ed_s={self.ed_s}",
            f"ed_s_prime={self.ed_s_prime}",
            f"flipped_index={self.flipped_index}",
            f"agent_loss={self.agent_loss!r}",
            f"s={encode_state(self.s)}",
            f"s_prime={encode_state(self.s_prime)}",
            f"learning_target={encode_state(self.learning_target)}",
            f"recognizer_prediction_s={_quote(self.recognizer_prediction_s)}",
            f"recognizer_prediction_s_prime={_quote(self.recognizer_prediction_s_prime)}",
        ]
        return " ".join(parts)


def _quote(text: str) -> str:
    return urllib.parse.quote(text, safe="+-~")


def _unquote(text: str) -> str:
    return urllib.parse.unquote(text)


def encode_state(state: MovingState) -> str:
    return "".join("+" if v > 0 else "-" for v in state.flat())


def decode_state(text: str) -> MovingState:
    if set(text) - {"+", "-"} or len(text) < 8 or len(text) % 4:
        raise ValueError(f"not an encoded state: {text!r}")
    flat = np.asarray([1 if c == "+" else -1 for c in text], dtype=np.int8)
    return MovingState(flat.reshape(-1, 2))


def parse_log_line(line: str) -> dict:
    """Inverse of StepReport.to_log_line plus the step number."""
    out = {}
    for part in line.strip().split(" "):
        key, _, raw = part.partition("=")
        if key in ("step", "ed_s", "ed_s_prime", "flipped_index"):
            out[key] = int(raw)
        elif key == "agent_loss":
            out[key] = float(raw)
        elif key in ("s", "s_prime", "learning_target"):
            out[key] = decode_state(raw)
        else:
            out[key] = _unquote(raw)
    return out


def train_step(
    policy: AgentPolicy,
    recognizer: Recognizer,
    img,
    gt: str,
    cfg: AugmentConfig,
    lr: float,
    rng: RandomSource,
    negate_mode: str = "full",
) -> StepReport:
    """One joint iteration.

    Order: sample S; flip one component for S'; augment under both states
    with identical distance draws; recognize both; hand the S-augmented image
    to the recognizer's own update hook; compare edit distances against gt;
    update the policy toward S' if ed_S <= ed_S', else toward the negated
    state. negate_mode picks what "negated" means: "full" negates every
    component, "flipped" restores only the flipped one (yielding S).
    """
    if negate_mode not in ("full", "flipped"):
        raise ValueError(f"negate_mode must be 'full' or 'flipped', got {negate_mode!r}")
    s = sample_state(policy, img, rng.substream(STATE_LABEL))
    s_prime, flip_idx = perturb_state(s, rng.substream(FLIP_LABEL))
    img_s, _ = augment(img, cfg, s, rng.substream(DIST_LABEL))
    img_sp, _ = augment(img, cfg, s_prime, rng.substream(DIST_LABEL))

    register = getattr(recognizer, REGISTER_METHOD, None)
    if register is not None:
        register(s)
    pred_s = recognizer.recognize(img_s)
    if register is not None:
        register(s_prime)
    pred_sp = recognizer.recognize(img_sp)
    recognizer.observe_training_example(img_s, gt)

    ed_s = edit_distance(pred_s, gt)
    ed_sp = edit_distance(pred_sp, gt)
    if ed_s <= ed_sp:
        target = s_prime
    elif negate_mode == "full":
        target = s_prime.negated()
    else:
        target = s_prime.with_flipped(flip_idx)
    loss = policy.update(img, target, lr)
    return StepReport(
        s=s,
        s_prime=s_prime,
        flipped_index=flip_idx,
        ed_s=ed_s,
        ed_s_prime=ed_sp,
        learning_target=target,
        agent_loss=loss,
        recognizer_prediction_s=pred_s,
        recognizer_prediction_s_prime=pred_sp,
    )


class _DifficultyProbe:
    """Test recognizer whose output difficulty is a pure function of the
    realized moving state: edit distance from gt equals the number of
    components agreeing with a hidden state."""

    def __init__(self, hidden: MovingState, gt: str):
        self.hidden = hidden
        self.gt = gt
        self._realized: MovingState | None = None
        for c in "~^`|\x7f":
            if c not in gt:
                self._alien = c
                break
        else:
            raise ValueError("ground truth uses every candidate filler character")

    def register_realized_state(self, state: MovingState) -> None:
        self._realized = state

    def recognize(self, img) -> str:
        if self._realized is None:
            raise RuntimeError("no realized state registered before recognize()")
        k = int((self._realized.signs == self.hidden.signs).sum())
        if k <= len(self.gt):
            return self._alien * k + self.gt[k:]
        return self._alien * k

    def observe_training_example(self, img, gt: str) -> None:
        pass


def difficulty_probe_seam(hidden: MovingState, gt: str = "") -> _DifficultyProbe:
    """Build the state-aware test recognizer.

    The harness reports each realized state through register_realized_state
    before asking for a recognition; the probe then emits a transcript at
    exactly the agreed-upon edit distance from gt (filler characters never
    collide with gt, so substitutions and insertions count fully).
    """
    return _DifficultyProbe(hidden, gt)
