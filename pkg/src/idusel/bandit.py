"""EXP3 scheduling over difficulty clusters with min-max normalized rewards."""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from idusel.errors import DomainError

RENORMALIZE_ABOVE = 1e12
RENORMALIZE_BELOW = 1e-12


def _seq_sum(values):
    # left-to-right accumulation; the compiled rollout kernel uses the same order
    total = 0.0
    for v in values:
        total += v
    return total


@dataclass
class BanditState:
    weights: list
    gamma: float = 0.05
    epsilon: float = 0.0
    reward_min: float | None = None
    reward_max: float | None = None
    t: int = 0
    rng_seed: int = 0
    rng: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def num_arms(self):
        return len(self.weights)

    def generator(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)
        return self.rng


def new_state(num_arms, gamma=0.05, seed=0, epsilon=0.0):
    if num_arms < 1:
        raise DomainError("need at least one arm")
    if not 0 < gamma <= 1:
        raise DomainError(f"gamma must be in (0, 1], got {gamma!r}")
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    return BanditState(weights=[1.0] * num_arms, gamma=gamma, epsilon=epsilon, rng_seed=seed)


def arm_probabilities(state):
    """Mixture of weight-proportional exploitation and uniform exploration."""
    k = state.num_arms
    total = _seq_sum(state.weights)
    if not total > 0:
        raise DomainError("total arm weight must be positive")
    g = state.gamma
    return np.array([(1.0 - g) * (w / total) + g / k for w in state.weights])


def select_arm(state, mode="argmax"):
    """Pick an arm; returns ``(arm, probabilities, uniform draw or None)``."""
    probs = arm_probabilities(state)
    if mode == "argmax":
        # np.argmax returns the first maximum, i.e. the lowest index on ties
        return int(np.argmax(probs)), probs, None
    if mode == "sample":
        u = float(state.generator().random())
        return categorical(probs, u), probs, u
    raise DomainError(f"unknown selection mode {mode!r}")


def categorical(probs, u):
    acc = 0.0
    for j, p in enumerate(probs):
        acc += p
        if u < acc:
            return j
    return len(probs) - 1


def normalize_reward(raw, state):
    """Map a raw reward into [-1, 1] against the run's running extrema.

    Advances ``state.t`` and the extrema. The first reward is only clamped.
    """
    state.t += 1
    if state.t == 1:
        state.reward_min = state.reward_max = raw
        return min(1.0, max(-1.0, raw))
    state.reward_min = min(state.reward_min, raw)
    state.reward_max = max(state.reward_max, raw)
    if state.reward_max == state.reward_min:
        return 0.0
    return 2.0 * (raw - state.reward_min) / (state.reward_max - state.reward_min) - 1.0


def update_weight(state, chosen_arm, normalized_reward, prob_of_chosen):
    """Exponential update of the chosen arm's weight; returns a new state."""
    if not prob_of_chosen > 0:
        raise DomainError(f"prob_of_chosen must be positive, got {prob_of_chosen!r}")
    k = state.num_arms
    weights = list(state.weights)
    total = _seq_sum(weights)
    share = state.epsilon / k * total
    weights[chosen_arm] *= math.exp(state.gamma / k * normalized_reward / prob_of_chosen)
    if state.epsilon > 0:
        weights = [w + share for w in weights]
    top = max(weights)
    if top > RENORMALIZE_ABOVE or top < RENORMALIZE_BELOW:
        total = _seq_sum(weights)
        weights = [w / total for w in weights]
    if not all(math.isfinite(w) and w > 0 for w in weights):
        raise FloatingPointError(f"bandit weights left the positive finite range: {weights}")
    return replace(state, weights=weights)


def info_gain_reward(idu_before, idu_after):
    """Mean drop in smoothed utility over the trained batch."""
    before = np.asarray(idu_before, dtype=np.float64)
    after = np.asarray(idu_after, dtype=np.float64)
    if before.shape != after.shape:
        raise DomainError(f"length mismatch: {before.shape} vs {after.shape}")
    if before.size == 0:
        raise DomainError("info gain needs at least one sample")
    return float(np.mean(before - after))
