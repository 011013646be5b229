"""Deterministic seed derivation.

Every random draw in the package is keyed by an integer seed plus a tuple of
integer labels. The labels are mixed through numpy's ``SeedSequence`` so that
sub-streams (operator, support, amplitudes, instance index, ...) are
statistically independent yet fully reproducible.
"""

import numpy as np

# role labels; the numeric values are part of the reproducibility contract
ROLE_OPERATOR = 0x6F70
ROLE_COEFFICIENTS = 0x636F
ROLE_SUPPORT = 0x7375
ROLE_AMPLITUDES = 0x616D
ROLE_INSTANCE = 0x696E
ROLE_SHARED_OPERATOR = 0x7368

_MASK64 = (1 << 64) - 1


def derive_seed(seed, *labels):
    """Mix ``seed`` with integer ``labels`` into a new 64-bit seed."""
    entropy = [int(seed) & _MASK64] + [int(lab) & _MASK64 for lab in labels]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(seed, *labels):
    """Return a ``numpy.random.Generator`` for ``(seed, *labels)``."""
    entropy = [int(seed) & _MASK64] + [int(lab) & _MASK64 for lab in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))
