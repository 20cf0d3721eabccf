"""Per-item seed derivation for reproducible batch runs."""

import numpy as np


def derive_seed(global_seed: int, index: int) -> int:
    """Stable 64-bit seed for item ``index`` of a run seeded with ``global_seed``.

    Depends only on the two integers, so serial and parallel runs agree.
    """
    words = np.random.SeedSequence([int(global_seed) & 0xFFFFFFFFFFFFFFFF, int(index)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def item_rng(global_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(global_seed, index))
