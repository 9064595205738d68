"""
Counter-based random streams.

Every trajectory (or phase-estimation run) owns a Philox stream keyed by
(global seed, stream label, index). Draw k of step n is always the same
position in that stream, so results do not depend on scheduling.
"""
import zlib
import numpy as np

DRAWS_PER_STEP = 3


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, index: int, label: str = "trajectory") -> np.random.Generator:
    """Return the generator for one (seed, label, index) stream."""
    if seed < 0 or index < 0:
        raise ValueError(f"seed and index must be non-negative, got {seed}, {index}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(_label_key(label), int(index)))
    return np.random.Generator(np.random.Philox(sequence))


def step_uniforms(seed: int, index: int, n_steps: int, label: str = "trajectory") -> np.ndarray:
    """Uniform draws laid out as (step, draw) for one trajectory."""
    return stream(seed, index, label).random((n_steps, DRAWS_PER_STEP))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for sweep points and repetitions."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
