"""Per-replica random streams

Every replica owns counter-based Philox generators keyed by
(master_seed, replica_id, stream), so a replica's draws never depend on
which worker ran it or how replicas were chunked.
"""
import numpy as np

# stream ids within a replica
DYNAMICS_STREAM = 0
INITIAL_STREAM = 1

_OPEN_UNIT_BITS = 53


def replica_rng(master_seed: int, replica_id: int, stream: int = DYNAMICS_STREAM) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replica_id), int(stream)))
    return np.random.Generator(np.random.Philox(seq))


def replica_rngs(master_seed: int, replica_ids, stream: int = DYNAMICS_STREAM) -> list[np.random.Generator]:
    return [replica_rng(master_seed, r, stream) for r in replica_ids]


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)"""
    k = rng.integers(0, 2**_OPEN_UNIT_BITS, size=size, dtype=np.int64)
    return (k + 0.5) / 2.0**_OPEN_UNIT_BITS
