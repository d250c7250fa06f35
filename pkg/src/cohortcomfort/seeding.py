import zlib

import numpy as np


def derive_seed(*keys) -> int:
    """Deterministic 32-bit seed from ints and strings, e.g. (base, "pcm", occupant)."""
    ints = []
    for k in keys:
        if isinstance(k, (int, np.integer)):
            ints.append(int(k) % 2**32)
        else:
            ints.append(zlib.crc32(str(k).encode("utf-8")))
    return int(np.random.SeedSequence(ints).generate_state(1, dtype=np.uint32)[0])
